"""Monte Carlo simulation of equilibrium trading paths.

Paths are generated in fixed-size blocks. Block ``b`` draws from a Philox
stream keyed by ``(seed, b)``, so every path's draws depend only on the seed
and the path index, never on how blocks are scheduled across workers.
Reductions always run over per-path statistics in path order.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import EquilibriumSolution, MarketParams

__all__ = [
    "SimConfig",
    "PathRecord",
    "PathBatch",
    "McEstimate",
    "path_rng",
    "simulate_path",
    "simulate_paths",
    "estimate_profits",
    "estimate_price_moments",
    "estimate_posterior_variance",
    "write_paths_csv",
]

BLOCK_SIZE = 8192


@dataclass(frozen=True)
class SimConfig:
    n_paths: int = 100_000
    seed: int = 42
    antithetic: bool = False
    n_jobs: int = 1

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.antithetic and self.n_paths % 2:
            raise ValueError("antithetic sampling needs an even number of paths")
        if self.n_jobs < 1:
            raise ValueError("n_jobs must be >= 1")

    def to_dict(self) -> dict:
        return {"n_paths": self.n_paths, "seed": self.seed, "antithetic": self.antithetic}


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_err: float
    n_paths: int

    def z_score(self, target: float) -> float:
        if not self.std_err > 0:
            return math.nan
        return (self.mean - target) / self.std_err

    def within(self, target: float, n_se: float = 3.0, atol: float = 0.0) -> bool:
        return abs(self.mean - target) <= max(n_se * self.std_err, atol)

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std_err": self.std_err, "n_paths": self.n_paths}


@dataclass(frozen=True)
class PathRecord:
    """A single trajectory. Per-round arrays have length N, ``vbar`` N + 1."""

    v: float
    dx: np.ndarray
    du: np.ndarray
    dz: np.ndarray
    dy_per_maker: np.ndarray
    prices: np.ndarray
    vbar: np.ndarray

    def informed_profit(self) -> float:
        return float(np.sum((self.v - self.prices) * self.dx))

    def makers_profit(self) -> float:
        return float(np.sum((self.prices - self.v) * (self.dx + self.du)))


@dataclass(frozen=True)
class PathBatch:
    """Many trajectories; arrays are shaped (n_paths, N) or (n_paths, N + 1)."""

    v: np.ndarray
    dx: np.ndarray
    du: np.ndarray
    dz: np.ndarray
    dy_per_maker: np.ndarray
    prices: np.ndarray
    vbar: np.ndarray

    def __len__(self):
        return self.v.shape[0]

    def record(self, i: int) -> PathRecord:
        return PathRecord(
            v=float(self.v[i]),
            dx=self.dx[i],
            du=self.du[i],
            dz=self.dz[i],
            dy_per_maker=self.dy_per_maker[i],
            prices=self.prices[i],
            vbar=self.vbar[i],
        )

    def informed_profit(self) -> np.ndarray:
        return np.sum((self.v[:, None] - self.prices) * self.dx, axis=1)

    def makers_profit(self) -> np.ndarray:
        return np.sum((self.prices - self.v[:, None]) * (self.dx + self.du), axis=1)

    def price_changes(self) -> np.ndarray:
        """Price changes with the first one measured from the prior mean 0."""
        return np.diff(self.prices, axis=1, prepend=0.0)


def path_rng(seed: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(block,))
    return np.random.Generator(np.random.Philox(ss))


def _propagate(params: MarketParams, eq: EquilibriumSolution, v, du, dz) -> PathBatch:
    P, N = du.shape
    dt = params.dt
    dx = np.empty((P, N))
    prices = np.empty((P, N))
    vbar = np.zeros((P, N + 1))
    for n in range(N):
        prev = vbar[:, n]
        dx[:, n] = eq.beta[n] * (v - prev) * dt + dz[:, n]
        # clearing: M gamma (vbar - p) = dx + du
        prices[:, n] = prev + eq.lam * (dx[:, n] + du[:, n])
        vbar[:, n + 1] = prev + eq.psi * dx[:, n]
    dy = eq.gamma * (vbar[:, :-1] - prices)
    return PathBatch(v=v, dx=dx, du=du, dz=dz, dy_per_maker=dy, prices=prices, vbar=vbar)


def _draw(params: MarketParams, eq: EquilibriumSolution, rng: np.random.Generator, n: int):
    N, dt = params.n_rounds, params.dt
    v = rng.normal(0.0, params.sigma_v, size=n)
    du = rng.normal(0.0, params.sigma_u * math.sqrt(dt), size=(n, N))
    dz = rng.standard_normal((n, N)) * np.sqrt(eq.sigma_z2 * dt)
    return v, du, dz


def simulate_path(
    params: MarketParams,
    eq: EquilibriumSolution,
    rng: np.random.Generator | None = None,
    *,
    v: float | None = None,
    du=None,
    dz=None,
) -> PathRecord:
    """Simulate one path; any of ``v``, ``du``, ``dz`` may be fixed by the caller."""
    N = params.n_rounds
    if rng is None and (v is None or du is None or dz is None):
        raise ValueError("rng is required unless every draw is supplied")
    if rng is not None:
        v0, du0, dz0 = _draw(params, eq, rng, 1)
    v = np.array([v], dtype=float) if v is not None else v0
    du = np.asarray(du, dtype=float).reshape(1, N) if du is not None else du0
    dz = np.asarray(dz, dtype=float).reshape(1, N) if dz is not None else dz0
    return _propagate(params, eq, v, du, dz).record(0)


def _block_sizes(cfg: SimConfig) -> list[int]:
    base = cfg.n_paths // 2 if cfg.antithetic else cfg.n_paths
    full, rest = divmod(base, BLOCK_SIZE)
    return [BLOCK_SIZE] * full + ([rest] if rest else [])


def _simulate_block(params, eq, cfg, block, size):
    v, du, dz = _draw(params, eq, path_rng(cfg.seed, block), size)
    if cfg.antithetic:
        # pair i sits at rows i and size + i
        v = np.concatenate([v, -v])
        du = np.concatenate([du, -du])
        dz = np.concatenate([dz, -dz])
    return _propagate(params, eq, v, du, dz)


def _map_blocks(params, eq, cfg, fn):
    """Apply ``fn`` to every block's PathBatch; results in block order."""
    jobs = list(enumerate(_block_sizes(cfg)))

    def work(job):
        block, size = job
        return fn(_simulate_block(params, eq, cfg, block, size))

    if cfg.n_jobs == 1 or len(jobs) == 1:
        return [work(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=cfg.n_jobs) as pool:
        return list(pool.map(work, jobs))


def simulate_paths(params: MarketParams, eq: EquilibriumSolution, cfg: SimConfig) -> PathBatch:
    """All ``cfg.n_paths`` trajectories concatenated in path order."""
    parts = _map_blocks(params, eq, cfg, lambda b: b)
    fields = ("v", "dx", "du", "dz", "dy_per_maker", "prices", "vbar")
    return PathBatch(**{f: np.concatenate([getattr(p, f) for p in parts]) for f in fields})


def _pair_average(x: np.ndarray, antithetic: bool) -> np.ndarray:
    if not antithetic:
        return x
    half = x.shape[0] // 2
    return 0.5 * (x[:half] + x[half:])


def _estimate(samples: np.ndarray, n_paths: int) -> McEstimate:
    mean = float(np.mean(samples))
    if samples.shape[0] < 2:
        return McEstimate(mean, math.nan, n_paths)
    se = float(np.std(samples, ddof=1) / math.sqrt(samples.shape[0]))
    return McEstimate(mean, se, n_paths)


def estimate_profits(params, eq, cfg: SimConfig) -> tuple[McEstimate, McEstimate, McEstimate]:
    """Horizon-total profits ``(informed, makers in aggregate, noise)``.

    Noise profit is computed per path as minus the other two, so the three
    means add to zero.
    """

    def stats(batch):
        pi_i = batch.informed_profit()
        pi_m = batch.makers_profit()
        return np.stack([pi_i, pi_m, -pi_i - pi_m], axis=1)

    parts = _map_blocks(params, eq, cfg, stats)
    samples = np.concatenate([_pair_average(p, cfg.antithetic) for p in parts])
    return tuple(_estimate(samples[:, j], cfg.n_paths) for j in range(3))


def estimate_price_moments(params, eq, cfg: SimConfig) -> tuple[McEstimate, McEstimate, McEstimate]:
    """Pooled ``(Var(dp), Cov(dp_n, dp_{n+1}), Corr)`` over interior rounds.

    Variances pool the changes of rounds 2..N and covariances the pairs
    (n, n+1) for n = 2..N-1; the first change is excluded because it has
    no preceding belief revision. The correlation is a ratio estimator with
    a delta-method standard error.
    """
    N = params.n_rounds
    if N < 3:
        raise ValueError("pooled interior price moments need n_rounds >= 3")

    def stats(batch):
        dp = batch.price_changes()[:, 1:]
        sq = np.mean(dp**2, axis=1)
        cross = np.mean(dp[:, :-1] * dp[:, 1:], axis=1)
        return np.stack([sq, cross], axis=1)

    parts = _map_blocks(params, eq, cfg, stats)
    samples = np.concatenate([_pair_average(p, cfg.antithetic) for p in parts])
    var_dp = _estimate(samples[:, 0], cfg.n_paths)
    cov_dp = _estimate(samples[:, 1], cfg.n_paths)
    ratio = cov_dp.mean / var_dp.mean
    influence = (samples[:, 1] - ratio * samples[:, 0]) / var_dp.mean
    se = float(np.std(influence, ddof=1) / math.sqrt(samples.shape[0])) if samples.shape[0] > 1 else math.nan
    return var_dp, cov_dp, McEstimate(ratio, se, cfg.n_paths)


def estimate_posterior_variance(params, eq, cfg: SimConfig) -> list[McEstimate]:
    """Estimates of ``E[(v - vbar_n)^2]`` for n = 0..N."""

    def stats(batch):
        return (batch.v[:, None] - batch.vbar) ** 2

    parts = _map_blocks(params, eq, cfg, stats)
    samples = np.concatenate([_pair_average(p, cfg.antithetic) for p in parts])
    return [_estimate(samples[:, n], cfg.n_paths) for n in range(params.n_rounds + 1)]


PATH_CSV_COLUMNS = ("path", "round", "dx", "du", "dz", "dy", "price", "vbar")


def write_paths_csv(batch: PathBatch, fh, limit: int | None = None) -> int:
    """Write one row per (path, round); ``vbar`` is the post-round belief."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(PATH_CSV_COLUMNS)
    n_paths = len(batch) if limit is None else min(limit, len(batch))
    N = batch.dx.shape[1]
    for i in range(n_paths):
        for n in range(N):
            writer.writerow(
                [i, n + 1]
                + [repr(float(a[i, n])) for a in (batch.dx, batch.du, batch.dz, batch.dy_per_maker, batch.prices)]
                + [repr(float(batch.vbar[i, n + 1]))]
            )
    return n_paths * N
