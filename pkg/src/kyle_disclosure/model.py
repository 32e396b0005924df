"""Closed-form linear equilibrium and the regime comparison constants.

Rounds are numbered 1..N in the economics; every per-round array here is
0-based, so ``beta[i]`` belongs to round ``i + 1``. The posterior-variance
path ``sigma_path`` has N + 1 entries and ``sigma_path[n]`` is the variance
after round ``n`` (``sigma_path[0]`` is the prior variance).
"""
from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ModelDomainError

__all__ = [
    "MarketParams",
    "EquilibriumSolution",
    "RegimeKind",
    "Regime",
    "TheoreticalOutcomes",
    "solve_closed_form",
    "theoretical_outcomes",
    "informed_value",
    "maker_value",
]


def _require_makers(n_makers) -> None:
    if n_makers < 3:
        raise ModelDomainError(
            f"n_makers={n_makers}: a symmetric linear equilibrium requires M > 2 market makers"
        )


@dataclass(frozen=True)
class MarketParams:
    """Exogenous primitives of the N-round game on the horizon [0, 1]."""

    n_rounds: int
    n_makers: int
    sigma_v: float = 1.0
    sigma_u: float = 1.0

    def __post_init__(self):
        if int(self.n_rounds) != self.n_rounds or self.n_rounds < 1:
            raise ModelDomainError(f"n_rounds must be a positive integer, got {self.n_rounds}")
        if int(self.n_makers) != self.n_makers:
            raise ModelDomainError(f"n_makers must be an integer, got {self.n_makers}")
        _require_makers(self.n_makers)
        if not (self.sigma_v > 0 and math.isfinite(self.sigma_v)):
            raise ModelDomainError(f"sigma_v must be positive, got {self.sigma_v}")
        if not (self.sigma_u > 0 and math.isfinite(self.sigma_u)):
            raise ModelDomainError(f"sigma_u must be positive, got {self.sigma_u}")
        object.__setattr__(self, "n_rounds", int(self.n_rounds))
        object.__setattr__(self, "n_makers", int(self.n_makers))
        object.__setattr__(self, "sigma_v", float(self.sigma_v))
        object.__setattr__(self, "sigma_u", float(self.sigma_u))

    @property
    def dt(self) -> float:
        return 1.0 / self.n_rounds

    @property
    def times(self) -> np.ndarray:
        """Trading dates t_0 = 0, ..., t_N = 1."""
        return np.arange(self.n_rounds + 1) / self.n_rounds

    def to_dict(self) -> dict:
        return {
            "n_rounds": self.n_rounds,
            "n_makers": self.n_makers,
            "sigma_v": self.sigma_v,
            "sigma_u": self.sigma_u,
        }


@dataclass(frozen=True, eq=False)
class EquilibriumSolution:
    """Per-round equilibrium coefficients.

    Attributes
    ----------
    beta : ndarray, shape (N,)
        Informed trading intensity on the belief gap, per unit time.
    sigma_z2 : ndarray, shape (N,)
        Dissimulation variance rate; the last entry is zero.
    gamma : float
        Per-maker slope on ``vbar_{n-1} - p_n``.
    psi : float
        Belief update per unit of disclosed informed order.
    phi : float
        Pre-disclosure projection coefficient on aggregate flow.
    sigma_path : ndarray, shape (N + 1,)
        Posterior variance after each round, starting from the prior.
    lam : float
        Price impact ``1 / (M * gamma)``.
    """

    params: MarketParams
    beta: np.ndarray
    sigma_z2: np.ndarray
    gamma: float
    psi: float
    phi: float
    sigma_path: np.ndarray
    lam: float

    def __post_init__(self):
        for name in ("beta", "sigma_z2", "sigma_path"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def price_impact(self) -> float:
        return self.lam

    def variance_identity_residuals(self) -> np.ndarray:
        """``beta_n^2 Sigma_{n-1} dt + sigma_z2_n - (M-2)/M sigma_u^2`` per round."""
        p = self.params
        target = (p.n_makers - 2) / p.n_makers * p.sigma_u**2
        return self.beta**2 * self.sigma_path[:-1] * p.dt + self.sigma_z2 - target

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "beta": [float(b) for b in self.beta],
            "sigma_z2": [float(s) for s in self.sigma_z2],
            "gamma": float(self.gamma),
            "psi": float(self.psi),
            "phi": float(self.phi),
            "Sigma": [float(s) for s in self.sigma_path],
            "lambda": float(self.lam),
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    def digest(self) -> str:
        """Short content hash used to tag simulation reports."""
        blob = json.dumps(self.to_dict(), separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @classmethod
    def from_dict(cls, doc: dict) -> "EquilibriumSolution":
        return cls(
            params=MarketParams(**doc["params"]),
            beta=np.asarray(doc["beta"], dtype=float),
            sigma_z2=np.asarray(doc["sigma_z2"], dtype=float),
            gamma=float(doc["gamma"]),
            psi=float(doc["psi"]),
            phi=float(doc["phi"]),
            sigma_path=np.asarray(doc["Sigma"], dtype=float),
            lam=float(doc["lambda"]),
        )


def solve_closed_form(params: MarketParams) -> EquilibriumSolution:
    """Evaluate the equilibrium coefficients in closed form."""
    N, M = params.n_rounds, params.n_makers
    sv, su = params.sigma_v, params.sigma_u
    n = np.arange(1, N + 1, dtype=float)
    remaining = N - n + 1.0

    shrink = math.sqrt((M - 2) / M)
    beta = N / remaining * shrink * su / sv
    sigma_z2 = (N - n) / remaining * ((M - 2) / M) * su**2
    gamma = 2.0 * shrink / M * su / sv
    psi = sv / (shrink * su)
    phi = (M - 2) / (2.0 * M - 2.0) * psi
    sigma_path = (N - np.arange(N + 1, dtype=float)) / N * sv**2
    lam = sv / (2.0 * shrink * su)
    return EquilibriumSolution(
        params=params,
        beta=beta,
        sigma_z2=sigma_z2,
        gamma=gamma,
        psi=psi,
        phi=phi,
        sigma_path=sigma_path,
        lam=lam,
    )


class RegimeKind(enum.Enum):
    PERFECT_NO_DISCLOSURE = "PerfectNoDisclosure"
    PERFECT_DISCLOSURE = "PerfectDisclosure"
    IMPERFECT_NO_DISCLOSURE = "ImperfectNoDisclosure"
    IMPERFECT_DISCLOSURE = "ImperfectDisclosure"

    @property
    def imperfect(self) -> bool:
        return self in (RegimeKind.IMPERFECT_NO_DISCLOSURE, RegimeKind.IMPERFECT_DISCLOSURE)


@dataclass(frozen=True)
class Regime:
    """A market structure; imperfect-competition regimes carry the maker count."""

    kind: RegimeKind
    n_makers: int | None = None

    def __post_init__(self):
        kind = RegimeKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind.imperfect:
            if self.n_makers is None:
                raise ModelDomainError(f"{kind.value} requires n_makers")
            _require_makers(self.n_makers)
        elif self.n_makers is not None:
            raise ModelDomainError(f"{kind.value} does not take n_makers")

    @classmethod
    def all_for(cls, n_makers: int) -> list["Regime"]:
        """The four regimes in table order, imperfect ones at ``n_makers``."""
        return [
            cls(RegimeKind.PERFECT_NO_DISCLOSURE),
            cls(RegimeKind.PERFECT_DISCLOSURE),
            cls(RegimeKind.IMPERFECT_NO_DISCLOSURE, n_makers),
            cls(RegimeKind.IMPERFECT_DISCLOSURE, n_makers),
        ]


@dataclass(frozen=True)
class TheoreticalOutcomes:
    """Horizon-total outcomes; ``makers_profit_total`` aggregates all makers."""

    price_impact: float
    informed_profit: float
    makers_profit_total: float
    noise_profit: float
    autocorr: float

    def to_dict(self) -> dict:
        return {
            "price_impact": self.price_impact,
            "informed_profit": self.informed_profit,
            "makers_profit_total": self.makers_profit_total,
            "noise_profit": self.noise_profit,
            "autocorr": self.autocorr,
        }


def theoretical_outcomes(regime: Regime, sigma_v: float = 1.0, sigma_u: float = 1.0) -> TheoreticalOutcomes:
    if not (sigma_v > 0 and sigma_u > 0):
        raise ModelDomainError("sigma_v and sigma_u must be positive")
    ratio = sigma_v / sigma_u
    scale = sigma_v * sigma_u
    kind = regime.kind
    if kind is RegimeKind.PERFECT_NO_DISCLOSURE:
        impact, informed, makers, autocorr = 1.0, 1.0, 0.0, 0.0
    elif kind is RegimeKind.PERFECT_DISCLOSURE:
        impact, informed, makers, autocorr = 0.5, 0.5, 0.0, 0.0
    elif kind is RegimeKind.IMPERFECT_NO_DISCLOSURE:
        M = regime.n_makers
        impact = (M - 1) / (M - 2)
        informed = 1.0
        makers = 1.0 / (M - 2)
        autocorr = -(M - 1) / ((M - 1) ** 2 + 1)
    else:
        M = regime.n_makers
        root = math.sqrt((M - 2) / M)
        impact = 0.5 / root
        informed = 0.5 * root
        makers = 1.0 / math.sqrt(M * (M - 2))
        autocorr = -1.0 / (2 * (M - 1))
    informed *= scale
    makers *= scale
    return TheoreticalOutcomes(
        price_impact=impact * ratio,
        informed_profit=informed,
        makers_profit_total=makers,
        noise_profit=-informed - makers,
        autocorr=autocorr,
    )


def _check_round(params: MarketParams, n: int) -> None:
    if not 0 <= n <= params.n_rounds:
        raise IndexError(f"round index {n} outside 0..{params.n_rounds}")


def informed_value(params: MarketParams, eq: EquilibriumSolution, n: int, dev: float) -> float:
    """Informed trader's continuation value after round ``n`` given ``v - vbar_n``."""
    _check_round(params, n)
    if n == params.n_rounds:
        return 0.0
    return params.n_makers * eq.gamma / 4.0 * dev**2


def maker_value(params: MarketParams, eq: EquilibriumSolution, n: int) -> float:
    """One maker's expected profit over rounds n+1..N.

    Accumulates the per-round rent ``beta_k Sigma_{k-1} dt / (M (M - 2))``.
    """
    _check_round(params, n)
    M = params.n_makers
    per_round = eq.beta * eq.sigma_path[:-1] * params.dt / (M * (M - 2))
    return float(per_round[n:].sum())
