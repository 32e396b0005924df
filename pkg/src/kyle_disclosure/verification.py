"""Optimality, comparative-statics and limit checks for the equilibrium.

Deviation checks evaluate the agents' one-round payoffs analytically; the
Monte Carlo variants are secondary confirmations with statistical
tolerances.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ModelDomainError
from .model import EquilibriumSolution, MarketParams, Regime, RegimeKind, theoretical_outcomes
from .simulation import SimConfig, path_rng

__all__ = [
    "DeviationKind",
    "DeviationReport",
    "InequalityCheck",
    "CompetitionReport",
    "informed_round_payoff",
    "maker_round_payoff",
    "check_informed_indifference",
    "check_maker_deviation",
    "maker_payoff_curvature",
    "check_competition_inequalities",
    "check_limits",
]


class DeviationKind(enum.Enum):
    INFORMED_INDIFFERENCE = "InformedIndifference"
    MAKER_SLOPE = "MakerSlope"
    MAKER_INTERCEPT = "MakerIntercept"


@dataclass(frozen=True)
class DeviationReport:
    baseline_profit: float
    deviant_profit: float
    delta: float
    std_err: float
    kind: DeviationKind
    round: int = 1
    shift: float = 0.0

    def ok(self, tolerance: float = 1e-10) -> bool:
        bound = max(tolerance, 3.0 * self.std_err)
        if self.kind is DeviationKind.INFORMED_INDIFFERENCE:
            return abs(self.delta) <= bound
        return self.delta <= bound


def _validate_round(params: MarketParams, n: int) -> None:
    if not 1 <= n <= params.n_rounds:
        raise IndexError(f"round {n} outside 1..{params.n_rounds}")


def informed_round_payoff(
    params: MarketParams,
    eq: EquilibriumSolution,
    n: int,
    gap: float,
    order: float,
    gamma: float | None = None,
    psi: float | None = None,
) -> float:
    """Expected informed payoff from round ``n`` on, given the order placed.

    ``gap`` is ``v - vbar_{n-1}``. The round's own profit uses the perceived
    price ``vbar_{n-1} + (order + du) / gamma_sum`` averaged over noise flow,
    and the continuation is the equilibrium value ``M gamma / 4`` times the
    squared post-disclosure gap. ``gamma``/``psi`` override the coefficients
    the informed trader faces.
    """
    _validate_round(params, n)
    M = params.n_makers
    gamma = eq.gamma if gamma is None else gamma
    psi = eq.psi if psi is None else psi
    gamma_sum = M * gamma
    now = (gap - order / gamma_sum) * order
    if n == params.n_rounds:
        return now
    return now + M * gamma / 4.0 * (gap - psi * order) ** 2


def check_informed_indifference(
    params: MarketParams,
    eq: EquilibriumSolution,
    perturbations,
    cfg: SimConfig | None = None,
    *,
    rounds=None,
    gaps=(1.0,),
    gamma: float | None = None,
    psi: float | None = None,
) -> list[DeviationReport]:
    """Shift the round-``n`` order by each perturbation and compare payoffs.

    In interior rounds the equilibrium payoff is flat in the order, so every
    delta should vanish. In the terminal round the informed trader does not
    randomise and the report measures the loss from deviating instead.

    With ``cfg`` the deltas are re-estimated by Monte Carlo over the gap and
    the noise flow, and the report carries the sampling error.
    """
    rounds = range(1, params.n_rounds + 1) if rounds is None else rounds
    reports = []
    dt = params.dt
    for n in rounds:
        _validate_round(params, n)
        for gap in gaps:
            base_order = eq.beta[n - 1] * gap * dt
            base = informed_round_payoff(params, eq, n, gap, base_order, gamma, psi)
            for shift in perturbations:
                dev = informed_round_payoff(params, eq, n, gap, base_order + shift, gamma, psi)
                delta, se = dev - base, 0.0
                if cfg is not None:
                    delta, se = _mc_informed_delta(params, eq, n, shift, cfg, gamma, psi)
                    base = dev = math.nan
                reports.append(
                    DeviationReport(
                        baseline_profit=base,
                        deviant_profit=dev,
                        delta=delta,
                        std_err=se,
                        kind=DeviationKind.INFORMED_INDIFFERENCE,
                        round=n,
                        shift=float(shift),
                    )
                )
    return reports


def _mc_informed_delta(params, eq, n, shift, cfg, gamma=None, psi=None):
    # realised payoffs with noise flow in the price; gap drawn from its
    # equilibrium distribution N(0, Sigma_{n-1})
    M, dt = params.n_makers, params.dt
    gamma = eq.gamma if gamma is None else gamma
    psi = eq.psi if psi is None else psi
    rng = path_rng(cfg.seed, 10_000 + n)
    gap = rng.normal(0.0, math.sqrt(eq.sigma_path[n - 1]), cfg.n_paths)
    du = rng.normal(0.0, params.sigma_u * math.sqrt(dt), cfg.n_paths)
    order = eq.beta[n - 1] * gap * dt
    cont = M * gamma / 4.0 if n < params.n_rounds else 0.0

    def realised(x):
        price_gap = (x + du) / (M * gamma)
        return (gap - price_gap) * x + cont * (gap - psi * x) ** 2

    diff = realised(order + shift) - realised(order)
    se = float(np.std(diff, ddof=1) / math.sqrt(diff.size)) if diff.size > 1 else math.nan
    return float(diff.mean()), se


def _order_flow_variance(params, eq, n):
    dt = params.dt
    Sigma_prev = eq.sigma_path[n - 1]
    return (eq.beta[n - 1] ** 2 * Sigma_prev * dt + eq.sigma_z2[n - 1] + params.sigma_u**2) * dt


def maker_round_payoff(params: MarketParams, eq: EquilibriumSolution, n: int, share: float) -> float:
    """One maker's expected round-``n`` profit when it absorbs ``-share * dw``.

    Other makers keep the equilibrium slope, so the deviant faces the
    residual supply with slope ``(M - 1) gamma`` and conditions on the
    pre-disclosure belief ``vbar_{n-1} + phi dw``.
    """
    _validate_round(params, n)
    others = (params.n_makers - 1) * eq.gamma
    # (phi dw - (dy + dw) / others) dy with dy = -share dw
    coef = -share * (eq.phi - (1.0 - share) / others)
    return coef * _order_flow_variance(params, eq, n)


def maker_payoff_curvature(params: MarketParams, eq: EquilibriumSolution, n: int = 1) -> float:
    """Leading coefficient of the maker payoff as a quadratic in its own order."""
    _validate_round(params, n)
    return -1.0 / ((params.n_makers - 1) * eq.gamma)


def check_maker_deviation(
    params: MarketParams,
    eq: EquilibriumSolution,
    slope_scale: float,
    cfg: SimConfig | None = None,
    *,
    n: int = 1,
) -> DeviationReport:
    """Scale one maker's slope by ``slope_scale`` in round ``n``.

    Beliefs only move with disclosed informed orders, so the continuation
    value is unaffected and only the round payoff changes.
    """
    if not slope_scale > 0:
        raise ValueError("slope_scale must be positive")
    M = params.n_makers
    eq_share = 1.0 / M
    dev_share = slope_scale / (M - 1 + slope_scale)
    base = maker_round_payoff(params, eq, n, eq_share)
    dev = maker_round_payoff(params, eq, n, dev_share)
    delta, se = dev - base, 0.0
    if cfg is not None:
        delta, se = _mc_maker_delta(params, eq, n, eq_share, dev_share, cfg)
    return DeviationReport(
        baseline_profit=base,
        deviant_profit=dev,
        delta=delta,
        std_err=se,
        kind=DeviationKind.MAKER_SLOPE,
        round=n,
        shift=float(slope_scale),
    )


def _mc_maker_delta(params, eq, n, eq_share, dev_share, cfg):
    M, dt = params.n_makers, params.dt
    rng = path_rng(cfg.seed, 20_000 + n)
    gap = rng.normal(0.0, math.sqrt(eq.sigma_path[n - 1]), cfg.n_paths)
    dz = rng.normal(0.0, math.sqrt(eq.sigma_z2[n - 1] * dt), cfg.n_paths)
    du = rng.normal(0.0, params.sigma_u * math.sqrt(dt), cfg.n_paths)
    dw = eq.beta[n - 1] * gap * dt + dz + du
    others = (M - 1) * eq.gamma

    def realised(share):
        dy = -share * dw
        price_gap = (dy + dw) / others  # p - vbar_{n-1}
        return (gap - price_gap) * dy

    diff = realised(dev_share) - realised(eq_share)
    se = float(np.std(diff, ddof=1) / math.sqrt(diff.size)) if diff.size > 1 else math.nan
    return float(diff.mean()), se


@dataclass(frozen=True)
class InequalityCheck:
    lhs: float
    rhs: float
    holds: bool
    margin: float = 0.0
    upper: float | None = None


def _strict(lhs, rhs, margin):
    return InequalityCheck(lhs=lhs, rhs=rhs, holds=bool(lhs < rhs and margin > 0), margin=margin)


@dataclass(frozen=True)
class CompetitionReport:
    """How disclosure's effects compare between oligopoly and perfect competition.

    ``item2`` compares informed-profit reductions and ``item2_makers`` the
    makers' rents with and without disclosure.
    """

    m: int
    item1: InequalityCheck
    item2: InequalityCheck
    item2_makers: InequalityCheck
    item3: InequalityCheck
    item4: InequalityCheck
    extras: dict = field(default_factory=dict)

    @property
    def all_hold(self) -> bool:
        return all(c.holds for c in (self.item1, self.item2, self.item2_makers, self.item3, self.item4))


def check_competition_inequalities(m: int) -> CompetitionReport:
    """Evaluate the four disclosure-versus-competition inequalities at ``m`` makers.

    Sides are taken from the regime outcome table with unit volatilities;
    margins use cancellation-free forms so they stay resolvable for large m.
    """
    if m < 3:
        raise ModelDomainError(f"m={m}: a symmetric linear equilibrium requires M > 2")
    perf_nd, perf_d, imp_nd, imp_d = (theoretical_outcomes(r) for r in Regime.all_for(m))
    d = 1.0 / (m - 1) ** 2

    # 1: proportional impact reduction
    lhs1 = (perf_nd.price_impact - perf_d.price_impact) / perf_nd.price_impact
    rhs1 = (imp_nd.price_impact - imp_d.price_impact) / imp_nd.price_impact
    margin1 = 0.5 * d / (1.0 + math.sqrt(1.0 - d))  # 1/2 - sqrt(1 - d)/2

    # 2: informed-profit reduction, and makers' rents
    lhs2 = perf_nd.informed_profit - perf_d.informed_profit
    rhs2 = imp_nd.informed_profit - imp_d.informed_profit
    root = math.sqrt((m - 2) / m)
    margin2 = 0.5 * (1.0 - root)
    lhs2m = imp_d.makers_profit_total
    rhs2m = imp_nd.makers_profit_total
    margin2m = (1.0 / (m - 2)) * (1.0 - root)

    # 3: noise-trader cost reduction
    lhs3 = -perf_nd.noise_profit + perf_d.noise_profit
    rhs3 = -imp_nd.noise_profit + imp_d.noise_profit
    margin3 = 1.0 / (m - 2) + 0.5 - 0.5 / root

    # 4: autocorrelation ordering, -(m-1)/((m-1)^2+1) < -1/(2(m-1)) < 0
    lhs4, rhs4 = imp_nd.autocorr, imp_d.autocorr
    margin4 = ((m - 1) ** 2 - 1) / (2.0 * (m - 1) * ((m - 1) ** 2 + 1))
    item4 = InequalityCheck(
        lhs=lhs4, rhs=rhs4, holds=bool(lhs4 < rhs4 < 0 and margin4 > 0), margin=margin4, upper=0.0
    )
    return CompetitionReport(
        m=m,
        item1=_strict(lhs1, rhs1, margin1),
        item2=_strict(lhs2, rhs2, margin2),
        item2_makers=_strict(lhs2m, rhs2m, margin2m),
        item3=_strict(lhs3, rhs3, margin3),
        item4=item4,
    )


@dataclass(frozen=True)
class LimitRow:
    m: int
    price_impact: float
    impact_gap: float
    psi_gap: float
    informed_gap: float
    makers_profit: float
    autocorr: float


def check_limits(ms, sigma_v: float = 1.0, sigma_u: float = 1.0) -> tuple[list[LimitRow], bool]:
    """Distance to the perfectly competitive disclosure benchmark along ``ms``.

    Returns the rows and whether every gap shrinks monotonically.
    """
    ms = list(ms)
    if any(b <= a for a, b in zip(ms, ms[1:])):
        raise ValueError("maker counts must be strictly increasing")
    bench = theoretical_outcomes(Regime(RegimeKind.PERFECT_DISCLOSURE), sigma_v, sigma_u)
    rows = []
    for m in ms:
        out = theoretical_outcomes(Regime(RegimeKind.IMPERFECT_DISCLOSURE, m), sigma_v, sigma_u)
        psi = math.sqrt(m / (m - 2)) * sigma_v / sigma_u
        rows.append(
            LimitRow(
                m=m,
                price_impact=out.price_impact,
                impact_gap=abs(out.price_impact - bench.price_impact),
                psi_gap=abs(psi - sigma_v / sigma_u),
                informed_gap=abs(out.informed_profit - bench.informed_profit),
                makers_profit=out.makers_profit_total,
                autocorr=out.autocorr,
            )
        )
    monotone = all(
        b.impact_gap < a.impact_gap
        and b.psi_gap < a.psi_gap
        and b.informed_gap < a.informed_gap
        and b.makers_profit < a.makers_profit
        and abs(b.autocorr) < abs(a.autocorr)
        for a, b in zip(rows, rows[1:])
    )
    return rows, monotone
