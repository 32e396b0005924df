"""Backward-induction reconstruction of the equilibrium.

This module never evaluates the closed-form coefficients. Each round is
solved from its own optimality conditions:

* informed indifference: ``psi_n = 2 / (M gamma_{n+1}) = 2 / gamma_sum_n``
  for interior rounds, a pure best response ``beta_N dt = gamma_sum_N / 2``
  in the terminal round;
* market clearing: ``gamma_sum_n = (M - 2) / ((M - 1) phi_n)``;
* Gaussian projections for ``psi_n`` and ``phi_n``.

Given a candidate common slope the conditions pin ``beta_n Sigma_{n-1}`` and
the variance increment of every round, so the variance path can be built
backwards from ``Sigma_N = 0``. The slope is then the unique value for which
the rebuilt prior variance equals ``sigma_v**2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .exceptions import ModelDomainError, NumericalError
from .model import EquilibriumSolution, MarketParams

__all__ = [
    "InductionState",
    "solve_backward",
    "solve_backward_states",
    "variance_step",
    "foc_residuals",
    "second_order_conditions",
]


@dataclass(frozen=True)
class InductionState:
    """Round-k quantities, including the intercepts that vanish in equilibrium."""

    round: int
    gamma_k: float
    psi_k: float
    phi_k: float
    beta_k: float
    sigma_z2_k: float
    Sigma_k: float
    s_k: float
    r_k: float
    nu_k: float


def variance_step(beta: float, sigma_z2: float, Sigma_prev: float, dt: float) -> tuple[float, float]:
    """One Gaussian projection of the fundamental on a disclosed order.

    Returns ``(psi, Sigma_next)``.
    """
    if Sigma_prev < 0:
        raise NumericalError(f"negative prior variance {Sigma_prev}")
    if beta == 0 and sigma_z2 == 0:
        raise ModelDomainError("order carries no variance (beta = 0 and sigma_z2 = 0)")
    info = beta * beta * Sigma_prev * dt + sigma_z2
    if info == 0:
        # nothing left to learn
        return 0.0, 0.0
    psi = beta * Sigma_prev / info
    Sigma_next = Sigma_prev - psi * psi * info * dt
    if Sigma_next < 0:
        # rounding when the order reveals everything
        if Sigma_next > -1e-12 * max(Sigma_prev, 1.0):
            Sigma_next = 0.0
        else:
            raise NumericalError(f"variance step produced {Sigma_next}")
    return psi, Sigma_next


def _preflow_coefficient(beta, sigma_z2, Sigma_prev, dt, sigma_u2):
    return beta * Sigma_prev / (beta * beta * Sigma_prev * dt + sigma_z2 + sigma_u2)


def _intercepts(M, gamma_sum, psi, phi):
    # s_n, r_sum_n solve psi s + r_sum / gamma_sum = 0 and the clearing
    # intercept condition (M - 1)/2 (phi - psi) gamma_sum s = 0
    A = np.array([[psi, 1.0 / gamma_sum], [0.5 * (M - 1) * (phi - psi) * gamma_sum, 0.0]])
    s, r_sum = np.linalg.solve(A, np.zeros(2))
    return float(s) + 0.0, float(r_sum) / M + 0.0


def _backward_pass(M, N, sigma_u2, gamma):
    """Rebuild (beta, sigma_z2, Sigma) for a common slope ``gamma``.

    Returns per-round lists ordered 1..N and Sigma ordered 0..N.
    """
    dt = 1.0 / N
    gamma_sum = M * gamma
    beta = [0.0] * N
    sigma_z2 = [0.0] * N
    Sigma = [0.0] * (N + 1)

    # terminal round: no continuation, so the informed order is a pure best
    # response and the clearing condition fixes the variance left before it
    beta_N = gamma_sum / (2.0 * dt)
    denom = beta_N * ((M - 1) * gamma_sum - (M - 2) * beta_N * dt)
    if denom <= 0:
        raise NumericalError("terminal clearing condition has no positive solution")
    Sigma[N - 1] = (M - 2) * sigma_u2 / denom
    beta[N - 1] = beta_N
    sigma_z2[N - 1] = 0.0

    # interior rounds: indifference and clearing fix psi and phi; their
    # projection formulas fix beta_k Sigma_{k-1} and the variance increment
    psi = 2.0 / gamma_sum
    phi = (M - 2) / ((M - 1) * gamma_sum)
    flow_cov = sigma_u2 / (1.0 / phi - 1.0 / psi)  # beta_k Sigma_{k-1}
    for k in range(N - 1, 0, -1):
        Sigma[k - 1] = Sigma[k] + psi * flow_cov * dt
        beta[k - 1] = flow_cov / Sigma[k - 1]
        sigma_z2[k - 1] = flow_cov / psi - beta[k - 1] ** 2 * Sigma[k - 1] * dt
        if sigma_z2[k - 1] < 0:
            raise NumericalError(f"negative dissimulation variance in round {k}")
    return beta, sigma_z2, Sigma


def _solve_slope(params: MarketParams) -> float:
    M, N = params.n_makers, params.n_rounds
    su2 = params.sigma_u**2
    target = math.log(params.sigma_v**2)

    def mismatch(log_gamma):
        _, _, Sigma = _backward_pass(M, N, su2, math.exp(log_gamma))
        return math.log(Sigma[0]) - target

    lo = hi = math.log(params.sigma_u / params.sigma_v)
    f_lo = f_hi = mismatch(lo)
    # the rebuilt prior variance falls as the slope rises
    while f_lo < 0:
        hi, f_hi = lo, f_lo
        lo -= 2.0
        f_lo = mismatch(lo)
    while f_hi > 0:
        lo, f_lo = hi, f_hi
        hi += 2.0
        f_hi = mismatch(hi)
    if f_lo == 0:
        return math.exp(lo)
    if f_hi == 0:
        return math.exp(hi)
    root = brentq(mismatch, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return math.exp(root)


def solve_backward_states(params: MarketParams) -> list[InductionState]:
    """Per-round induction states for rounds 1..N."""
    M, N = params.n_makers, params.n_rounds
    if M < 3:
        raise ModelDomainError("a symmetric linear equilibrium requires M > 2")
    dt = params.dt
    su2 = params.sigma_u**2
    gamma = _solve_slope(params)
    gamma_sum = M * gamma
    beta, sigma_z2, Sigma_back = _backward_pass(M, N, su2, gamma)

    # forward pass through the projection recursion from the prior
    Sigma = [params.sigma_v**2]
    psis, phis = [], []
    for k in range(N):
        psi_k, nxt = variance_step(beta[k], sigma_z2[k], Sigma[-1], dt)
        if k == N - 1:
            nxt = 0.0  # terminal order is fully revealing
        psis.append(psi_k)
        phis.append(_preflow_coefficient(beta[k], sigma_z2[k], Sigma[-1], dt, su2))
        Sigma.append(nxt)

    # maker continuation values from the realised order-flow variance
    nu = [0.0] * (N + 1)
    for k in range(N, 0, -1):
        flow_var = (beta[k - 1] ** 2 * Sigma[k - 1] * dt + sigma_z2[k - 1] + su2) * dt
        nu[k - 1] = nu[k] + flow_var / (M**2 * (M - 1) * gamma)

    states = []
    for k in range(1, N + 1):
        s_k, r_k = _intercepts(M, gamma_sum, psis[k - 1], phis[k - 1])
        states.append(
            InductionState(
                round=k,
                gamma_k=gamma,
                psi_k=psis[k - 1],
                phi_k=phis[k - 1],
                beta_k=beta[k - 1],
                sigma_z2_k=sigma_z2[k - 1],
                Sigma_k=Sigma[k],
                s_k=s_k,
                r_k=r_k,
                nu_k=nu[k],
            )
        )
    return states


def solve_backward(params: MarketParams) -> EquilibriumSolution:
    """Equilibrium obtained by backward induction, independent of the closed form."""
    states = solve_backward_states(params)
    gamma = states[0].gamma_k
    sigma_path = [params.sigma_v**2] + [st.Sigma_k for st in states]
    return EquilibriumSolution(
        params=params,
        beta=np.array([st.beta_k for st in states]),
        sigma_z2=np.array([st.sigma_z2_k for st in states]),
        gamma=gamma,
        psi=states[0].psi_k,
        phi=states[0].phi_k,
        sigma_path=np.array(sigma_path),
        lam=1.0 / (params.n_makers * gamma),
    )


def foc_residuals(params: MarketParams, eq: EquilibriumSolution, n: int) -> tuple[float, float, float]:
    """Residuals of the round-``n`` optimality conditions (1-based ``n``).

    Returns ``(informed_slope, informed_level, clearing)``. In interior rounds
    the informed entries are the two coefficients of the indifference
    condition. The terminal round has no continuation value; there the slope
    entry is zero and the level entry is ``1 - 2 beta_N dt / gamma_sum``.
    """
    N, M = params.n_rounds, params.n_makers
    if not 1 <= n <= N:
        raise IndexError(f"round {n} outside 1..{N}")
    gamma_sum = M * eq.gamma
    if n < N:
        slope = -2.0 / gamma_sum + M * eq.gamma * eq.psi**2 / 2.0
        level = 1.0 - M * eq.gamma * eq.psi / 2.0
    else:
        slope = 0.0
        level = 1.0 - 2.0 * eq.beta[N - 1] * params.dt / gamma_sum
    clearing = ((M - 1) * gamma_sum * eq.phi - M) / 2.0 + 1.0
    return slope, level, clearing


def second_order_conditions(params: MarketParams, eq: EquilibriumSolution, n: int) -> tuple[float, float]:
    """``(informed, maker)`` second-order margins in round ``n``.

    Informed: ``1/gamma_sum - M gamma_{n+1} psi^2 / 4`` with no continuation
    term in the terminal round. Maker: ``1 / (gamma_sum - gamma)``.
    """
    N, M = params.n_rounds, params.n_makers
    if not 1 <= n <= N:
        raise IndexError(f"round {n} outside 1..{N}")
    gamma_sum = M * eq.gamma
    continuation = M * eq.gamma * eq.psi**2 / 4.0 if n < N else 0.0
    return 1.0 / gamma_sum - continuation, 1.0 / (gamma_sum - eq.gamma)
