"""S-BF: sequential per-BS beam updates for many users per cell.

BS ``m`` recomputes all of its beams at once from the closed form

    w_{m,i} = beta_{m,i}(mu) * pinv(M_{m,i}(mu)) h_{m,(m,i)},

bisects the shared power price ``mu`` against its budget, and keeps the new
beams only if its per-BS lower bound did not decrease.  Taxation and
interference are frozen at the previous beams (one Jacobi-style pass, no
inner iteration).
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import kernels
from .errors import BisectionFailure, DegenerateChannel
from .model import (
    BeamSet,
    ChannelSet,
    IterationRecord,
    NetworkConfig,
    RunTrace,
    check_feasible_beams,
    hermitian_part,
    random_beams,
    round_robin_converged,
)
from .rates import LN2, BoundContext, per_bs_bound_beams, sum_rate

__all__ = [
    "BsUpdateResult",
    "intra_tax",
    "build_M",
    "beta",
    "update_bs",
    "fixed_point_residual",
    "run_sbf",
]

PINV_RCOND = 1e-12
_WIDTH_TOL = 1e-12
_MAX_DOUBLINGS = 200
_MAX_BISECTIONS = 500


@dataclass(frozen=True)
class BsUpdateResult:
    beams: np.ndarray
    candidate: np.ndarray
    mu: float
    bound_before: float
    bound_after: float
    accepted: bool


def intra_tax(channels: ChannelSet, w_m: np.ndarray, beams_hat: BeamSet, bs: int,
              weights=None) -> np.ndarray:
    """Taxation of the users of cell ``bs`` with its own beams set to ``w_m``.

    Other cells keep their beams from ``beams_hat``.  Returns shape (N,).
    """
    ctx = BoundContext(channels, beams_hat.replace_bs(bs, w_m), weights)
    return ctx.T[bs].copy()


def _penalty_matrix(channels: ChannelSet, T: np.ndarray, m: int) -> np.ndarray:
    """``sum over all (q, j) of T[q, j] H_{m,(q,j)}`` (bits units)."""
    hm = channels.h[m]  # (M, N, K)
    return np.einsum("qj,qja,qjb->ab", T, hm, np.conj(hm))


def build_M(channels: ChannelSet, mu: float, beams_hat: BeamSet, target: Tuple[int, int],
            weights=None) -> np.ndarray:
    """``ln2 * (sum_{(q,j) != target} T_{q,j} H_{m,(q,j)} + mu I)`` at ``beams_hat``."""
    m, i = target
    ctx = BoundContext(channels, beams_hat, weights)
    T = ctx.T.copy()
    T[m, i] = 0.0
    K = channels.antennas
    return hermitian_part(LN2 * (_penalty_matrix(channels, T, m) + mu * np.eye(K)))


def _pinv(Mx: np.ndarray) -> np.ndarray:
    return np.linalg.pinv(Mx, rcond=PINV_RCOND, hermitian=True)


def beta(channels: ChannelSet, mu: float, beams_hat: BeamSet, user: Tuple[int, int],
         weights=None) -> float:
    """Beam scaling ``sqrt([g - I]^+ / g^2)`` with ``g = h^H pinv(M) h``."""
    m, i = user
    ctx = BoundContext(channels, beams_hat, weights)
    a = ctx.weights[m, i]
    if a == 0:
        return 0.0
    h = channels.direct(m, i)
    g = float(np.real(np.conj(h) @ _pinv(build_M(channels, mu, beams_hat, user, weights) / a) @ h))
    excess = max(g - ctx.I[m, i], 0.0)
    if excess == 0.0:
        return 0.0
    if g <= 0:
        raise DegenerateChannel("h^H pinv(M) h vanished with positive excess")
    return float(np.sqrt(excess / g ** 2))


class _CellSystem:
    """Eigen-data of every user's penalty matrix at BS ``m``; cheap in ``mu``."""

    def __init__(self, channels: ChannelSet, T: np.ndarray, interf: np.ndarray,
                 weights: np.ndarray, m: int):
        N, K = channels.users_per_cell, channels.antennas
        total = _penalty_matrix(channels, T, m)
        direct = channels.h[m, m]  # (N, K)
        self.active = weights[m] > 0
        self.lam = np.zeros((N, K))
        self.U = np.zeros((N, K, K), dtype=complex)
        self.coef = np.zeros((N, K))
        for i in range(N):
            g = direct[i]
            B = hermitian_part(total - T[m, i] * np.outer(g, np.conj(g)))
            lam, U = np.linalg.eigh(B)
            self.lam[i] = np.maximum(lam, 0.0)
            self.U[i] = U
            if self.active[i]:
                self.coef[i] = np.abs(U.conj().T @ g) ** 2
        self.scale = np.where(self.active, LN2 / np.where(self.active, weights[m], 1.0), 1.0)
        self.interf = np.asarray(interf, dtype=float)
        self.direct = direct

    def power(self, mu: float) -> float:
        return float(np.sum(kernels.sbf_user_powers(mu, self.lam, self.coef, self.interf,
                                                    self.scale, PINV_RCOND)))

    def full_rank_at_zero(self) -> bool:
        lam = self.lam[self.active]
        if lam.size == 0:
            return True
        top = lam.max(axis=1)
        return bool(np.all((top > 0) & (lam.min(axis=1) > PINV_RCOND * top)))

    def beams(self, mu: float) -> np.ndarray:
        N, K = self.lam.shape
        out = np.zeros((N, K), dtype=complex)
        for i in range(N):
            if not self.active[i]:
                continue
            s = self.scale[i] * (self.lam[i] + mu)
            keep = s > PINV_RCOND * s.max()
            inv = np.where(keep, 1.0 / np.where(keep, s, 1.0), 0.0)
            U = self.U[i]
            x = U @ (inv * (U.conj().T @ self.direct[i]))  # pinv(M) h
            g = float(np.real(np.conj(self.direct[i]) @ x))
            excess = max(g - self.interf[i], 0.0)
            if excess > 0.0:
                out[i] = np.sqrt(excess) / g * x
        return out


def _solve_price(system: _CellSystem, budget: float, tol: float) -> float:
    abs_tol = tol * budget
    if system.full_rank_at_zero() and system.power(0.0) <= budget + abs_tol:
        return 0.0
    lo, hi = 0.0, 1.0
    p_hi = system.power(hi)
    doublings = 0
    while p_hi > budget:
        lo, hi = hi, 2.0 * hi
        p_hi = system.power(hi)
        doublings += 1
        if doublings > _MAX_DOUBLINGS:
            raise BisectionFailure("could not bracket the power price")
    if abs(p_hi - budget) < abs_tol:
        return hi
    for _ in range(_MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        p = system.power(mid)
        if abs(p - budget) < abs_tol:
            return mid
        if p > budget:
            lo = mid
        else:
            hi = mid
        if hi - lo < _WIDTH_TOL:
            return hi
    raise BisectionFailure("bisection on the power price did not converge")


def candidate_beams(channels: ChannelSet, ctx: BoundContext, m: int, budget: float,
                    tol: float = 1e-8, sweeps: int = 0, beams_hat: Optional[BeamSet] = None
                    ) -> Tuple[np.ndarray, float]:
    """Closed-form beams of BS ``m`` and their power price, frozen at ``ctx``.

    ``sweeps > 0`` re-evaluates own-cell taxation and interference at the
    fresh candidate that many extra times (needs ``beams_hat``).
    """
    system = _CellSystem(channels, ctx.T, ctx.I[m], ctx.weights, m)
    mu = _solve_price(system, budget, tol)
    w_m = system.beams(mu)
    for _ in range(sweeps):
        trial = BoundContext(channels, beams_hat.replace_bs(m, w_m), ctx.weights)
        T = ctx.T.copy()
        T[m] = trial.T[m]
        system = _CellSystem(channels, T, trial.I[m], ctx.weights, m)
        mu = _solve_price(system, budget, tol)
        w_m = system.beams(mu)
    return w_m, mu


def update_bs(channels: ChannelSet, beams_hat: BeamSet, bs: int, budget: float,
              weights=None, tol: float = 1e-8, sweeps: int = 0,
              context: Optional[BoundContext] = None) -> BsUpdateResult:
    """One S-BF step at BS ``bs``: closed-form candidate plus bound guard."""
    ctx = context or BoundContext(channels, beams_hat, weights)
    w_new, mu = candidate_beams(channels, ctx, bs, budget, tol, sweeps, beams_hat)
    before = per_bs_bound_beams(channels, beams_hat.w[bs], beams_hat, bs, context=ctx)
    after = per_bs_bound_beams(channels, w_new, beams_hat, bs, context=ctx)
    accepted = after >= before
    beams = w_new if accepted else np.array(beams_hat.w[bs])
    return BsUpdateResult(beams=beams, candidate=w_new, mu=mu, bound_before=before,
                          bound_after=after, accepted=accepted)


def fixed_point_residual(channels: ChannelSet, w_m: np.ndarray, beams_hat: BeamSet, bs: int,
                         mu: float, weights=None) -> float:
    """Relative residual of the stationarity identity of every user of ``bs``.

    The identity ``M_i w_i = a_i H_i w_i / (I_i + |h_i^H w_i|^2)`` is evaluated
    with taxation and interference ``I_i`` frozen at ``beams_hat``.
    """
    ctx = BoundContext(channels, beams_hat, weights)
    worst = 0.0
    for i in range(channels.users_per_cell):
        w = np.asarray(w_m[i], dtype=complex)
        if not np.any(w):
            continue
        h = channels.direct(bs, i)
        lhs = build_M(channels, mu, beams_hat, (bs, i), weights) @ w
        amp = np.conj(h) @ w
        rhs = ctx.weights[bs, i] * h * amp / (ctx.I[bs, i] + abs(amp) ** 2)
        scale = max(np.linalg.norm(lhs), np.linalg.norm(rhs), 1e-300)
        worst = max(worst, float(np.linalg.norm(lhs - rhs) / scale))
    return worst


def run_sbf(channels: ChannelSet, config: NetworkConfig, init: Optional[BeamSet] = None,
            seed=None) -> RunTrace:
    """Run S-BF until a full round changes the sum rate by less than ``stop_tol``."""
    channels.check_config(config)
    if init is None:
        init = random_beams(config, np.random.default_rng(seed))
    check_feasible_beams(init, config)

    M = config.num_coordinated_bs
    weights = config.user_weights
    beams = init
    rates = [sum_rate(channels, beams, weights)]
    records = []
    converged = False
    for t in range(config.max_outer_iters):
        start = time.perf_counter()
        m = t % M
        res = update_bs(channels, beams, m, config.power_budget[m], weights,
                        config.bisection_tol, config.sbf_inner_sweeps)
        if res.accepted:
            beams = beams.replace_bs(m, res.beams)
            rates.append(sum_rate(channels, beams, weights))
        else:
            rates.append(rates[-1])
        records.append(IterationRecord(iteration=t, bs=m, sum_rate=rates[-1],
                                       bound=res.bound_after, info_units=1,
                                       accepted=res.accepted,
                                       wall_time=time.perf_counter() - start))
        if round_robin_converged(rates, M, config.stop_tol):
            converged = True
            break
    return RunTrace(algorithm="sbf", records=tuple(records), initial_sum_rate=rates[0],
                    converged=converged, final_beams=beams)
