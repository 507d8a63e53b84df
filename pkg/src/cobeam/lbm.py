"""Exact rank-1 maximization of the per-BS lower bound, one user per cell.

For BS ``m`` with fixed other-cell covariances the bound is

    U_m(W) = a * log2(1 + h^H W h / I) - Tr(A W) + const,

with ``a`` the user weight, ``h`` the direct channel, ``I`` the interference
plus noise and ``A`` the aggregate of other users' taxation terms.  For a
fixed power price ``mu`` the partial Lagrangian is maximized in closed form
after whitening by the Cholesky factor of ``A + mu I``; the price is then
found by bisection on the trace.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import BisectionFailure, DimensionError, SingularPenalty
from .model import ChannelSet, CovSet, hermitian_part
from .rates import LN2, BoundContext, per_bs_bound

__all__ = [
    "LbmSolution",
    "LbmProblem",
    "assemble_A",
    "diag_waterfill",
    "solve_fixed_mu",
    "solve_lbm",
    "partial_lagrangian",
]

_RANK_TOL = 1e-10
_WIDTH_TOL = 1e-12
_MAX_DOUBLINGS = 200
_MAX_BISECTIONS = 500


@dataclass(frozen=True)
class LbmSolution:
    W_star: np.ndarray
    mu_star: float
    power_used: float
    iterations: int
    objective: float


@dataclass(frozen=True)
class LbmProblem:
    """The data of one (LBM) instance, independent of any network object."""

    h: np.ndarray
    A: np.ndarray
    interference: float
    weight: float = 1.0

    @classmethod
    def from_network(cls, channels: ChannelSet, covs_hat: CovSet, bs: int,
                     weights=None) -> "LbmProblem":
        _require_single_user(channels)
        ctx = BoundContext(channels, covs_hat, weights)
        return cls(h=channels.direct(bs, 0), A=_assemble(channels, ctx.T, bs),
                   interference=float(ctx.I[bs, 0]), weight=float(ctx.weights[bs, 0]))

    def rate_term(self, W: np.ndarray) -> float:
        s = float(np.real(np.conj(self.h) @ W @ self.h))
        return self.weight * np.log1p(s / self.interference) / LN2


def _require_single_user(channels: ChannelSet) -> None:
    if channels.users_per_cell != 1:
        raise DimensionError("lower-bound maximization requires one user per cell")


def _assemble(channels: ChannelSet, T: np.ndarray, m: int) -> np.ndarray:
    K = channels.antennas
    A = np.zeros((K, K), dtype=complex)
    for q in range(channels.num_bs):
        if q != m:
            g = channels.h[m, q, 0]
            A += T[q, 0] * np.outer(g, np.conj(g))
    return hermitian_part(A)


def assemble_A(channels: ChannelSet, covs_hat: CovSet, bs: int, weights=None) -> np.ndarray:
    """Aggregate penalty ``sum_{q != m} T_q H_{m,q}`` of BS ``bs`` (zero when M = 1)."""
    _require_single_user(channels)
    return LbmProblem.from_network(channels, covs_hat, bs, weights).A


def diag_waterfill(delta) -> np.ndarray:
    """Closed-form diagonal optimum ``[(d - 1) / d]^+`` (zero where ``d == 0``)."""
    d = np.asarray(delta, dtype=float)
    out = np.zeros_like(d)
    nz = d != 0
    out[nz] = np.maximum((d[nz] - 1.0) / d[nz], 0.0)
    return out


def _is_full_rank(A: np.ndarray) -> bool:
    lam = np.linalg.eigvalsh(A)
    scale = np.abs(lam).max()
    return scale > 0 and lam[0] > _RANK_TOL * scale


def _fixed_mu(prob: LbmProblem, mu: float) -> np.ndarray:
    K = prob.h.shape[0]
    if prob.weight == 0:
        return np.zeros((K, K), dtype=complex)
    # B = (ln2 / a)(A + mu I) converts the bits-valued objective to nats
    B = hermitian_part(LN2 / prob.weight * (prob.A + mu * np.eye(K)))
    C = np.linalg.cholesky(B)  # B = C C^H, so L = C^H is upper and B = L^H L
    L = C.conj().T
    # whitened channel matrix L^{-H} H L^{-1} / I
    g = linalg.solve_triangular(C, prob.h, lower=True)
    Hw = np.outer(g, np.conj(g)) / prob.interference
    lam, V = np.linalg.eigh(hermitian_part(Hw))
    order = np.argsort(lam)[::-1]
    lam, V = lam[order], V[:, order]
    lam = np.where(np.abs(lam) > 1e-14 * max(1.0, np.abs(lam).max()), lam, 0.0)
    W_diag = diag_waterfill(np.maximum(lam, 0.0))
    X = (V * W_diag) @ V.conj().T
    # W = L^{-1} X L^{-H}
    Y = linalg.solve_triangular(L, X, lower=False)
    W = linalg.solve_triangular(L, Y.conj().T, lower=False).conj().T
    return hermitian_part(W)


def solve_fixed_mu(channels: ChannelSet, covs_hat: CovSet, bs: int, mu: float,
                   weights=None) -> np.ndarray:
    """Maximizer of the partial Lagrangian at price ``mu`` (rank at most one).

    Raises
    ------
    SingularPenalty
        If ``mu == 0`` and the aggregate penalty is rank deficient.
    """
    return solve_problem_fixed_mu(LbmProblem.from_network(channels, covs_hat, bs, weights), mu)


def solve_problem_fixed_mu(prob: LbmProblem, mu: float) -> np.ndarray:
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    if mu == 0 and not _is_full_rank(prob.A):
        raise SingularPenalty("mu = 0 requires a full-rank aggregate penalty")
    return _fixed_mu(prob, mu)


def partial_lagrangian(prob: LbmProblem, W: np.ndarray, mu: float, budget: float) -> float:
    """``a log2(1 + h^H W h / I) - Tr((A + mu I) W) + mu * budget``."""
    W = np.asarray(W, dtype=complex)
    penalty = float(np.real(np.trace(prob.A @ W))) + mu * float(np.real(np.trace(W)))
    return prob.rate_term(W) - penalty + mu * budget


def _trace(W):
    return float(np.real(np.trace(W)))


def solve_problem(prob: LbmProblem, budget: float, tol: float = 1e-8) -> tuple:
    """Bisection on the power price; returns ``(W, mu, iterations)``.

    ``tol`` is relative to ``budget``.
    """
    abs_tol = tol * budget
    iterations = 0
    if prob.weight == 0 or not np.any(prob.h):
        K = prob.h.shape[0]
        return np.zeros((K, K), dtype=complex), 0.0, 0
    if _is_full_rank(prob.A):
        W0 = _fixed_mu(prob, 0.0)
        iterations += 1
        if _trace(W0) <= budget + abs_tol:
            return W0, 0.0, iterations

    lo, hi = 0.0, 1.0
    W_hi = _fixed_mu(prob, hi)
    iterations += 1
    doublings = 0
    while _trace(W_hi) > budget:
        lo, hi = hi, 2.0 * hi
        W_hi = _fixed_mu(prob, hi)
        iterations += 1
        doublings += 1
        if doublings > _MAX_DOUBLINGS:
            raise BisectionFailure("could not bracket the power price")
    if abs(_trace(W_hi) - budget) < abs_tol:
        return W_hi, hi, iterations

    for _ in range(_MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        W_mid = _fixed_mu(prob, mid)
        iterations += 1
        tr = _trace(W_mid)
        if abs(tr - budget) < abs_tol:
            return W_mid, mid, iterations
        if tr > budget:
            lo = mid
        else:
            hi, W_hi = mid, W_mid
        if hi - lo < _WIDTH_TOL:
            return W_hi, hi, iterations
    raise BisectionFailure("bisection on the power price did not converge")


def solve_lbm(channels: ChannelSet, covs_hat: CovSet, bs: int, budget: float,
              tol: float = 1e-8, weights=None) -> LbmSolution:
    """Solve (LBM) for BS ``bs`` at the expansion point ``covs_hat``.

    The returned covariance is feasible, rank at most one, and maximizes the
    per-BS bound over all PSD matrices with trace at most ``budget``.
    """
    prob = LbmProblem.from_network(channels, covs_hat, bs, weights)
    W, mu, iters = solve_problem(prob, budget, tol)
    obj = per_bs_bound(channels, W[None], covs_hat, bs, weights)
    return LbmSolution(W_star=W, mu_star=mu, power_used=_trace(W), iterations=iters,
                       objective=obj)
