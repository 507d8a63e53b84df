"""Rank reduction of relaxed (R-LBM) solutions.

Each step writes ``W = V V^H`` and moves along a Hermitian direction ``D``
that leaves ``Tr(H W)``, ``Tr(A W)`` and ``Tr(W)`` unchanged, which keeps the
bound value and feasibility while dropping the rank by at least one.  Used
as an independent check on the closed-form rank-1 solver, not inside the
production loops.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .errors import NoDirection
from .model import hermitian_part

__all__ = ["ReductionStep", "find_direction", "reduce_step", "reduce_to_rank_one", "psd_factor"]

RANK_TOL = 1e-9


@dataclass(frozen=True)
class ReductionStep:
    V: np.ndarray
    D: np.ndarray
    lambda_max: float


def psd_factor(W: np.ndarray, tol: float = RANK_TOL) -> np.ndarray:
    """Factor ``V = U sqrt(diag(lam))`` over eigenvalues above ``tol * lam_max``."""
    lam, U = np.linalg.eigh(hermitian_part(np.asarray(W, dtype=complex)))
    top = lam[-1]
    if top <= 0:
        return np.zeros((W.shape[0], 0), dtype=complex)
    keep = lam > tol * top
    return U[:, keep] * np.sqrt(lam[keep])


def numerical_rank(W: np.ndarray, tol: float = RANK_TOL) -> int:
    return psd_factor(W, tol).shape[1]


def _hermitian_basis(r: int) -> List[np.ndarray]:
    """Real basis of r x r Hermitian matrices: r(r+1)/2 real, r(r-1)/2 imaginary."""
    basis = []
    for a in range(r):
        for b in range(a, r):
            E = np.zeros((r, r), dtype=complex)
            E[a, b] = E[b, a] = 1.0
            basis.append(E)
    for a in range(r):
        for b in range(a + 1, r):
            E = np.zeros((r, r), dtype=complex)
            E[a, b] = 1j
            E[b, a] = -1j
            basis.append(E)
    return basis


def find_direction(V: np.ndarray, H: np.ndarray, A: np.ndarray,
                   tol: float = 1e-12) -> Optional[np.ndarray]:
    """Nonzero Hermitian ``D`` with ``Tr(D V^H X V) = 0`` for ``X`` in ``{H, A, I}``.

    Returns ``None`` when only the zero matrix satisfies the three conditions.
    """
    r = V.shape[1]
    if r == 0:
        return None
    Vh = V.conj().T
    targets = [Vh @ H @ V, Vh @ A @ V, Vh @ V]
    basis = _hermitian_basis(r)
    C = np.array([[np.real(np.trace(E @ X)) for E in basis] for X in targets])
    _, sv, vt = np.linalg.svd(C)
    if r * r <= 3:
        scale = max(1.0, np.abs(C).max())
        if len(sv) == r * r and sv[-1] > tol * scale:
            return None
    coeffs = vt[-1]
    return hermitian_part(sum(c * E for c, E in zip(coeffs, basis)))


def _largest_magnitude_eig(D: np.ndarray) -> float:
    lam = np.linalg.eigvalsh(D)
    big = np.abs(lam).max()
    # ties between +lam and -lam resolve to the positive one
    candidates = lam[np.isclose(np.abs(lam), big, rtol=1e-12, atol=0.0)]
    return float(candidates.max())


def reduce_step(W: np.ndarray, H: np.ndarray, A: np.ndarray,
                return_step: bool = False):
    """One rank-reducing step ``W' = V (I - D / lambda(D)) V^H``.

    Raises
    ------
    NoDirection
        If no admissible direction exists (in particular for rank-1 input).
    """
    V = psd_factor(W)
    D = find_direction(V, H, A)
    if D is None:
        raise NoDirection(f"no rank-reducing direction for rank {V.shape[1]}")
    lam = _largest_magnitude_eig(D)
    r = V.shape[1]
    W_next = hermitian_part(V @ (np.eye(r) - D / lam) @ V.conj().T)
    if return_step:
        return W_next, ReductionStep(V=V, D=D, lambda_max=lam)
    return W_next


def reduce_to_rank_one(W: np.ndarray, H: np.ndarray, A: np.ndarray,
                       return_steps: bool = False):
    """Repeat :func:`reduce_step` until the numerical rank is one.

    Rank-1 (or zero) input is returned unchanged.
    """
    W = hermitian_part(np.asarray(W, dtype=complex))
    steps = []
    while numerical_rank(W) > 1:
        W, step = reduce_step(W, H, A, return_step=True)
        steps.append(step)
    if return_steps:
        return W, steps
    return W
