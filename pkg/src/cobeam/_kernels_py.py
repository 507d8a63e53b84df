"""Pure-numpy implementations of the hot kernels.

Signatures mirror the compiled ``_kernels`` extension exactly; the two are
checked against each other in the test suite.
"""

import numpy as np


def gains_from_beams(h, w):
    """``G[q, j, m, i] = |h[q, m, i]^H w[q, j]|^2``."""
    amp = np.einsum("qmik,qjk->qjmi", np.conj(h), w)
    return amp.real ** 2 + amp.imag ** 2


def gains_from_covs(h, W):
    """``G[q, j, m, i] = Re(h[q, m, i]^H W[q, j] h[q, m, i])``."""
    return np.einsum("qmia,qjab,qmib->qjmi", np.conj(h), W, h).real


def signal_interference(G, noise):
    """Split received powers into own signal and interference-plus-noise.

    Returns ``(s, I)`` of shape (M, N) where ``s[m, i] = G[m, i, m, i]`` and
    ``I[m, i] = noise[m, i] + sum over (q, j) != (m, i) of G[q, j, m, i]``.
    """
    M, N = noise.shape
    flat = G.reshape(M * N, M * N)
    s = np.diagonal(flat).copy()
    # exact exclusion of the diagonal avoids cancellation when s >> I
    off = flat.copy()
    np.fill_diagonal(off, 0.0)
    cross = off.sum(axis=0)
    return s.reshape(M, N), noise + cross.reshape(M, N)


def sbf_user_powers(mu, lam, coef, interf, scale, rcond):
    """Per-user power of the closed-form beam update at multiplier ``mu``.

    ``lam[i]``/``coef[i]`` are the eigenvalues of user i's penalty matrix and
    the squared projections of its direct channel on the eigenvectors; the
    pseudoinverse drops eigenvalues below ``rcond`` times the largest.
    """
    s = scale[:, None] * (lam + mu)
    smax = s.max(axis=1, keepdims=True)
    keep = s > rcond * smax
    # q / g^2 is invariant to rescaling 1/s, so work with u = s_min / s <= 1
    smin = np.where(keep, s, np.inf).min(axis=1, keepdims=True)
    u = np.where(keep, smin / np.where(keep, s, 1.0), 0.0)
    cu = np.sum(coef * u, axis=1)
    cuu = np.sum(coef * u * u, axis=1)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        g = cu / smin[:, 0]
        excess = np.maximum(g - interf, 0.0)
        p = np.where((cu > 0) & (excess > 0), excess * cuu / (cu * cu), 0.0)
    return p
