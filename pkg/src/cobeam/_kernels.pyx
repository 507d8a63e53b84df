# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; see ``_kernels_py`` for the reference semantics."""

import numpy as np


def gains_from_beams(const double complex[:, :, :, ::1] h,
                     const double complex[:, :, ::1] w):
    cdef Py_ssize_t M = h.shape[0], N = h.shape[2], K = h.shape[3]
    cdef Py_ssize_t q, j, m, i, k
    cdef double re, im, hr, hi, wr, wi
    out = np.empty((M, N, M, N), dtype=np.float64)
    cdef double[:, :, :, ::1] G = out
    for q in range(M):
        for j in range(N):
            for m in range(M):
                for i in range(N):
                    re = 0.0
                    im = 0.0
                    for k in range(K):
                        hr = h[q, m, i, k].real
                        hi = h[q, m, i, k].imag
                        wr = w[q, j, k].real
                        wi = w[q, j, k].imag
                        # conj(h) * w
                        re += hr * wr + hi * wi
                        im += hr * wi - hi * wr
                    G[q, j, m, i] = re * re + im * im
    return out


def gains_from_covs(const double complex[:, :, :, ::1] h,
                    const double complex[:, :, :, ::1] W):
    cdef Py_ssize_t M = h.shape[0], N = h.shape[2], K = h.shape[3]
    cdef Py_ssize_t q, j, m, i, a, b
    cdef double complex acc, row
    out = np.empty((M, N, M, N), dtype=np.float64)
    cdef double[:, :, :, ::1] G = out
    for q in range(M):
        for j in range(N):
            for m in range(M):
                for i in range(N):
                    acc = 0.0
                    for a in range(K):
                        row = 0.0
                        for b in range(K):
                            row = row + W[q, j, a, b] * h[q, m, i, b]
                        acc = acc + h[q, m, i, a].conjugate() * row
                    G[q, j, m, i] = acc.real
    return out


def signal_interference(const double[:, :, :, ::1] G, const double[:, ::1] noise):
    cdef Py_ssize_t M = noise.shape[0], N = noise.shape[1]
    cdef Py_ssize_t q, j, m, i
    cdef double acc
    s_arr = np.empty((M, N), dtype=np.float64)
    I_arr = np.empty((M, N), dtype=np.float64)
    cdef double[:, ::1] s = s_arr
    cdef double[:, ::1] I = I_arr
    for m in range(M):
        for i in range(N):
            acc = 0.0
            for q in range(M):
                for j in range(N):
                    if q != m or j != i:
                        acc += G[q, j, m, i]
            s[m, i] = G[m, i, m, i]
            I[m, i] = noise[m, i] + acc
    return s_arr, I_arr


def sbf_user_powers(double mu, const double[:, ::1] lam, const double[:, ::1] coef,
                    const double[::1] interf, const double[::1] scale, double rcond):
    cdef Py_ssize_t N = lam.shape[0], K = lam.shape[1]
    cdef Py_ssize_t i, k
    cdef double smax, smin, sk, u, cu, cuu, g, excess
    out = np.empty(N, dtype=np.float64)
    cdef double[::1] p = out
    for i in range(N):
        smax = scale[i] * (lam[i, 0] + mu)
        for k in range(1, K):
            sk = scale[i] * (lam[i, k] + mu)
            if sk > smax:
                smax = sk
        smin = smax
        for k in range(K):
            sk = scale[i] * (lam[i, k] + mu)
            if sk > rcond * smax and sk < smin:
                smin = sk
        # q / g^2 is invariant to rescaling 1/s, so work with u = smin / s <= 1
        cu = 0.0
        cuu = 0.0
        for k in range(K):
            sk = scale[i] * (lam[i, k] + mu)
            if sk > rcond * smax:
                u = smin / sk
                cu += coef[i, k] * u
                cuu += coef[i, k] * u * u
        g = cu / smin if smin > 0 else 0.0
        excess = g - interf[i]
        if cu > 0 and excess > 0:
            p[i] = excess * cuu / (cu * cu)
        else:
            p[i] = 0.0
    return out
