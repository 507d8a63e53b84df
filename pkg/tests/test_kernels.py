import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cobeam import _kernels_py, kernels

compiled = pytest.importorskip("cobeam._kernels")


def _cplx(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(1, 3), st.integers(1, 5), st.integers(0, 2 ** 32 - 1))
def test_gain_kernels_agree(M, N, K, seed):
    rng = np.random.default_rng(seed)
    h = _cplx(rng, (M, M, N, K))
    w = _cplx(rng, (M, N, K))
    assert np.allclose(compiled.gains_from_beams(h, w), _kernels_py.gains_from_beams(h, w),
                       rtol=1e-12, atol=1e-14)
    X = _cplx(rng, (M, N, K, K))
    W = X @ np.conj(np.swapaxes(X, -1, -2))
    assert np.allclose(compiled.gains_from_covs(h, W), _kernels_py.gains_from_covs(h, W),
                       rtol=1e-12, atol=1e-12)
    G = _kernels_py.gains_from_beams(h, w)
    noise = rng.uniform(0.1, 1.0, (M, N))
    for a, b in zip(compiled.signal_interference(G, noise),
                    _kernels_py.signal_interference(G, noise)):
        assert np.allclose(a, b, rtol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 5), st.floats(0.0, 10.0), st.integers(0, 2 ** 32 - 1))
def test_power_kernel_agrees(N, K, mu, seed):
    rng = np.random.default_rng(seed)
    lam = rng.uniform(0, 2, (N, K))
    lam[:, 0] = 0.0  # rank-deficient penalties exercise the pseudoinverse cut
    coef = rng.uniform(0, 3, (N, K))
    interf = rng.uniform(0.01, 1.0, N)
    scale = rng.uniform(0.5, 2.0, N)
    a = compiled.sbf_user_powers(mu, lam, coef, interf, scale, 1e-12)
    b = _kernels_py.sbf_user_powers(mu, lam, coef, interf, scale, 1e-12)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-300)
    assert np.all(a >= 0)


def test_signal_excludes_self_exactly():
    G = np.zeros((1, 2, 1, 2))
    G[0, 0, 0, 0] = 5.0  # own stream of user (0, 0)
    G[0, 1, 0, 0] = 1e-20
    s, I = kernels.signal_interference(G, np.ones((1, 2)))
    assert s[0, 0] == 5.0 and I[0, 0] == 1.0 + 1e-20


def test_backend_reported():
    assert kernels.BACKEND in ("compiled", "python")
