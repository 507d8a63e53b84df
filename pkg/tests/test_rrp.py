import numpy as np
import pytest

from cobeam.errors import NoDirection
from cobeam.rrp import find_direction, numerical_rank, psd_factor, reduce_step, reduce_to_rank_one

from oracles import random_psd


def _instance(rng, K, r):
    h = rng.standard_normal(K) + 1j * rng.standard_normal(K)
    H = np.outer(h, h.conj())
    A = random_psd(rng, K, rank=rng.integers(1, K + 1), trace=2.0)
    W = random_psd(rng, K, rank=r, trace=1.0)
    return W, H, A


def _invariants(W, H, A):
    return np.array([np.real(np.trace(H @ W)), np.real(np.trace(A @ W)), np.real(np.trace(W))])


def test_factor_reconstructs(rng):
    W = random_psd(rng, 4, rank=2)
    V = psd_factor(W)
    assert V.shape == (4, 2)
    assert np.allclose(V @ V.conj().T, W, atol=1e-12)
    assert numerical_rank(np.zeros((3, 3))) == 0


def test_direction_annihilates_constraints(rng):
    W, H, A = _instance(rng, 4, 3)
    V = psd_factor(W)
    D = find_direction(V, H, A)
    assert np.allclose(D, D.conj().T)
    assert np.linalg.norm(D) > 0.1
    Vh = V.conj().T
    for X in (H, A, np.eye(4)):
        assert abs(np.trace(D @ Vh @ X @ V)) < 1e-12


def test_no_direction_for_rank_one(rng):
    W, H, A = _instance(rng, 3, 1)
    assert find_direction(psd_factor(W), H, A) is None
    with pytest.raises(NoDirection):
        reduce_step(W, H, A)


def test_rank_two_has_direction(rng):
    # four real unknowns, three generic constraints: a direction exists
    W, H, A = _instance(rng, 3, 2)
    assert find_direction(psd_factor(W), H, A) is not None


@pytest.mark.parametrize("r", [2, 3, 4])
def test_reduction_conserves_and_terminates(rng, r):
    W, H, A = _instance(rng, 5, r)
    target = _invariants(W, H, A)
    W1, steps = reduce_to_rank_one(W, H, A, return_steps=True)
    assert numerical_rank(W1) == 1
    assert 1 <= len(steps) <= r - 1
    assert np.allclose(_invariants(W1, H, A), target, rtol=1e-9, atol=0)
    assert np.linalg.eigvalsh(W1)[0] > -1e-12


def test_each_step_drops_rank(rng):
    W, H, A = _instance(rng, 4, 4)
    rank = numerical_rank(W)
    while rank > 1:
        W, step = reduce_step(W, H, A, return_step=True)
        new_rank = numerical_rank(W)
        assert new_rank < rank
        # the step matrix I - D / lambda is PSD and singular
        lam = np.linalg.eigvalsh(np.eye(step.D.shape[0]) - step.D / step.lambda_max)
        assert lam[0] > -1e-10 and abs(lam[0]) < 1e-10
        rank = new_rank


def test_rank_one_input_unchanged(rng):
    W, H, A = _instance(rng, 3, 1)
    assert np.array_equal(reduce_to_rank_one(W, H, A), (W + W.conj().T) / 2)
