import numpy as np
import pytest

import cobeam.sbf as sbf
from cobeam.lbm import LbmProblem, solve_lbm
from cobeam.model import BeamSet, ChannelSet, NetworkConfig, beams_to_covs, random_beams
from cobeam.rates import LN2, BoundContext, per_bs_bound_beams, sum_rate
from cobeam.sbf import beta, build_M, fixed_point_residual, run_sbf, update_bs

from oracles import k2_grid_optimum, random_channels


def _beams(rng, M, N, K, power=1.0):
    cfg = NetworkConfig(M, N, K, power_budget=power)
    return random_beams(cfg, rng)


def test_beta_scalar_closed_form():
    # M = N = K = 1: M = ln2 * mu, g = |h|^2 / (ln2 mu), beta = sqrt(g - c) / g
    h, c, mu = 1.3 - 0.4j, 0.2, 0.7
    ch = ChannelSet(h=np.full((1, 1, 1, 1), h), noise_power=np.full((1, 1), c))
    b = BeamSet(np.ones((1, 1, 1)))
    g = abs(h) ** 2 / (LN2 * mu)
    assert beta(ch, mu, b, (0, 0)) == pytest.approx(np.sqrt(g - c) / g, rel=1e-13)
    assert beta(ch, 100.0, b, (0, 0)) == 0.0  # g below the noise floor


def test_build_M_excludes_own_user(rng):
    ch = random_channels(rng, 2, 2, 3)
    b = _beams(rng, 2, 2, 3)
    T = BoundContext(ch, b).T
    Mx = build_M(ch, 0.3, b, (1, 0))
    ref = 0.3 * np.eye(3, dtype=complex)
    for q in range(2):
        for j in range(2):
            if (q, j) != (1, 0):
                g = ch.h[1, q, j]
                ref += T[q, j] * np.outer(g, g.conj())
    assert np.allclose(Mx, LN2 * ref, rtol=1e-12)


def test_candidate_is_stationary_and_uses_budget(rng):
    ch = random_channels(rng, 3, 3, 3)
    b = _beams(rng, 3, 3, 3)
    for m in range(3):
        res = update_bs(ch, b, m, 1.0)
        power = np.sum(np.abs(res.candidate) ** 2)
        if res.mu > 0:
            assert power == pytest.approx(1.0, rel=1e-7)
        else:
            assert power <= 1.0 + 1e-8
        assert fixed_point_residual(ch, res.candidate, b, m, res.mu) < 1e-8


def test_budget_couples_users(rng):
    """Halving the budget raises the price and shrinks the total, not one user only."""
    ch = random_channels(rng, 2, 3, 3, noise=(1e-3, 1e-2))
    b = _beams(rng, 2, 3, 3)
    r1 = update_bs(ch, b, 0, 1.0)
    r2 = update_bs(ch, b, 0, 0.5)
    assert r2.mu > r1.mu
    assert np.sum(np.abs(r2.candidate) ** 2) == pytest.approx(0.5, rel=1e-7)


def test_guard_rejects_worse_candidate(rng, monkeypatch):
    ch = random_channels(rng, 2, 2, 2)
    b = _beams(rng, 2, 2, 2)
    monkeypatch.setattr(sbf, "candidate_beams", lambda *a, **k: (np.zeros((2, 2), complex), 1.0))
    res = update_bs(ch, b, 0, 1.0)
    assert not res.accepted
    assert res.bound_after < res.bound_before
    assert np.array_equal(res.beams, b.w[0])


def test_single_user_update_matches_lbm(rng):
    ch = random_channels(rng, 3, 1, 2)
    b = _beams(rng, 3, 1, 2)
    covs = beams_to_covs(b)
    for m in range(3):
        res = update_bs(ch, b, m, 1.0)
        sol = solve_lbm(ch, covs, m, 1.0)
        got = per_bs_bound_beams(ch, res.candidate, b, m)
        assert got == pytest.approx(sol.objective, rel=1e-7)
        # brute force over direction angle, phase and power
        prob = LbmProblem.from_network(ch, covs, m)
        const = sol.objective - (prob.rate_term(sol.W_star)
                                 - float(np.real(np.trace(prob.A @ sol.W_star))))
        grid = k2_grid_optimum(prob.h, prob.A, prob.interference, 1.0, 1.0) + const
        assert grid <= got + 1e-7
        assert got - grid < 1e-3


def test_run_sbf_monotone_feasible(rng):
    ch = random_channels(rng, 3, 3, 3)
    cfg = NetworkConfig(3, 3, 3)
    trace = run_sbf(ch, cfg, seed=4)
    assert np.all(np.diff(trace.sum_rates) >= -1e-9)
    assert trace.final_beams.is_feasible(cfg.power_budget, 1e-7)
    assert trace.info_units == trace.iterations
    assert trace.final_sum_rate == pytest.approx(sum_rate(ch, trace.final_beams), rel=1e-12)
    assert run_sbf(ch, cfg, seed=4) == trace


def test_rejected_updates_still_cost_a_unit(rng, monkeypatch):
    ch = random_channels(rng, 2, 2, 2)
    cfg = NetworkConfig(2, 2, 2, max_outer_iters=6)
    monkeypatch.setattr(sbf, "candidate_beams", lambda *a, **k: (np.zeros((2, 2), complex), 1.0))
    trace = run_sbf(ch, cfg, seed=0)
    assert not any(r.accepted for r in trace.records)
    assert trace.info_units == trace.iterations
    assert np.all(trace.sum_rates == trace.initial_sum_rate)


def test_inner_sweeps_option(rng):
    ch = random_channels(rng, 2, 2, 2)
    b = _beams(rng, 2, 2, 2)
    res = update_bs(ch, b, 0, 1.0, sweeps=2)
    assert np.sum(np.abs(res.candidate) ** 2) <= 1.0 + 1e-7


def test_zero_weight_user_gets_no_power(rng):
    ch = random_channels(rng, 2, 2, 2)
    b = _beams(rng, 2, 2, 2)
    weights = np.array([[1.0, 0.0], [1.0, 1.0]])
    res = update_bs(ch, b, 0, 1.0, weights=weights)
    assert np.all(res.candidate[1] == 0)
