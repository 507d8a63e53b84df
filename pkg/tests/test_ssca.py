import numpy as np
import pytest

from cobeam.errors import DimensionError, InfeasibleInit
from cobeam.model import CovSet, NetworkConfig
from cobeam.rates import sum_rate
from cobeam.ssca import kkt_residual, random_rank_one_covs, run_ssca

from oracles import random_channels


def test_single_cell_reaches_matched_filter_optimum(rng):
    ch = random_channels(rng, 1, 1, 4)
    cfg = NetworkConfig(1, 1, 4, power_budget=2.0)
    trace = run_ssca(ch, cfg, seed=1)
    h = ch.h[0, 0, 0]
    optimum = np.log2(1 + 2.0 * np.linalg.norm(h) ** 2 / ch.noise_power[0, 0])
    assert trace.sum_rates[1] == pytest.approx(optimum, rel=1e-8)
    assert trace.final_sum_rate == pytest.approx(optimum, rel=1e-8)
    assert trace.kkt_residual < 1e-9


def test_two_cells_single_antenna_is_kkt_point(rng):
    """K = 1: the fixed point satisfies the scalar KKT sign conditions in each power."""
    for _ in range(5):
        ch = random_channels(rng, 2, 1, 1, noise=(0.05, 0.5))
        cfg = NetworkConfig(2, 1, 1, stop_tol=1e-12, max_outer_iters=4000)
        trace = run_ssca(ch, cfg, seed=int(rng.integers(1000)))
        covs = trace.final_covs
        eps = 1e-6
        for m in range(2):
            p = float(np.real(covs.W[m, 0, 0, 0]))

            def rate(x):
                return sum_rate(ch, covs.replace(m, 0, np.array([[x]])))

            if p < eps:
                assert (rate(p + eps) - rate(p)) / eps <= 1e-4
            elif p > 1.0 - eps:
                assert (rate(p) - rate(p - eps)) / eps >= -1e-4
            else:
                assert abs((rate(p + eps) - rate(p - eps)) / (2 * eps)) <= 1e-4


def test_rates_nondecreasing_and_units(rng):
    ch = random_channels(rng, 3, 1, 3)
    cfg = NetworkConfig(3, 1, 3)
    trace = run_ssca(ch, cfg, seed=5)
    assert np.all(np.diff(trace.sum_rates) >= -1e-9)
    assert trace.info_units == trace.iterations
    assert [r.bs for r in trace.records[:6]] == [0, 1, 2, 0, 1, 2][:trace.iterations]
    assert trace.kkt_residual is not None and trace.kkt_residual < cfg.stop_tol


def test_final_point_is_feasible_rank_one(rng):
    ch = random_channels(rng, 2, 1, 4)
    cfg = NetworkConfig(2, 1, 4, power_budget=[1.0, 0.5])
    trace = run_ssca(ch, cfg, seed=0)
    covs = trace.final_covs
    assert covs.is_valid(cfg.power_budget)
    for m in range(2):
        lam = np.linalg.eigvalsh(covs.W[m, 0])
        assert lam[-2] <= 1e-8 * lam[-1]


def test_seed_determinism(rng):
    ch = random_channels(rng, 2, 1, 2)
    cfg = NetworkConfig(2, 1, 2)
    assert run_ssca(ch, cfg, seed=9) == run_ssca(ch, cfg, seed=9)


def test_random_init_is_feasible_rank_one():
    cfg = NetworkConfig(3, 1, 3, power_budget=2.0)
    covs = random_rank_one_covs(cfg, np.random.default_rng(0))
    assert np.allclose(covs.bs_power(), 2.0)
    assert all(np.linalg.matrix_rank(W, tol=1e-9) == 1 for W in covs.W[:, 0])


def test_rejects_multi_user_and_bad_init(rng):
    ch = random_channels(rng, 2, 2, 2)
    with pytest.raises(DimensionError):
        run_ssca(ch, NetworkConfig(2, 2, 2))
    ch = random_channels(rng, 1, 1, 2)
    with pytest.raises(InfeasibleInit):
        run_ssca(ch, NetworkConfig(1, 1, 2), init=CovSet(np.eye(2)[None, None] * 3))


def test_kkt_residual_positive_away_from_stationarity(rng):
    ch = random_channels(rng, 2, 1, 3)
    cfg = NetworkConfig(2, 1, 3)
    covs = random_rank_one_covs(cfg, np.random.default_rng(0))
    assert kkt_residual(ch, covs, cfg) > 1e-3
