"""Reference schemes: uncoordinated MF / ZF beams and a simultaneous-update ICBF variant."""

from __future__ import annotations

import time
from typing import Optional

import numpy as np

from .errors import DimensionError, RankError, ZeroChannel
from .model import (
    BeamSet,
    ChannelSet,
    IterationRecord,
    NetworkConfig,
    RunTrace,
    check_feasible_beams,
    random_beams,
    round_robin_converged,
)
from .rates import BoundContext, sum_rate
from .sbf import candidate_beams

__all__ = ["matched_filter", "zero_forcing", "run_icbf_variant"]


def matched_filter(channels: ChannelSet, config: NetworkConfig) -> BeamSet:
    """Each BS beams along its users' direct channels, budget split equally."""
    channels.check_config(config)
    direct = channels.direct_all()
    norms = np.linalg.norm(direct, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise ZeroChannel("a direct channel is identically zero")
    per_user = config.power_budget / config.users_per_cell
    return BeamSet(direct / norms * np.sqrt(per_user)[:, None, None])


def zero_forcing(channels: ChannelSet, config: NetworkConfig) -> BeamSet:
    """Per-cell zero forcing: pseudoinverse columns of the in-cell channel matrix.

    Only intra-cell interference is nulled; power is split equally.

    Raises
    ------
    DimensionError
        If a cell has more users than antennas.
    RankError
        If a cell's channel matrix is rank deficient.
    """
    channels.check_config(config)
    M, N, K = config.shape
    if N > K:
        raise DimensionError(f"zero forcing needs N <= K, got N={N}, K={K}")
    w = np.zeros((M, N, K), dtype=complex)
    per_user = config.power_budget / N
    for m in range(M):
        Hc = np.conj(channels.h[m, m])  # rows h^H of the in-cell users
        sv = np.linalg.svd(Hc, compute_uv=False)
        if sv[-1] <= 1e-12 * max(sv[0], 1e-300):
            raise RankError(f"in-cell channel matrix of BS {m} is rank deficient")
        P = np.linalg.pinv(Hc)  # (K, N), Hc @ P = I
        cols = P.T
        cols = cols / np.linalg.norm(cols, axis=-1, keepdims=True)
        w[m] = cols * np.sqrt(per_user[m])
    return BeamSet(w)


def run_icbf_variant(channels: ChannelSet, config: NetworkConfig,
                     init: Optional[BeamSet] = None, seed=None) -> RunTrace:
    """All BSs update at once from the same closed form as S-BF, without a guard.

    Each outer iteration runs ``config.icbf_inner_iters`` simultaneous passes
    and costs M information units.  The stop test is the same as for the
    sequential schemes, ``|R(t+1) - R(t+1-M)| < stop_tol`` over outer
    iterations.  The rate sequence need not be monotone.
    """
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
        for _ in range(config.icbf_inner_iters):
            ctx = BoundContext(channels, beams, weights)
            w = np.empty_like(beams.w)
            for m in range(M):
                w[m], _ = candidate_beams(channels, ctx, m, config.power_budget[m],
                                          config.bisection_tol)
            beams = BeamSet(w)
        rates.append(sum_rate(channels, beams, weights))
        records.append(IterationRecord(iteration=t, bs=-1, sum_rate=rates[-1],
                                       bound=None, info_units=M,
                                       wall_time=time.perf_counter() - start))
        if round_robin_converged(rates, M, config.stop_tol):
            converged = True
            break
    return RunTrace(algorithm="icbf", records=tuple(records), initial_sum_rate=rates[0],
                    converged=converged, final_beams=beams)
