"""Domain types shared by every solver: configuration, channels, beams, covariances.

Users are addressed by the pair ``(m, i)`` (cell ``m``, user ``i``) and every
per-user array is laid out row-major over that pair, i.e. ``array[m, i, ...]``.
Channels carry one extra leading axis for the transmitting BS:
``h[q, m, i]`` is the length-K channel from BS ``q`` to user ``(m, i)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DimensionError, InfeasibleInit, RankError

__all__ = [
    "NetworkConfig",
    "ChannelSet",
    "BeamSet",
    "CovSet",
    "beams_to_covs",
    "cov_to_beam",
    "hermitian_part",
    "random_beams",
    "check_feasible_beams",
    "check_feasible_covs",
    "IterationRecord",
    "RunTrace",
    "round_robin_converged",
]


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


def hermitian_part(X: np.ndarray) -> np.ndarray:
    """Return ``(X + X^H) / 2`` over the last two axes."""
    return 0.5 * (X + np.conj(np.swapaxes(X, -1, -2)))


@dataclass(frozen=True)
class NetworkConfig:
    """Sizes, budgets and algorithm tolerances of a coordinated cluster.

    ``power_budget`` may be given as a scalar (same budget at every BS) or as
    a length-M sequence.  ``bisection_tol`` is relative to each BS budget.
    """

    num_coordinated_bs: int
    users_per_cell: int
    antennas_per_bs: int
    power_budget: Union[float, Sequence[float], np.ndarray] = 1.0
    user_weights: Optional[np.ndarray] = None
    stop_tol: float = 1e-2
    max_outer_iters: int = 500
    bisection_tol: float = 1e-8
    psd_tol: float = 1e-9
    icbf_inner_iters: int = 3
    sbf_inner_sweeps: int = 0

    def __post_init__(self):
        M, N, K = self.num_coordinated_bs, self.users_per_cell, self.antennas_per_bs
        for name, val in (("num_coordinated_bs", M), ("users_per_cell", N),
                          ("antennas_per_bs", K)):
            if int(val) != val or val < 1:
                raise ValueError(f"{name} must be an integer >= 1, got {val!r}")
        budget = np.broadcast_to(np.asarray(self.power_budget, dtype=float), (M,))
        if np.any(budget <= 0) or not np.all(np.isfinite(budget)):
            raise ValueError("power budgets must be finite and strictly positive")
        object.__setattr__(self, "power_budget", _frozen(budget))

        if self.user_weights is None:
            weights = np.ones((M, N))
        else:
            weights = np.asarray(self.user_weights, dtype=float)
            if weights.shape != (M, N):
                raise DimensionError(f"user_weights must have shape {(M, N)}, got {weights.shape}")
        if np.any(weights < 0):
            raise ValueError("user weights must be nonnegative")
        object.__setattr__(self, "user_weights", _frozen(weights))

        for name in ("stop_tol", "bisection_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.psd_tol < 0:
            raise ValueError("psd_tol must be >= 0")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be >= 1")
        if self.icbf_inner_iters < 1:
            raise ValueError("icbf_inner_iters must be >= 1")
        if self.sbf_inner_sweeps < 0:
            raise ValueError("sbf_inner_sweeps must be >= 0")

    @property
    def shape(self) -> tuple:
        return (self.num_coordinated_bs, self.users_per_cell, self.antennas_per_bs)


@dataclass(frozen=True)
class ChannelSet:
    """All cross links of the cluster plus per-user noise powers.

    Parameters
    ----------
    h : complex array, shape (M, M, N, K)
        ``h[q, m, i]`` is the channel from BS ``q`` to user ``(m, i)``.
    noise_power : real array, shape (M, N)
        Noise (plus uncoordinated interference) power ``c[m, i] > 0``.
    """

    h: np.ndarray
    noise_power: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.h, dtype=complex)
        noise = np.asarray(self.noise_power, dtype=float)
        if h.ndim != 4 or h.shape[0] != h.shape[1]:
            raise DimensionError(f"h must have shape (M, M, N, K), got {h.shape}")
        if noise.shape != h.shape[1:3]:
            raise DimensionError(f"noise_power must have shape {h.shape[1:3]}, got {noise.shape}")
        if np.any(noise <= 0) or not np.all(np.isfinite(noise)):
            raise ValueError("noise powers must be finite and strictly positive")
        if not np.all(np.isfinite(h)):
            raise ValueError("channels must be finite")
        object.__setattr__(self, "h", _frozen(np.ascontiguousarray(h)))
        object.__setattr__(self, "noise_power", _frozen(noise))

    @property
    def num_bs(self) -> int:
        return self.h.shape[0]

    @property
    def users_per_cell(self) -> int:
        return self.h.shape[2]

    @property
    def antennas(self) -> int:
        return self.h.shape[3]

    def direct(self, m: int, i: int) -> np.ndarray:
        """Channel from BS ``m`` to its own user ``(m, i)``."""
        return self.h[m, m, i]

    def direct_all(self) -> np.ndarray:
        """Direct channels stacked as shape (M, N, K)."""
        M = self.num_bs
        return self.h[np.arange(M), np.arange(M)]

    def check_config(self, config: NetworkConfig) -> None:
        expected = (config.num_coordinated_bs, config.num_coordinated_bs,
                    config.users_per_cell, config.antennas_per_bs)
        if self.h.shape != expected:
            raise DimensionError(f"channels have shape {self.h.shape}, config expects {expected}")


@dataclass(frozen=True)
class BeamSet:
    """One beam vector per user, ``w[m, i]`` of length K."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=complex)
        if w.ndim != 3:
            raise DimensionError(f"w must have shape (M, N, K), got {w.shape}")
        object.__setattr__(self, "w", _frozen(np.ascontiguousarray(w)))

    def bs_power(self) -> np.ndarray:
        """Total transmit power of each BS, shape (M,)."""
        return np.sum(np.abs(self.w) ** 2, axis=(1, 2))

    def is_feasible(self, budget, tol: float = 1e-9) -> bool:
        budget = np.asarray(budget, dtype=float)
        return bool(np.all(self.bs_power() <= budget * (1 + tol) + tol))

    def replace_bs(self, m: int, w_m: np.ndarray) -> "BeamSet":
        w = np.array(self.w)
        w[m] = w_m
        return BeamSet(w)


@dataclass(frozen=True)
class CovSet:
    """One Hermitian PSD transmit covariance per user, ``W[m, i]`` of shape (K, K)."""

    W: np.ndarray

    def __post_init__(self):
        W = np.asarray(self.W, dtype=complex)
        if W.ndim != 4 or W.shape[-1] != W.shape[-2]:
            raise DimensionError(f"W must have shape (M, N, K, K), got {W.shape}")
        object.__setattr__(self, "W", _frozen(np.ascontiguousarray(W)))

    def bs_power(self) -> np.ndarray:
        return np.real(np.trace(self.W, axis1=-2, axis2=-1)).sum(axis=1)

    def violations(self, budget, psd_tol: float = 1e-9) -> list:
        """Describe every invariant violation; an empty list means valid.

        Tolerances are relative to ``max(1, Tr(W))`` per matrix.
        """
        problems = []
        budget = np.broadcast_to(np.asarray(budget, dtype=float), self.W.shape[:1])
        M, N = self.W.shape[:2]
        for m in range(M):
            for i in range(N):
                W = self.W[m, i]
                scale = max(1.0, float(np.real(np.trace(W))))
                asym = np.linalg.norm(W - W.conj().T)
                if asym > psd_tol * scale:
                    problems.append(f"W[{m},{i}] not Hermitian (|W-W^H|_F={asym:.3g})")
                lam_min = np.linalg.eigvalsh(hermitian_part(W))[0]
                if lam_min < -psd_tol * scale:
                    problems.append(f"W[{m},{i}] not PSD (min eig {lam_min:.3g})")
        power = self.bs_power()
        for m in range(M):
            if power[m] > budget[m] + psd_tol * max(1.0, budget[m]):
                problems.append(f"BS {m} trace {power[m]:.6g} exceeds budget {budget[m]:.6g}")
        return problems

    def is_valid(self, budget, psd_tol: float = 1e-9) -> bool:
        return not self.violations(budget, psd_tol)

    def replace(self, m: int, i: int, W_mi: np.ndarray) -> "CovSet":
        W = np.array(self.W)
        W[m, i] = W_mi
        return CovSet(W)

    def replace_bs(self, m: int, W_m: np.ndarray) -> "CovSet":
        W = np.array(self.W)
        W[m] = W_m
        return CovSet(W)


def beams_to_covs(beams: BeamSet) -> CovSet:
    """Outer products ``W[m, i] = w[m, i] w[m, i]^H``."""
    w = beams.w
    return CovSet(w[..., :, None] * np.conj(w[..., None, :]))


def cov_to_beam(W: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Extract the rank-1 factor ``v`` with ``v v^H = W``.

    The result satisfies ``||v||^2 = Tr(W)`` and its first non-negligible
    entry is real and nonnegative.

    Raises
    ------
    RankError
        If the second eigenvalue exceeds ``tol`` times the first.
    """
    W = hermitian_part(np.asarray(W, dtype=complex))
    K = W.shape[0]
    lam, U = np.linalg.eigh(W)
    top = lam[-1]
    if top <= 0:
        if np.any(np.abs(lam) > tol * max(1.0, np.abs(lam).max())):
            raise RankError("matrix is not PSD")
        return np.zeros(K, dtype=complex)
    if K > 1 and lam[-2] > tol * top:
        raise RankError(f"numerical rank > 1 (lambda2/lambda1 = {lam[-2] / top:.3g})")
    trace = float(np.real(np.trace(W)))
    v = U[:, -1] * np.sqrt(max(trace, 0.0))
    return _fix_phase(v)


def _fix_phase(v: np.ndarray) -> np.ndarray:
    mag = np.abs(v)
    if mag.max() == 0:
        return v
    k = int(np.argmax(mag > 1e-12 * mag.max()))
    return v * (np.conj(v[k]) / mag[k])


def random_beams(config: NetworkConfig, rng: np.random.Generator,
                 full_power: bool = True) -> BeamSet:
    """Random feasible beams: directions uniform on the complex unit sphere.

    With ``full_power`` each BS splits its budget equally over its users.
    """
    M, N, K = config.shape
    z = rng.standard_normal((M, N, K)) + 1j * rng.standard_normal((M, N, K))
    z /= np.linalg.norm(z, axis=-1, keepdims=True)
    per_user = config.power_budget / N
    if not full_power:
        per_user = per_user * rng.uniform(size=(M, 1))
    return BeamSet(z * np.sqrt(per_user)[:, None, None] * np.ones((M, N, 1)))


def check_feasible_beams(beams: BeamSet, config: NetworkConfig) -> None:
    if beams.w.shape != config.shape:
        raise DimensionError(f"beams have shape {beams.w.shape}, config expects {config.shape}")
    if not beams.is_feasible(config.power_budget, config.psd_tol):
        raise InfeasibleInit(f"initial beams exceed power budgets: {beams.bs_power()}")


def check_feasible_covs(covs: CovSet, config: NetworkConfig) -> None:
    M, N, K = config.shape
    if covs.W.shape != (M, N, K, K):
        raise DimensionError(f"covariances have shape {covs.W.shape}, config expects {(M, N, K, K)}")
    problems = covs.violations(config.power_budget, config.psd_tol)
    if problems:
        raise InfeasibleInit("; ".join(problems))


@dataclass(frozen=True)
class IterationRecord:
    """One outer iteration of a coordination algorithm.

    ``bs`` is the updating BS, or -1 when all BSs update simultaneously.
    ``wall_time`` is excluded from equality so that reruns compare equal.
    """

    iteration: int
    bs: int
    sum_rate: float
    bound: Optional[float]
    info_units: int
    accepted: bool = True
    wall_time: float = field(default=0.0, compare=False)


@dataclass(frozen=True)
class RunTrace:
    """Per-iteration history and final point of one algorithm run.

    ``initial_sum_rate`` is the rate of the starting point, so the full rate
    sequence is ``[initial_sum_rate] + [r.sum_rate for r in records]``.
    """

    algorithm: str
    records: tuple
    initial_sum_rate: float
    converged: bool
    kkt_residual: Optional[float] = None
    final_covs: Optional[CovSet] = field(default=None, compare=False)
    final_beams: Optional[BeamSet] = field(default=None, compare=False)

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def sum_rates(self) -> np.ndarray:
        return np.array([self.initial_sum_rate] + [r.sum_rate for r in self.records])

    @property
    def final_sum_rate(self) -> float:
        return float(self.sum_rates[-1])

    @property
    def info_units(self) -> int:
        return int(sum(r.info_units for r in self.records))


def round_robin_converged(rates: list, num_bs: int, tol: float) -> bool:
    """Stop test ``|R(t+1) - R(t+1-M)| < tol`` on the rate history ``rates``.

    ``rates[0]`` is the initial point, so a full round must have elapsed.
    """
    if len(rates) <= num_bs:
        return False
    return abs(rates[-1] - rates[-1 - num_bs]) < tol
