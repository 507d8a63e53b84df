"""Rates, interference, taxation terms and the per-user / per-BS lower bounds.

All rates are in bits/s/Hz.  Taxation terms carry the ``1/ln 2`` factor so
that ``T[q, j]`` is exactly the marginal rate loss of user ``(q, j)`` per
unit of additional received interference power.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from . import kernels
from .errors import StencilInfeasible
from .model import BeamSet, ChannelSet, CovSet, hermitian_part

LN2 = np.log(2.0)

User = Tuple[int, int]
Transmit = Union[BeamSet, CovSet]

__all__ = [
    "TaxationTable",
    "received_gains",
    "interference",
    "user_rate",
    "user_rates",
    "sum_rate",
    "taxation",
    "per_user_bound",
    "per_bs_bound",
    "per_bs_bound_beams",
    "directional_second_derivative",
]


@dataclass(frozen=True)
class TaxationTable:
    """Prices ``T[q, j] >= 0`` evaluated at the expansion point ``evaluated_at``."""

    T: np.ndarray
    evaluated_at: Transmit


def received_gains(channels: ChannelSet, x: Transmit) -> np.ndarray:
    """Received power of every stream at every user.

    ``G[q, j, m, i]`` is the power user ``(m, i)`` receives from the stream
    BS ``q`` sends to its user ``(q, j)``.
    """
    if isinstance(x, BeamSet):
        return kernels.gains_from_beams(channels.h, x.w)
    return kernels.gains_from_covs(channels.h, x.W)


def _rates(s, I):
    return np.log1p(s / I) / LN2


def _weights(channels: ChannelSet, weights) -> np.ndarray:
    if weights is None:
        return np.ones(channels.noise_power.shape)
    return np.broadcast_to(np.asarray(weights, dtype=float), channels.noise_power.shape)


def interference(channels: ChannelSet, covs: Transmit, user: User) -> float:
    """Interference plus noise at ``user`` (every other stream, all cells)."""
    _, I = kernels.signal_interference(received_gains(channels, covs), channels.noise_power)
    return float(I[user])


def user_rates(channels: ChannelSet, x: Transmit) -> np.ndarray:
    """Rates of all users, shape (M, N)."""
    s, I = kernels.signal_interference(received_gains(channels, x), channels.noise_power)
    return _rates(s, I)


def user_rate(channels: ChannelSet, covs: Transmit, user: User) -> float:
    return float(user_rates(channels, covs)[user])


def sum_rate(channels: ChannelSet, x: Transmit, weights=None) -> float:
    """Weighted sum of user rates (plain sum rate when ``weights`` is None)."""
    return float(np.sum(_weights(channels, weights) * user_rates(channels, x)))


def _tax_from(s, I, weights):
    return weights / LN2 * s / ((I + s) * I)


def taxation(channels: ChannelSet, covs_hat: Transmit, weights=None) -> TaxationTable:
    s, I = kernels.signal_interference(received_gains(channels, covs_hat), channels.noise_power)
    T = _tax_from(s, I, _weights(channels, weights))
    return TaxationTable(T, covs_hat)


class BoundContext:
    """Quantities of an expansion point reused by many bound evaluations."""

    def __init__(self, channels: ChannelSet, x_hat: Transmit, weights=None):
        self.channels = channels
        self.weights = _weights(channels, weights)
        self.G = received_gains(channels, x_hat)
        self.s, self.I = kernels.signal_interference(self.G, channels.noise_power)
        self.rates = _rates(self.s, self.I)
        self.T = _tax_from(self.s, self.I, self.weights)
        self.total = float(np.sum(self.weights * self.rates))

    def bs_bound(self, m: int, rows: np.ndarray) -> float:
        """Per-BS bound of BS ``m`` given the gains ``rows[i, q, j]`` of its new streams."""
        G_new = self.G.copy()
        G_new[m] = rows
        s, I = kernels.signal_interference(G_new, self.channels.noise_power)
        own = float(np.sum(self.weights[m] * _rates(s[m], I[m])))
        others = self.total - float(np.sum(self.weights[m] * self.rates[m]))
        delta = rows - self.G[m]
        mask = np.ones(self.T.shape, dtype=bool)
        mask[m] = False
        penalty = float(np.sum(delta[:, mask] * self.T[mask][None, :]))
        return own + others - penalty

    def user_bound(self, m: int, i: int, row: np.ndarray) -> float:
        """Per-user bound of ``(m, i)`` given the gains ``row[q, j]`` of its new stream."""
        G_new = self.G.copy()
        G_new[m, i] = row
        s, I = kernels.signal_interference(G_new, self.channels.noise_power)
        own = float(self.weights[m, i] * _rates(s[m, i], I[m, i]))
        others = self.total - float(self.weights[m, i] * self.rates[m, i])
        delta = row - self.G[m, i]
        delta[m, i] = 0.0
        penalty = float(np.sum(delta * self.T))
        return own + others - penalty


def _stream_gains(channels: ChannelSet, m: int, W: np.ndarray) -> np.ndarray:
    """Gains ``[q, j]`` of one covariance sent from BS ``m`` to every user."""
    hm = channels.h[m]  # (M, N, K): channels from BS m to each user
    return np.einsum("qja,ab,qjb->qj", np.conj(hm), W, hm).real


def per_user_bound(channels: ChannelSet, W_mi: np.ndarray, covs_hat: CovSet, user: User,
                   weights=None, context: Optional[BoundContext] = None) -> float:
    """Concave per-user lower bound of the sum rate in the covariance of ``user``.

    Other users' rates are linearized around ``covs_hat`` through the
    taxation terms; the bound touches the sum rate at ``W_mi = covs_hat[user]``.
    """
    ctx = context or BoundContext(channels, covs_hat, weights)
    m, i = user
    return ctx.user_bound(m, i, _stream_gains(channels, m, np.asarray(W_mi, dtype=complex)))


def per_bs_bound(channels: ChannelSet, W_m: np.ndarray, covs_hat: CovSet, bs: int,
                 weights=None, context: Optional[BoundContext] = None) -> float:
    """Per-BS lower bound: exact own-cell rates, other cells linearized."""
    ctx = context or BoundContext(channels, covs_hat, weights)
    W_m = np.asarray(W_m, dtype=complex)
    hm = channels.h[bs]
    rows = np.einsum("qja,iab,qjb->iqj", np.conj(hm), W_m, hm).real
    return ctx.bs_bound(bs, rows)


def per_bs_bound_beams(channels: ChannelSet, w_m: np.ndarray, beams_hat: BeamSet, bs: int,
                       weights=None, context: Optional[BoundContext] = None) -> float:
    """Beam-vector form of :func:`per_bs_bound`."""
    ctx = context or BoundContext(channels, beams_hat, weights)
    amp = np.einsum("qjk,ik->iqj", np.conj(channels.h[bs]), np.asarray(w_m, dtype=complex))
    return ctx.bs_bound(bs, amp.real ** 2 + amp.imag ** 2)


def directional_second_derivative(channels: ChannelSet, covs: CovSet, target_user: User,
                                  varied_user: User, direction: np.ndarray,
                                  step: Optional[float] = None, psd_tol: float = 1e-9) -> float:
    """Central second difference of one user's rate along a Hermitian direction.

    The covariance of ``varied_user`` is moved to ``W + t * direction`` for
    ``t`` in ``{-step, 0, step}``; the default step is ``1e-4 (1 + |W|_F)``.

    Raises
    ------
    StencilInfeasible
        If a stencil point is not PSD.
    """
    D = hermitian_part(np.asarray(direction, dtype=complex))
    W0 = covs.W[varied_user]
    if step is None:
        step = 1e-4 * (1.0 + np.linalg.norm(W0))
    values = []
    for t in (-step, 0.0, step):
        Wt = W0 + t * D
        scale = max(1.0, float(np.real(np.trace(W0))))
        if np.linalg.eigvalsh(hermitian_part(Wt))[0] < -psd_tol * scale:
            raise StencilInfeasible(f"W + {t:.3g} D leaves the PSD cone")
        values.append(user_rate(channels, covs.replace(*varied_user, Wt), target_user))
    return (values[0] - 2.0 * values[1] + values[2]) / step ** 2
