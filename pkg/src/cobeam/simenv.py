"""Hexagonal multi-cell topology, path loss with log-normal shadowing, channel draws.

Layouts (ISD = inter-site distance, sites on a hexagonal lattice):

* M = 4: a 2x2 rhombus of coordinated sites plus the 10 lattice sites adjacent
  to it, 14 BSs in total.
* M = 9: the 19-site two-ring hexagon; the 9 sites nearest the centre (centre,
  first ring, and the two second-ring sites at distance sqrt(3) ISD with the
  smallest polar angle) are coordinated.
* any other M: the M sites nearest the origin (ties by polar angle) plus every
  site adjacent to one of them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .model import ChannelSet

__all__ = [
    "Topology",
    "FadingParams",
    "generate_topology",
    "hex_layout",
    "sample_channels",
    "seed_sequence",
    "snapshot",
    "load_snapshot",
]

_U = np.array([1.0, 0.0])
_V = np.array([0.5, np.sqrt(3) / 2])


def seed_sequence(seed, *keys) -> np.random.SeedSequence:
    """Independent stream for ``(seed, *keys)``; integer keys only."""
    return np.random.SeedSequence([int(seed)] + [int(k) for k in keys])


@dataclass(frozen=True)
class FadingParams:
    pathloss_ref_distance: float = 200.0
    pathloss_exponent: float = 3.5
    shadowing_std_db: float = 8.0
    snr_db: float = 10.0
    power_budget: float = 1.0

    def __post_init__(self):
        if not self.pathloss_exponent > 2:
            raise ValueError("path loss exponent must exceed 2")
        if self.shadowing_std_db < 0:
            raise ValueError("shadowing standard deviation must be >= 0")
        if not self.pathloss_ref_distance > 0 or not self.power_budget > 0:
            raise ValueError("reference distance and power budget must be positive")

    @property
    def thermal_noise(self) -> float:
        """``sigma^2`` such that ``SNR = 10 log10(p / sigma^2)``."""
        return self.power_budget / 10.0 ** (self.snr_db / 10.0)


@dataclass(frozen=True)
class Topology:
    bs_positions: np.ndarray      # (|W|, 2)
    coordinated_set: tuple        # indices into bs_positions, length M
    user_positions: np.ndarray    # (M, N, 2)
    inter_site_distance: float
    annulus: tuple = (200.0, 1000.0)

    @property
    def num_coordinated(self) -> int:
        return len(self.coordinated_set)

    @property
    def uncoordinated_set(self) -> tuple:
        return tuple(k for k in range(len(self.bs_positions)) if k not in self.coordinated_set)

    def distances(self) -> np.ndarray:
        """Distance from every BS to every user, shape (|W|, M, N)."""
        diff = self.bs_positions[:, None, None, :] - self.user_positions[None]
        return np.linalg.norm(diff, axis=-1)


def _lattice(radius: int) -> np.ndarray:
    pts = []
    for a in range(-radius, radius + 1):
        for b in range(-radius, radius + 1):
            if max(abs(a), abs(b), abs(a + b)) <= radius:
                pts.append(a * _U + b * _V)
    return np.array(pts)


def _sort_key(p):
    return (round(float(np.hypot(*p)), 9), round(float(np.arctan2(p[1], p[0]) % (2 * np.pi)), 9))


def _neighbours_of(core: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    d = np.linalg.norm(candidates[:, None, :] - core[None], axis=-1)
    return candidates[np.any(np.isclose(d, 1.0), axis=1)]


def _dedupe(points: np.ndarray) -> list:
    out = []
    for p in points:
        if not any(np.allclose(p, q) for q in out):
            out.append(p)
    return out


def hex_layout(num_coordinated: int) -> tuple:
    """Unit-ISD site positions and the indices of the coordinated sites."""
    if num_coordinated == 4:
        core = np.array([0 * _U, _U, _V, _U + _V])
        core = core - core.mean(axis=0)
        lattice = _lattice(4) - (_U + _V) / 2
        ring = sorted(_dedupe([p for p in _neighbours_of(core, lattice)
                               if not any(np.allclose(p, c) for c in core)]), key=_sort_key)
        sites = list(core) + ring
    elif num_coordinated == 9:
        sites = sorted(_lattice(2), key=_sort_key)
    else:
        lattice = sorted(_lattice(int(np.ceil(np.sqrt(num_coordinated))) + 2), key=_sort_key)
        core = np.array(lattice[:num_coordinated])
        ring = sorted(_dedupe([p for p in _neighbours_of(core, np.array(lattice))
                               if not any(np.allclose(p, c) for c in core)]), key=_sort_key)
        sites = list(core) + ring
    return np.array(sites), tuple(range(num_coordinated))


def generate_topology(num_coordinated: int, users_per_cell: int, seed=None,
                      inter_site_distance: float = 2000.0,
                      annulus: Sequence[float] = (200.0, 1000.0)) -> Topology:
    """Place BSs on the hexagonal layout and drop users uniformly (by area) in an annulus."""
    d_min, d_max = (float(x) for x in annulus)
    if not 0 < d_min <= d_max:
        raise ValueError("annulus must satisfy 0 < d_min <= d_max")
    sites, coord = hex_layout(num_coordinated)
    bs = sites * inter_site_distance
    rng = np.random.default_rng(seed)
    r = np.sqrt(rng.uniform(d_min ** 2, d_max ** 2, size=(num_coordinated, users_per_cell)))
    theta = rng.uniform(0.0, 2 * np.pi, size=(num_coordinated, users_per_cell))
    centres = bs[list(coord)]
    users = centres[:, None, :] + np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)
    return Topology(bs_positions=bs, coordinated_set=coord, user_positions=users,
                    inter_site_distance=float(inter_site_distance), annulus=(d_min, d_max))


def link_variances(topology: Topology, fading: FadingParams, rng: np.random.Generator) -> np.ndarray:
    """Path loss times shadowing for every BS-user link, shape (|W|, M, N)."""
    d = topology.distances()
    shadow_db = rng.normal(0.0, fading.shadowing_std_db, size=d.shape)
    return (fading.pathloss_ref_distance / d) ** fading.pathloss_exponent * 10.0 ** (shadow_db / 10.0)


def sample_channels(topology: Topology, fading: FadingParams, antennas: int, seed=None) -> ChannelSet:
    """Rayleigh channels with per-link variance ``(d0/d)^alpha L`` per complex entry.

    Uncoordinated BSs transmit at full power and count as noise.  Random draws
    do not depend on ``fading.snr_db``, so one seed gives the same fading at
    every SNR point.
    """
    rng = np.random.default_rng(seed)
    var = link_variances(topology, fading, rng)
    coord = list(topology.coordinated_set)
    M, N = topology.user_positions.shape[:2]
    z = rng.standard_normal((M, M, N, antennas)) + 1j * rng.standard_normal((M, M, N, antennas))
    h = z * np.sqrt(var[coord][..., None] / 2.0)
    others = list(topology.uncoordinated_set)
    noise = fading.thermal_noise + fading.power_budget * var[others].sum(axis=0)
    return ChannelSet(h=h, noise_power=noise)


def _complex_to_json(a: np.ndarray):
    return np.stack([a.real, a.imag], axis=-1).tolist()


def snapshot(topology: Topology, channels: Optional[ChannelSet] = None) -> str:
    """Serialize a topology (and optionally its channels) to a JSON document."""
    doc = {
        "schema_version": 1,
        "topology": {
            "bs_positions": topology.bs_positions.tolist(),
            "coordinated_set": list(topology.coordinated_set),
            "user_positions": topology.user_positions.tolist(),
            "inter_site_distance": topology.inter_site_distance,
            "annulus": list(topology.annulus),
        },
    }
    if channels is not None:
        doc["channels"] = {
            "h": _complex_to_json(channels.h),
            "noise_power": channels.noise_power.tolist(),
        }
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def load_snapshot(text: str) -> tuple:
    """Inverse of :func:`snapshot`; returns ``(topology, channels or None)``."""
    doc = json.loads(text)
    t = doc["topology"]
    topo = Topology(bs_positions=np.array(t["bs_positions"], dtype=float),
                    coordinated_set=tuple(t["coordinated_set"]),
                    user_positions=np.array(t["user_positions"], dtype=float),
                    inter_site_distance=float(t["inter_site_distance"]),
                    annulus=tuple(t["annulus"]))
    channels = None
    if "channels" in doc:
        raw = np.array(doc["channels"]["h"], dtype=float)
        channels = ChannelSet(h=raw[..., 0] + 1j * raw[..., 1],
                              noise_power=np.array(doc["channels"]["noise_power"]))
    return topo, channels
