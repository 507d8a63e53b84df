import numpy as np
import pytest

from cobeam.simenv import (
    FadingParams,
    Topology,
    generate_topology,
    hex_layout,
    load_snapshot,
    sample_channels,
    seed_sequence,
    snapshot,
)
from cobeam.simenv import link_variances


def _pairwise(points):
    d = np.linalg.norm(points[:, None] - points[None], axis=-1)
    return d[np.triu_indices(len(points), 1)]


@pytest.mark.parametrize("M,total", [(4, 14), (9, 19), (1, 7), (3, 12)])
def test_layout_sizes(M, total):
    sites, coord = hex_layout(M)
    assert len(sites) == total
    assert coord == tuple(range(M))
    # every site sits on the unit lattice: nearest neighbour distance is 1
    assert _pairwise(sites).min() == pytest.approx(1.0)


def test_coordinated_pair_distance_is_isd():
    topo = generate_topology(4, 2, seed=0)
    coord = topo.bs_positions[list(topo.coordinated_set)]
    assert _pairwise(coord).min() == pytest.approx(2000.0)
    assert len(topo.bs_positions) == 14
    assert len(topo.uncoordinated_set) == 10


def test_users_in_annulus():
    for annulus in ((200.0, 1000.0), (200.0, 300.0)):
        topo = generate_topology(9, 20, seed=1, annulus=annulus)
        d = topo.distances()
        own = np.array([d[m, m] for m in range(9)])
        assert own.min() >= annulus[0] - 1e-9 and own.max() <= annulus[1] + 1e-9


def test_radius_area_uniform():
    topo = generate_topology(1, 20000, seed=2, annulus=(200.0, 1000.0))
    r = topo.distances()[0, 0]
    # P(r <= x) = (x^2 - a^2) / (b^2 - a^2); median at sqrt((a^2 + b^2) / 2)
    assert np.median(r) == pytest.approx(np.sqrt((200 ** 2 + 1000 ** 2) / 2), rel=0.02)


def test_topology_determinism():
    a = generate_topology(4, 3, seed=seed_sequence(5, 0, 0))
    b = generate_topology(4, 3, seed=seed_sequence(5, 0, 0))
    c = generate_topology(4, 3, seed=seed_sequence(5, 1, 0))
    assert np.array_equal(a.user_positions, b.user_positions)
    assert not np.array_equal(a.user_positions, c.user_positions)


def _single_link(distance):
    return Topology(bs_positions=np.zeros((1, 2)), coordinated_set=(0,),
                    user_positions=np.array([[[distance, 0.0]]]), inter_site_distance=2000.0)


def test_reference_distance_unit_variance():
    fading = FadingParams(shadowing_std_db=0.0)
    var = link_variances(_single_link(200.0), fading, np.random.default_rng(0))
    assert var[0, 0, 0] == pytest.approx(1.0)


def test_empirical_entry_variance():
    fading = FadingParams(shadowing_std_db=0.0)
    ch = sample_channels(_single_link(350.0), fading, antennas=100000, seed=3)
    h = ch.h[0, 0, 0]
    expected = (200.0 / 350.0) ** 3.5
    assert np.mean(np.abs(h) ** 2) == pytest.approx(expected, rel=0.02)
    # circular symmetry: real and imaginary parts carry half each
    assert np.var(h.real) == pytest.approx(expected / 2, rel=0.03)
    assert abs(np.mean(h)) < 0.02 * np.sqrt(expected)


def test_shadowing_statistics():
    topo = generate_topology(4, 50, seed=4)
    fading = FadingParams()
    var = link_variances(topo, fading, np.random.default_rng(0))
    d = topo.distances()
    shadow_db = 10 * np.log10(var / (200.0 / d) ** 3.5)
    assert np.std(shadow_db) == pytest.approx(8.0, rel=0.05)
    assert abs(np.mean(shadow_db)) < 0.3


def test_noise_without_outer_cells_is_thermal():
    fading = FadingParams(snr_db=10.0, power_budget=2.0)
    ch = sample_channels(_single_link(500.0), fading, antennas=2, seed=0)
    assert ch.noise_power[0, 0] == fading.thermal_noise == pytest.approx(0.2)


def test_noise_includes_uncoordinated_interference():
    topo = generate_topology(4, 2, seed=6)
    fading = FadingParams(snr_db=20.0)
    ch = sample_channels(topo, fading, 3, seed=7)
    var = link_variances(topo, fading, np.random.default_rng(7))
    others = list(topo.uncoordinated_set)
    assert np.allclose(ch.noise_power, fading.thermal_noise + var[others].sum(axis=0))


def test_fading_independent_of_snr():
    topo = generate_topology(4, 2, seed=8)
    a = sample_channels(topo, FadingParams(snr_db=0.0), 3, seed=9)
    b = sample_channels(topo, FadingParams(snr_db=20.0), 3, seed=9)
    assert np.array_equal(a.h, b.h)
    assert np.all(a.noise_power > b.noise_power)


def test_fading_param_validation():
    with pytest.raises(ValueError):
        FadingParams(pathloss_exponent=2.0)
    with pytest.raises(ValueError):
        FadingParams(shadowing_std_db=-1.0)


def test_snapshot_round_trip():
    topo = generate_topology(4, 2, seed=10)
    ch = sample_channels(topo, FadingParams(), 2, seed=11)
    text = snapshot(topo, ch)
    topo2, ch2 = load_snapshot(text)
    assert np.array_equal(topo2.bs_positions, topo.bs_positions)
    assert np.array_equal(topo2.user_positions, topo.user_positions)
    assert topo2.coordinated_set == topo.coordinated_set
    assert np.array_equal(ch2.h, ch.h)
    assert np.array_equal(ch2.noise_power, ch.noise_power)
    assert snapshot(topo2, ch2) == text
    assert load_snapshot(snapshot(topo))[1] is None
