import numpy as np
import pytest

from xlmimo.array_geometry import collocated_ula, physical_dimension, source_point
from xlmimo.channel_synthesis import (
    BirthDeath,
    DeterministicVR,
    FarFieldOneRing,
    LosMethod,
    NearFieldPLS,
    Scatterer,
    TwoStateMarkov,
    VRMasked,
    birth_death_expected_count,
    channel_to_csv_rows,
    correlation_sqrt,
    effective_rank,
    large_scale_profile,
    los_channel,
    mask_correlation,
    masked_correlation,
    multipath_channel,
    nlos_bistatic,
    sample_correlated_channel,
    sample_scatterers,
    sample_vr_mask,
    simulate_birth_death,
    spatial_correlation,
    toeplitz_deviation,
)
from xlmimo.errors import ChannelError
from xlmimo.nearfield_response import Cosine, exact_distances, mimo_rayleigh_distance

LAMBDA = 0.125


def facing_pair(distance, m_t=128, m_r=32):
    """Transmit ULA on the y axis at the origin, receive ULA centred at (r, 0, 0) facing back."""
    tx = collocated_ula(m_t, LAMBDA)
    rx = collocated_ula(m_r, LAMBDA, reference_point=(distance, 0.0, 0.0), normal=(-1.0, 0.0, 0.0))
    return tx, rx


def test_los_rank_collapses_beyond_mimo_rayleigh():
    pattern = Cosine(2.0)
    tx, rx = facing_pair(10.0)
    rd = mimo_rayleigh_distance(physical_dimension(tx), physical_dimension(rx), LAMBDA)
    assert rd == pytest.approx(2 * (127 + 31) ** 2 * 0.0625 ** 2 / LAMBDA)
    assert effective_rank(los_channel(LosMethod.ELEMENTWISE, tx, rx, pattern, pattern)) > 1
    assert effective_rank(los_channel(LosMethod.OUTER_PRODUCT, tx, rx, pattern, pattern)) == 1
    assert effective_rank(los_channel(LosMethod.FAR_FIELD_UPW, tx, rx, pattern, pattern)) == 1
    tx, rx = facing_pair(2 * rd)
    assert effective_rank(los_channel(LosMethod.ELEMENTWISE, tx, rx, pattern, pattern)) == 1


def test_evenly_spread_spectrum_saturates_instead_of_collapsing():
    assert effective_rank(np.eye(20)) == 10
    assert effective_rank(np.eye(20), fraction=0.25) == 4
    assert effective_rank(np.diag([1.0] * 12 + [0.0] * 4)) == 10
    with pytest.raises(ChannelError):
        effective_rank(np.eye(3), fraction=0.0)


def test_los_rank_does_not_grow_with_distance():
    pattern = Cosine(2.0)
    ranks = []
    for distance in (5.0, 10.0, 20.0, 200.0):
        tx, rx = facing_pair(distance)
        ranks.append(effective_rank(los_channel(LosMethod.ELEMENTWISE, tx, rx, pattern, pattern)))
    assert ranks[1] > 1
    assert ranks == sorted(ranks, reverse=True)


def test_elementwise_and_outer_product_agree_far_away():
    tx, rx = facing_pair(1e5, m_t=16, m_r=8)
    exact = los_channel("Elementwise", tx, rx)
    outer = los_channel("OuterProduct", tx, rx)
    assert exact.shape == (8, 16)
    assert np.linalg.norm(exact - outer) / np.linalg.norm(exact) < 1e-2


def test_los_channel_free_space_amplitude():
    tx, rx = facing_pair(20.0, m_t=1, m_r=1)
    h = los_channel(LosMethod.ELEMENTWISE, tx, rx)
    assert abs(h[0, 0]) == pytest.approx(LAMBDA / (4 * np.pi * 20.0))


def test_los_channel_rejects_mixed_wavelengths():
    tx = collocated_ula(4, LAMBDA)
    rx = collocated_ula(4, 0.01, reference_point=(5.0, 0.0, 0.0))
    with pytest.raises(ChannelError):
        los_channel(LosMethod.ELEMENTWISE, tx, rx)


def test_nlos_gain_normalisation():
    tx = collocated_ula(1, LAMBDA)
    rx = collocated_ula(1, LAMBDA, reference_point=(0.0, 30.0, 0.0))
    sc = Scatterer((40.0, 0.0, 0.0), rcs=4.0)
    h = nlos_bistatic(tx, rx, [sc])
    t_q, r_q = 40.0, 50.0
    beta = LAMBDA ** 2 * 4.0 / ((4 * np.pi) ** 3 * t_q ** 2 * r_q ** 2)
    assert abs(h[0, 0]) == pytest.approx(np.sqrt(beta))


def test_nlos_needs_valid_scatterers():
    tx = collocated_ula(4, LAMBDA)
    rx = collocated_ula(4, LAMBDA, reference_point=(20.0, 0.0, 0.0))
    with pytest.raises(ChannelError):
        nlos_bistatic(tx, rx, [])
    with pytest.raises(ChannelError):
        nlos_bistatic(tx, rx, [Scatterer((5.0, 5.0, 0.0), rcs=0.0)])


def test_multipath_masks_rows():
    los = np.ones((4, 2), dtype=complex)
    path = 2.0 * np.ones((4, 2), dtype=complex)
    h = multipath_channel(1, los, [path], los_mask=[1, 1, 0, 0], path_masks=[[0, 1, 1, 0]])
    assert np.allclose(h[:, 0], [1.0, 3.0, 2.0, 0.0])
    assert np.allclose(multipath_channel(0, los, [path]), path)
    with pytest.raises(ChannelError):
        multipath_channel(2, los)
    with pytest.raises(ChannelError):
        multipath_channel(1, los, [np.ones((3, 2))])


def test_sample_scatterers_stay_in_the_sector(rng):
    layout = collocated_ula(64, LAMBDA)
    scatterers = sample_scatterers(rng, 50, (200.0, 500.0), (-np.pi / 3, np.pi / 3), (1.0, 10.0), layout)
    assert len(scatterers) == 50
    for sc in scatterers:
        r = np.linalg.norm(sc.e - layout.p)
        assert 200.0 <= r <= 500.0
        assert 1.0 <= sc.rcs <= 10.0
        assert sc.e[0] > 0.0


def test_deterministic_visibility():
    process = DeterministicVR((0, 1, 5))
    assert sample_vr_mask(process, 6, 0).tolist() == [1, 1, 0, 0, 0, 1]
    r = masked_correlation(np.ones((6, 6)), process.mask(6))
    assert r[0, 1] == 1.0 and r[0, 2] == 0.0


def test_markov_visibility_statistics():
    process = TwoStateMarkov(p01=0.2, p10=0.05)
    assert process.stationary_visible == pytest.approx(0.8)
    corr = mask_correlation(process, 8)
    assert np.allclose(np.diag(corr), 0.8)
    assert corr[0, 7] == pytest.approx(0.8 * (0.8 + 0.2 * 0.75 ** 7))
    mask = sample_vr_mask(process, 500, 3)
    assert set(np.unique(mask)) <= {0, 1}


def test_birth_death_counts():
    process = BirthDeath(birth_rate=2.0, death_rate=0.5, dt=1.0)
    assert birth_death_expected_count(2.0, 0.5, 1.0) == pytest.approx(4.0 * (1 - np.exp(-0.5)))
    counts = simulate_birth_death(process, 20000, seed=9, initial=4)
    assert counts.mean() == pytest.approx(4.0, rel=0.05)
    assert np.array_equal(counts, simulate_birth_death(process, 20000, seed=9, initial=4))


def test_markov_mask_starts_from_the_stationary_law():
    process = TwoStateMarkov(p01=0.2, p10=0.05)
    masks = np.array([sample_vr_mask(process, 4, seed) for seed in range(4000)], dtype=float)
    assert masks[:, 0].mean() == pytest.approx(0.8, abs=0.03)
    empirical = masks.T @ masks / len(masks)
    assert np.allclose(empirical, mask_correlation(process, 4), atol=0.04)

    pinned = mask_correlation(TwoStateMarkov(0.2, 0.05, initial_visible=True), 4, draws=500)
    assert pinned[0, 0] == 1.0
    assert pinned[0, 3] == pytest.approx(0.8 + 0.2 * 0.75 ** 3, abs=0.05)


def test_birth_death_visibility_follows_alive_probability():
    process = BirthDeath(birth_rate=1.0, death_rate=2.0, dt=0.5)
    mask = sample_vr_mask(process, 20000, 5)
    assert mask.mean() == pytest.approx(1.0 - np.exp(-0.5), abs=0.02)
    assert np.array_equal(mask, sample_vr_mask(process, 20000, 5))


def test_one_ring_correlation_is_toeplitz():
    layout = collocated_ula(12, LAMBDA)
    r = spatial_correlation(FarFieldOneRing(mean_angle=0.3, spread=0.2), layout)
    assert np.allclose(r, r.conj().T)
    assert np.allclose(np.diag(r), 1.0)
    assert toeplitz_deviation(r) < 1e-9


def test_near_field_correlation_is_not_stationary():
    layout = collocated_ula(16, LAMBDA)
    r = spatial_correlation(NearFieldPLS(r_range=(3.0, 6.0), angle_range=(-0.5, 0.5)), layout)
    assert np.allclose(r, r.conj().T)
    assert np.all(np.linalg.eigvalsh(r) > -1e-9)
    assert toeplitz_deviation(r) > 1e-3


def test_vr_masked_correlation_zeroes_hidden_elements():
    layout = collocated_ula(8, LAMBDA)
    spec = VRMasked(FarFieldOneRing(0.0, 0.3), DeterministicVR((0, 1, 2)))
    r = spatial_correlation(spec, layout)
    assert np.allclose(r[3:, :], 0.0)
    assert abs(r[0, 0]) == pytest.approx(1.0)


def test_correlated_channel_statistics():
    layout = collocated_ula(6, LAMBDA)
    r = spatial_correlation(FarFieldOneRing(0.0, 0.4), layout)
    h = sample_correlated_channel(r, 2.0, seed=1, draws=40000)
    empirical = h.T @ h.conj() / len(h)
    assert np.allclose(empirical, 2.0 * r, atol=0.08)
    assert sample_correlated_channel(r, 1.0, seed=1).shape == (6,)


def test_correlation_sqrt_rejects_indefinite_matrices():
    with pytest.raises(ChannelError):
        correlation_sqrt(np.diag([1.0, -1.0]))
    with pytest.raises(ChannelError):
        correlation_sqrt(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_effective_rank_and_profile(ula):
    assert effective_rank(np.eye(4)) == 4
    assert effective_rank(np.diag([1.0, 0.01, 0.01])) == 1
    layout = ula(8)
    s = source_point(layout, 3.0, 1.0)
    assert np.allclose(large_scale_profile(layout, s, 2.0, -2.0), 2.0 / exact_distances(layout, s) ** 2)


def test_channel_rows_interleave_parts():
    rows = channel_to_csv_rows(np.array([[1 + 2j, 3 - 4j]]))
    assert rows == [[1.0, 2.0, 3.0, -4.0]]
