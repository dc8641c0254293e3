import numpy as np
import pytest
from scipy import constants

from xlmimo.array_geometry import collocated_ula
from xlmimo.channel_synthesis import Scatterer
from xlmimo.dam_transmission import (
    DamBeamformers,
    MultipathTaps,
    dam_rate,
    delay_precompensation,
    effective_taps,
    path_mrt,
    path_zf,
    qpsk_symbols,
    simulate_dam_link,
    taps_from_scatterers,
)
from xlmimo.errors import DamError

DELAYS = (0, 3, 7, 12)


def random_taps(rng, num_antennas, delays=DELAYS):
    shape = (num_antennas, len(delays))
    vectors = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    return MultipathTaps(vectors, tuple(delays))


def isi_ratio(taps, beamformers):
    g = effective_taps(taps, beamformers)
    signal = abs(g[taps.max_delay]) ** 2
    return (np.sum(np.abs(g) ** 2) - signal) / signal


def test_zf_leaves_a_single_aligned_tap(rng):
    taps = random_taps(rng, 64)
    bf = path_zf(taps, 1.0)
    g = effective_taps(taps, bf)
    signal = abs(g[taps.max_delay]) ** 2
    assert signal > 0
    assert np.sum(np.abs(g) ** 2) - signal <= 1e-20 * max(signal, 1.0)
    assert np.count_nonzero(np.abs(g) > 1e-9 * np.sqrt(signal)) == 1


def test_mrt_isi_shrinks_with_more_antennas(rng):
    ratios = []
    for m in (16, 64, 256, 1024):
        draws = [isi_ratio(t, path_mrt(t, 1.0)) for t in (random_taps(rng, m) for _ in range(20))]
        ratios.append(np.mean(draws))
    assert all(a > b for a, b in zip(ratios, ratios[1:]))


@pytest.mark.parametrize("design", [path_mrt, path_zf])
def test_beamformers_spend_the_power_budget(rng, design):
    bf = design(random_taps(rng, 32), 2.5)
    assert bf.total_power == pytest.approx(2.5)
    with pytest.raises(DamError):
        design(random_taps(rng, 32), 0.0)


def test_zf_with_explicit_combiners(rng):
    taps = random_taps(rng, 8)
    b = [np.ones(8 - 3) for _ in DELAYS]
    bf = path_zf(taps, 1.0, b)
    assert bf.total_power == pytest.approx(1.0)
    with pytest.raises(DamError):
        path_zf(taps, 1.0, b[:2])


def test_zf_needs_enough_antennas(rng):
    with pytest.raises(DamError):
        path_zf(random_taps(rng, 3), 1.0)


def test_power_budget_is_enforced():
    with pytest.raises(DamError):
        DamBeamformers(np.ones((4, 1)), 1.0)


@pytest.mark.parametrize("delays", [(0, 0), (-1, 2), (0, 1.5)])
def test_taps_reject_bad_delays(delays):
    with pytest.raises(DamError):
        MultipathTaps.of([np.ones(2), np.ones(2)], delays)


def test_taps_accept_integral_floats():
    taps = MultipathTaps.of([np.ones(2), np.ones(2)], [2.0, 5.0])
    assert taps.delays == (2, 5)
    assert taps.shifted(1).delays == (3, 6)


def test_delay_precompensation():
    assert delay_precompensation([0, 3, 7]) == [7, 4, 0]
    with pytest.raises(DamError):
        delay_precompensation([])


def test_simulated_link_matches_analytic_powers(rng):
    taps = random_taps(rng, 16)
    bf = path_mrt(taps, 1.0)
    symbols = qpsk_symbols(20000, rng)
    link = simulate_dam_link(taps, bf, symbols, noise_power=0.5, seed=7)
    d = link.decomposition
    assert d.empirical_signal == pytest.approx(d.signal_power, rel=1e-9)
    assert d.empirical_isi == pytest.approx(d.isi_power, rel=0.05)
    assert d.empirical_noise == pytest.approx(0.5, rel=0.05)
    assert len(link.received) == len(symbols)
    assert dam_rate(d) == pytest.approx(np.log2(1 + d.signal_power / (d.isi_power + 0.5)))


def test_simulated_link_is_reproducible(rng):
    taps = random_taps(rng, 16)
    bf = path_zf(taps, 1.0)
    symbols = qpsk_symbols(200, rng)
    a = simulate_dam_link(taps, bf, symbols, 1.0, seed=3).received
    b = simulate_dam_link(taps, bf, symbols, 1.0, seed=3).received
    assert np.array_equal(a, b)


def test_simulated_link_errors(rng):
    taps = random_taps(rng, 16)
    bf = path_mrt(taps, 1.0)
    with pytest.raises(DamError):
        simulate_dam_link(taps, bf, qpsk_symbols(10, rng), 1.0, seed=0)
    with pytest.raises(DamError):
        simulate_dam_link(taps, bf, qpsk_symbols(100, rng), -1.0, seed=0)
    zf = path_zf(taps, 1.0)
    quiet = simulate_dam_link(taps, zf, qpsk_symbols(100, rng), 0.0, seed=0).decomposition
    with pytest.raises(DamError):
        dam_rate(quiet._replace(isi_power=0.0))


def test_received_samples_follow_the_path_double_sum(rng):
    taps = random_taps(rng, 3, delays=(0, 2))
    f = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
    bf = DamBeamformers(f, float(np.sum(np.abs(f) ** 2)))
    symbols = qpsk_symbols(12, rng)
    y = simulate_dam_link(taps, bf, symbols, 0.0, seed=0).received

    expected = np.zeros(len(symbols), dtype=complex)
    for n in range(len(symbols)):
        for l, n_l in enumerate(taps.delays):
            for lp, n_lp in enumerate(taps.delays):
                k = n - taps.max_delay - n_l + n_lp
                if k >= 0:
                    expected[n] += np.vdot(taps.vectors[:, l], f[:, lp]) * symbols[k]
    assert np.allclose(y, expected)

    g = effective_taps(taps, bf)
    assert g[0] == pytest.approx(np.vdot(taps.vectors[:, 0], f[:, 1]))
    assert g[4] == pytest.approx(np.vdot(taps.vectors[:, 1], f[:, 0]))


def test_shortest_allowed_symbol_sequence(rng):
    taps = random_taps(rng, 16)
    bf = path_mrt(taps, 1.0)
    link = simulate_dam_link(taps, bf, qpsk_symbols(24, rng), 0.5, seed=1)
    assert len(link.received) == 24
    assert np.isfinite(link.decomposition.empirical_isi)
    with pytest.raises(DamError):
        simulate_dam_link(taps, bf, qpsk_symbols(23, rng), 0.5, seed=1)


def test_qpsk_has_unit_modulus(rng):
    assert np.allclose(np.abs(qpsk_symbols(64, rng)), 1.0)


def test_taps_from_scatterers():
    layout = collocated_ula(32, 0.0107)
    rx = (30.0, 40.0, 0.0)
    scatterers = [Scatterer((30.0, 0.0, 0.0), rcs=2.0), Scatterer((60.0, 0.0, 0.0), rcs=2.0)]
    taps = taps_from_scatterers(layout, rx, scatterers, 1e-8)
    assert taps.delays == (round(70.0 / (constants.c * 1e-8)), round(110.0 / (constants.c * 1e-8)))
    expected = np.sqrt(0.0107 ** 2 * 2.0 / ((4 * np.pi) ** 3 * 30.0 ** 2 * 40.0 ** 2))
    assert np.linalg.norm(taps.vectors[:, 0]) == pytest.approx(expected * np.sqrt(32), rel=1e-3)

    merged = taps_from_scatterers(layout, rx, scatterers + [Scatterer((30.0, 0.01, 0.0), rcs=1.0)], 1e-8)
    assert merged.num_paths == 2
    with pytest.raises(DamError):
        taps_from_scatterers(layout, rx, scatterers, 0.0)
    with pytest.raises(DamError):
        taps_from_scatterers(layout, rx, [], 1e-8)
