import numpy as np
import pytest

from xlmimo.array_geometry import collocated_ula, modular_ula, physical_dimension, source_point
from xlmimo.errors import GeometryError
from xlmimo.nearfield_response import (
    TGPP,
    BoundaryKind,
    Cosine,
    ModularRegion,
    ResponseModel,
    SourcePoint,
    array_response,
    boundary_distance,
    classify_modular_region,
    classify_region,
    classify_region_simplified,
    ddrayleigh_distance,
    diupd,
    element_gain,
    exact_distances,
    in_reactive_region,
    mimo_upd_distance,
    numeric_ddrayleigh,
    phase_error,
    power_ratio,
    rayleigh_distance,
    siso_channel,
    steering,
    taylor_distance,
    upd_closed_form,
    upd_distance,
)

LAMBDA = 0.125


def ula_of_aperture(aperture):
    # odd count, so an element sits on the reference point
    return collocated_ula(int(round(2.0 * aperture / LAMBDA)) + 1, LAMBDA)


@pytest.mark.parametrize("aperture", [0.5, 1.0, 8.0])
def test_upd_matches_closed_forms(aperture):
    layout = ula_of_aperture(aperture)
    assert physical_dimension(layout) == pytest.approx(aperture)
    assert upd_distance(layout, np.pi / 2, 0.9) == pytest.approx(1.5 * aperture, rel=1e-6)
    assert upd_distance(layout, 0.0, 0.9) == pytest.approx(18.987 * aperture, rel=1e-2)
    tight = np.cos(np.pi / 8) ** 2
    assert upd_distance(layout, np.pi / 2, tight) == pytest.approx(1.2071 * aperture, rel=2e-2)


@pytest.mark.parametrize("theta", [0.0, np.pi / 2])
def test_upd_closed_form_agrees_with_search(theta):
    layout = ula_of_aperture(1.0)
    assert upd_distance(layout, theta, 0.9) == pytest.approx(upd_closed_form(1.0, theta, 0.9), rel=1e-6)


def test_upd_scan_agrees_with_bisection():
    layout = ula_of_aperture(1.0)
    scanned = upd_distance(layout, np.pi / 3, 0.9, method="scan", grid_points=20000)
    assert scanned == pytest.approx(upd_distance(layout, np.pi / 3, 0.9), rel=2e-3)


def test_upd_rejects_bad_threshold():
    with pytest.raises(ValueError):
        upd_distance(ula_of_aperture(1.0), np.pi / 2, 1.0)
    with pytest.raises(ValueError):
        upd_closed_form(1.0, 1.0, 0.9)


def test_directive_elements_push_the_upd_out():
    layout = ula_of_aperture(1.0)
    assert upd_distance(layout, np.pi / 2, 0.9, Cosine(2.0)) > upd_distance(layout, np.pi / 2, 0.9)


def test_diupd_and_mimo_upd_take_the_maximum():
    layout = ula_of_aperture(1.0)
    thetas = [0.0, np.pi / 4, np.pi / 2]
    expected = max(upd_distance(layout, t, 0.9) for t in thetas)
    assert diupd(layout, 0.9, thetas=thetas) == pytest.approx(expected)
    assert mimo_upd_distance(layout, thetas) == pytest.approx(expected)


def test_power_ratio_at_broadside():
    layout = ula_of_aperture(1.0)
    r = 2.0
    assert power_ratio(layout, source_point(layout, r, np.pi / 2)) == pytest.approx(r ** 2 / (r ** 2 + 0.25))


def test_numeric_ddrayleigh_tracks_closed_form():
    layout = ula_of_aperture(1.0)
    expected = ddrayleigh_distance(1.0, LAMBDA, np.pi / 2)
    assert expected == pytest.approx(rayleigh_distance(1.0, LAMBDA))
    assert numeric_ddrayleigh(layout, np.pi / 2) == pytest.approx(expected, rel=0.05)
    near = phase_error(layout, source_point(layout, 0.5 * expected, np.pi / 2))
    far = phase_error(layout, source_point(layout, 2.0 * expected, np.pi / 2))
    assert near > np.pi / 8 > far


def test_taylor_expansions_converge(ula):
    layout = ula(33)
    s = source_point(layout, 50.0, 1.1)
    exact = exact_distances(layout, s)
    first = np.max(np.abs(exact - taylor_distance(layout, s, 1)))
    second = np.max(np.abs(exact - taylor_distance(layout, s, 2)))
    assert second < first
    with pytest.raises(ValueError):
        taylor_distance(layout, s, 3)


def test_models_coincide_far_away(ula):
    layout = ula(16)
    s = source_point(layout, 1e7, 1.0)
    upw = steering(ResponseModel.UPW, layout, s)
    for model in (ResponseModel.USW, ResponseModel.PBW, ResponseModel.NUSW, ResponseModel.NUPW):
        assert np.allclose(steering(model, layout, s), upw, atol=1e-5)


def test_broadside_upw_response_is_flat(ula):
    a = steering(ResponseModel.UPW, ula(8), SourcePoint((10.0, 0.0, 0.0)))
    assert np.allclose(a, 1.0)


def test_usw_response_follows_exact_distances(ula, lam):
    layout = ula(24)
    s = source_point(layout, 4.0, 0.7)
    response = array_response("USW", layout, s)
    expected = np.exp(-2j * np.pi / lam * (exact_distances(layout, s) - 4.0))
    assert response.model is ResponseModel.USW
    assert len(response) == 24
    assert np.allclose(response.entries, expected)


def test_response_at_reference_point_is_rejected(ula):
    layout = ula(8)
    with pytest.raises(GeometryError):
        array_response(ResponseModel.PBW, layout, SourcePoint(tuple(layout.p)))


def test_nusw_channel_power_per_element(ula, lam):
    layout = ula(32)
    s = source_point(layout, 3.0, 0.8)
    h = siso_channel(ResponseModel.NUSW, layout, s)
    r_m = exact_distances(layout, s)
    assert np.allclose(np.abs(h) ** 2, (lam / (4 * np.pi)) ** 2 / r_m ** 2)


def test_gain_patterns():
    assert element_gain(Cosine(2.0), 0.0, 0.0) == pytest.approx(10.0)
    assert element_gain(Cosine(2.0), 2.0, 0.0) == 0.0
    assert TGPP().gain_db(0.0, 0.0) == pytest.approx(8.0)
    side = 12.0 * (90.0 / 65.0) ** 2
    assert TGPP().gain_db(np.pi / 2, 0.0) == pytest.approx(8.0 - side)


def test_boundary_dispatch():
    assert boundary_distance("MimoRayleigh", aperture_tx=1.0, aperture_rx=0.5, wavelength=0.125) == 36.0
    assert boundary_distance(BoundaryKind.RAYLEIGH, aperture=1.0, wavelength=0.125) == pytest.approx(16.0)
    assert boundary_distance("Reactive", aperture=1.0, wavelength=0.125) == pytest.approx(0.62 * np.sqrt(8.0))
    with pytest.raises(ValueError):
        boundary_distance("Rayleigh", aperture=-1.0, wavelength=0.125)


def test_region_classification():
    layout = ula_of_aperture(1.0)
    # D = 1 m: UPD(π/2) = 1.5 m, DDRayl(π/2) = 16 m
    assert classify_region(layout, source_point(layout, 1e5, np.pi / 2)) is ResponseModel.UPW
    assert classify_region(layout, source_point(layout, 5.0, np.pi / 2)) is ResponseModel.USW
    assert classify_region(layout, source_point(layout, 1.0, np.pi / 2)) is ResponseModel.NUSW
    # close to end-fire the phase is planar long before the power is uniform
    assert classify_region(layout, source_point(layout, 5.0, 0.05)) is ResponseModel.NUPW


def test_simplified_classification():
    layout = ula_of_aperture(1.0)
    s = source_point(layout, 10.0, np.pi / 2)
    assert classify_region_simplified(layout, source_point(layout, 20.0, 1.0)) is ResponseModel.UPW
    assert classify_region_simplified(layout, s, diupd_value=1.5) is ResponseModel.USW
    assert classify_region_simplified(layout, s, diupd_value=12.0) is ResponseModel.NUSW


@pytest.mark.parametrize("r, region", [
    (50.0, ModularRegion.FAR_FIELD),
    (20.0, ModularRegion.COMMON_ANGLE),
    (5.0, ModularRegion.DISTINCT_ANGLE),
    (0.3, ModularRegion.NEAR_FIELD),
])
def test_modular_regions(r, region):
    layout = modular_ula(4, 4, LAMBDA, 8)
    assert classify_modular_region(layout, r) is region


def test_reactive_region():
    layout = ula_of_aperture(1.0)
    assert in_reactive_region(layout, 1.0)
    assert not in_reactive_region(layout, 2.0)
