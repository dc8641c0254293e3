"""Element gain patterns, source-element distances, array response models and
near/far-field boundary distances."""
from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass
from enum import Enum

import numpy as np
import numpy.typing as npt
from scipy.optimize import bisect

from xlmimo.array_geometry import (
    ArrayLayout,
    array_normal,
    build_layout,
    incidence_angle,
    module_centers,
    module_dimension,
    physical_dimension,
    range_and_angle,
    source_point,
    axis_offsets,
)
from xlmimo.errors import BoundaryError, ChannelError, GeometryError

logger = logging.getLogger(__name__)

UPD_RTOL = 1e-9
PHASE_ERROR_THRESHOLD = np.pi / 8


class ResponseModel(str, Enum):
    UPW = "UPW"
    NUPW = "NUPW"
    USW = "USW"
    PBW = "PBW"
    NUSW = "NUSW"


# -----------------------------------------------------------
# gain patterns
# -----------------------------------------------------------
@dataclass(frozen=True)
class Isotropic:
    def gain(self, phi, xi):
        return np.ones(np.broadcast(np.asarray(phi), np.asarray(xi)).shape)


@dataclass(frozen=True)
class Cosine:
    """2(2q+1)cos^{2q}(φ) in the front half-space, zero behind."""

    q: float = 2.0

    def gain(self, phi, xi):
        phi = np.asarray(phi, dtype=float)
        front = phi < np.pi / 2
        g = 2.0 * (2.0 * self.q + 1.0) * np.cos(np.where(front, phi, 0.0)) ** (2.0 * self.q)
        return np.where(front, g, 0.0) * np.ones(np.broadcast(phi, np.asarray(xi)).shape)


def _parabolic_cut(beamwidth: float, floor_db: float) -> Callable[[np.ndarray], np.ndarray]:
    def cut(angle):
        return -np.minimum(12.0 * (np.asarray(angle) / beamwidth) ** 2, floor_db)
    return cut


@dataclass(frozen=True)
class TGPP:
    """Sector element of the 3GPP panel model.

    ``vertical_cut`` and ``horizontal_cut`` map the elevation / azimuth
    deviation from boresight (radians) to an attenuation in dB (<= 0). When
    left unset they are the TR 38.901 parabolic cuts with a 65° half-power
    beamwidth.
    """

    g_max_db: float = 8.0
    a_max_db: float = 30.0
    sla_v_db: float = 30.0
    beamwidth: float = np.deg2rad(65.0)
    vertical_cut: Callable[[np.ndarray], np.ndarray] | None = None
    horizontal_cut: Callable[[np.ndarray], np.ndarray] | None = None

    def gain_db(self, phi, xi):
        phi = np.asarray(phi, dtype=float)
        xi = np.asarray(xi, dtype=float)
        # direction in the (boresight, û, boresight × û) frame
        v_n = np.cos(phi)
        v_u = np.sin(phi) * np.cos(xi)
        v_w = np.sin(phi) * np.sin(xi)
        azimuth = np.arctan2(v_u, v_n)
        elevation = np.arcsin(np.clip(v_w, -1.0, 1.0))
        cut_v = self.vertical_cut or _parabolic_cut(self.beamwidth, self.sla_v_db)
        cut_h = self.horizontal_cut or _parabolic_cut(self.beamwidth, self.a_max_db)
        return self.g_max_db - np.minimum(-(cut_v(elevation) + cut_h(azimuth)), self.a_max_db)

    def gain(self, phi, xi):
        return 10.0 ** (self.gain_db(phi, xi) / 10.0)


GainPattern = Isotropic | Cosine | TGPP
ISOTROPIC = Isotropic()


def element_gain(pattern: GainPattern, phi, xi):
    """Gain G(φ, ξ) of a single element; angles outside their range are wrapped."""
    phi = np.arccos(np.cos(np.asarray(phi, dtype=float)))
    xi = np.mod(np.asarray(xi, dtype=float), 2.0 * np.pi)
    g = pattern.gain(phi, xi)
    return float(g) if np.ndim(g) == 0 else g


# -----------------------------------------------------------
# sources and distances
# -----------------------------------------------------------
@dataclass(frozen=True)
class SourcePoint:
    position: tuple[float, float, float]

    @classmethod
    def polar(cls, layout: ArrayLayout, r: float, theta: float) -> SourcePoint:
        return cls(tuple(float(v) for v in source_point(layout, r, theta)))

    def r(self, layout: ArrayLayout) -> float:
        return range_and_angle(layout, self.position)[0]

    def theta(self, layout: ArrayLayout) -> float:
        return range_and_angle(layout, self.position)[1]


def _position(s) -> np.ndarray:
    if isinstance(s, SourcePoint):
        return np.asarray(s.position, dtype=float)
    return np.asarray(s, dtype=float)


def exact_distances(layout: ArrayLayout, s) -> np.ndarray:
    """r_m = ||p_m - s|| for every element."""
    return np.linalg.norm(build_layout(layout, strict=False) - _position(s)[None, :], axis=1)


def taylor_distance(layout: ArrayLayout, s, order: int) -> np.ndarray:
    """First- or second-order expansion of r_m around the reference distance."""
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    s = _position(s)
    diff = layout.p - s
    r = float(np.linalg.norm(diff))
    if r == 0.0:
        raise GeometryError("source coincides with the array reference point")
    delta = build_layout(layout, strict=False) - layout.p[None, :]
    proj = delta @ diff / r
    first = r + proj
    if order == 1:
        return first
    return first + (np.sum(delta ** 2, axis=1) - proj ** 2) / (2.0 * r)


def direction_angles(layout: ArrayLayout, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(φ, ξ) of direction vectors ``v`` (shape (..., 3)) in the element frame.

    φ is measured from the common boresight and ξ around it, starting at û.
    """
    n = array_normal(layout)
    w = np.cross(n, layout.u)
    v = v / np.linalg.norm(v, axis=-1, keepdims=True)
    phi = np.arccos(np.clip(v @ n, -1.0, 1.0))
    xi = np.mod(np.arctan2(v @ w, v @ layout.u), 2.0 * np.pi)
    return phi, xi


def local_angles(layout: ArrayLayout, points: np.ndarray, target) -> tuple[np.ndarray, np.ndarray]:
    """Per-point (φ, ξ) of ``target`` seen from each of ``points``."""
    return direction_angles(layout, _position(target)[None, :] - np.atleast_2d(points))


def direction_gain(layout: ArrayLayout, pattern: GainPattern, v: np.ndarray) -> np.ndarray:
    phi, xi = direction_angles(layout, v)
    return pattern.gain(phi, xi)


def element_powers(layout: ArrayLayout, s, pattern: GainPattern = ISOTROPIC) -> np.ndarray:
    """U_m = G(φ_m, ξ_m)·(λ/4π)²."""
    phi, xi = local_angles(layout, build_layout(layout, strict=False), s)
    return pattern.gain(phi, xi) * (layout.wavelength / (4.0 * np.pi)) ** 2


def reference_power(layout: ArrayLayout, s, pattern: GainPattern = ISOTROPIC) -> float:
    """U evaluated at the reference point's own incidence angle."""
    phi, xi = local_angles(layout, layout.p, s)
    return float(pattern.gain(phi, xi)[0] * (layout.wavelength / (4.0 * np.pi)) ** 2)


# -----------------------------------------------------------
# array response
# -----------------------------------------------------------
@dataclass(frozen=True)
class SteeringVector:
    entries: np.ndarray
    model: ResponseModel

    def __len__(self) -> int:
        return len(self.entries)


def array_response(model: ResponseModel | str, layout: ArrayLayout, s,
                   pattern: GainPattern = ISOTROPIC) -> SteeringVector:
    model = ResponseModel(model)
    s = _position(s)
    r = float(np.linalg.norm(layout.p - s))
    if r == 0.0:
        raise GeometryError("array response is undefined for r = 0")
    k = 2.0 * np.pi / layout.wavelength

    if model in (ResponseModel.UPW, ResponseModel.NUPW):
        phase = taylor_distance(layout, s, 1) - r
    elif model is ResponseModel.PBW:
        phase = taylor_distance(layout, s, 2) - r
    else:
        r_m = exact_distances(layout, s)
        phase = r_m - r
    entries = np.exp(-1j * k * phase)

    if model in (ResponseModel.NUPW, ResponseModel.NUSW):
        u_ref = reference_power(layout, s, pattern)
        if u_ref <= 0.0:
            raise ChannelError("gain pattern vanishes at the reference incidence angle")
        r_m = exact_distances(layout, s)
        entries = entries * np.sqrt(element_powers(layout, s, pattern) / u_ref) * r / r_m
    return SteeringVector(entries, model)


def steering(model: ResponseModel | str, layout: ArrayLayout, s,
             pattern: GainPattern = ISOTROPIC) -> np.ndarray:
    return array_response(model, layout, s, pattern).entries


def channel_coefficient(layout: ArrayLayout, s, pattern: GainPattern = ISOTROPIC) -> complex:
    """α = √U / r · e^{-j2πr/λ}, the gain at the reference point."""
    s = _position(s)
    r = float(np.linalg.norm(layout.p - s))
    return np.sqrt(reference_power(layout, s, pattern)) / r * np.exp(-2j * np.pi * r / layout.wavelength)


def siso_channel(model: ResponseModel | str, layout: ArrayLayout, s,
                 pattern: GainPattern = ISOTROPIC) -> np.ndarray:
    """h = α·a(s)."""
    return channel_coefficient(layout, s, pattern) * steering(model, layout, s, pattern)


def modular_common_angle_response(layout: ArrayLayout, s) -> np.ndarray:
    """Subarray USW response with one common angle for every module.

    Spherical phases across module centres, planar phases inside each
    module; the result is the Kronecker product of the two.
    """
    s = _position(s)
    r, theta = range_and_angle(layout, s)
    k = 2.0 * np.pi / layout.wavelength
    centers = module_centers(layout)
    r_n = np.linalg.norm(centers - s[None, :], axis=1)
    inner = axis_offsets(1, layout.elems_per_module, None) * layout.spacing
    return np.kron(np.exp(-1j * k * (r_n - r)), np.exp(-1j * k * inner * np.cos(theta)))


# -----------------------------------------------------------
# boundary distances
# -----------------------------------------------------------
class BoundaryKind(str, Enum):
    REACTIVE = "Reactive"
    RAYLEIGH = "Rayleigh"
    DD_RAYLEIGH = "DDRayleigh"
    UPD = "UPD"
    EFFECTIVE_RAYLEIGH = "EffectiveRayleigh"
    BJORNSON = "Bjornson"
    MIMO_RAYLEIGH = "MimoRayleigh"
    MIMO_UPD = "MimoUpd"


def reactive_distance(aperture: float, wavelength: float) -> float:
    return 0.62 * np.sqrt(aperture ** 3 / wavelength)


def rayleigh_distance(aperture: float, wavelength: float) -> float:
    return 2.0 * aperture ** 2 / wavelength


def ddrayleigh_distance(aperture: float, wavelength: float, theta: float) -> float:
    return 2.0 * aperture ** 2 * np.sin(theta) ** 2 / wavelength


def effective_rayleigh_distance(aperture: float, wavelength: float, theta: float) -> float:
    return 0.367 * np.sin(theta) ** 2 * 2.0 * aperture ** 2 / wavelength


def bjornson_distance(antenna_diagonal: float, num_elements: int) -> float:
    return 2.0 * antenna_diagonal * np.sqrt(num_elements)


def mimo_rayleigh_distance(aperture_tx: float, aperture_rx: float, wavelength: float) -> float:
    return 2.0 * (aperture_tx + aperture_rx) ** 2 / wavelength


def power_ratio(layout: ArrayLayout, s, pattern: GainPattern = ISOTROPIC) -> float:
    """Υ = min_m(U_m/r_m²) / max_m(U_m/r_m²)."""
    r_m = exact_distances(layout, s)
    if np.any(r_m == 0.0):
        return 0.0
    p = element_powers(layout, s, pattern) / r_m ** 2
    top = float(p.max())
    return float(p.min()) / top if top > 0.0 else 0.0


def phase_error(layout: ArrayLayout, s) -> float:
    """Largest phase deviation between spherical and planar wavefronts, max_m (2π/λ)|r_m − r_m^first|."""
    k = 2.0 * np.pi / layout.wavelength
    return float(k * np.max(np.abs(exact_distances(layout, s) - taylor_distance(layout, s, 1))))


def upd_closed_form(aperture: float, theta: float, threshold: float) -> float:
    """Isotropic UPD at normal (π/2) or axial (0) incidence.

    The normal-incidence form assumes an element sits at the reference
    point (odd element count).
    """
    if np.isclose(theta, np.pi / 2):
        return aperture / 2.0 * np.sqrt(threshold / (1.0 - threshold))
    if np.isclose(theta, 0.0) or np.isclose(theta, np.pi):
        return aperture * (1.0 + threshold + 2.0 * np.sqrt(threshold)) / (2.0 * (1.0 - threshold))
    raise ValueError("closed-form UPD is only available at θ ∈ {0, π/2, π}")


def _search_bracket(layout: ArrayLayout) -> tuple[float, float]:
    aperture = physical_dimension(layout)
    hi = max(1e4 * aperture, 100.0 * rayleigh_distance(aperture, layout.wavelength))
    return 1e-6 * aperture, hi


def upd_distance(layout: ArrayLayout, theta: float, threshold: float = 0.9,
                 pattern: GainPattern = ISOTROPIC, *, method: str = "bisect",
                 grid_points: int = 4000) -> float:
    """Minimum distance along direction θ at which Υ(r, θ) reaches ``threshold``.

    The search interval starts at 1e-6·D, inside the reactive boundary.
    ``method="scan"`` walks a log-spaced grid instead of assuming Υ is
    monotone in r.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"UPD threshold must lie in (0, 1), got {threshold}")
    aperture = physical_dimension(layout)
    if aperture == 0.0:
        return 0.0

    def excess(r: float) -> float:
        return power_ratio(layout, source_point(layout, r, theta), pattern) - threshold

    lo, hi = _search_bracket(layout)
    if method == "scan":
        return upd_scan(excess, lo, hi, grid_points)
    if excess(hi) < 0.0:
        raise BoundaryError(
            f"UPD search does not bracket at θ={theta:.4f}: Υ stays below {threshold} up to r={hi:.3g} m"
        )
    if excess(lo) >= 0.0:
        return lo
    r_upd = bisect(excess, lo, hi, xtol=1e-15, rtol=UPD_RTOL)
    logger.debug(f"UPD(θ={theta:.4f}, Υ_th={threshold}) = {r_upd:.6g} m")
    return float(r_upd)


def upd_scan(excess: Callable[[float], float], lo: float, hi: float, grid_points: int = 4000) -> float:
    """Smallest grid distance beyond which ``excess`` never turns negative again."""
    grid = np.geomspace(lo, hi, grid_points)
    ok = np.array([excess(r) >= 0.0 for r in grid])
    if not ok[-1]:
        raise BoundaryError("UPD scan found no distance satisfying the threshold")
    failing = np.flatnonzero(~ok)
    return float(grid[0] if failing.size == 0 else grid[failing[-1] + 1])


def mimo_upd_distance(rx_layout: ArrayLayout, thetas: npt.ArrayLike, threshold: float = 0.9,
                      pattern: GainPattern = ISOTROPIC) -> float:
    """Max of the per-transmit-antenna UPDs."""
    return max(upd_distance(rx_layout, float(t), threshold, pattern) for t in np.atleast_1d(thetas))


def numeric_ddrayleigh(layout: ArrayLayout, theta: float, threshold: float = PHASE_ERROR_THRESHOLD) -> float:
    """Minimum r at which the planar-wavefront phase error drops to ``threshold``."""
    aperture = physical_dimension(layout)
    if aperture == 0.0:
        return 0.0

    def slack(r: float) -> float:
        return threshold - phase_error(layout, source_point(layout, r, theta))

    lo = aperture / 2.0 * (1.0 + 1e-9)
    _, hi = _search_bracket(layout)
    if slack(lo) >= 0.0:
        return lo
    if slack(hi) < 0.0:
        raise BoundaryError(f"phase-error search does not bracket at θ={theta:.4f}")
    return float(bisect(slack, lo, hi, xtol=1e-15, rtol=UPD_RTOL))


def diupd(layout: ArrayLayout, threshold: float = 0.9, pattern: GainPattern = ISOTROPIC,
          thetas: npt.ArrayLike | None = None) -> float:
    """Direction-independent UPD, the max of UPD(θ) over ``thetas``."""
    if thetas is None:
        thetas = np.linspace(0.0, np.pi / 2, 91)
    return max(upd_distance(layout, float(t), threshold, pattern) for t in np.atleast_1d(thetas))


_CLOSED_FORMS: dict[BoundaryKind, Callable[..., float]] = {
    BoundaryKind.REACTIVE: lambda aperture, wavelength: reactive_distance(aperture, wavelength),
    BoundaryKind.RAYLEIGH: lambda aperture, wavelength: rayleigh_distance(aperture, wavelength),
    BoundaryKind.DD_RAYLEIGH: lambda aperture, wavelength, theta: ddrayleigh_distance(aperture, wavelength, theta),
    BoundaryKind.EFFECTIVE_RAYLEIGH: lambda aperture, wavelength, theta: effective_rayleigh_distance(
        aperture, wavelength, theta),
    BoundaryKind.BJORNSON: lambda antenna_diagonal, num_elements: bjornson_distance(antenna_diagonal, num_elements),
    BoundaryKind.MIMO_RAYLEIGH: lambda aperture_tx, aperture_rx, wavelength: mimo_rayleigh_distance(
        aperture_tx, aperture_rx, wavelength),
    BoundaryKind.UPD: lambda layout, theta, threshold=0.9, pattern=ISOTROPIC: upd_distance(
        layout, theta, threshold, pattern),
    BoundaryKind.MIMO_UPD: lambda layout, thetas, threshold=0.9, pattern=ISOTROPIC: mimo_upd_distance(
        layout, thetas, threshold, pattern),
}


def boundary_distance(kind: BoundaryKind | str, **params) -> float:
    """Dispatch to the named boundary criterion.

    >>> boundary_distance("MimoRayleigh", aperture_tx=1.0, aperture_rx=0.5, wavelength=0.125)
    36.0
    """
    kind = BoundaryKind(kind)
    for name in ("aperture", "wavelength"):
        if name in params and not params[name] > 0:
            raise ValueError(f"{name} must be positive for {kind.value}")
    return float(_CLOSED_FORMS[kind](**params))


# -----------------------------------------------------------
# region classification
# -----------------------------------------------------------
def classify_region(layout: ArrayLayout, s, threshold: float = 0.9,
                    pattern: GainPattern = ISOTROPIC) -> ResponseModel:
    """Pick the array response model that is accurate enough at ``s``.

    Phase is planar beyond DDRayl(θ), amplitude uniform beyond UPD(θ).
    """
    s = _position(s)
    r = float(np.linalg.norm(layout.p - s))
    theta = incidence_angle(layout, s)
    aperture = physical_dimension(layout)
    r_dd = ddrayleigh_distance(aperture, layout.wavelength, theta)
    r_upd = upd_distance(layout, theta, threshold, pattern)
    if r >= max(r_upd, r_dd):
        return ResponseModel.UPW
    if r_dd <= r < r_upd:
        return ResponseModel.NUPW
    if r_upd <= r < r_dd:
        return ResponseModel.USW
    return ResponseModel.NUSW


def classify_region_simplified(layout: ArrayLayout, s, threshold: float = 0.9,
                               pattern: GainPattern = ISOTROPIC, *, diupd_value: float | None = None) -> ResponseModel:
    """Direction-free three-region split: UPW / USW / NUSW."""
    r = float(np.linalg.norm(layout.p - _position(s)))
    if r >= rayleigh_distance(physical_dimension(layout), layout.wavelength):
        return ResponseModel.UPW
    bound = diupd_value if diupd_value is not None else diupd(layout, threshold, pattern)
    return ResponseModel.USW if r >= bound else ResponseModel.NUSW


class ModularRegion(str, Enum):
    FAR_FIELD = "FarField"
    COMMON_ANGLE = "SubarrayCommonAngle"
    DISTINCT_ANGLE = "SubarrayDistinctAngle"
    NEAR_FIELD = "ElementNearField"


def classify_modular_region(layout: ArrayLayout, r: float) -> ModularRegion:
    lam = layout.wavelength
    d_mo = physical_dimension(layout)
    z = module_dimension(layout)
    if r >= rayleigh_distance(d_mo, lam):
        return ModularRegion.FAR_FIELD
    if r >= max(5.0 * d_mo, 4.0 * z * d_mo / lam):
        return ModularRegion.COMMON_ANGLE
    if r >= 2.0 * z ** 2 / lam:
        return ModularRegion.DISTINCT_ANGLE
    return ModularRegion.NEAR_FIELD


def in_reactive_region(layout: ArrayLayout, r: float) -> bool:
    return r < reactive_distance(physical_dimension(layout), layout.wavelength)
