"""SNR scaling laws, beam focusing patterns, spatial resolution, multi-user
SINR and degrees of freedom."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np
import numpy.typing as npt
from scipy import linalg
from scipy.optimize import bisect

from xlmimo.array_geometry import (
    ArrayKind,
    ArrayLayout,
    collocated_ula,
    element_count,
    physical_dimension,
    source_point,
)
from xlmimo.errors import ChannelError, XlMimoError
from xlmimo.nearfield_response import ResponseModel, effective_rayleigh_distance, reactive_distance, steering

logger = logging.getLogger(__name__)


def to_db(value):
    return 10.0 * np.log10(value)


def from_db(value_db):
    return 10.0 ** (np.asarray(value_db, dtype=float) / 10.0)


@dataclass(frozen=True)
class LinkBudget:
    """Transmit SNR P̄ = P/σ² (linear), optionally one value per user."""

    transmit_snr: float
    user_snrs: tuple[float, ...] = ()

    def __post_init__(self):
        if not self.transmit_snr > 0 or any(p <= 0 for p in self.user_snrs):
            raise XlMimoError("transmit SNR must be positive")

    @classmethod
    def from_db(cls, snr_db: float, num_users: int = 0) -> LinkBudget:
        p = float(from_db(snr_db))
        return cls(p, (p,) * num_users)

    def powers(self, num_users: int) -> np.ndarray:
        if self.user_snrs:
            if len(self.user_snrs) != num_users:
                raise XlMimoError(f"{len(self.user_snrs)} user SNRs given for {num_users} users")
            return np.asarray(self.user_snrs, dtype=float)
        return np.full(num_users, self.transmit_snr)


# -----------------------------------------------------------
# SNR scaling
# -----------------------------------------------------------
class SnrReport(NamedTuple):
    numeric: float
    closed_form: float | None


def angular_span(num_elements: int, spacing: float, r: float, theta: float) -> float:
    """Angle subtended at the source by the two ends of the array."""
    a = num_elements * spacing / (2.0 * r * np.sin(theta))
    cot = np.cos(theta) / np.sin(theta)
    return float(np.arctan(a + cot) + np.arctan(a - cot))


def nusw_snr_closed_form(transmit_snr: float, wavelength: float, spacing: float,
                         num_elements: int, r: float, theta: float) -> float:
    return (transmit_snr * wavelength ** 2 / ((4.0 * np.pi) ** 2 * spacing * r * np.sin(theta))
            * angular_span(num_elements, spacing, r, theta))


def mrc_snr(h: npt.ArrayLike, transmit_snr: float, *, layout: ArrayLayout | None = None,
            r: float | None = None, theta: float | None = None) -> SnrReport:
    """γ = P̄‖h‖².

    Given a collocated ULA and the source polar coordinates, the
    angular-span closed form is returned alongside for cross-checking.
    """
    h = np.asarray(h)
    energy = float(np.vdot(h, h).real)
    if energy == 0.0:
        raise ChannelError("SNR of a zero channel is undefined")
    closed = None
    if layout is not None and layout.kind is ArrayKind.COLLOCATED_ULA and r is not None and theta is not None:
        closed = nusw_snr_closed_form(transmit_snr, layout.wavelength, layout.spacing,
                                      element_count(layout), r, theta)
    return SnrReport(transmit_snr * energy, closed)


def upw_snr(num_elements: int, wavelength: float, r: float, transmit_snr: float) -> float:
    return transmit_snr * num_elements * wavelength ** 2 / (4.0 * np.pi * r) ** 2


def asymptotic_snr_limit(transmit_snr: float, wavelength: float, spacing: float, r: float, theta: float) -> float:
    """SNR ceiling of an infinitely long isotropic ULA."""
    sin_theta = np.sin(theta)
    if abs(sin_theta) < 1e-15:
        raise ChannelError("asymptotic SNR is unbounded for an end-fire source")
    return float(transmit_snr * wavelength ** 2 * np.pi / ((4.0 * np.pi) ** 2 * spacing * r * sin_theta))


# -----------------------------------------------------------
# beam focusing patterns
# -----------------------------------------------------------
def beam_focusing_gain(v: npt.ArrayLike, a: npt.ArrayLike) -> float:
    """|vᴴa| / (‖v‖‖a‖)."""
    v, a = np.asarray(v), np.asarray(a)
    norm = np.linalg.norm(v) * np.linalg.norm(a)
    if norm == 0.0:
        raise ChannelError("beam focusing gain needs nonzero vectors")
    return float(abs(np.vdot(v, a)) / norm)


def dirichlet(m_tilde: int, d_tilde: float, delta):
    """|Ξ_{M̃,d̃}(Δ)| = |sin(πM̃d̃Δ) / (M̃ sin(πd̃Δ))|, equal to 1 on every main or grating lobe."""
    x = d_tilde * np.asarray(delta, dtype=float)
    x = np.mod(x + 0.5, 1.0) - 0.5
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.abs(np.sin(np.pi * m_tilde * x) / (m_tilde * np.sin(np.pi * x)))
    out = np.where(np.abs(x) < 1e-12, 1.0, out)
    return float(out) if out.ndim == 0 else out


def ff_pattern_closed_form(layout: ArrayLayout, delta):
    """Far-field beam pattern as a function of Δ_θ = cosθ′ − cosθ."""
    if layout.kind is ArrayKind.MODULAR_ULA:
        return (dirichlet(layout.num_modules, layout.module_separation / 2.0, delta)
                * dirichlet(layout.elems_per_module, 0.5, delta))
    if layout.kind in (ArrayKind.COLLOCATED_ULA, ArrayKind.SPARSE_ULA):
        return dirichlet(element_count(layout), layout.spacing_factor / 2.0, delta)
    raise XlMimoError(f"no closed-form far-field pattern for {layout.kind.value}")


def _direction(layout: ArrayLayout, theta: float) -> np.ndarray:
    return source_point(layout, 1.0, theta)


def ff_pattern(layout: ArrayLayout, theta: float, theta_prime: float) -> float:
    """Far-field observation of a far-field beam, by direct evaluation."""
    v = steering(ResponseModel.UPW, layout, _direction(layout, theta_prime))
    a = steering(ResponseModel.UPW, layout, _direction(layout, theta))
    return beam_focusing_gain(v, a)


def nf_ff_pattern(layout: ArrayLayout, r: float, theta: float, theta_prime: float,
                  model: ResponseModel = ResponseModel.USW) -> float:
    """Gain of a far-field beam towards θ′ observed at the near-field point (r, θ)."""
    v = steering(ResponseModel.UPW, layout, _direction(layout, theta_prime))
    a = steering(model, layout, source_point(layout, r, theta))
    return beam_focusing_gain(v, a)


def nf_nf_pattern(layout: ArrayLayout, r: float, theta: float, r_prime: float, theta_prime: float,
                  model: ResponseModel = ResponseModel.USW) -> float:
    v = steering(model, layout, source_point(layout, r_prime, theta_prime))
    a = steering(model, layout, source_point(layout, r, theta))
    return beam_focusing_gain(v, a)


def measured_effective_rayleigh(layout: ArrayLayout, theta: float, threshold: float = 0.95,
                                grid_points: int = 400) -> float:
    """Smallest distance beyond which a far-field beam keeps at least ``threshold`` of its gain.

    The last sub-threshold point of a log-spaced scan is refined by bisection.
    """
    aperture = physical_dimension(layout)
    lam = layout.wavelength
    lo = reactive_distance(aperture, lam)
    hi = 4.0 * aperture ** 2 / lam

    def excess(r: float) -> float:
        return nf_ff_pattern(layout, r, theta, theta) - threshold

    grid = np.geomspace(lo, hi, grid_points)
    below = [r for r in grid if excess(r) < 0.0]
    if not below:
        return float(lo)
    last = below[-1]
    nxt = grid[np.searchsorted(grid, last) + 1] if last < grid[-1] else hi
    if excess(nxt) < 0.0:
        raise XlMimoError(f"beam gain stays below {threshold} up to {hi:.3g} m")
    return float(bisect(excess, last, nxt, rtol=1e-9))


class Widths(NamedTuple):
    null_to_null: float
    level_width: float


def _crossing(x0: float, x1: float, g0: float, g1: float, level: float) -> float:
    if g1 == g0:
        return x1
    return x0 + (level - g0) * (x1 - x0) / (g1 - g0)


def measure_widths(samples: npt.ArrayLike, gains: npt.ArrayLike, level: float = 0.5) -> Widths:
    """Main-lobe widths of a sampled pattern.

    The null-to-null width runs between the first local minima either side
    of the peak; the level width between the interpolated crossings of
    ``level``.
    """
    x = np.asarray(samples, dtype=float)
    g = np.asarray(gains, dtype=float)
    peak = int(np.argmax(g))

    right = peak
    while right + 1 < len(g) and g[right + 1] < g[right]:
        right += 1
    left = peak
    while left - 1 >= 0 and g[left - 1] < g[left]:
        left -= 1

    hi = peak
    while hi + 1 < len(g) and g[hi + 1] >= level:
        hi += 1
    lo = peak
    while lo - 1 >= 0 and g[lo - 1] >= level:
        lo -= 1
    x_hi = _crossing(x[hi], x[hi + 1], g[hi], g[hi + 1], level) if hi + 1 < len(g) else x[hi]
    x_lo = _crossing(x[lo], x[lo - 1], g[lo], g[lo - 1], level) if lo - 1 >= 0 else x[lo]
    return Widths(float(x[right] - x[left]), float(x_hi - x_lo))


class Resolution(NamedTuple):
    angular: float
    distance: float
    half_power_distance: float


def half_power_distance(aperture: float, wavelength: float, theta_prime: float) -> float:
    return 0.1 * np.sin(theta_prime) ** 2 * 2.0 * aperture ** 2 / wavelength


def resolution(layout: ArrayLayout, theta_prime: float) -> Resolution:
    """Effective angular and distance (in 1/r) resolution of a linear array."""
    kind = layout.kind
    if kind is ArrayKind.COLLOCATED_ULA:
        angular = 2.0 / element_count(layout)
    elif kind is ArrayKind.MODULAR_ULA:
        angular = 2.0 / (layout.num_modules * layout.module_separation)
    elif kind is ArrayKind.SPARSE_ULA:
        angular = 2.0 / (element_count(layout) * layout.spacing_factor)
    else:
        raise XlMimoError(f"resolution is defined for linear arrays, got {kind.value}")
    r_hp = half_power_distance(physical_dimension(layout), layout.wavelength, theta_prime)
    return Resolution(angular, 1.0 / r_hp, r_hp)


def grating_lobe_separation(layout: ArrayLayout) -> float:
    """Spatial-frequency gap between adjacent grating lobes; infinite when there are none."""
    if layout.kind is ArrayKind.MODULAR_ULA:
        return 2.0 / layout.module_separation
    if layout.kind is ArrayKind.SPARSE_ULA:
        return 2.0 / layout.spacing_factor
    return math.inf


# -----------------------------------------------------------
# multi-user receive beamforming
# -----------------------------------------------------------
class Beamformer(str, Enum):
    MRC = "MRC"
    ZF = "ZF"
    MMSE = "MMSE"


class MultiUserResult(NamedTuple):
    sinr: np.ndarray
    sum_rate: float
    combiners: np.ndarray


def _zf_combiners(h: np.ndarray) -> np.ndarray:
    m, k = h.shape
    if k > m or np.linalg.matrix_rank(h) < k:
        raise ChannelError(f"ZF needs {k} linearly independent channels on {m} antennas")
    out = np.empty_like(h)
    for i in range(k):
        others = np.delete(h, i, axis=1)
        if others.shape[1] == 0:
            proj = h[:, i]
        else:
            # project out span(others)
            span = linalg.orth(others)
            proj = h[:, i] - span @ (span.conj().T @ h[:, i])
        norm = np.linalg.norm(proj)
        if norm < 1e-12 * np.linalg.norm(h[:, i]):
            raise ChannelError(f"user {i} channel lies in the span of the other users")
        out[:, i] = proj / norm
    return out


def _mmse_combiners(h: np.ndarray, powers: np.ndarray) -> np.ndarray:
    """(Σ_{i≠k} P̄_i h_i h_iᴴ + I)⁻¹h_k through the Woodbury identity, so no M×M system is formed."""
    k = h.shape[1]
    out = np.empty_like(h)
    for i in range(k):
        others = np.delete(h, i, axis=1)
        p = np.delete(powers, i)
        if others.shape[1] == 0:
            w = h[:, i]
        else:
            inner = np.diag(1.0 / p) + others.conj().T @ others
            w = h[:, i] - others @ linalg.solve(inner, others.conj().T @ h[:, i], assume_a="her")
        out[:, i] = w / np.linalg.norm(w)
    return out


def combiners(beamformer: Beamformer | str, channels: np.ndarray, powers: npt.ArrayLike) -> np.ndarray:
    """Unit-norm receive combiners, one column per user."""
    beamformer = Beamformer(beamformer)
    h = np.asarray(channels, dtype=complex)
    if beamformer is Beamformer.MRC:
        return h / np.linalg.norm(h, axis=0, keepdims=True)
    if beamformer is Beamformer.ZF:
        return _zf_combiners(h)
    return _mmse_combiners(h, np.asarray(powers, dtype=float))


def sinr_with(v: np.ndarray, channels: np.ndarray, powers: npt.ArrayLike) -> np.ndarray:
    """γ_k for given combiners ``v`` (columns) on the true ``channels``."""
    powers = np.asarray(powers, dtype=float)
    gains = np.abs(v.conj().T @ channels) ** 2 * powers[None, :]
    signal = np.diag(gains).copy()
    interference = gains.sum(axis=1) - signal
    return signal / (interference + 1.0)


def multiuser_receive_sinr(beamformer: Beamformer | str, channels: npt.ArrayLike,
                           powers: npt.ArrayLike, design_channels: npt.ArrayLike | None = None) -> MultiUserResult:
    """Per-user SINR and sum rate (bps/Hz) of linear receive beamforming.

    ``channels`` is M×K. When ``design_channels`` is given the combiners
    are built from it and evaluated on ``channels``, which models a
    mismatched (e.g. far-field) design.
    """
    h = np.asarray(channels, dtype=complex)
    if h.ndim != 2 or h.shape[1] < 1:
        raise ChannelError("channels must be an M×K matrix with K >= 1")
    powers = np.broadcast_to(np.asarray(powers, dtype=float), (h.shape[1],))
    basis = h if design_channels is None else np.asarray(design_channels, dtype=complex)
    v = combiners(beamformer, basis, powers)
    sinr = sinr_with(v, h, powers)
    return MultiUserResult(sinr, float(np.sum(np.log2(1.0 + sinr))), v)


def squared_correlation(h_k: npt.ArrayLike, h_j: npt.ArrayLike) -> float:
    """ρ = |h_kᴴh_j|² / (‖h_k‖²‖h_j‖²)."""
    return beam_focusing_gain(h_k, h_j) ** 2


def two_user_closed_form(beamformer: Beamformer | str, h_1: npt.ArrayLike, h_2: npt.ArrayLike,
                         p_1: float, p_2: float) -> tuple[float, float]:
    beamformer = Beamformer(beamformer)
    rho = squared_correlation(h_1, h_2)
    e = (float(np.linalg.norm(h_1)) ** 2, float(np.linalg.norm(h_2)) ** 2)
    p = (p_1, p_2)
    out = []
    for k, other in ((0, 1), (1, 0)):
        base = p[k] * e[k]
        x = p[other] * e[other]
        if beamformer is Beamformer.MRC:
            out.append(base * (1.0 - x * rho / (x * rho + 1.0)))
        elif beamformer is Beamformer.ZF:
            out.append(base * (1.0 - rho))
        else:
            out.append(base * (1.0 - x * rho / (x + 1.0)))
    return out[0], out[1]


# -----------------------------------------------------------
# degrees of freedom
# -----------------------------------------------------------
def edof(h: npt.ArrayLike) -> float:
    """(tr(HHᴴ) / ‖HHᴴ‖_F)²."""
    h = np.atleast_2d(np.asarray(h))
    gram = h @ h.conj().T
    fro = np.linalg.norm(gram, "fro")
    if fro == 0.0:
        raise ChannelError("EDoF of a zero matrix is undefined")
    return float((np.trace(gram).real / fro) ** 2)


class DofGeometry(str, Enum):
    ULA = "ULA"
    UPA = "UPA"


def dof_approx(geometry: DofGeometry | str, size_t: float, size_r: float, r: float, wavelength: float) -> float:
    """D_T·D_R/(λr) for ULAs (lengths), A_T·A_R/(λ²r²) for UPAs (areas)."""
    if not r > 0:
        raise XlMimoError(f"link distance must be positive, got {r}")
    if DofGeometry(geometry) is DofGeometry.ULA:
        return size_t * size_r / (wavelength * r)
    return size_t * size_r / (wavelength ** 2 * r ** 2)


def effective_rayleigh_check(num_elements: int, wavelength: float, theta: float) -> tuple[float, float]:
    """(measured, formula) effective Rayleigh distance of a collocated ULA."""
    layout = collocated_ula(num_elements, wavelength)
    return (measured_effective_rayleigh(layout, theta),
            effective_rayleigh_distance(physical_dimension(layout), wavelength, theta))
