"""Element positions and apertures of collocated, sparse and modular arrays.

Element indices are 0-based here; the documented 1-based index m maps to
``m - 1``. Coordinates are always 3D, planar scenarios keep z = 0.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
import numpy.typing as npt

from xlmimo.errors import GeometryError

logger = logging.getLogger(__name__)

ElementPositions = npt.NDArray[np.float64]

UNIT_TOL = 1e-12


class ArrayKind(str, Enum):
    COLLOCATED_ULA = "CollocatedULA"
    SPARSE_ULA = "SparseULA"
    MODULAR_ULA = "ModularULA"
    COLLOCATED_UPA = "CollocatedUPA"
    MODULAR_UPA = "ModularUPA"

    @property
    def is_planar(self) -> bool:
        return self in (ArrayKind.COLLOCATED_UPA, ArrayKind.MODULAR_UPA)

    @property
    def is_modular(self) -> bool:
        return self in (ArrayKind.MODULAR_ULA, ArrayKind.MODULAR_UPA)


@dataclass(frozen=True)
class ArrayLayout:
    """Declarative description of an antenna array.

    For a UPA, ``elems_per_module``/``num_modules``/``module_separation``/
    ``orientation`` describe the horizontal axis and the ``*_vertical``
    fields the vertical one. ``spacing_factor`` is the separation parameter
    I, so the antenna spacing is I * wavelength / 2.
    """

    kind: ArrayKind
    wavelength: float
    elems_per_module: int
    num_modules: int = 1
    spacing_factor: float = 1.0
    module_separation: float | None = None
    reference_point: tuple[float, float, float] = (0.0, 0.0, 0.0)
    orientation: tuple[float, float, float] = (0.0, 1.0, 0.0)
    elems_vertical: int = 1
    num_modules_vertical: int = 1
    module_separation_vertical: float | None = None
    orientation_vertical: tuple[float, float, float] = (0.0, 0.0, 1.0)
    normal: tuple[float, float, float] | None = field(default=None)

    @property
    def spacing(self) -> float:
        return self.spacing_factor * self.wavelength / 2.0

    @property
    def p(self) -> np.ndarray:
        return np.asarray(self.reference_point, dtype=float)

    @property
    def u(self) -> np.ndarray:
        return np.asarray(self.orientation, dtype=float)

    @property
    def u_vertical(self) -> np.ndarray:
        return np.asarray(self.orientation_vertical, dtype=float)

    def with_elements(self, elems_per_module: int) -> ArrayLayout:
        return replace(self, elems_per_module=elems_per_module)


def collocated_ula(num_elements: int, wavelength: float, **kwargs) -> ArrayLayout:
    return ArrayLayout(ArrayKind.COLLOCATED_ULA, wavelength, num_elements, **kwargs)


def sparse_ula(num_elements: int, wavelength: float, spacing_factor: float, **kwargs) -> ArrayLayout:
    return ArrayLayout(ArrayKind.SPARSE_ULA, wavelength, num_elements,
                       spacing_factor=spacing_factor, **kwargs)


def modular_ula(num_modules: int, elems_per_module: int, wavelength: float,
                module_separation: float, **kwargs) -> ArrayLayout:
    return ArrayLayout(ArrayKind.MODULAR_ULA, wavelength, elems_per_module,
                       num_modules=num_modules, module_separation=module_separation, **kwargs)


# -----------------------------------------------------------
# validation
# -----------------------------------------------------------
def validate_layout(layout: ArrayLayout) -> list[str]:
    """Collect every violated layout invariant as a readable message."""
    errors: list[str] = []
    if not layout.wavelength > 0:
        errors.append(f"wavelength must be positive, got {layout.wavelength}")
    if layout.elems_per_module < 1 or layout.num_modules < 1:
        errors.append("elems_per_module and num_modules must be positive integers")
    if abs(np.linalg.norm(layout.u) - 1.0) > UNIT_TOL:
        errors.append(f"orientation {layout.orientation} is not a unit vector")
    if layout.normal is not None and abs(np.linalg.norm(layout.normal) - 1.0) > UNIT_TOL:
        errors.append(f"normal {layout.normal} is not a unit vector")

    kind = layout.kind
    if kind is ArrayKind.COLLOCATED_ULA or kind is ArrayKind.COLLOCATED_UPA:
        if layout.spacing_factor != 1:
            errors.append(f"{kind.value} requires spacing factor I = 1, got {layout.spacing_factor}")
    if kind is ArrayKind.SPARSE_ULA and not layout.spacing_factor > 1:
        errors.append(f"SparseULA requires spacing factor I > 1, got {layout.spacing_factor}")
    if kind is ArrayKind.MODULAR_ULA or kind is ArrayKind.MODULAR_UPA:
        gamma = layout.module_separation
        if gamma is None or gamma < layout.elems_per_module:
            errors.append(
                f"modular layout requires module separation Γ >= M "
                f"(Γ={gamma}, M={layout.elems_per_module})"
            )
    if kind in (ArrayKind.COLLOCATED_ULA, ArrayKind.SPARSE_ULA) and layout.num_modules != 1:
        errors.append(f"{kind.value} must have num_modules = 1")

    if kind.is_planar:
        if abs(np.linalg.norm(layout.u_vertical) - 1.0) > UNIT_TOL:
            errors.append(f"orientation_vertical {layout.orientation_vertical} is not a unit vector")
        elif abs(float(layout.u @ layout.u_vertical)) > 1e-9:
            errors.append("UPA orientations must be orthogonal")
        if layout.elems_vertical < 1 or layout.num_modules_vertical < 1:
            errors.append("elems_vertical and num_modules_vertical must be positive integers")
        if kind is ArrayKind.MODULAR_UPA:
            gamma_v = _vertical_separation(layout)
            if gamma_v is None or gamma_v < layout.elems_vertical:
                errors.append(
                    f"modular layout requires vertical module separation Γ_V >= M_V "
                    f"(Γ_V={gamma_v}, M_V={layout.elems_vertical})"
                )
    return errors


def _vertical_separation(layout: ArrayLayout) -> float | None:
    if layout.module_separation_vertical is not None:
        return layout.module_separation_vertical
    return layout.module_separation


# -----------------------------------------------------------
# positions
# -----------------------------------------------------------
def axis_offsets(num_modules: int, elems_per_module: int, module_separation: float | None) -> np.ndarray:
    """Signed element offsets along one axis, in units of the antenna spacing.

    Module n is centred at (n - (N-1)/2)·Γ and holds M elements at
    (m - (M-1)/2) around its centre.
    """
    delta = np.arange(elems_per_module) - (elems_per_module - 1) / 2.0
    if num_modules == 1:
        return delta
    gamma = float(module_separation)
    centers = (np.arange(num_modules) - (num_modules - 1) / 2.0) * gamma
    return (centers[:, None] + delta[None, :]).ravel()


def build_layout(layout: ArrayLayout, *, strict: bool = True) -> ElementPositions:
    """Return the (n_elements, 3) position matrix of ``layout``.

    With ``strict=False`` the kind-specific spacing checks are skipped, which
    lets a degenerate SparseULA with I = 1 be compared against its collocated
    twin.
    """
    errors = validate_layout(layout)
    if not strict:
        errors = [e for e in errors if "spacing factor" not in e]
    if errors:
        raise GeometryError("; ".join(errors))

    d = layout.spacing
    offsets_h = axis_offsets(layout.num_modules, layout.elems_per_module, layout.module_separation) * d
    if not layout.kind.is_planar:
        positions = layout.p[None, :] + offsets_h[:, None] * layout.u[None, :]
    else:
        offsets_v = axis_offsets(layout.num_modules_vertical, layout.elems_vertical,
                                 _vertical_separation(layout)) * d
        # row-by-row: the vertical index is the slow one
        grid_v, grid_h = np.meshgrid(offsets_v, offsets_h, indexing="ij")
        positions = (layout.p[None, :]
                     + grid_v.ravel()[:, None] * layout.u_vertical[None, :]
                     + grid_h.ravel()[:, None] * layout.u[None, :])
    positions.flags.writeable = False
    return positions


def element_count(layout: ArrayLayout) -> int:
    n = layout.num_modules * layout.elems_per_module
    if layout.kind.is_planar:
        n *= layout.num_modules_vertical * layout.elems_vertical
    return n


def physical_dimension(layout: ArrayLayout) -> float:
    """End-to-end aperture along the array axis (diagonal for UPAs)."""
    d = layout.spacing
    offsets_h = axis_offsets(layout.num_modules, layout.elems_per_module, layout.module_separation)
    span_h = float(offsets_h.max() - offsets_h.min()) * d
    if not layout.kind.is_planar:
        return span_h
    offsets_v = axis_offsets(layout.num_modules_vertical, layout.elems_vertical,
                             _vertical_separation(layout))
    span_v = float(offsets_v.max() - offsets_v.min()) * d
    return float(np.hypot(span_h, span_v))


def module_dimension(layout: ArrayLayout) -> float:
    """Aperture Z of a single module."""
    return (layout.elems_per_module - 1) * layout.spacing


def module_centers(layout: ArrayLayout) -> np.ndarray:
    n = layout.num_modules
    gamma = layout.module_separation if n > 1 else 0.0
    offsets = (np.arange(n) - (n - 1) / 2.0) * gamma * layout.spacing
    return layout.p[None, :] + offsets[:, None] * layout.u[None, :]


def axis_coordinates(layout: ArrayLayout) -> np.ndarray:
    """Projection of each element offset onto the array axis, i.e. δ_m·d."""
    return (build_layout(layout, strict=False) - layout.p[None, :]) @ layout.u


# -----------------------------------------------------------
# orientation helpers
# -----------------------------------------------------------
def array_normal(layout: ArrayLayout) -> np.ndarray:
    """Common boresight of every element.

    Defaults to û × ẑ for linear arrays (û × x̂ when û is vertical) and to
    û_H × û_V for planar arrays.
    """
    if layout.normal is not None:
        return np.asarray(layout.normal, dtype=float)
    if layout.kind.is_planar:
        n = np.cross(layout.u, layout.u_vertical)
    else:
        n = np.cross(layout.u, np.array([0.0, 0.0, 1.0]))
        if np.linalg.norm(n) < 1e-9:
            n = np.cross(layout.u, np.array([1.0, 0.0, 0.0]))
    return n / np.linalg.norm(n)


def source_point(layout: ArrayLayout, r: float, theta: float) -> np.ndarray:
    """Point at distance ``r`` from the reference point, in front of the array,
    such that the angle between (p - s) and û equals ``theta``."""
    n = array_normal(layout)
    return layout.p + r * (np.sin(theta) * n - np.cos(theta) * layout.u)


def range_and_angle(layout: ArrayLayout, s: npt.ArrayLike) -> tuple[float, float]:
    """(r, θ) of a source relative to the reference point and axis û."""
    diff = layout.p - np.asarray(s, dtype=float)
    r = float(np.linalg.norm(diff))
    if r == 0.0:
        return 0.0, np.pi / 2
    cos_theta = float(np.clip(diff @ layout.u / r, -1.0, 1.0))
    return r, float(np.arccos(cos_theta))


def incidence_angle(layout: ArrayLayout, s: npt.ArrayLike) -> float:
    """Angle used by the direction-dependent criteria.

    ULAs use θ as defined by :func:`range_and_angle`. UPAs use the
    complement of the angle to the array normal, so normal incidence maps to
    π/2 as it does for a broadside ULA source.
    """
    if not layout.kind.is_planar:
        return range_and_angle(layout, s)[1]
    diff = np.asarray(s, dtype=float) - layout.p
    r = float(np.linalg.norm(diff))
    off_normal = float(np.arccos(np.clip(abs(diff @ array_normal(layout)) / r, -1.0, 1.0)))
    return np.pi / 2 - off_normal
