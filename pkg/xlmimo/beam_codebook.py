"""Far-field DFT and near-field polar-domain beam codebooks."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import numpy.typing as npt
from scipy.integrate import quad
from scipy.optimize import bisect

from xlmimo.array_geometry import (
    ArrayKind,
    ArrayLayout,
    element_count,
    physical_dimension,
    source_point,
)
from xlmimo.errors import CodebookError
from xlmimo.nearfield_response import ResponseModel, reactive_distance, steering

logger = logging.getLogger(__name__)

DEFAULT_RINGS = 6
LAMBDA_SEARCH_MAX = 100.0


class CodewordTag(NamedTuple):
    n: int
    s: int
    angle: float
    distance: float


@dataclass(frozen=True)
class UniformSampling:
    """Rings at explicit distances, shared by every angle."""

    distances: tuple[float, ...]


@dataclass(frozen=True)
class NonUniformSampling:
    pass


Sampling = UniformSampling | NonUniformSampling


@dataclass(frozen=True)
class Codebook:
    codewords: np.ndarray
    tags: tuple[CodewordTag, ...]
    num_angles: int
    rings: int = 0
    threshold: float | None = None
    z_delta: float | None = None

    def __post_init__(self):
        if len(self.tags) != len(self.codewords):
            raise CodebookError("one tag per codeword is required")
        if len({(t.n, t.s) for t in self.tags}) != len(self.tags):
            raise CodebookError("codeword tags must be unique")
        self.codewords.flags.writeable = False

    def __len__(self) -> int:
        return len(self.tags)

    def __getitem__(self, index: int) -> np.ndarray:
        return self.codewords[index]

    def index_of(self, n: int, s: int) -> int:
        for i, tag in enumerate(self.tags):
            if tag.n == n and tag.s == s:
                return i
        raise CodebookError(f"no codeword with angle index {n} and ring {s}")

    def rings_of(self, n: int) -> list[int]:
        """Codeword indices of angle ``n``, far-field ring first."""
        return [i for i, tag in enumerate(self.tags) if tag.n == n]

    def ring_counts(self) -> list[int]:
        counts = [0] * self.num_angles
        for tag in self.tags:
            counts[tag.n] += 1
        return counts


def spatial_angles(num_angles: int) -> np.ndarray:
    """ϑ_n = (2n − N + 1)/N."""
    n = np.arange(num_angles)
    return (2 * n - num_angles + 1) / num_angles


def dft_codeword(num_elements: int, angle: float) -> np.ndarray:
    return np.exp(1j * np.pi * np.arange(num_elements) * angle) / np.sqrt(num_elements)


def dft_codebook(num_angles: int) -> Codebook:
    if num_angles < 1:
        raise CodebookError(f"codebook size must be positive, got {num_angles}")
    angles = spatial_angles(num_angles)
    words = np.stack([dft_codeword(num_angles, a) for a in angles])
    tags = tuple(CodewordTag(n, 0, float(a), np.inf) for n, a in enumerate(angles))
    return Codebook(words, tags, num_angles)


# -----------------------------------------------------------
# Fresnel machinery
# -----------------------------------------------------------
def fresnel_integrals(x: float) -> tuple[float, float]:
    """(C(x), S(x)) by adaptive quadrature."""
    c, _ = quad(lambda t: np.cos(np.pi * t * t / 2.0), 0.0, x, limit=200)
    s, _ = quad(lambda t: np.sin(np.pi * t * t / 2.0), 0.0, x, limit=200)
    return c, s


def fresnel_g(lam: float) -> complex:
    """G(Λ) = (C(Λ) + jS(Λ))/Λ, with G(0) = 1."""
    if lam < 0:
        raise CodebookError(f"Λ must be non-negative, got {lam}")
    if lam == 0.0:
        return 1.0 + 0.0j
    c, s = fresnel_integrals(lam)
    return complex(c, s) / lam


def solve_lambda(delta: float, step: float = 0.05) -> float:
    """Smallest Λ with |G(Λ)| = Δ."""
    if not 0.0 < delta < 1.0:
        raise CodebookError(f"correlation threshold must lie in (0, 1), got {delta}")

    def excess(x: float) -> float:
        return abs(fresnel_g(x)) - delta

    lo = 0.0
    while lo < LAMBDA_SEARCH_MAX:
        hi = min(lo + step, LAMBDA_SEARCH_MAX)
        if excess(hi) <= 0.0:
            return float(bisect(excess, lo, hi, xtol=1e-7))
        lo = hi
    raise CodebookError(f"|G(Λ)| never reaches {delta} on [0, {LAMBDA_SEARCH_MAX}]")


def threshold_distance(aperture: float, wavelength: float, delta: float) -> float:
    """Z_Δ = D² / (2λΛ_Δ²)."""
    return aperture ** 2 / (2.0 * wavelength * solve_lambda(delta) ** 2)


def fresnel_correlation(num_elements: int, spacing: float, wavelength: float, angle: float,
                        r_p: float, r_q: float) -> float:
    """Fresnel approximation of the correlation of two same-angle codewords."""
    aperture = (num_elements - 1) * spacing
    inv = abs(1.0 / r_p - 1.0 / r_q)
    lam = np.sqrt(aperture ** 2 * (1.0 - angle ** 2) * inv / (2.0 * wavelength))
    return abs(fresnel_g(float(lam)))


# -----------------------------------------------------------
# polar codebook
# -----------------------------------------------------------
def _check_layout(layout: ArrayLayout) -> None:
    if layout.kind is not ArrayKind.COLLOCATED_ULA:
        raise CodebookError(f"polar codebooks need a half-wavelength collocated ULA, got {layout.kind.value}")


def codeword_source(layout: ArrayLayout, angle: float, r: float) -> np.ndarray:
    """Physical point addressed by spatial angle ϑ = −cosθ at distance r."""
    if not -1.0 <= angle <= 1.0:
        raise CodebookError(f"spatial angle must lie in [-1, 1], got {angle}")
    return source_point(layout, r, float(np.arccos(-angle)))


def usw_codeword(layout: ArrayLayout, angle: float, r: float) -> np.ndarray:
    """Unit-norm USW codeword, phase-aligned so its first entry is real positive."""
    if np.isinf(r):
        return dft_codeword(element_count(layout), angle)
    a = steering(ResponseModel.USW, layout, codeword_source(layout, angle, r))
    a = a * np.exp(-1j * np.angle(a[0]))
    return a / np.linalg.norm(a)


def polar_codebook(layout: ArrayLayout, num_angles: int | None = None, *, rings: int | None = None,
                   r_min: float | None = None, threshold: float = 0.5,
                   sampling: Sampling = NonUniformSampling()) -> Codebook:
    """Angle-major polar-domain codebook, index = position in the (n, s) scan.

    ``rings`` is S, the ring count per angle including the far-field ring
    s = 0. Non-uniform rings sit at r_{n,s} = Z_Δ(1 − ϑ_n²)/s for
    s = 1 … S − 1 and stop early below ``r_min``, which defaults to the
    reactive boundary. Angles near end-fire therefore carry fewer rings.
    """
    _check_layout(layout)
    n_elem = element_count(layout)
    num_angles = n_elem if num_angles is None else num_angles
    if num_angles < 1:
        raise CodebookError(f"codebook size must be positive, got {num_angles}")
    aperture = physical_dimension(layout)
    boundary = reactive_distance(aperture, layout.wavelength)
    if r_min is None:
        r_min = boundary
    elif r_min < boundary:
        raise CodebookError(
            f"r_min={r_min:.4g} m lies inside the reactive region (boundary {boundary:.4g} m)"
        )
    if rings is None:
        rings = DEFAULT_RINGS if isinstance(sampling, NonUniformSampling) else len(sampling.distances) + 1
    if rings < 1:
        raise CodebookError(f"a polar codebook needs at least the far-field ring, got rings={rings}")

    z = threshold_distance(aperture, layout.wavelength, threshold)
    words: list[np.ndarray] = []
    tags: list[CodewordTag] = []
    for n, angle in enumerate(spatial_angles(num_angles)):
        words.append(dft_codeword(n_elem, angle))
        tags.append(CodewordTag(n, 0, float(angle), np.inf))
        if isinstance(sampling, UniformSampling):
            distances = sorted(sampling.distances, reverse=True)[:rings - 1]
        else:
            distances = [z * (1.0 - angle ** 2) / s for s in range(1, rings)]
        for s, r in enumerate(distances, start=1):
            if r < r_min:
                break
            words.append(usw_codeword(layout, angle, r))
            tags.append(CodewordTag(n, s, float(angle), float(r)))
    logger.debug(f"polar codebook: {len(tags)} codewords over {num_angles} angles, Z_Δ={z:.4g} m")
    return Codebook(np.stack(words), tuple(tags), num_angles, rings, threshold, z)


def codeword_correlation(a_p: npt.ArrayLike, a_q: npt.ArrayLike) -> float:
    a_p, a_q = np.asarray(a_p), np.asarray(a_q)
    norm = np.linalg.norm(a_p) * np.linalg.norm(a_q)
    if norm == 0.0:
        raise CodebookError("codeword correlation needs nonzero vectors")
    return float(abs(np.vdot(a_p, a_q)) / norm)


CODEBOOK_HEADER = ["n", "s", "angle", "distance"]


def codebook_to_csv_rows(codebook: Codebook) -> tuple[list[str], list[list]]:
    width = codebook.codewords.shape[1]
    header = CODEBOOK_HEADER + [f"{part}{m}" for m in range(width) for part in ("re", "im")]
    rows = []
    for tag, word in zip(codebook.tags, codebook.codewords):
        entries = np.empty(2 * width)
        entries[0::2], entries[1::2] = word.real, word.imag
        rows.append([tag.n, tag.s, tag.angle, tag.distance, *entries.tolist()])
    return header, rows
