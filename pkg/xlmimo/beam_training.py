"""Narrowband beam training over DFT and polar-domain codebooks.

Every method talks to the channel only through :class:`Sounder`, so the
reported overhead is the number of pilot measurements actually taken.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np
import numpy.typing as npt

from xlmimo.array_geometry import ArrayLayout
from xlmimo.beam_codebook import Codebook, dft_codebook, dft_codeword, usw_codeword
from xlmimo.errors import TrainingError

logger = logging.getLogger(__name__)


def measure(h: npt.ArrayLike, w: npt.ArrayLike, transmit_power: float, *, noise_power: float = 0.0,
            rng: np.random.Generator | None = None) -> float:
    """|hᴴw·x + z|² for a pilot x = √P and z ~ CN(0, σ²); noiseless without ``rng``."""
    y = np.vdot(np.asarray(h), np.asarray(w)) * np.sqrt(transmit_power)
    if rng is not None and noise_power > 0.0:
        y += np.sqrt(noise_power / 2.0) * (rng.standard_normal() + 1j * rng.standard_normal())
    return float(abs(y) ** 2)


@dataclass
class Sounder:
    """A channel under test plus the measurement counter."""

    h: np.ndarray
    transmit_power: float
    noise_power: float = 0.0
    rng: np.random.Generator | None = None
    count: int = field(default=0, init=False)

    def __call__(self, w: np.ndarray) -> float:
        self.count += 1
        return measure(self.h, w, self.transmit_power, noise_power=self.noise_power, rng=self.rng)


class TrainingOutcome(NamedTuple):
    index: int
    overhead: int
    achieved_gain: float
    success: bool


def _gain(codeword: np.ndarray, h: np.ndarray) -> float:
    return float(abs(np.vdot(codeword, h)) / (np.linalg.norm(codeword) * np.linalg.norm(h)))


def optimal_index(codebook: Codebook, h: npt.ArrayLike) -> int:
    """Noiseless exhaustive winner; ties go to the lowest index."""
    h = np.asarray(h)
    gains = np.abs(codebook.codewords.conj() @ h)
    return int(np.argmax(gains))


def _outcome(codebook: Codebook, sounder: Sounder, index: int) -> TrainingOutcome:
    return TrainingOutcome(index, sounder.count, _gain(codebook[index], sounder.h),
                           index == optimal_index(codebook, sounder.h))


def _best(powers: list[tuple[int, float]]) -> int:
    return min(powers, key=lambda item: (-item[1], item[0]))[0]


def exhaustive_2d(codebook: Codebook, sounder: Sounder) -> TrainingOutcome:
    if len(codebook) == 0:
        raise TrainingError("cannot train over an empty codebook")
    powers = [(i, sounder(w)) for i, w in enumerate(codebook.codewords)]
    return _outcome(codebook, sounder, _best(powers))


def ff_exhaustive(dft_cb: Codebook, polar_cb: Codebook, sounder: Sounder) -> TrainingOutcome:
    """Far-field sweep only; the winner is the far-field ring of the best angle."""
    powers = [(i, sounder(w)) for i, w in enumerate(dft_cb.codewords)]
    n = dft_cb.tags[_best(powers)].n
    return _outcome(polar_cb, sounder, polar_cb.index_of(n, 0))


def dominant_region(powers: np.ndarray, threshold_db: float) -> tuple[int, int]:
    """Span from the first to the last beam within ``threshold_db`` of the peak.

    A near-field user spreads its power over several DFT beams with ripple
    dips in between, and the peak often sits at one edge of that spread.
    The span covers the dips instead of stopping at the first one.
    """
    powers = np.asarray(powers, dtype=float)
    peak = float(powers.max())
    if peak <= 0.0:
        raise TrainingError("no dominant angular region: every beam measured zero power")
    above = np.flatnonzero(powers >= peak * 10.0 ** (-threshold_db / 10.0))
    return int(above[0]), int(above[-1])


def middle_candidates(region: tuple[int, int], k: int, num_angles: int) -> list[int]:
    """K consecutive indices centred on the ⌈L/2⌉-th member of the region."""
    lo, hi = region
    length = hi - lo + 1
    centre = lo + math.ceil(length / 2) - 1
    start = min(max(centre - k // 2, 0), max(num_angles - k, 0))
    return list(range(start, min(start + k, num_angles)))


def two_phase(dft_cb: Codebook, polar_cb: Codebook, sounder: Sounder, k: int,
              region_threshold_db: float = 3.0) -> TrainingOutcome:
    """Angle sweep, then a distance sweep over every ring of the middle K
    angles of the dominant region, far-field ring included."""
    if k < 1:
        raise TrainingError(f"K must be at least 1, got {k}")
    if dft_cb.num_angles != polar_cb.num_angles:
        raise TrainingError("DFT and polar codebooks must share the angle grid")
    phase1 = np.array([sounder(w) for w in dft_cb.codewords])
    region = dominant_region(phase1, region_threshold_db)
    candidates = middle_candidates(region, k, dft_cb.num_angles)
    logger.debug(f"two-phase: dominant region {region}, candidates {candidates}")

    powers = [(i, sounder(polar_cb[i])) for n in candidates for i in polar_cb.rings_of(n)]
    return _outcome(polar_cb, sounder, _best(powers))


def _log2_exact(value: int, name: str) -> int:
    if value < 1 or value & (value - 1):
        raise TrainingError(f"{name} must be a power of two, got {value}")
    return value.bit_length() - 1


def _subarray(word: np.ndarray, active: int) -> np.ndarray:
    n = len(word)
    start = (n - active) // 2
    out = np.zeros(n, dtype=complex)
    out[start:start + active] = word[start:start + active]
    return out / np.linalg.norm(out)


def _ring_distance(polar_cb: Codebook, angle: float, s: int) -> float:
    if s == 0:
        return np.inf
    return polar_cb.z_delta * (1.0 - angle ** 2) / s


def hierarchical_two_stage(polar_cb: Codebook, sounder: Sounder, n_l: int, layout: ArrayLayout) -> TrainingOutcome:
    """Binary far-field search on the central N_L elements, then joint
    angle/ring refinement on progressively larger subarrays.

    Stage 2 halves the angle interval and the ring-index interval each
    level and measures the four combinations; the ring finally reported is
    the lower end of the surviving ring interval.
    """
    n = len(sounder.h)
    levels_1 = _log2_exact(n_l, "N_L")
    total = _log2_exact(n, "N")
    if n_l > n:
        raise TrainingError(f"N_L={n_l} exceeds the array size {n}")
    if polar_cb.num_angles != n or polar_cb.z_delta is None:
        raise TrainingError("hierarchical training needs an N-angle non-uniform polar codebook")

    centre, width = 0.0, 2.0
    for level in range(1, levels_1 + 1):
        half = width / 4.0
        options = [centre - half, centre + half]
        powers = [sounder(_subarray(dft_codeword(n, c), 2 ** level)) for c in options]
        centre = options[int(np.argmax(powers))]
        width /= 2.0

    ring_lo, ring_hi = 0, max(polar_cb.rings - 1, 0)
    for level in range(1, total - levels_1 + 1):
        half = width / 4.0
        mid = (ring_lo + ring_hi) // 2
        ring_halves = [(ring_lo, mid), (min(mid + 1, ring_hi), ring_hi)]
        active = n_l * 2 ** level
        trials = []
        for c in (centre - half, centre + half):
            for lo, hi in ring_halves:
                s_rep = (lo + hi) // 2
                word = usw_codeword(layout, c, _ring_distance(polar_cb, c, s_rep))
                trials.append(((c, lo, hi), sounder(_subarray(word, active))))
        (centre, ring_lo, ring_hi), _ = max(trials, key=lambda item: item[1])
        width /= 2.0

    angle_index = int(round((centre * n + n - 1) / 2.0))
    available = [polar_cb.tags[i].s for i in polar_cb.rings_of(angle_index)]
    ring = max(s for s in available if s <= ring_lo)
    return _outcome(polar_cb, sounder, polar_cb.index_of(angle_index, ring))


def overhead_table(n: int, s: int, k: int, n_l: int, t: int) -> dict[str, int]:
    """Pilot counts of the training schemes."""
    for name, value in (("N", n), ("S", s), ("K", k), ("N_L", n_l), ("T", t)):
        if value < 1:
            raise TrainingError(f"{name} must be a positive integer, got {value}")
    log_n = _log2_exact(n, "N")
    log_l = _log2_exact(n_l, "N_L")
    return {
        "exhaustive": n * s,
        "two_phase": n + k * s,
        "dft_joint": n + k,
        "hierarchical": 2 * log_l + 4 * (log_n - log_l),
        "deep_learning": n // t + s,
        "ff_exhaustive": n,
        "ff_hierarchical": 2 * log_n,
        "rainbow": s,
    }


def codebook_overheads(polar_cb: Codebook, candidates: list[int], n_l: int) -> dict[str, int]:
    """Pilot counts of the simulated schemes over ``polar_cb`` as built.

    Rings below r_min are missing near end-fire, so the counts follow the
    actual ring count of each angle. When every angle carries all S rings
    they equal the matching entries of :func:`overhead_table`.
    """
    counts = polar_cb.ring_counts()
    n = polar_cb.num_angles
    log_n = _log2_exact(n, "N")
    log_l = _log2_exact(n_l, "N_L")
    return {
        "exhaustive": sum(counts),
        "two_phase": n + sum(counts[c] for c in candidates),
        "hierarchical": 2 * log_l + 4 * (log_n - log_l),
        "ff_exhaustive": n,
    }


# -----------------------------------------------------------
# episodes
# -----------------------------------------------------------
class TrainingMethod(str, Enum):
    EXHAUSTIVE = "exhaustive"
    TWO_PHASE = "two_phase"
    HIERARCHICAL = "hierarchical"
    FF_EXHAUSTIVE = "ff_exhaustive"


class EpisodeRow(NamedTuple):
    method: str
    seed: int
    overhead: int
    success: bool
    achieved_gain: float
    rate_ratio: float


EPISODE_HEADER = list(EpisodeRow._fields)


def rate_ratio(h: np.ndarray, w: np.ndarray, w_opt: np.ndarray, transmit_snr: float) -> float:
    """log2(1 + P̄|hᴴw|²) / log2(1 + P̄|hᴴw_opt|²)."""
    best = np.log2(1.0 + transmit_snr * abs(np.vdot(h, w_opt)) ** 2)
    return float(np.log2(1.0 + transmit_snr * abs(np.vdot(h, w)) ** 2) / best)


def run_episode(method: TrainingMethod | str, h: npt.ArrayLike, polar_cb: Codebook, *, transmit_snr: float,
                seed: int, layout: ArrayLayout | None = None, k: int = 3, n_l: int | None = None,
                region_threshold_db: float = 3.0, noiseless: bool = False) -> EpisodeRow:
    """Train once on ``h`` with unit noise power and report the outcome row."""
    method = TrainingMethod(method)
    h = np.asarray(h, dtype=complex)
    rng = None if noiseless else np.random.default_rng(seed)
    sounder = Sounder(h, transmit_snr, 0.0 if noiseless else 1.0, rng)
    if method is TrainingMethod.EXHAUSTIVE:
        outcome = exhaustive_2d(polar_cb, sounder)
    elif method is TrainingMethod.TWO_PHASE:
        outcome = two_phase(dft_codebook(polar_cb.num_angles), polar_cb, sounder, k, region_threshold_db)
    elif method is TrainingMethod.FF_EXHAUSTIVE:
        outcome = ff_exhaustive(dft_codebook(polar_cb.num_angles), polar_cb, sounder)
    else:
        if layout is None:
            raise TrainingError("hierarchical training needs the array layout")
        outcome = hierarchical_two_stage(polar_cb, sounder, n_l or len(h), layout)
    w_opt = polar_cb[optimal_index(polar_cb, h)]
    ratio = rate_ratio(h, polar_cb[outcome.index], w_opt, transmit_snr)
    return EpisodeRow(method.value, seed, outcome.overhead, outcome.success, outcome.achieved_gain, ratio)
