"""Single-carrier delay alignment modulation (DAM)."""
from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np
import numpy.typing as npt
from scipy import constants, linalg

from xlmimo.array_geometry import ArrayLayout
from xlmimo.channel_synthesis import Scatterer
from xlmimo.errors import DamError
from xlmimo.nearfield_response import ISOTROPIC, GainPattern, ResponseModel, steering

logger = logging.getLogger(__name__)

POWER_TOL = 1e-9


@dataclass(frozen=True)
class MultipathTaps:
    """Per-path MISO channel vectors h_l (columns) and integer sample delays n_l."""

    vectors: np.ndarray
    delays: tuple[int, ...]

    def __post_init__(self):
        if self.vectors.ndim != 2 or self.vectors.shape[1] < 1:
            raise DamError("taps need an M×L matrix with at least one path")
        if len(self.delays) != self.vectors.shape[1]:
            raise DamError(f"{len(self.delays)} delays for {self.vectors.shape[1]} paths")
        if any(not float(n).is_integer() for n in self.delays):
            raise DamError(f"fractional delays are not supported: {self.delays}")
        if any(n < 0 for n in self.delays):
            raise DamError(f"delays must be non-negative: {self.delays}")
        if len(set(self.delays)) != len(self.delays):
            raise DamError(f"path delays must be distinct: {self.delays}")

    @classmethod
    def of(cls, vectors: Sequence[npt.ArrayLike], delays: Sequence[float]) -> MultipathTaps:
        return cls(np.stack([np.asarray(v, dtype=complex) for v in vectors], axis=1),
                   tuple(int(n) if float(n).is_integer() else n for n in delays))

    @property
    def num_paths(self) -> int:
        return self.vectors.shape[1]

    @property
    def num_antennas(self) -> int:
        return self.vectors.shape[0]

    @property
    def max_delay(self) -> int:
        return max(self.delays)

    def shifted(self, offset: int) -> MultipathTaps:
        return MultipathTaps(self.vectors, tuple(n + offset for n in self.delays))


@dataclass(frozen=True)
class DamBeamformers:
    vectors: np.ndarray
    power: float

    def __post_init__(self):
        used = float(np.sum(np.abs(self.vectors) ** 2))
        if used > self.power * (1.0 + POWER_TOL) + POWER_TOL:
            raise DamError(f"beamformers use {used:.6g}, above the power budget {self.power:.6g}")

    @property
    def total_power(self) -> float:
        return float(np.sum(np.abs(self.vectors) ** 2))


def delay_precompensation(delays: Sequence[int]) -> list[int]:
    """κ_l = n_max − n_l."""
    if len(delays) == 0:
        raise DamError("delay set is empty")
    n_max = max(delays)
    return [n_max - n for n in delays]


def _check_power(power: float) -> None:
    if not power > 0:
        raise DamError(f"transmit power must be positive, got {power}")


def path_mrt(taps: MultipathTaps, power: float) -> DamBeamformers:
    _check_power(power)
    energy = float(np.sum(np.abs(taps.vectors) ** 2))
    if energy == 0.0:
        raise DamError("path-based MRT needs at least one nonzero path")
    return DamBeamformers(np.sqrt(power) * taps.vectors / np.sqrt(energy), power)


class ZfCombining(str, Enum):
    MAX_GAIN = "MaxGain"


def complement_basis(taps: MultipathTaps, path: int) -> np.ndarray:
    """Orthonormal basis H_l^⊥ of the complement of the other paths' span."""
    others = np.delete(taps.vectors, path, axis=1)
    if others.shape[1] == 0:
        return np.eye(taps.num_antennas, dtype=complex)
    if np.linalg.matrix_rank(others) < others.shape[1]:
        raise DamError(f"paths other than {path} are linearly dependent")
    return linalg.null_space(others.conj().T)


def path_zf(taps: MultipathTaps, power: float,
            combiners: Sequence[npt.ArrayLike] | ZfCombining = ZfCombining.MAX_GAIN) -> DamBeamformers:
    """ISI-free beamformers f_l = H_l^⊥ b_l.

    MaxGain takes b_l along (H_l^⊥)ᴴh_l and splits the power in proportion
    to the squared projection norms. Explicit combiners are scaled jointly
    to the power budget.
    """
    _check_power(power)
    m, l_paths = taps.vectors.shape
    if m < l_paths:
        raise DamError(f"ZF needs at least as many antennas as paths (M={m}, L={l_paths})")
    bases = [complement_basis(taps, l) for l in range(l_paths)]

    if isinstance(combiners, ZfCombining) or isinstance(combiners, str):
        ZfCombining(combiners)
        proj = [basis.conj().T @ taps.vectors[:, l] for l, basis in enumerate(bases)]
        energy = np.array([float(np.vdot(p, p).real) for p in proj])
        if energy.sum() == 0.0:
            raise DamError("every path lies in the span of the others")
        f = np.stack([basis @ p for basis, p in zip(bases, proj)], axis=1)
        # ‖f_l‖² = e_l, so one common scale gives power ∝ e_l
        f *= np.sqrt(power / energy.sum())
    else:
        if len(combiners) != l_paths:
            raise DamError(f"{len(combiners)} combiners for {l_paths} paths")
        f = np.stack([basis @ np.asarray(b, dtype=complex) for basis, b in zip(bases, combiners)], axis=1)
        total = float(np.sum(np.abs(f) ** 2))
        if total == 0.0:
            raise DamError("combiners produce all-zero beamformers")
        f *= np.sqrt(power / total)
    return DamBeamformers(f, power)


# -----------------------------------------------------------
# link simulation
# -----------------------------------------------------------
def effective_taps(taps: MultipathTaps, beamformers: DamBeamformers) -> np.ndarray:
    """g[k] = Σ h_lᴴf_{l′} over pairs with n_l − n_{l′} = k − n_max, k = 0..2n_max.

    Path l′ is sent n_max − n_{l′} samples late and path l adds n_l, so
    h_lᴴf_{l′} multiplies s[n − n_max − n_l + n_{l′}].
    """
    n_max = taps.max_delay
    cross = taps.vectors.conj().T @ beamformers.vectors       # [l, l′] = h_lᴴ f_l′
    g = np.zeros(2 * n_max + 1, dtype=complex)
    for l, n_l in enumerate(taps.delays):
        for lp, n_lp in enumerate(taps.delays):
            g[n_max + n_l - n_lp] += cross[l, lp]
    return g


class Decomposition(NamedTuple):
    signal_power: float
    isi_power: float
    noise_power: float
    empirical_signal: float
    empirical_isi: float
    empirical_noise: float


class DamLink(NamedTuple):
    received: np.ndarray
    decomposition: Decomposition


def simulate_dam_link(taps: MultipathTaps, beamformers: DamBeamformers, symbols: npt.ArrayLike,
                      noise_power: float, seed: int | np.random.SeedSequence) -> DamLink:
    """Pass ``symbols`` through the pre-compensated multi-path channel.

    y[n] = Σ_k g[k]·s[n − k] + z[n]; the analytic powers come from g, the
    empirical ones from the simulated components.
    """
    s = np.asarray(symbols, dtype=complex)
    n_max = taps.max_delay
    if len(s) < max(2 * n_max, 1):
        raise DamError(f"symbol sequence of length {len(s)} is shorter than 2·n_max = {2 * n_max}")
    if noise_power < 0:
        raise DamError(f"noise power must be non-negative, got {noise_power}")
    g = effective_taps(taps, beamformers)
    aligned = np.zeros_like(g)
    aligned[n_max] = g[n_max]

    desired = np.convolve(s, aligned)[: len(s)]
    isi = np.convolve(s, g - aligned)[: len(s)]
    rng = np.random.default_rng(seed)
    z = np.sqrt(noise_power / 2.0) * (rng.standard_normal(len(s)) + 1j * rng.standard_normal(len(s)))
    y = desired + isi + z

    # every lag of g is filled from 2·n_max on; a 2·n_max sequence keeps its last sample
    steady = slice(min(2 * n_max, len(s) - 1), len(s))
    analytic_isi = float(np.sum(np.abs(g) ** 2) - abs(g[n_max]) ** 2)
    decomposition = Decomposition(
        signal_power=float(abs(g[n_max]) ** 2),
        isi_power=analytic_isi,
        noise_power=float(noise_power),
        empirical_signal=float(np.mean(np.abs(desired[steady]) ** 2)),
        empirical_isi=float(np.mean(np.abs(isi[steady]) ** 2)),
        empirical_noise=float(np.mean(np.abs(z[steady]) ** 2)),
    )
    return DamLink(y, decomposition)


def dam_rate(decomposition: Decomposition) -> float:
    """log2(1 + signal/(isi + noise)) in bps/Hz, treating ISI as noise."""
    denom = decomposition.isi_power + decomposition.noise_power
    if denom == 0.0:
        raise DamError("rate is unbounded without ISI or noise")
    return float(np.log2(1.0 + decomposition.signal_power / denom))


def qpsk_symbols(count: int, rng: np.random.Generator) -> np.ndarray:
    bits = rng.integers(0, 2, size=(count, 2))
    return ((2 * bits[:, 0] - 1) + 1j * (2 * bits[:, 1] - 1)) / np.sqrt(2.0)


def taps_from_scatterers(tx_layout: ArrayLayout, rx_position: npt.ArrayLike, scatterers: Sequence[Scatterer],
                         sample_period: float, pattern: GainPattern = ISOTROPIC) -> MultipathTaps:
    """Bistatic scattered paths from an array to a single-antenna receiver as DAM taps.

    n_l = round((t_q + r_q)/(c·T_s)); paths landing on the same delay are
    summed into one tap.
    """
    if not sample_period > 0:
        raise DamError(f"sample period must be positive, got {sample_period}")
    if len(scatterers) == 0:
        raise DamError("at least one scatterer is required")
    rx = np.asarray(rx_position, dtype=float)
    lam = tx_layout.wavelength
    k = 2.0 * np.pi / lam
    by_delay: dict[int, np.ndarray] = {}
    for sc in scatterers:
        t_q = float(np.linalg.norm(sc.e - tx_layout.p))
        r_q = float(np.linalg.norm(sc.e - rx))
        delay = int(round((t_q + r_q) / (constants.c * sample_period)))
        amp = np.sqrt(lam ** 2 * sc.rcs / ((4.0 * np.pi) ** 3 * t_q ** 2 * r_q ** 2)) * sc.amplitude
        phase = np.exp(-1j * k * (t_q + r_q) + 1j * sc.extra_phase)
        h = amp * phase * steering(ResponseModel.NUSW, tx_layout, sc.e, pattern)
        by_delay[delay] = by_delay.get(delay, 0) + h
    if len(by_delay) < len(scatterers):
        logger.info(f"merged {len(scatterers)} scattered paths onto {len(by_delay)} delay taps")
    delays = sorted(by_delay)
    # channel vectors enter as hᴴ, so store the conjugate of the transmit response
    return MultipathTaps(np.stack([by_delay[n].conj() for n in delays], axis=1), tuple(delays))
