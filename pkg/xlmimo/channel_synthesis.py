"""LoS / NLoS / multi-path channel synthesis, visibility regions and spatial
correlation models."""
from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from enum import Enum

import numpy as np
import numpy.typing as npt
from scipy import linalg
from scipy.integrate import quad

from xlmimo.array_geometry import ArrayLayout, axis_coordinates, build_layout, source_point
from xlmimo.errors import ChannelError
from xlmimo.nearfield_response import (
    ISOTROPIC,
    GainPattern,
    ResponseModel,
    direction_gain,
    exact_distances,
    reference_power,
    steering,
)

logger = logging.getLogger(__name__)

VisibilityMask = npt.NDArray[np.int8]
EIG_FLOOR = -1e-10


class LosMethod(str, Enum):
    ELEMENTWISE = "Elementwise"
    OUTER_PRODUCT = "OuterProduct"
    FAR_FIELD_UPW = "FarFieldUPW"


@dataclass(frozen=True)
class Scatterer:
    location: tuple[float, float, float]
    rcs: float
    extra_phase: float = 0.0
    amplitude: float = 1.0

    @property
    def e(self) -> np.ndarray:
        return np.asarray(self.location, dtype=float)


# -----------------------------------------------------------
# line of sight
# -----------------------------------------------------------
def _common_wavelength(tx_layout: ArrayLayout, rx_layout: ArrayLayout) -> float:
    if not np.isclose(tx_layout.wavelength, rx_layout.wavelength):
        raise ChannelError("transmit and receive layouts use different wavelengths")
    return rx_layout.wavelength


def los_channel(method: LosMethod | str, tx_layout: ArrayLayout, rx_layout: ArrayLayout,
                tx_pattern: GainPattern = ISOTROPIC, rx_pattern: GainPattern = ISOTROPIC) -> np.ndarray:
    """Free-space M_r × M_t channel between two arrays.

    ``Elementwise`` models every antenna pair separately; ``OuterProduct``
    is α̃·a_R(s_T)·a_Tᴴ(p_R) with NUSW responses and is always rank one;
    ``FarFieldUPW`` is the same outer product with planar responses.
    """
    method = LosMethod(method)
    lam = _common_wavelength(tx_layout, rx_layout)
    s_t, p_r = tx_layout.p, rx_layout.p
    r = float(np.linalg.norm(p_r - s_t))
    if r == 0.0:
        raise ChannelError("transmit and receive arrays are coincident")
    k = 2.0 * np.pi / lam

    u_r = reference_power(rx_layout, s_t, rx_pattern)
    u_t = reference_power(tx_layout, p_r, tx_pattern)
    alpha = 4.0 * np.pi * np.sqrt(u_r * u_t) / (lam * r) * np.exp(-1j * k * r)

    if method is LosMethod.OUTER_PRODUCT:
        a_r = steering(ResponseModel.NUSW, rx_layout, s_t, rx_pattern)
        a_t = steering(ResponseModel.NUSW, tx_layout, p_r, tx_pattern)
        return alpha * np.outer(a_r, a_t.conj())
    if method is LosMethod.FAR_FIELD_UPW:
        a_r = steering(ResponseModel.UPW, rx_layout, s_t)
        a_t = steering(ResponseModel.UPW, tx_layout, p_r)
        return alpha * np.outer(a_r, a_t.conj())

    pos_r = build_layout(rx_layout, strict=False)
    pos_t = build_layout(tx_layout, strict=False)
    link = pos_t[None, :, :] - pos_r[:, None, :]          # rx element -> tx element
    dist = np.linalg.norm(link, axis=-1)
    if np.any(dist == 0.0):
        raise ChannelError("a transmit element coincides with a receive element")
    scale = (lam / (4.0 * np.pi)) ** 2
    g_r = direction_gain(rx_layout, rx_pattern, link) * scale
    g_t = direction_gain(tx_layout, tx_pattern, -link) * scale
    amp = np.sqrt(g_r * g_t / (u_r * u_t)) * r / dist
    return alpha * amp * np.exp(-1j * k * (dist - r))


# -----------------------------------------------------------
# scattered paths
# -----------------------------------------------------------
def nlos_bistatic(tx_layout: ArrayLayout, rx_layout: ArrayLayout, scatterers: Sequence[Scatterer],
                  tx_pattern: GainPattern = ISOTROPIC, rx_pattern: GainPattern = ISOTROPIC,
                  rx_model: ResponseModel = ResponseModel.NUSW) -> np.ndarray:
    """Bistatic-radar NLoS channel.

    H = √(β/Q) Σ_q g_q e^{-j2π(t_q + r_q)/λ + jψ_q} a_R(e_q) a_Tᵀ(e_q) with
    β = Σ_q λ²σ_q / ((4π)³ t_q² r_q²). The transmit response enters
    transposed, not conjugated. ``rx_model`` swaps the receive response,
    e.g. for a far-field (UPW) design channel.
    """
    if len(scatterers) == 0:
        raise ChannelError("NLoS channel needs at least one scatterer")
    lam = _common_wavelength(tx_layout, rx_layout)
    k = 2.0 * np.pi / lam
    h = np.zeros((_count(rx_layout), _count(tx_layout)), dtype=complex)
    beta = 0.0
    for sc in scatterers:
        if not sc.rcs > 0:
            raise ChannelError(f"scatterer RCS must be positive, got {sc.rcs}")
        t_q = float(np.linalg.norm(sc.e - tx_layout.p))
        r_q = float(np.linalg.norm(sc.e - rx_layout.p))
        beta += lam ** 2 * sc.rcs / ((4.0 * np.pi) ** 3 * t_q ** 2 * r_q ** 2)
        a_r = steering(rx_model, rx_layout, sc.e, rx_pattern)
        a_t = steering(ResponseModel.NUSW, tx_layout, sc.e, tx_pattern)
        h += sc.amplitude * np.exp(-1j * k * (t_q + r_q) + 1j * sc.extra_phase) * np.outer(a_r, a_t)
    return np.sqrt(beta / len(scatterers)) * h


def _count(layout: ArrayLayout) -> int:
    return len(build_layout(layout, strict=False))


def multipath_channel(zeta: int, los: np.ndarray | None, paths: Sequence[np.ndarray] = (),
                      los_mask: npt.ArrayLike | None = None,
                      path_masks: Sequence[npt.ArrayLike | None] | None = None) -> np.ndarray:
    """ζ·H^LoS ⊙ b^LoS + Σ_q H_q ⊙ b_q.

    Masks act on the receive dimension, i.e. on the rows of a MIMO matrix
    or on the entries of a SIMO vector.
    """
    if zeta not in (0, 1):
        raise ChannelError(f"ζ must be 0 or 1, got {zeta}")
    parts = ([] if los is None else [np.asarray(los)]) + [np.asarray(p) for p in paths]
    if not parts:
        raise ChannelError("multipath channel needs a LoS component or at least one path")
    shape = parts[0].shape
    if any(p.shape != shape for p in parts):
        raise ChannelError(f"component shapes disagree: {[p.shape for p in parts]}")

    def masked(component: np.ndarray, mask) -> np.ndarray:
        if mask is None:
            return component
        mask = np.asarray(mask)
        if mask.shape != (shape[0],):
            raise ChannelError(f"mask length {mask.shape} does not match {shape[0]} receive elements")
        return component * (mask if component.ndim == 1 else mask[:, None])

    total = np.zeros(shape, dtype=complex)
    if los is not None:
        total += zeta * masked(np.asarray(los), los_mask)
    path_masks = list(path_masks) if path_masks is not None else [None] * len(paths)
    if len(path_masks) != len(paths):
        raise ChannelError("one mask (or None) is required per path")
    for component, mask in zip(paths, path_masks):
        total += masked(np.asarray(component), mask)
    return total


def sample_scatterers(rng: np.random.Generator, count: int, r_range: tuple[float, float],
                      angle_range: tuple[float, float], rcs_range: tuple[float, float],
                      layout: ArrayLayout) -> list[Scatterer]:
    """Uniformly drop ``count`` scatterers in an annular sector in front of ``layout``.

    ``angle_range`` is measured from broadside, in radians.
    """
    r = rng.uniform(*r_range, size=count)
    ang = rng.uniform(*angle_range, size=count)
    rcs = rng.uniform(*rcs_range, size=count)
    return [
        Scatterer(tuple(float(v) for v in source_point(layout, float(ri), np.pi / 2 + float(ai))), float(si))
        for ri, ai, si in zip(r, ang, rcs)
    ]


# -----------------------------------------------------------
# visibility regions
# -----------------------------------------------------------
@dataclass(frozen=True)
class DeterministicVR:
    visible: tuple[int, ...]

    def mask(self, num_elements: int) -> VisibilityMask:
        out = np.zeros(num_elements, dtype=np.int8)
        out[list(self.visible)] = 1
        return out


@dataclass(frozen=True)
class TwoStateMarkov:
    """Visibility chain along the element axis; p01 = P(hidden→visible), p10 = P(visible→hidden).

    The first element is drawn from the stationary law unless
    ``initial_visible`` pins it.
    """

    p01: float
    p10: float
    initial_visible: bool | None = None

    @property
    def stationary_visible(self) -> float:
        total = self.p01 + self.p10
        return 0.5 if total == 0 else self.p01 / total


@dataclass(frozen=True)
class BirthDeath:
    """Scatterer birth rate λ_G and death rate λ_R per unit step Δt."""

    birth_rate: float
    death_rate: float
    dt: float

    def survival(self) -> float:
        # exponential survival, swap here for another lifetime law
        return float(np.exp(-self.death_rate * self.dt))

    def expected_new(self) -> float:
        return self.birth_rate / self.death_rate * (1.0 - self.survival())


VrProcess = DeterministicVR | TwoStateMarkov | BirthDeath


def _check_probability(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ChannelError(f"{name} must lie in [0, 1], got {value}")


def birth_death_expected_count(birth_rate: float, death_rate: float, dt: float) -> float:
    """E[N(t+Δt)] = (λ_G/λ_R)(1 − P_T(Δt)) starting from an empty set."""
    return BirthDeath(birth_rate, death_rate, dt).expected_new()


def simulate_birth_death(process: BirthDeath, steps: int, seed: int | np.random.SeedSequence,
                         initial: int = 0) -> np.ndarray:
    """Scatterer counts over ``steps`` steps: binomial survival plus Poisson births."""
    if not (process.birth_rate >= 0 and process.death_rate > 0 and process.dt > 0):
        raise ChannelError("birth-death rates and step must be positive")
    rng = np.random.default_rng(seed)
    p_t = process.survival()
    counts = np.empty(steps, dtype=int)
    n = initial
    for i in range(steps):
        n = rng.binomial(n, p_t) + rng.poisson(process.expected_new())
        counts[i] = n
    return counts


def sample_vr_mask(process: VrProcess, num_elements: int, seed: int | np.random.SeedSequence) -> VisibilityMask:
    """Draw a visibility mask for ``num_elements`` elements.

    A birth-death process evolves the scatterer set over time steps
    through :func:`simulate_birth_death`. The user moves past the array one
    element per step, so element m is visible when at least one scatterer
    is alive at step m. The set starts from a Poisson draw at the
    stationary mean λ_G/λ_R.
    """
    if isinstance(process, DeterministicVR):
        return process.mask(num_elements)
    rng = np.random.default_rng(seed)
    if isinstance(process, TwoStateMarkov):
        _check_probability("p01", process.p01)
        _check_probability("p10", process.p10)
        draws = rng.random(num_elements)
        out = np.empty(num_elements, dtype=np.int8)
        if process.initial_visible is None:
            state = int(draws[0] < process.stationary_visible)
        else:
            state = 1 if process.initial_visible else 0
        out[0] = state
        for m in range(1, num_elements):
            flip = process.p10 if state else process.p01
            if draws[m] < flip:
                state = 1 - state
            out[m] = state
        return out
    if isinstance(process, BirthDeath):
        start = int(rng.poisson(process.birth_rate / process.death_rate))
        counts = simulate_birth_death(process, num_elements, rng, initial=start)
        return (counts > 0).astype(np.int8)
    raise ChannelError(f"unknown visibility process {process!r}")


def mask_correlation(process: VrProcess, num_elements: int, *, draws: int = 2000,
                     seed: int = 0) -> np.ndarray:
    """E[b_m b_n] for a visibility process.

    Closed form for deterministic masks and for a two-state chain started
    from its stationary law; Monte-Carlo average otherwise.
    """
    if isinstance(process, DeterministicVR):
        b = process.mask(num_elements).astype(float)
        return np.outer(b, b)
    if isinstance(process, TwoStateMarkov) and process.initial_visible is None:
        pi1 = process.stationary_visible
        lam = 1.0 - process.p01 - process.p10
        lag = np.abs(np.subtract.outer(np.arange(num_elements), np.arange(num_elements)))
        return pi1 * (pi1 + (1.0 - pi1) * lam ** lag)
    acc = np.zeros((num_elements, num_elements))
    for child in np.random.SeedSequence(seed).spawn(draws):
        b = sample_vr_mask(process, num_elements, child).astype(float)
        acc += np.outer(b, b)
    return acc / draws


def masked_correlation(r: np.ndarray, mask: npt.ArrayLike) -> np.ndarray:
    """R^VR = D^{1/2} R D^{1/2} with D = diag(mask)."""
    root = np.sqrt(np.asarray(mask, dtype=float))
    return root[:, None] * r * root[None, :]


# -----------------------------------------------------------
# spatial correlation
# -----------------------------------------------------------
@dataclass(frozen=True)
class FarFieldOneRing:
    """One-ring model; angles measured from broadside.

    Without an explicit ``pas`` the power angular spectrum is uniform on
    [mean − spread, mean + spread].
    """

    mean_angle: float
    spread: float
    pas: Callable[[float], float] | None = None

    def density(self, angle: float) -> float:
        if self.pas is not None:
            return self.pas(angle)
        return 1.0 / (2.0 * self.spread)


@dataclass(frozen=True)
class NearFieldPLS:
    """Near-field model over an annular sector of scatterer locations.

    ``angle_range`` is measured from broadside. Without an explicit ``pls``
    the power location spectrum is uniform over the sector area.
    """

    r_range: tuple[float, float]
    angle_range: tuple[float, float]
    pls: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None

    @property
    def area(self) -> float:
        (r0, r1), (a0, a1) = self.r_range, self.angle_range
        return 0.5 * (r1 ** 2 - r0 ** 2) * (a1 - a0)

    def density(self, r: np.ndarray, angle: np.ndarray) -> np.ndarray:
        if self.pls is not None:
            return self.pls(r, angle)
        return np.full(np.broadcast(r, angle).shape, 1.0 / self.area)


@dataclass(frozen=True)
class VRMasked:
    inner: FarFieldOneRing | NearFieldPLS
    process: VrProcess


CorrelationSpec = FarFieldOneRing | NearFieldPLS | VRMasked

QUAD_TOL = 1e-6


def _quad(func: Callable[[float], float], a: float, b: float) -> float:
    value, abserr, *rest = quad(func, a, b, epsabs=1e-10, epsrel=QUAD_TOL, limit=400, full_output=1)
    if len(rest) > 1 and abserr > max(1e-8, QUAD_TOL * abs(value)):
        raise ChannelError(f"quadrature did not converge on [{a}, {b}] (error estimate {abserr:.2e})")
    return value


def _one_ring(spec: FarFieldOneRing, layout: ArrayLayout) -> np.ndarray:
    a, b = spec.mean_angle - spec.spread, spec.mean_angle + spec.spread
    mass = _quad(spec.density, a, b)
    if abs(mass - 1.0) > 1e-3:
        raise ChannelError(f"power angular spectrum integrates to {mass:.6f}, not 1")
    x = axis_coordinates(layout)
    k = 2.0 * np.pi / layout.wavelength
    lags = np.subtract.outer(x, x)
    keys = np.round(lags, 12)
    unique, inverse = np.unique(keys, return_inverse=True)
    values = np.empty(unique.shape, dtype=complex)
    for i, lag in enumerate(unique):
        re = _quad(lambda t: np.cos(k * lag * np.sin(t)) * spec.density(t), a, b)
        im = _quad(lambda t: np.sin(k * lag * np.sin(t)) * spec.density(t), a, b)
        values[i] = re + 1j * im
    return values[inverse].reshape(lags.shape)


def _pls_nodes(spec: NearFieldPLS, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    xg, wg = np.polynomial.legendre.leggauss(n)
    (r0, r1), (a0, a1) = spec.r_range, spec.angle_range
    r = 0.5 * (r1 - r0) * xg + 0.5 * (r1 + r0)
    ang = 0.5 * (a1 - a0) * xg + 0.5 * (a1 + a0)
    rr, aa = np.meshgrid(r, ang, indexing="ij")
    weights = np.outer(wg * 0.5 * (r1 - r0), wg * 0.5 * (a1 - a0)) * rr
    return rr.ravel(), aa.ravel(), weights.ravel()


def _pls_matrix(spec: NearFieldPLS, layout: ArrayLayout, n: int) -> tuple[np.ndarray, float]:
    rr, aa, w = _pls_nodes(spec, n)
    w = w * spec.density(rr, aa)
    pos = build_layout(layout, strict=False)
    k = 2.0 * np.pi / layout.wavelength
    points = np.stack([source_point(layout, r, np.pi / 2 + a) for r, a in zip(rr, aa)])
    r_m = np.linalg.norm(pos[:, None, :] - points[None, :, :], axis=-1)
    c = (rr[None, :] / r_m) * np.exp(1j * k * (r_m - rr[None, :]))
    return (c * w[None, :]) @ c.conj().T, float(w.sum())


def _near_field(spec: NearFieldPLS, layout: ArrayLayout, start: int = 16, max_nodes: int = 512) -> np.ndarray:
    n = start
    previous, mass = _pls_matrix(spec, layout, n)
    if abs(mass - 1.0) > 1e-3:
        raise ChannelError(f"power location spectrum integrates to {mass:.6f}, not 1")
    while n < max_nodes:
        n *= 2
        current, _ = _pls_matrix(spec, layout, n)
        change = np.max(np.abs(current - previous))
        logger.debug(f"PLS quadrature with {n}x{n} nodes: change {change:.3e}")
        if change <= QUAD_TOL * np.max(np.abs(current)):
            return current
        previous = current
    raise ChannelError(f"near-field correlation quadrature did not stabilise with {max_nodes}x{max_nodes} nodes")


def spatial_correlation(spec: CorrelationSpec, layout: ArrayLayout) -> np.ndarray:
    """Hermitian M×M correlation matrix of the chosen model."""
    if isinstance(spec, VRMasked):
        inner = spatial_correlation(spec.inner, layout)
        return inner * mask_correlation(spec.process, inner.shape[0])
    if isinstance(spec, FarFieldOneRing):
        r = _one_ring(spec, layout)
    elif isinstance(spec, NearFieldPLS):
        r = _near_field(spec, layout)
    else:
        raise ChannelError(f"unknown correlation model {spec!r}")
    return 0.5 * (r + r.conj().T)


def toeplitz_deviation(r: np.ndarray) -> float:
    """Largest spread of entries along any diagonal; zero for a Toeplitz matrix."""
    n = r.shape[0]
    worst = 0.0
    for offset in range(-(n - 1), n):
        diag = np.diagonal(r, offset)
        worst = max(worst, float(np.max(np.abs(diag - diag[0]))))
    return worst


def large_scale_profile(layout: ArrayLayout, s, epsilon: float = 1.0, nu: float = -2.0) -> np.ndarray:
    """ς_m = ε·r_m^ν."""
    return epsilon * exact_distances(layout, s) ** nu


def correlation_sqrt(r: np.ndarray) -> np.ndarray:
    if not np.allclose(r, r.conj().T, atol=1e-12 * max(1.0, np.abs(r).max())):
        raise ChannelError("correlation matrix is not Hermitian")
    eigval, eigvec = linalg.eigh(r)
    if eigval.min() < EIG_FLOOR:
        raise ChannelError(f"correlation matrix is not PSD (min eigenvalue {eigval.min():.3e})")
    eigval = np.clip(eigval, 0.0, None)
    return (eigvec * np.sqrt(eigval)) @ eigvec.conj().T


def sample_correlated_channel(r: np.ndarray, varsigma: float | npt.ArrayLike,
                              seed: int | np.random.SeedSequence, draws: int | None = None) -> np.ndarray:
    """h = √ς ⊙ R^{1/2} h̃ with h̃ ~ CN(0, I).

    Returns one vector, or a (draws, M) array when ``draws`` is given.
    """
    root = correlation_sqrt(np.asarray(r))
    m = root.shape[0]
    rng = np.random.default_rng(seed)
    n = 1 if draws is None else draws
    h_tilde = (rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))) / np.sqrt(2.0)
    h = np.sqrt(np.broadcast_to(np.asarray(varsigma, dtype=float), (m,)))[None, :] * (h_tilde @ root.T)
    return h[0] if draws is None else h


def effective_rank(h: np.ndarray, fraction: float = 0.10) -> int:
    """Number of singular values no smaller than ``fraction`` of their sum.

    At most ⌊1/fraction⌋ values can pass that test. A spectrum spread so
    evenly that none passes is reported at that ceiling, not as rank 1.
    """
    if not 0.0 < fraction <= 1.0:
        raise ChannelError(f"rank fraction must lie in (0, 1], got {fraction}")
    sv = linalg.svdvals(np.atleast_2d(h))
    total = float(sv.sum())
    if total == 0.0:
        raise ChannelError("effective rank of a zero matrix is undefined")
    counted = int(np.count_nonzero(sv >= fraction * total))
    if counted == 0:
        return int(np.floor(1.0 / fraction + 1e-9))
    return counted


def channel_to_csv_rows(h: np.ndarray) -> list[list[float]]:
    """One row per receive element, real and imaginary parts interleaved."""
    h = np.atleast_2d(h)
    rows = np.empty((h.shape[0], 2 * h.shape[1]))
    rows[:, 0::2] = h.real
    rows[:, 1::2] = h.imag
    return rows.tolist()
