"""Scenario files: YAML parsing, field validation, hashing and seed splitting."""
from __future__ import annotations

import hashlib
import json
import logging
from collections.abc import Collection, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from ruamel.yaml import YAML
from ruamel.yaml.error import YAMLError
from scipy import constants

from xlmimo.array_geometry import ArrayKind, ArrayLayout, physical_dimension, validate_layout
from xlmimo.errors import ConfigError
from xlmimo.nearfield_response import ISOTROPIC, TGPP, Cosine, GainPattern, Isotropic, reactive_distance

logger = logging.getLogger(__name__)

HASH_EXCLUDED = ("output", "seed")
SWEEP_SCALES = ("linear", "log")


@dataclass(frozen=True)
class SweepAxis:
    parameter: str
    minimum: float
    maximum: float
    steps: int
    scale: str = "linear"

    def values(self) -> np.ndarray:
        if self.scale == "log":
            return np.geomspace(self.minimum, self.maximum, self.steps)
        return np.linspace(self.minimum, self.maximum, self.steps)


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    experiment: str
    carrier_frequency: float
    seed: int
    raw: dict[str, Any] = field(repr=False)
    output: str | None = None
    sweep: SweepAxis | None = None

    @property
    def wavelength(self) -> float:
        return constants.c / self.carrier_frequency

    @property
    def params(self) -> dict[str, Any]:
        return dict(self.raw.get("params") or {})

    def section(self, name: str) -> Any:
        return self.raw.get(name)

    def layout(self, key: str = "layout") -> ArrayLayout:
        return layout_from(self.raw[key], self.wavelength)

    def pattern(self, key: str = "pattern") -> GainPattern:
        return pattern_from(self.raw.get(key))

    def config_hash(self) -> str:
        return config_hash(self.raw)


# -----------------------------------------------------------
# section builders
# -----------------------------------------------------------
def layout_from(section: dict[str, Any], wavelength: float) -> ArrayLayout:
    """Build an :class:`ArrayLayout` from a ``layout`` section."""
    kind = ArrayKind(section["kind"])
    kwargs: dict[str, Any] = {
        "num_modules": int(section.get("modules", 1)),
        "spacing_factor": float(section.get("spacing_factor", 1.0)),
    }
    for yaml_key, attr in (("module_separation", "module_separation"),
                           ("module_separation_vertical", "module_separation_vertical")):
        if section.get(yaml_key) is not None:
            kwargs[attr] = float(section[yaml_key])
    for yaml_key in ("reference_point", "orientation", "orientation_vertical", "normal"):
        if section.get(yaml_key) is not None:
            kwargs[yaml_key] = tuple(float(v) for v in section[yaml_key])
    if kind.is_planar:
        kwargs["elems_vertical"] = int(section.get("elements_vertical", 1))
        kwargs["num_modules_vertical"] = int(section.get("modules_vertical", 1))
    return ArrayLayout(kind, wavelength, int(section["elements"]), **kwargs)


def pattern_from(section: dict[str, Any] | None) -> GainPattern:
    if not section:
        return ISOTROPIC
    kind = section.get("type", "Isotropic")
    if kind == "Isotropic":
        return Isotropic()
    if kind == "Cosine":
        return Cosine(q=float(section.get("q", 2)))
    if kind == "3GPP":
        return TGPP()
    raise ConfigError(f"unknown gain pattern {kind!r}", [f"pattern.type: unknown value {kind!r}"])


# -----------------------------------------------------------
# validation
# -----------------------------------------------------------
def _positive(errors: list[str], data: dict, key: str, path: str, *, required: bool = True) -> float | None:
    value = data.get(key)
    if value is None:
        if required:
            errors.append(f"{path}: missing")
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
        errors.append(f"{path}: must be a positive number, got {value!r}")
        return None
    return float(value)


def _check_layout(errors: list[str], section: Any, wavelength: float | None, path: str) -> ArrayLayout | None:
    if not isinstance(section, dict):
        errors.append(f"{path}: missing or not a mapping")
        return None
    kind = section.get("kind")
    if kind not in {k.value for k in ArrayKind}:
        errors.append(f"{path}.kind: unknown array kind {kind!r}")
        return None
    if not isinstance(section.get("elements"), int) or section["elements"] < 1:
        errors.append(f"{path}.elements: must be a positive integer")
        return None
    if wavelength is None:
        return None
    try:
        layout = layout_from(section, wavelength)
    except (TypeError, ValueError) as e:
        errors.append(f"{path}: {e}")
        return None
    errors.extend(f"{path}: {msg}" for msg in validate_layout(layout))
    return layout


def _check_sweep(errors: list[str], section: Any) -> None:
    if section is None:
        return
    if not isinstance(section, dict):
        errors.append("sweep: must be a mapping")
        return
    if not isinstance(section.get("parameter"), str):
        errors.append("sweep.parameter: missing")
    lo = section.get("min")
    hi = section.get("max")
    steps = section.get("steps")
    scale = section.get("scale", "linear")
    if not isinstance(steps, int) or steps < 2:
        errors.append(f"sweep.steps: must be an integer >= 2, got {steps!r}")
    if scale not in SWEEP_SCALES:
        errors.append(f"sweep.scale: must be one of {SWEEP_SCALES}, got {scale!r}")
    if not isinstance(lo, (int, float)) or not isinstance(hi, (int, float)):
        errors.append("sweep.min / sweep.max: must be numbers")
        return
    if lo > hi:
        errors.append(f"sweep.min: {lo} exceeds sweep.max {hi}")
    if scale == "log" and lo <= 0:
        errors.append(f"sweep.min: a log sweep needs a positive start, got {lo}")


def _check_point(errors: list[str], warnings: list[str], point: Any, path: str,
                 layout: ArrayLayout | None) -> None:
    if not isinstance(point, dict):
        errors.append(f"{path}: must be a mapping")
        return
    if "position" in point:
        pos = point["position"]
        if not (isinstance(pos, list) and len(pos) == 3):
            errors.append(f"{path}.position: must be a list of three coordinates")
            return
        r = float(np.linalg.norm(np.asarray(pos, dtype=float) - layout.p)) if layout is not None else None
    else:
        r = _positive(errors, point, "r", f"{path}.r")
        if "theta" not in point:
            errors.append(f"{path}.theta: missing")
    if "rcs" in point:
        _positive(errors, point, "rcs", f"{path}.rcs")
    if r is not None and layout is not None:
        boundary = reactive_distance(physical_dimension(layout), layout.wavelength)
        if r < boundary:
            warnings.append(f"{path}: r={r:.4g} m lies inside the reactive region (< {boundary:.4g} m)")


def validate(raw: Any, known_experiments: Collection[str] | Mapping[str, Sequence[str]] | None = None,
             ) -> tuple[bool, list[str], list[str]]:
    """Check every field of a parsed scenario; never raises.

    ``known_experiments`` may map each experiment to the top-level sections
    it reads, e.g. ``layout``; a missing one is an error.
    """
    errors: list[str] = []
    warnings: list[str] = []
    if not isinstance(raw, dict):
        return False, ["<root>: scenario must be a mapping"], warnings

    if not isinstance(raw.get("name"), str) or not raw["name"]:
        errors.append("name: missing")
    experiment = raw.get("experiment")
    if not isinstance(experiment, str):
        errors.append("experiment: missing")
    elif known_experiments is not None and experiment not in known_experiments:
        errors.append(f"experiment: unknown experiment {experiment!r}")
    elif isinstance(known_experiments, Mapping):
        for section in known_experiments[experiment]:
            if section not in raw:
                errors.append(f"{section}: missing (required by {experiment})")
    freq = _positive(errors, raw, "carrier_frequency", "carrier_frequency")
    wavelength = constants.c / freq if freq else None

    seed = raw.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int) or seed < 0):
        errors.append(f"seed: must be a non-negative integer, got {seed!r}")

    layout = None
    if "layout" in raw:
        layout = _check_layout(errors, raw["layout"], wavelength, "layout")
    for key in ("tx_layout", "rx_layout"):
        if key in raw:
            _check_layout(errors, raw[key], wavelength, key)
    if "pattern" in raw:
        try:
            pattern_from(raw["pattern"])
        except ConfigError as e:
            errors.extend(e.errors)

    _check_sweep(errors, raw.get("sweep"))
    if "source" in raw:
        _check_point(errors, warnings, raw["source"], "source", layout)
    for key in ("users", "scatterers"):
        items = raw.get(key)
        if items is None:
            continue
        if not isinstance(items, list):
            errors.append(f"{key}: must be a list")
            continue
        for i, item in enumerate(items):
            _check_point(errors, warnings, item, f"{key}[{i}]", layout)
    params = raw.get("params")
    if params is not None and not isinstance(params, dict):
        errors.append("params: must be a mapping")
    return not errors, errors, warnings


# -----------------------------------------------------------
# loading
# -----------------------------------------------------------
def parse_scenario(text: str) -> dict[str, Any]:
    try:
        data = YAML(typ="safe").load(text)
    except YAMLError as e:
        raise ConfigError(f"scenario is not valid YAML: {e}", [f"<root>: {e}"]) from e
    if not isinstance(data, dict):
        raise ConfigError("scenario must be a mapping", ["<root>: scenario must be a mapping"])
    return data


def read_scenario(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"scenario file not found: {path}", [f"<root>: file not found: {path}"])
    return parse_scenario(path.read_text(encoding="utf-8"))


def build_scenario(raw: dict[str, Any], *, default_seed: int = 0,
                   known_experiments: Collection[str] | Mapping[str, Sequence[str]] | None = None,
                   ) -> ScenarioConfig:
    ok, errors, warnings = validate(raw, known_experiments)
    for w in warnings:
        logger.warning(w)
    if not ok:
        raise ConfigError(f"scenario has {len(errors)} invalid field(s)", errors)
    sweep = None
    if raw.get("sweep"):
        s = raw["sweep"]
        sweep = SweepAxis(s["parameter"], float(s["min"]), float(s["max"]), int(s["steps"]),
                          s.get("scale", "linear"))
    return ScenarioConfig(
        name=raw["name"],
        experiment=raw["experiment"],
        carrier_frequency=float(raw["carrier_frequency"]),
        seed=int(raw.get("seed", default_seed)),
        raw=raw,
        output=raw.get("output"),
        sweep=sweep,
    )


def load_scenario(path: str | Path, **kwargs) -> ScenarioConfig:
    return build_scenario(read_scenario(path), **kwargs)


def config_hash(raw: dict[str, Any]) -> str:
    """SHA-256 of the canonical JSON form, ignoring output path and seed."""
    meaningful = {k: v for k, v in raw.items() if k not in HASH_EXCLUDED}
    canonical = json.dumps(meaningful, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def spawn_seeds(seed: int, count: int) -> list[np.random.SeedSequence]:
    """Independent child seeds, one per sweep point."""
    return np.random.SeedSequence(seed).spawn(count)
