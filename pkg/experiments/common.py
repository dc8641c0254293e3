"""Helpers shared by the experiment extensions."""
from __future__ import annotations

from typing import Any

import numpy as np
from scipy import constants

from xlmimo.array_geometry import ArrayLayout, source_point
from xlmimo.errors import ConfigError
from xlmimo.scenario import ScenarioConfig, layout_from

SHARED_KEY_PREFIX = 2 ** 31


def sweep_values(cfg: ScenarioConfig, parameter: str) -> list[float]:
    if cfg.sweep is None:
        raise ConfigError(f"{cfg.experiment} needs a sweep over {parameter}", ["sweep: missing"])
    if cfg.sweep.parameter != parameter:
        raise ConfigError(
            f"{cfg.experiment} sweeps {parameter}, not {cfg.sweep.parameter}",
            [f"sweep.parameter: expected {parameter!r}, got {cfg.sweep.parameter!r}"],
        )
    return [float(v) for v in cfg.sweep.values()]


def integer_sweep(cfg: ScenarioConfig, parameter: str) -> list[int]:
    # duplicates after rounding are kept so the row count matches the grid
    return [int(round(v)) for v in sweep_values(cfg, parameter)]


def frequencies(cfg: ScenarioConfig) -> list[float]:
    values = cfg.params.get("frequencies") or [cfg.carrier_frequency]
    out = [float(f) for f in values]
    if any(not f > 0 for f in out):
        raise ConfigError("frequencies must be positive", ["params.frequencies: must be positive numbers"])
    return out


def layout_at(cfg: ScenarioConfig, frequency: float, key: str = "layout") -> ArrayLayout:
    return layout_from(cfg.section(key), constants.c / frequency)


def require(cfg: ScenarioConfig, key: str) -> Any:
    params = cfg.params
    if key not in params:
        raise ConfigError(f"{cfg.experiment} needs params.{key}", [f"params.{key}: missing"])
    return params[key]


def point_from(layout: ArrayLayout, section: dict[str, Any]) -> np.ndarray:
    """A placement given either as ``position`` or as polar ``r``/``theta`` (radians)."""
    if "position" in section:
        return np.asarray(section["position"], dtype=float)
    return source_point(layout, float(section["r"]), float(section["theta"]))


def shared_seed(child: np.random.SeedSequence, *key: int) -> np.random.SeedSequence:
    """Seed keyed on ``key`` under the same root entropy as ``child``.

    Grid points that must see the same random draw (e.g. several training
    methods on one channel) share a key.
    """
    # the prefix keeps shared keys apart from the per-point (i,) children
    return np.random.SeedSequence(child.entropy, spawn_key=(SHARED_KEY_PREFIX, *(int(k) for k in key)))


def substreams(seed: np.random.SeedSequence, count: int) -> list[np.random.SeedSequence]:
    """Children of ``seed`` that do not advance its spawn counter, so repeated calls agree."""
    return [np.random.SeedSequence(seed.entropy, spawn_key=(*seed.spawn_key, i)) for i in range(count)]
