import numpy as np
import pytest

from xlmimo.errors import ConfigError
from xlmimo.nearfield_response import TGPP, Cosine, Isotropic
from xlmimo.scenario import (
    SweepAxis,
    build_scenario,
    config_hash,
    parse_scenario,
    pattern_from,
    read_scenario,
    spawn_seeds,
    validate,
)

SCENARIO = """
name: demo
experiment: snr_vs_M
carrier_frequency: 2.4e9
seed: 5
layout:
  kind: ModularULA
  elements: 4
  modules: 8
  module_separation: 6
source:
  r: 20.0
  theta: 1.2
params:
  r: 15.0
sweep:
  parameter: num_elements
  min: 2
  max: 64
  steps: 6
  scale: log
"""


@pytest.fixture
def raw():
    return parse_scenario(SCENARIO)


def test_valid_scenario(raw):
    ok, errors, warnings = validate(raw, {"snr_vs_M"})
    assert ok
    assert errors == []
    assert warnings == []


def test_build_scenario(raw):
    cfg = build_scenario(raw)
    assert cfg.seed == 5
    assert cfg.wavelength == pytest.approx(0.1249135, rel=1e-6)
    assert cfg.layout().num_modules == 8
    assert cfg.params == {"r": 15.0}
    assert np.allclose(cfg.sweep.values(), [2, 4, 8, 16, 32, 64])
    assert isinstance(cfg.pattern(), Isotropic)


def test_default_seed_applies_when_missing(raw):
    del raw["seed"]
    assert build_scenario(raw, default_seed=99).seed == 99


@pytest.mark.parametrize("mutate, message", [
    (lambda r: r.update(carrier_frequency=-1.0), "carrier_frequency: must be a positive number"),
    (lambda r: r.pop("name"), "name: missing"),
    (lambda r: r["layout"].update(module_separation=2), "module separation Γ >= M"),
    (lambda r: r["layout"].update(kind="Hexagonal"), "layout.kind: unknown array kind"),
    (lambda r: r.update(seed=-3), "seed: must be a non-negative integer"),
    (lambda r: r["sweep"].update(steps=1), "sweep.steps"),
    (lambda r: r["sweep"].update(min=0), "log sweep needs a positive start"),
    (lambda r: r["sweep"].update(min=100), "exceeds sweep.max"),
    (lambda r: r["source"].pop("theta"), "source.theta: missing"),
    (lambda r: r.update(pattern={"type": "Horn"}), "pattern.type: unknown value"),
    (lambda r: r.update(experiment="nope"), "experiment: unknown experiment"),
    (lambda r: r.update(scatterers=[{"r": 10.0, "theta": 1.0, "rcs": -1}]), "scatterers[0].rcs"),
])
def test_invalid_fields_are_reported_by_path(raw, mutate, message):
    mutate(raw)
    ok, errors, _ = validate(raw, {"snr_vs_M"})
    assert not ok
    assert any(message in e for e in errors), errors
    with pytest.raises(ConfigError) as info:
        build_scenario(raw, known_experiments={"snr_vs_M"})
    assert info.value.errors == errors


def test_every_error_is_collected(raw):
    raw["carrier_frequency"] = 0
    raw.pop("name")
    _, errors, _ = validate(raw)
    assert len(errors) >= 2


def test_sections_required_by_the_experiment(raw):
    required = {"snr_vs_M": (), "rank_vs_distance": ("tx_layout", "rx_layout")}
    assert validate(raw, required)[0]
    raw["experiment"] = "rank_vs_distance"
    ok, errors, _ = validate(raw, required)
    assert not ok
    assert errors == ["tx_layout: missing (required by rank_vs_distance)",
                      "rx_layout: missing (required by rank_vs_distance)"]


def test_reactive_region_is_a_warning(raw):
    raw["source"]["r"] = 0.05
    ok, _, warnings = validate(raw)
    assert ok
    assert any("reactive region" in w for w in warnings)


def test_unreadable_input():
    with pytest.raises(ConfigError):
        parse_scenario("name: [unclosed")
    with pytest.raises(ConfigError):
        parse_scenario("- just\n- a list\n")
    with pytest.raises(ConfigError):
        read_scenario("does/not/exist.yaml")
    assert validate([1, 2]) == (False, ["<root>: scenario must be a mapping"], [])


def test_read_scenario_from_file(tmp_path):
    path = tmp_path / "demo.yaml"
    path.write_text(SCENARIO, encoding="utf-8")
    assert read_scenario(path)["name"] == "demo"


def test_config_hash_ignores_seed_and_output(raw):
    before = config_hash(raw)
    raw["seed"] = 123
    raw["output"] = "elsewhere.csv"
    assert config_hash(raw) == before
    raw["params"]["r"] = 16.0
    assert config_hash(raw) != before
    assert len(before) == 64


def test_patterns():
    assert isinstance(pattern_from(None), Isotropic)
    assert pattern_from({"type": "Cosine", "q": 4}) == Cosine(q=4.0)
    assert isinstance(pattern_from({"type": "3GPP"}), TGPP)


def test_sweep_axis_linear():
    assert np.allclose(SweepAxis("x", 0.0, 1.0, 5).values(), [0, 0.25, 0.5, 0.75, 1.0])


def test_spawn_seeds_are_deterministic_and_distinct():
    a = [s.generate_state(2).tolist() for s in spawn_seeds(11, 4)]
    b = [s.generate_state(2).tolist() for s in spawn_seeds(11, 4)]
    assert a == b
    assert len({tuple(s) for s in a}) == 4
