from itertools import product

import numpy as np

from experiments.common import integer_sweep, point_from, require, substreams
from runner import Experiment
from xlmimo.channel_synthesis import Scatterer
from xlmimo.dam_transmission import dam_rate, path_mrt, path_zf, qpsk_symbols, simulate_dam_link, taps_from_scatterers
from xlmimo.errors import ConfigError

HEADER = ("num_elements", "scheme", "signal_power", "isi_power", "isi_to_signal", "rate")
SCHEMES = {"path_mrt": path_mrt, "path_zf": path_zf}


def points(cfg):
    return list(product(integer_sweep(cfg, "num_elements"), SCHEMES))


def evaluate(cfg, point, seed):
    """One DAM link: delay pre-compensation plus path-based MRT or ZF on ``num_elements`` antennas."""
    num_elements, scheme = point
    params = cfg.params
    noise_power = float(require(cfg, "noise_power"))
    if not noise_power > 0:
        raise ConfigError("noise power must be positive", ["params.noise_power: must be positive"])
    layout = cfg.layout().with_elements(num_elements)
    sections = cfg.section("scatterers") or []
    if not sections or cfg.section("source") is None:
        raise ConfigError("dam_isi_vs_M needs a receiver and scatterers",
                          ["source / scatterers: both are required"])
    scatterers = [Scatterer(tuple(float(v) for v in point_from(layout, s)), float(s.get("rcs", 1.0)))
                  for s in sections]
    taps = taps_from_scatterers(layout, point_from(layout, cfg.section("source")), scatterers,
                                float(require(cfg, "sample_period")), cfg.pattern())
    beamformers = SCHEMES[scheme](taps, float(params.get("transmit_power", 1.0)))

    symbol_seed, noise_seed = substreams(seed, 2)
    count = max(int(params.get("symbols", 1024)), 4 * taps.max_delay + 1)
    symbols = qpsk_symbols(count, np.random.default_rng(symbol_seed))
    link = simulate_dam_link(taps, beamformers, symbols, noise_power, noise_seed)
    d = link.decomposition
    return [num_elements, scheme, d.signal_power, d.isi_power, d.isi_power / d.signal_power, dam_rate(d)]


async def setup(runner):
    await runner.add_experiment(Experiment(
        "dam_isi_vs_M", HEADER, points, evaluate,
        "Signal and ISI power of delay alignment modulation with path-based MRT and ZF",
        requires=("layout",),
    ))
