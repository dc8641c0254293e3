import numpy as np

from experiments.common import require, sweep_values
from experiments.ff_beam_pattern import architectures
from runner import Experiment
from xlmimo.errors import ConfigError
from xlmimo.link_metrics import nf_nf_pattern

HEADER = ("delta_r_m", "collocated", "modular", "sparse")


def points(cfg):
    return sweep_values(cfg, "delta_r")


def evaluate(cfg, delta_r, seed):
    """Gain of a beam focused at (r′, θ) observed at (r′ + Δr, θ)."""
    r_prime = float(require(cfg, "r_prime"))
    theta = float(cfg.params.get("theta", np.pi / 2))
    r = r_prime + delta_r
    if not r > 0:
        raise ConfigError(f"observation distance {r} m is not positive",
                          [f"sweep: r_prime + delta_r must stay positive, got {r}"])
    return [delta_r, *(nf_nf_pattern(layout, r, theta, r_prime, theta) for layout in architectures(cfg))]


async def setup(runner):
    await runner.add_experiment(Experiment(
        "nf_focusing_vs_dr", HEADER, points, evaluate,
        "Distance-domain beam focusing of collocated, modular and sparse ULAs",
    ))
