import numpy as np

from experiments.common import require, sweep_values
from runner import Experiment
from xlmimo.array_geometry import collocated_ula, modular_ula, sparse_ula
from xlmimo.link_metrics import ff_pattern

HEADER = ("delta", "collocated", "modular", "sparse")


def architectures(cfg):
    """Collocated, modular and sparse ULAs with the same number of elements NM."""
    n = int(require(cfg, "num_modules"))
    m = int(require(cfg, "elems_per_module"))
    lam = cfg.wavelength
    return (
        collocated_ula(n * m, lam),
        modular_ula(n, m, lam, float(require(cfg, "module_separation"))),
        sparse_ula(n * m, lam, float(require(cfg, "spacing_factor"))),
    )


def points(cfg):
    return sweep_values(cfg, "delta")


def evaluate(cfg, delta, seed):
    # beam steered to broadside, observed where cosθ′ − cosθ = delta
    theta_prime = float(cfg.params.get("theta_prime", np.pi / 2))
    theta = float(np.arccos(np.clip(np.cos(theta_prime) - delta, -1.0, 1.0)))
    return [delta, *(ff_pattern(layout, theta, theta_prime) for layout in architectures(cfg))]


async def setup(runner):
    await runner.add_experiment(Experiment(
        "ff_beam_pattern", HEADER, points, evaluate,
        "Far-field beam pattern of collocated, modular and sparse ULAs against Δ_θ",
    ))
