import logging

import numpy as np

from experiments.common import sweep_values
from runner import Experiment
from xlmimo.array_geometry import physical_dimension
from xlmimo.errors import BoundaryError
from xlmimo.nearfield_response import (
    ddrayleigh_distance,
    effective_rayleigh_distance,
    numeric_ddrayleigh,
    rayleigh_distance,
    reactive_distance,
    upd_distance,
)

logger = logging.getLogger(__name__)

HEADER = ("theta_rad", "reactive_m", "rayleigh_m", "ddrayleigh_m", "effective_rayleigh_m",
          "numeric_ddrayleigh_m", "upd_m")


def points(cfg):
    return sweep_values(cfg, "theta")


def evaluate(cfg, theta, seed):
    """All boundary criteria along one direction; a UPD that never brackets is reported as inf."""
    layout = cfg.layout()
    lam = layout.wavelength
    aperture = physical_dimension(layout)
    threshold = float(cfg.params.get("upd_threshold", 0.9))
    try:
        upd = upd_distance(layout, theta, threshold, cfg.pattern())
    except BoundaryError as e:
        logger.warning(f"UPD at θ={theta:.4f}: {e}")
        upd = np.inf
    return [
        theta,
        reactive_distance(aperture, lam),
        rayleigh_distance(aperture, lam),
        ddrayleigh_distance(aperture, lam, theta),
        effective_rayleigh_distance(aperture, lam, theta),
        numeric_ddrayleigh(layout, theta),
        upd,
    ]


async def setup(runner):
    await runner.add_experiment(Experiment(
        "boundary_map", HEADER, points, evaluate,
        "Near-field boundaries of one array as a function of the incidence angle",
        requires=("layout",),
    ))
