from scipy import constants

from experiments.common import frequencies, sweep_values
from runner import Experiment
from xlmimo.nearfield_response import rayleigh_distance, reactive_distance

HEADER = ("frequency_hz", "aperture_m", "rayleigh_m", "reactive_m")


def points(cfg):
    return [(f, d) for f in frequencies(cfg) for d in sweep_values(cfg, "aperture")]


def evaluate(cfg, point, seed):
    frequency, aperture = point
    wavelength = constants.c / frequency
    return [frequency, aperture, rayleigh_distance(aperture, wavelength), reactive_distance(aperture, wavelength)]


async def setup(runner):
    await runner.add_experiment(Experiment(
        "rayleigh_vs_D", HEADER, points, evaluate,
        "Rayleigh and reactive distance against array aperture, one curve per frequency",
    ))
