from scipy import constants

from experiments.common import frequencies, integer_sweep
from runner import Experiment
from xlmimo.array_geometry import ArrayKind, ArrayLayout, physical_dimension
from xlmimo.nearfield_response import rayleigh_distance

HEADER = ("frequency_hz", "num_elements", "aperture_m", "rayleigh_m")


def points(cfg):
    return [(f, m) for f in frequencies(cfg) for m in integer_sweep(cfg, "num_elements")]


def evaluate(cfg, point, seed):
    frequency, num_elements = point
    wavelength = constants.c / frequency
    spacing_factor = float(cfg.params.get("spacing_factor", 1.0))
    kind = ArrayKind.COLLOCATED_ULA if spacing_factor == 1.0 else ArrayKind.SPARSE_ULA
    layout = ArrayLayout(kind, wavelength, num_elements, spacing_factor=spacing_factor)
    aperture = physical_dimension(layout)
    return [frequency, num_elements, aperture, rayleigh_distance(aperture, wavelength)]


async def setup(runner):
    await runner.add_experiment(Experiment(
        "rayleigh_vs_M", HEADER, points, evaluate,
        "Rayleigh distance against element count for a ULA with spacing Iλ/2",
    ))
