import numpy as np

from experiments.common import integer_sweep, require
from runner import Experiment
from xlmimo.array_geometry import collocated_ula, source_point
from xlmimo.link_metrics import asymptotic_snr_limit, from_db, mrc_snr, to_db, upw_snr
from xlmimo.nearfield_response import ResponseModel, siso_channel

HEADER = ("num_elements", "snr_nusw_db", "snr_closed_form_db", "snr_upw_db", "snr_limit_db")


def points(cfg):
    return integer_sweep(cfg, "num_elements")


def evaluate(cfg, num_elements, seed):
    """Received MRC SNR of a single isotropic user in front of a growing collocated ULA."""
    r = float(require(cfg, "r"))
    theta = float(cfg.params.get("theta", np.pi / 2))
    snr = from_db(float(require(cfg, "transmit_snr_db")))
    lam = cfg.wavelength
    layout = collocated_ula(num_elements, lam)
    h = siso_channel(ResponseModel.NUSW, layout, source_point(layout, r, theta))
    report = mrc_snr(h, snr, layout=layout, r=r, theta=theta)
    return [
        num_elements,
        to_db(report.numeric),
        to_db(report.closed_form),
        to_db(upw_snr(num_elements, lam, r, snr)),
        to_db(asymptotic_snr_limit(snr, lam, layout.spacing, r, theta)),
    ]


async def setup(runner):
    await runner.add_experiment(Experiment(
        "snr_vs_M", HEADER, points, evaluate,
        "Near-field versus far-field MRC SNR scaling with the number of antennas",
    ))
