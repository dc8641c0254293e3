import logging

import numpy as np

from experiments.common import integer_sweep, require
from runner import Experiment
from xlmimo.array_geometry import ArrayLayout, array_normal, collocated_ula, source_point
from xlmimo.channel_synthesis import LosMethod, los_channel, nlos_bistatic, sample_scatterers
from xlmimo.errors import ConfigError
from xlmimo.link_metrics import Beamformer, LinkBudget, multiuser_receive_sinr
from xlmimo.nearfield_response import ResponseModel

logger = logging.getLogger(__name__)

HEADER = ("num_elements", "mrc_nf", "zf_nf", "mmse_nf", "mrc_ff", "zf_ff", "mmse_ff")
BEAMFORMERS = (Beamformer.MRC, Beamformer.ZF, Beamformer.MMSE)


def points(cfg):
    return integer_sweep(cfg, "num_elements")


def drop_users(rng: np.random.Generator, layout: ArrayLayout, count: int, centre_r: float,
               radius: float) -> list[np.ndarray]:
    """Uniform drop in a disk around the broadside point at ``centre_r``, in the array's plane."""
    centre = source_point(layout, centre_r, np.pi / 2)
    rho = radius * np.sqrt(rng.uniform(size=count))
    phi = rng.uniform(0.0, 2.0 * np.pi, size=count)
    n = array_normal(layout)
    return [centre + p * (np.cos(f) * n + np.sin(f) * layout.u) for p, f in zip(rho, phi)]


def user_channels(bs: ArrayLayout, users: list[np.ndarray], scatterers, far_field: bool) -> np.ndarray:
    """M×K uplink channels, LoS plus the shared scatterers."""
    lam = bs.wavelength
    los_method = LosMethod.FAR_FIELD_UPW if far_field else LosMethod.ELEMENTWISE
    rx_model = ResponseModel.UPW if far_field else ResponseModel.NUSW
    columns = []
    for position in users:
        user = collocated_ula(1, lam, reference_point=tuple(float(v) for v in position))
        h = los_channel(los_method, user, bs)[:, 0]
        if scatterers:
            h = h + nlos_bistatic(user, bs, scatterers, rx_model=rx_model)[:, 0]
        columns.append(h)
    return np.stack(columns, axis=1)


def evaluate(cfg, num_elements, seed):
    """Sum rate of NF-designed and FF-designed combiners, both evaluated on the NF channel."""
    params = cfg.params
    num_users = int(require(cfg, "users"))
    if num_elements < num_users:
        raise ConfigError(f"ZF needs at least {num_users} antennas, got {num_elements}",
                          [f"sweep.min: must be >= params.users ({num_users})"])
    bs = collocated_ula(num_elements, cfg.wavelength)
    rng = np.random.default_rng(seed)
    users = drop_users(rng, bs, num_users, float(require(cfg, "cell_centre")), float(require(cfg, "cell_radius")))
    scatterers = sample_scatterers(
        rng, int(params.get("scatterers", 0)),
        tuple(params.get("scatterer_range", (200.0, 500.0))),
        tuple(np.deg2rad(params.get("scatterer_angles_deg", (-60.0, 60.0)))),
        tuple(params.get("rcs_range", (1.0, 10.0))),
        bs,
    )
    powers = LinkBudget.from_db(float(require(cfg, "transmit_snr_db"))).powers(num_users)

    true = user_channels(bs, users, scatterers, far_field=False)
    design = user_channels(bs, users, scatterers, far_field=True)
    near = [multiuser_receive_sinr(bf, true, powers).sum_rate for bf in BEAMFORMERS]
    far = [multiuser_receive_sinr(bf, true, powers, design_channels=design).sum_rate for bf in BEAMFORMERS]
    logger.debug(f"M={num_elements}: near {near}, far {far}")
    return [num_elements, *near, *far]


async def setup(runner):
    await runner.add_experiment(Experiment(
        "sumrate_vs_M", HEADER, points, evaluate,
        "Multi-user uplink sum rate with near-field and far-field designed receive beamformers",
    ))
