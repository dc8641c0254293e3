from dataclasses import replace

from experiments.common import sweep_values
from runner import Experiment
from xlmimo.array_geometry import array_normal, physical_dimension
from xlmimo.channel_synthesis import LosMethod, effective_rank, los_channel
from xlmimo.link_metrics import edof
from xlmimo.nearfield_response import mimo_rayleigh_distance

HEADER = ("distance_m", "rank_elementwise", "rank_outer_product", "rank_far_field", "edof",
          "mimo_rayleigh_m")


def points(cfg):
    return sweep_values(cfg, "distance")


def evaluate(cfg, distance, seed):
    """LoS MIMO rank with the receive array moved ``distance`` along the transmit boresight."""
    tx = cfg.layout("tx_layout")
    rx = cfg.layout("rx_layout")
    rx = replace(rx, reference_point=tuple(float(v) for v in tx.p + distance * array_normal(tx)))
    pattern = cfg.pattern()
    fraction = float(cfg.params.get("rank_fraction", 0.1))

    channels = {m: los_channel(m, tx, rx, pattern, pattern) for m in LosMethod}
    exact = channels[LosMethod.ELEMENTWISE]
    return [
        distance,
        effective_rank(exact, fraction),
        effective_rank(channels[LosMethod.OUTER_PRODUCT], fraction),
        effective_rank(channels[LosMethod.FAR_FIELD_UPW], fraction),
        edof(exact),
        mimo_rayleigh_distance(physical_dimension(tx), physical_dimension(rx), tx.wavelength),
    ]


async def setup(runner):
    await runner.add_experiment(Experiment(
        "rank_vs_distance", HEADER, points, evaluate,
        "Effective rank of the LoS MIMO channel under three channel models against link distance",
        requires=("tx_layout", "rx_layout"),
    ))
