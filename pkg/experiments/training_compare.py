import logging
from functools import lru_cache
from itertools import product

import numpy as np

from experiments.common import shared_seed, sweep_values
from runner import Experiment
from xlmimo.array_geometry import ArrayLayout
from xlmimo.beam_codebook import DEFAULT_RINGS, Codebook, codeword_source, polar_codebook
from xlmimo.beam_training import EPISODE_HEADER, TrainingMethod, run_episode
from xlmimo.errors import ConfigError
from xlmimo.link_metrics import from_db
from xlmimo.nearfield_response import ResponseModel, siso_channel

logger = logging.getLogger(__name__)

HEADER = ("transmit_snr_db", *EPISODE_HEADER)


@lru_cache(maxsize=8)
def codebook_for(layout: ArrayLayout, rings: int, threshold: float) -> Codebook:
    return polar_codebook(layout, rings=rings, threshold=threshold)


def _methods(cfg) -> list[TrainingMethod]:
    names = cfg.params.get("methods") or [m.value for m in TrainingMethod]
    try:
        return [TrainingMethod(name) for name in names]
    except ValueError as e:
        raise ConfigError(f"unknown training method: {e}", [f"params.methods: {e}"]) from e


def _snr_grid(cfg) -> list[float]:
    if cfg.sweep is not None:
        return sweep_values(cfg, "transmit_snr_db")
    if "transmit_snr_db" not in cfg.params:
        raise ConfigError("training_compare needs a transmit SNR",
                          ["params.transmit_snr_db: missing (or sweep over transmit_snr_db)"])
    return [float(cfg.params["transmit_snr_db"])]


def points(cfg):
    episodes = int(cfg.params.get("episodes", 100))
    return list(product(enumerate(_snr_grid(cfg)), range(episodes), _methods(cfg)))


def draw_user(rng: np.random.Generator, layout: ArrayLayout, codebook: Codebook) -> np.ndarray:
    """LoS channel of a user sitting exactly on a random finite-distance codeword."""
    finite = [tag for tag in codebook.tags if tag.s > 0]
    if not finite:
        raise ConfigError("codebook has no finite-distance rings", ["params.rings: no ring above r_min"])
    tag = finite[int(rng.integers(len(finite)))]
    return siso_channel(ResponseModel.USW, layout, codeword_source(layout, tag.angle, tag.distance))


def evaluate(cfg, point, seed):
    (snr_index, snr_db), episode, method = point
    params = cfg.params
    layout = cfg.layout()
    codebook = codebook_for(layout, int(params.get("rings", DEFAULT_RINGS)), float(params.get("threshold", 0.5)))
    # every method and SNR of one episode sees the same user
    h = draw_user(np.random.default_rng(shared_seed(seed, episode)), layout, codebook)
    noise_seed = int(shared_seed(seed, snr_index, episode).generate_state(1)[0])
    row = run_episode(
        method, h, codebook,
        transmit_snr=float(from_db(snr_db)),
        seed=noise_seed,
        layout=layout,
        k=int(params.get("k", 3)),
        n_l=params.get("n_l"),
        region_threshold_db=float(params.get("region_threshold_db", 3.0)),
        noiseless=bool(params.get("noiseless", False)),
    )
    return [snr_db, *row]


async def setup(runner):
    await runner.add_experiment(Experiment(
        "training_compare", HEADER, points, evaluate,
        "Pilot overhead, success rate and achieved gain of the beam training schemes",
        requires=("layout",),
    ))
