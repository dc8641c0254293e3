import asyncio
import importlib
import logging
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from config import config
from database import RunLedger, ledger
from xlmimo.errors import ConfigError
from xlmimo.results import ResultTable
from xlmimo.scenario import ScenarioConfig, build_scenario, read_scenario, spawn_seeds, validate

logger = logging.getLogger(__name__)

EXTENSIONS = (
    "experiments.rayleigh_vs_D",
    "experiments.rayleigh_vs_M",
    "experiments.boundary_map",
    "experiments.rank_vs_distance",
    "experiments.snr_vs_M",
    "experiments.ff_beam_pattern",
    "experiments.nf_focusing_vs_dr",
    "experiments.sumrate_vs_M",
    "experiments.training_compare",
    "experiments.dam_isi_vs_M",
)


@dataclass(frozen=True)
class Experiment:
    """A named sweep: ``points`` enumerates the grid, ``evaluate`` turns one
    point into one output row. Both must be pure."""

    name: str
    header: tuple[str, ...]
    points: Callable[[ScenarioConfig], list[Any]]
    evaluate: Callable[[ScenarioConfig, Any, np.random.SeedSequence], list[Any]]
    description: str = ""
    # top-level scenario sections the experiment reads
    requires: tuple[str, ...] = ()


class ExperimentRunner:
    def __init__(self, ledger: RunLedger | None = None, workers: int | None = None):
        self.experiments: dict[str, Experiment] = {}
        self.ledger = ledger
        self.workers = workers or config.WORKERS
        self.ready = False

    async def add_experiment(self, experiment: Experiment):
        if experiment.name in self.experiments:
            raise ValueError(f"experiment {experiment.name!r} is already registered")
        self.experiments[experiment.name] = experiment

    async def load_extension(self, name: str):
        module = importlib.import_module(name)
        if not hasattr(module, "setup"):
            raise ValueError(f"extension {name!r} has no setup function")
        await module.setup(self)

    async def setup_hook(self):
        if self.ready:
            return
        # تحميل كل التجارب من قائمة الإضافات
        for name in EXTENSIONS:
            await self.load_extension(name)
        self.ready = True
        logger.info(f"✅ Loaded {len(self.experiments)} experiments")

    # -----------------------------------------------------------
    # scenarios
    # -----------------------------------------------------------
    def requirements(self) -> dict[str, tuple[str, ...]]:
        return {name: exp.requires for name, exp in self.experiments.items()}

    def validate_file(self, path: str | Path) -> tuple[bool, list[str], list[str]]:
        try:
            raw = read_scenario(path)
        except ConfigError as e:
            return False, e.errors or [str(e)], []
        return validate(raw, self.requirements())

    def load(self, path: str | Path) -> ScenarioConfig:
        return build_scenario(read_scenario(path), default_seed=config.DEFAULT_SEED,
                              known_experiments=self.requirements())

    # -----------------------------------------------------------
    # execution
    # -----------------------------------------------------------
    async def sweep(self, scenario: ScenarioConfig, seed: int) -> ResultTable:
        experiment = self.experiments.get(scenario.experiment)
        if experiment is None:
            raise ConfigError(f"unknown experiment {scenario.experiment!r}",
                              [f"experiment: unknown experiment {scenario.experiment!r}"])
        points = experiment.points(scenario)
        # بذرة فرعية لكل نقطة، فالنتيجة لا تتغير بتغير عدد العمال
        seeds = spawn_seeds(seed, len(points))
        loop = asyncio.get_running_loop()
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            # gather يحافظ على ترتيب النقاط
            rows = await asyncio.gather(*[
                loop.run_in_executor(pool, experiment.evaluate, scenario, point, child)
                for point, child in zip(points, seeds)
            ])
        table = ResultTable(experiment.name, list(experiment.header), metadata={
            "scenario": scenario.name,
            "config_hash": scenario.config_hash(),
            "seed": seed,
        })
        table.extend(rows)
        return table

    def output_path(self, scenario: ScenarioConfig, out_dir: str | Path | None) -> Path:
        if out_dir is not None:
            return Path(out_dir) / f"{scenario.experiment}.csv"
        if scenario.output:
            return Path(scenario.output)
        return Path(config.OUTPUT_DIR) / f"{scenario.experiment}.csv"

    async def run(self, scenario: ScenarioConfig, out_dir: str | Path | None = None,
                  seed: int | None = None) -> Path:
        await self.setup_hook()
        seed = scenario.seed if seed is None else seed
        run_id = None
        if self.ledger is not None:
            run_id = await self.ledger.start_run(scenario.experiment, scenario.name,
                                                 scenario.config_hash(), seed)
        try:
            logger.info(f"Running {scenario.experiment} ({scenario.name}) with seed {seed}")
            table = await self.sweep(scenario, seed)
            path = table.write(self.output_path(scenario, out_dir))
        except Exception as e:
            logger.error(f"❌ {scenario.experiment} failed: {e}")
            # تسجيل الفشل في السجل ثم إعادة رفع الخطأ
            if run_id is not None:
                await self.ledger.fail_run(run_id, str(e))
            raise
        if run_id is not None:
            await self.ledger.log_event(run_id, "INFO", f"{len(table.rows)} rows")
            await self.ledger.finish_run(run_id, len(table.rows), str(path))
        return path


runner = ExperimentRunner(ledger)
