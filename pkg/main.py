import os
import argparse
import asyncio
import logging
import sys
from datetime import datetime

from config import config

os.makedirs(config.LOG_DIR, exist_ok=True)

logging.basicConfig(
    level=getattr(logging, config.LOG_LEVEL),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[
        logging.StreamHandler(sys.stdout),
        logging.FileHandler(os.path.join(config.LOG_DIR, f'xlmimo_{datetime.now().strftime("%Y%m%d")}.log'))
    ]
)

logger = logging.getLogger(__name__)

from database import ledger
from runner import runner
from xlmimo.beam_codebook import DEFAULT_RINGS, codebook_to_csv_rows, polar_codebook
from xlmimo.errors import ConfigError
from xlmimo.results import ResultTable

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xlmimo", description="Near-field XL-MIMO experiments")
    verbs = parser.add_subparsers(dest="command", required=True)

    run = verbs.add_parser("run", help="run the experiment a scenario names")
    run.add_argument("config", help="scenario YAML file")
    run.add_argument("--out", help="output directory (default: scenario output or XLMIMO_OUTPUT_DIR)")
    run.add_argument("--seed", type=int, help="override the scenario seed")

    validate = verbs.add_parser("validate", help="check a scenario file without running it")
    validate.add_argument("config")

    verbs.add_parser("list-experiments", help="show the registered experiments")

    export = verbs.add_parser("export-codebook", help="write the polar codebook of a scenario layout")
    export.add_argument("config")
    export.add_argument("--out", help="output directory")

    history = verbs.add_parser("history", help="show recent runs from the ledger")
    history.add_argument("--limit", type=int, default=20)
    return parser


async def cmd_run(args) -> int:
    scenario = runner.load(args.config)
    path = await runner.run(scenario, out_dir=args.out, seed=args.seed)
    print(path)
    return EXIT_OK


async def cmd_validate(args) -> int:
    ok, errors, warnings = runner.validate_file(args.config)
    for w in warnings:
        print(f"warning: {w}")
    for e in errors:
        print(f"error: {e}")
    if ok:
        logger.info(f"✅ {args.config} is valid")
        return EXIT_OK
    logger.error(f"❌ {args.config} has {len(errors)} invalid field(s)")
    return EXIT_INVALID


async def cmd_list(args) -> int:
    for name, experiment in sorted(runner.experiments.items()):
        print(f"{name:20s} {experiment.description}")
    return EXIT_OK


async def cmd_export_codebook(args) -> int:
    scenario = runner.load(args.config)
    if scenario.section("layout") is None:
        raise ConfigError("export-codebook needs an array", ["layout: missing (required by export-codebook)"])
    params = scenario.params
    codebook = polar_codebook(
        scenario.layout(),
        params.get("num_angles"),
        rings=int(params.get("rings", DEFAULT_RINGS)),
        threshold=float(params.get("threshold", 0.5)),
    )
    header, rows = codebook_to_csv_rows(codebook)
    table = ResultTable("codebook", header, metadata={
        "scenario": scenario.name,
        "config_hash": scenario.config_hash(),
    })
    table.extend(rows)
    out_dir = args.out or config.OUTPUT_DIR
    print(table.write(os.path.join(out_dir, f"{scenario.name}_codebook.csv")))
    return EXIT_OK


async def cmd_history(args) -> int:
    for run in await ledger.recent_runs(args.limit):
        status = "✅" if run["status"] == "finished" else "❌" if run["status"] == "failed" else "⏳"
        print(f"{status} #{run['id']} {run['started_at']} {run['experiment']} ({run['scenario']}) "
              f"seed={run['seed']} rows={run['rows']} {run['output_path'] or run['error'] or ''}")
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "validate": cmd_validate,
    "list-experiments": cmd_list,
    "export-codebook": cmd_export_codebook,
    "history": cmd_history,
}


async def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        await runner.setup_hook()
        return await COMMANDS[args.command](args)
    except ConfigError as e:
        # أخطاء الإعداد تظهر للمستخدم حقلاً حقلاً
        logger.error(f"❌ Invalid scenario: {e}")
        for err in e.errors:
            print(f"error: {err}")
        return EXIT_INVALID
    except Exception as e:
        logger.error(f"❌ {args.command} failed: {e}")
        return EXIT_RUNTIME
    finally:
        # إغلاق قاعدة البيانات في كل الحالات
        await ledger.close()


if __name__ == "__main__":
    sys.exit(asyncio.run(main()))
