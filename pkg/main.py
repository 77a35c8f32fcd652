"""
NCS Rate Bounds - Main Entry Point
"""
import argparse
import sys
from pathlib import Path

import pandas as pd
from pydantic import ValidationError

import config
from src.models.experiment import ExperimentConfig
from src.services.experiment_service import ExperimentService, write_csv
from src.services.verification_service import VerificationService
from src.ui.plotting import plot_rates
from src.utils.errors import ConfigError, InfeasiblePerformanceError, SynthesisError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2
EXIT_PROPERTY = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ncs-rate-bounds",
        description="Rate bounds and ECDQ simulations for networked control over delayed channels",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", default=config.BENCHMARK_EXPERIMENT_PATH, help="experiment config (JSON)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override every seed in the config")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")

    common(sub.add_parser("bounds", help="sweep rate bounds over (h, D)"))
    common(sub.add_parser("simulate", help="simulate ECDQ schemes over (h, D)"))
    sub.add_parser("demo", help="small end-to-end run on the benchmark plant")
    plot = sub.add_parser("plot", help="plot rate tables")
    plot.add_argument("csv", nargs="+", help="bounds and/or simulation CSV files")
    plot.add_argument("--out", default=config.OUTPUT_DIR, help="output directory")
    verify = sub.add_parser("verify", help="run the property checks")
    verify.add_argument("--out", default=None, help="write the report CSV here")
    verify.add_argument("--seed", type=int, default=7)
    return parser


def load_experiment(args) -> ExperimentConfig:
    experiment = ExperimentConfig.load(args.config)
    if args.seed is not None:
        experiment = experiment.with_seed(args.seed)
    return experiment


def run_bounds(args) -> int:
    print("🔍 Computing rate bounds")
    service = ExperimentService(load_experiment(args), jobs=args.jobs)
    path = service.cmd_bounds(args.out)
    print(f"✅ Bounds saved to {path}")
    return EXIT_OK


def run_simulate(args) -> int:
    print("🚀 Simulating ECDQ coding schemes")
    service = ExperimentService(load_experiment(args), jobs=args.jobs)
    path = service.cmd_simulate(args.out)
    print(f"✅ Simulation results saved to {path}")
    return EXIT_OK


def run_plot(args) -> int:
    paths = plot_rates(args.csv, args.out)
    print(f"✅ Wrote {len(paths)} plot(s) to {args.out}")
    return EXIT_OK


def run_verify(args) -> int:
    print("🔍 Running property checks")
    results = VerificationService(seed=args.seed).run_all()
    if args.out:
        frame = pd.DataFrame([r.model_dump(mode="json", exclude={"checked_at"}) for r in results])
        write_csv(frame, Path(args.out) / "verify.csv")
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"❌ {len(failed)} propert{'y' if len(failed) == 1 else 'ies'} failed: {', '.join(failed)}")
        return EXIT_PROPERTY
    print(f"✅ All {len(results)} properties passed")
    return EXIT_OK


def run_demo(args) -> int:
    from demo import run_demo as demo

    return EXIT_OK if demo() else EXIT_SOLVER


COMMANDS = {
    "bounds": run_bounds,
    "simulate": run_simulate,
    "plot": run_plot,
    "verify": run_verify,
    "demo": run_demo,
}


def main(argv=None) -> int:
    """Main application entry point"""
    args = build_parser().parse_args(argv)
    print("📡 NCS Rate Bounds")
    print("=" * 50)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ValidationError, FileNotFoundError) as exc:
        print(f"❌ Configuration error: {exc}")
        return EXIT_CONFIG
    except (SynthesisError, InfeasiblePerformanceError) as exc:
        print(f"❌ Solver error: {exc}")
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
