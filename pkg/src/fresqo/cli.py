"""Command-line entry point: ``fres-qo <task> --config FILE [--preset NAME] ...``."""
from __future__ import annotations

import argparse
import logging
import sys

from .config import TASKS, load_config
from .errors import ConfigError, NumericalError, UndefinedCorrelationError
from .presets import preset_names

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_NONCONVERGED = 0, 2, 3, 4


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fres-qo", description="Frequency-resolved correlations of "
                                "driven optomechanical systems.")
    p.add_argument("task", choices=TASKS)
    p.add_argument("--config", help="JSON scenario file (overlays the preset when both are given)")
    p.add_argument("--preset", help="named preset: " + ", ".join(preset_names()))
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int, help="worker threads (default: available cores)")
    p.add_argument("--method", choices=("explicit", "conditional"))
    p.add_argument("--no-png", action="store_true", help="skip heatmap rendering")
    p.add_argument("--no-convergence", action="store_true", help="skip the truncation check")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    # argparse reports usage errors with exit status 2, which is also the config-error code
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    from .scenario import run_scenario

    overrides: dict = {"task": args.task}
    if args.method:
        overrides["method"] = args.method
    if args.threads is not None:
        if args.threads < 1:
            print("fres-qo: config error: --threads: must be at least 1", file=sys.stderr)
            return EXIT_CONFIG
        overrides["threads"] = args.threads
    if args.out:
        overrides["output"] = {"dir": args.out}
    if args.no_png:
        overrides.setdefault("output", {})["png"] = False
    if args.no_convergence:
        overrides["convergence"] = {"enabled": False}
    try:
        if args.config is None and args.preset is None:
            raise ConfigError("give --config or --preset", "--config")
        cfg = load_config(args.config, args.preset, overrides)
        bundle = run_scenario(cfg)
    except ConfigError as exc:
        print(f"fres-qo: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, UndefinedCorrelationError, ArithmeticError) as exc:
        print(f"fres-qo: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for f in bundle.files:
        print(f)
    if not bundle.converged:
        conv = bundle.metadata["convergence"]
        print(f"fres-qo: truncation not converged (max relative change {conv['max_rel_change']:.3g}"
              f" > {conv['tol']:.3g}); outputs written", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
