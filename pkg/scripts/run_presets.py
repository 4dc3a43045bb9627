"""Run named presets and write their CSV, PNG and metadata files.

Usage: python scripts/run_presets.py [--out results] [--no-convergence] [preset ...]
With no preset names every preset is run, which takes a few hours on one core.
"""
import argparse
import logging
import time

from fresqo.config import load_config
from fresqo.presets import preset_names
from fresqo.scenario import run_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("presets", nargs="*", help="preset names (default: all)")
    ap.add_argument("--out", default="results")
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--no-convergence", action="store_true")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    overrides = {"output": {"dir": args.out}}
    if args.no_convergence:
        overrides["convergence"] = {"enabled": False}
    for name in args.presets or preset_names():
        t0 = time.perf_counter()
        cfg = load_config(preset=name, overrides=overrides)
        bundle = run_scenario(cfg, threads=args.threads)
        conv = bundle.metadata["convergence"]
        state = "unchecked" if not conv.get("checked") else ("ok" if conv["ok"] else "NOT CONVERGED")
        print(f"{name:8s} {time.perf_counter() - t0:8.1f}s  truncation {state}")


if __name__ == "__main__":
    main()
