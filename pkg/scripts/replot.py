"""Redraw a heatmap from a map CSV written by the tps or csi task.

Usage: python scripts/replot.py map.csv out.png [--target a] [--linear]
"""
import argparse

from fresqo.plotting import render_heatmap


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("csv")
    ap.add_argument("png")
    ap.add_argument("--target", default=None)
    ap.add_argument("--linear", action="store_true", help="linear colour scale centred on 1")
    args = ap.parse_args()
    render_heatmap(args.csv, args.png, scale="linear" if args.linear else "log", target=args.target)


if __name__ == "__main__":
    main()
