"""Report the truncation check (cavity+1, phonon+2) for each preset.

Usage: python scripts/check_truncation.py [preset ...]
"""
import sys
import time

from fresqo.config import load_config
from fresqo.presets import preset_names
from fresqo.scenario import check_convergence


def main(names):
    failed = False
    for name in names or preset_names():
        t0 = time.perf_counter()
        conv = check_convergence(load_config(preset=name))
        failed |= not conv["ok"]
        print(f"{name:8s} ok={conv['ok']!s:5s} max_rel_change={conv['max_rel_change']:.3g} "
              f"enlarged={conv['enlarged_truncation']} ({time.perf_counter() - t0:.0f}s)", flush=True)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
