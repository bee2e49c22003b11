"""Show accidental subtraction inflating |S| in the committed dark-count scenario."""

import argparse
from pathlib import Path

from loophole_lab import stats
from loophole_lab.analytic import BELL_ANGLES
from loophole_lab.config import load_config
from loophole_lab.engine import run_chsh

DEFAULT = Path(__file__).resolve().parent.parent / "configs" / "subtraction_bias.json"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(DEFAULT))
    args = ap.parse_args()

    config, _ = load_config(args.config)
    tables = list(run_chsh(config, *BELL_ANGLES).tables)
    raw = stats.chsh(tables)
    subtracted = [stats.subtract_accidentals(t) for t in tables]
    adjusted = stats.chsh([r.table for r in subtracted])
    print(f"dark rate {config.dark_rate}, {config.n_pairs} pairs per setting")
    for t, r in zip(tables, subtracted):
        est = ", ".join(f"{k}={v:.0f}" for k, v in r.estimate.items())
        print(f"  raw nn={t.nn} ss={t.ss} ns={t.ns} sn={t.sn}; accidentals {est}; clipped {list(r.clipped)}")
    print(f"S raw      = {raw.s_value:.4f} +/- {raw.standard_error:.4f}")
    print(f"S adjusted = {adjusted.s_value:.4f}")


if __name__ == "__main__":
    main()
