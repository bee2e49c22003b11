"""NS/SN exchangeability with and without a small S-axis misalignment on side B."""

import argparse
import math
from pathlib import Path

from loophole_lab import stats
from loophole_lab.config import load_config
from loophole_lab.engine import run_scan
from loophole_lab.oracle import QuadratureSpec, quad_outcome_table

DEFAULT = Path(__file__).resolve().parent.parent / "configs" / "asymmetric.json"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(DEFAULT))
    ap.add_argument("--phi", type=float, default=45.0, help="setting difference, degrees")
    ap.add_argument("--n-pairs", type=int)
    args = ap.parse_args()

    config, _ = load_config(args.config)
    if args.n_pairs:
        config = config.replace(n_pairs=args.n_pairs)
    phi = math.radians(args.phi)
    for label, cfg in (("as configured", config), ("symmetric", config.replace(detector_b=config.detector_a))):
        scan = run_scan(cfg, [phi])
        table = scan.entries[0].table
        z = stats.fair_sampling_diagnostics(scan).ns_sn_asymmetry_z
        quad = quad_outcome_table(cfg.detector_a.at(0.0), cfg.detector_b.at(phi), spec=QuadratureSpec(1000, 2000))
        print(f"{label:>14}: ns={table.ns} sn={table.sn} z={z:+.2f}  "
              f"quadrature ns={quad[('N', 'S')]:.5f} sn={quad[('S', 'N')]:.5f}")


if __name__ == "__main__":
    main()
