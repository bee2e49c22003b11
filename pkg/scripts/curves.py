"""Write predicted and simulated coincidence curves for several cap sizes.

Produces one CSV per beta with the closed-form rates next to Monte Carlo
estimates, suitable for plotting rate-vs-phi and E-vs-phi curves.
"""

import argparse
import csv
import math
from pathlib import Path

from loophole_lab import analytic as A
from loophole_lab.engine import ExperimentConfig, run_scan
from loophole_lab.models import DetectorModel


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--betas", default="30,45,60,75,90", help="cap half-angles, degrees")
    ap.add_argument("--steps", type=int, default=37)
    ap.add_argument("--n-pairs", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--outdir", default="results/curves")
    args = ap.parse_args()

    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    phis = [math.pi * i / (args.steps - 1) for i in range(args.steps)]
    for k, deg in enumerate(float(x) for x in args.betas.split(",")):
        beta = math.radians(deg)
        det = DetectorModel.equal_caps(beta)
        scan = run_scan(ExperimentConfig(args.n_pairs, args.seed + k, det, det), phis)
        path = out / f"beta{deg:g}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["phi_deg", "p_ss", "p_ns", "total_rate", "e_normalised", "mc_ss", "mc_ns", "mc_total"])
            for e in scan:
                t, n = e.table, e.table.emitted
                corr = A.correlation(e.phi, beta)
                w.writerow([f"{math.degrees(e.phi):.4f}", A.p_like(e.phi, beta), A.p_unlike(e.phi, beta),
                            A.total_rate(e.phi, beta), "" if corr is None else corr,
                            t.ss / n, t.ns / n, t.coincidences / n])
        s = A.chsh_analytic(beta, *A.BELL_ANGLES)
        print(f"beta={deg:g}: S={'undefined' if s is None else f'{s:.4f}'} -> {path}")


if __name__ == "__main__":
    main()
