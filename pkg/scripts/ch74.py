"""Single-channel CH74 statistic (Freedman form) across cap sizes."""

import argparse
import math

from loophole_lab import stats
from loophole_lab.engine import ExperimentConfig
from loophole_lab.models import DetectorModel


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--betas", default="30,45,60,75,90")
    ap.add_argument("--n-pairs", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=74)
    args = ap.parse_args()

    qm = (math.sqrt(2) - 1) / 4
    print(f"quantum reference delta = {qm:.4f}; local models give delta <= 0")
    for deg in (float(x) for x in args.betas.split(",")):
        det = DetectorModel.equal_caps(math.radians(deg))
        delta = stats.ch74_experiment(ExperimentConfig(args.n_pairs, args.seed, det, det))
        print(f"beta={deg:g}: delta={delta:+.4f}")


if __name__ == "__main__":
    main()
