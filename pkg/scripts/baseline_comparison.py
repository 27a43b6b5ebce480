"""Full pipeline versus LASSO top-k subspace tuning on paired seeds."""
import argparse
import json
from dataclasses import asdict

import numpy as np

from ltune import experiments
from ltune.benchtarget import INTERACTION_HEAVY, PROFILE_NAMES, make_profile


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--profile", choices=PROFILE_NAMES, default=INTERACTION_HEAVY)
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--top-k", type=int, nargs="+", default=[5])
    parser.add_argument("--out", default="baseline_comparison.json")
    args = parser.parse_args()

    profile = make_profile(args.profile)
    records = []
    for k in args.top_k:
        records += experiments.pipeline_vs_topk(profile, range(args.seeds), k=k)
    for label in sorted({r.label for r in records}):
        scores = [r.measured for r in records if r.label == label]
        print(f"{label}: median {np.median(scores):.3f} over {len(scores)} runs")
    with open(args.out, "w") as fh:
        json.dump([asdict(r) for r in records], fh, indent=2)


if __name__ == "__main__":
    main()
