"""Full pipeline versus defaults and an LHS random search on every synthetic profile."""
import argparse
import json

import numpy as np

from ltune import experiments
from ltune.benchtarget import PROFILE_NAMES, make_profile
from ltune.tuner import TuneOptions


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--profiles", nargs="+", choices=PROFILE_NAMES, default=list(PROFILE_NAMES))
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--iterations", type=int, default=300)
    parser.add_argument("--probes", type=int, default=300)
    parser.add_argument("--out", default="end_to_end.json")
    args = parser.parse_args()

    rows = []
    for name in args.profiles:
        profile = make_profile(name)
        for seed in range(args.seeds):
            result, measured = experiments.run_pipeline(profile, seed, TuneOptions(iterations=args.iterations))
            probes = experiments.random_search(profile, args.probes, seed)
            row = {"profile": name, "seed": seed, "measured": measured, "predicted": result.best_score,
                   "random_median": float(np.median(probes)), "random_best": float(probes.max()),
                   "wall_time": result.wall_time}
            rows.append(row)
            print(json.dumps(row), flush=True)
    with open(args.out, "w") as fh:
        json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
