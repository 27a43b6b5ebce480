"""Augmentation x latent-space ablation: median measured score per combination,
repeated over disjoint blocks of seeds."""
import argparse
import json
from dataclasses import asdict

from ltune import experiments
from ltune.benchtarget import PROFILE_NAMES, make_profile
from ltune.tuner import TuneOptions


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--profile", choices=PROFILE_NAMES, default="balanced")
    parser.add_argument("--replications", type=int, default=5)
    parser.add_argument("--seeds-per-replication", type=int, default=5)
    parser.add_argument("--iterations", type=int, default=300)
    parser.add_argument("--ae-epochs", type=int, default=500)
    parser.add_argument("--out", default="ablation.json")
    args = parser.parse_args()

    profile = make_profile(args.profile)
    opts = TuneOptions(iterations=args.iterations, ae_epochs=args.ae_epochs)
    k = args.seeds_per_replication
    report = []
    for rep in range(args.replications):
        records = experiments.ablation(profile, range(rep * k, rep * k + k), opts)
        medians = experiments.median_by_label(records)
        report.append({"replication": rep, "medians": medians, "records": [asdict(r) for r in records]})
        print(rep, json.dumps(medians), flush=True)
    with open(args.out, "w") as fh:
        json.dump(report, fh, indent=2)


if __name__ == "__main__":
    main()
