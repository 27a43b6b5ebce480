"""Autoencoder reconstruction loss against training-set size."""
import argparse
import json

from ltune import experiments, latent
from ltune.benchtarget import PROFILE_NAMES, make_profile


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--profile", choices=PROFILE_NAMES, default="balanced")
    parser.add_argument("--sizes", type=int, nargs="+", default=[500, 1000, 2000, 3000, 4000, 5000, 6000])
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--latent-dim", type=int, default=16)
    parser.add_argument("--epochs", type=int, default=500)
    parser.add_argument("--out", default="data_count.json")
    args = parser.parse_args()

    cfg = latent.AeConfig(latent_dim=args.latent_dim, epochs=args.epochs)
    rows = []
    for seed in range(args.seeds):
        for row in experiments.data_count_sweep(make_profile(args.profile), args.sizes, seed, cfg):
            row = {"seed": seed, **row}
            rows.append(row)
            print(seed, row["size"], f"train {row['train_loss']:.4f}", f"holdout {row['holdout_loss']:.4f}",
                  flush=True)
    with open(args.out, "w") as fh:
        json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
