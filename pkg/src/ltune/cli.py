"""``ltune`` command line: simulate, augment, train, tune, baseline, eval,
ablate, and replay of a previous run from its manifest.

Exit codes: 0 success, 1 usage error, 2 runtime failure."""
from __future__ import annotations

import argparse
import csv
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, baseline, benchtarget, experiments, latent, predictor, tuner
from .domain import (
    MYSQL_SCHEMA,
    ROCKSDB_SCHEMA,
    NormalizationSpec,
    dataset_inputs,
    load_dataset,
    load_parameter_space,
    save_dataset,
    save_parameter_space,
)

PATH_OPTIONS = ("data", "space", "result", "out")
FILE_OUTPUT_COMMANDS = ("simulate", "augment", "eval")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _weights(text: str) -> tuner.ScoreWeights:
    try:
        return tuner.ScoreWeights.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("sizes must be positive")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ltune", description="Latent-space Bayesian optimization for database knob tuning.")
    parser.add_argument("--version", action="version", version=f"ltune {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("simulate", help="generate a measured dataset from a synthetic workload")
    p.add_argument("--profile", choices=benchtarget.PROFILE_NAMES, required=True)
    p.add_argument("--samples", type=_positive_int, default=1000)
    p.add_argument("--schema", choices=("rocksdb", "mysql"), default="rocksdb")
    p.add_argument("--noise", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="dataset CSV; the space file is written beside it")

    p = sub.add_parser("augment", help="extend a dataset with predictor-labelled LHS samples")
    p.add_argument("--data", required=True)
    p.add_argument("--space", required=True)
    size = p.add_mutually_exclusive_group()
    size.add_argument("--augment-to", type=_positive_int, help="target row count (default 5000)")
    size.add_argument("--samples", type=_positive_int, help="number of rows to add")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="augmented dataset CSV")

    p = sub.add_parser("train", help="train the autoencoder and export latents and the loss trace")
    p.add_argument("--data", required=True)
    p.add_argument("--space", required=True)
    p.add_argument("--latent-dim", type=_positive_int)
    p.add_argument("--epochs", type=_positive_int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("tune", help="run the full tuning pipeline")
    _tune_arguments(p)
    p.add_argument("--augment-to", type=_positive_int, default=5000)
    p.add_argument("--latent-dim", type=_positive_int)
    p.add_argument("--no-augment", action="store_true")
    p.add_argument("--no-latent", action="store_true")

    p = sub.add_parser("baseline", help="top-k LASSO subspace tuning")
    _tune_arguments(p)
    p.add_argument("--top-k", type=_positive_int, default=5)
    p.add_argument("--lambda-fraction", type=float, default=0.01)

    p = sub.add_parser("eval", help="measure a tuned configuration against the defaults")
    p.add_argument("--result", required=True, help="result.json from tune or baseline")
    p.add_argument("--space", required=True)
    target = p.add_mutually_exclusive_group(required=True)
    target.add_argument("--profile", choices=benchtarget.PROFILE_NAMES, help="synthetic workload")
    target.add_argument("--bench-command", help="benchmark command containing {config}")
    p.add_argument("--schema", choices=("rocksdb", "mysql"), default="rocksdb")
    p.add_argument("--timeout", type=float, default=600.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="evaluation JSON")

    p = sub.add_parser("ablate", help="augmentation x latent ablation and the data-count sweep")
    p.add_argument("--profile", choices=benchtarget.PROFILE_NAMES, required=True)
    p.add_argument("--samples", type=_positive_int, default=1000)
    p.add_argument("--repeats", type=_positive_int, default=5, help="seeds seed .. seed+repeats-1")
    p.add_argument("--iterations", type=_positive_int, default=300)
    p.add_argument("--augment-to", type=_positive_int, default=5000)
    p.add_argument("--ae-epochs", type=_positive_int, default=500)
    p.add_argument("--sizes", type=_int_list, default=[500, 1000, 2000, 3000, 4000, 5000])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", help="write outputs here instead of the recorded location")
    return parser


def _tune_arguments(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True)
    p.add_argument("--space", required=True)
    p.add_argument("--profile-score", choices=("mysql", "rocksdb"), default="rocksdb")
    p.add_argument("--weights", type=_weights, default=tuner.ScoreWeights())
    p.add_argument("--iterations", type=_positive_int, default=300)
    p.add_argument("--xi", type=float, default=0.01)
    p.add_argument("--candidates", type=_positive_int, default=2048)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")


# --- manifests --------------------------------------------------------------------------


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _option_value(value):
    if isinstance(value, tuner.ScoreWeights):
        return ",".join(repr(float(v)) for v in value.as_array())
    if isinstance(value, list):
        return ",".join(str(v) for v in value)
    return value


def _canonical_argv(parser: argparse.ArgumentParser, args: argparse.Namespace) -> list[str]:
    """Every option spelled out explicitly, so a replay does not depend on defaults."""
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices[args.command]
    argv = [args.command]
    for action in sub._actions:
        if not action.option_strings or action.dest == "help":
            continue
        value = getattr(args, action.dest, None)
        flag = action.option_strings[-1]
        if isinstance(action, argparse._StoreTrueAction):
            if value:
                argv.append(flag)
        elif value is not None:
            argv += [flag, str(_option_value(value))]
    return argv


def _manifest_path(command: str, out: Path) -> Path:
    if command in FILE_OUTPUT_COMMANDS:
        return out.with_name(out.name + ".manifest.json")
    return out / "manifest.json"


def _write_manifest(parser, args, started: str, outputs: list[Path], summary: dict) -> Path:
    out = Path(args.out)
    manifest = {
        "subcommand": args.command,
        "argv": _canonical_argv(parser, args),
        "options": {k: _option_value(v) for k, v in sorted(vars(args).items()) if k != "command"},
        "tool_version": __version__,
        "started": started,
        "finished": _now(),
        "outputs": [str(p) for p in outputs],
        "summary": summary,
    }
    path = _manifest_path(args.command, out)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


# --- helpers -------------------------------------------------------------------------------


def _require_file(path: str, flag: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{flag}: no such file: {path}")
    return p


def _schema_from_header(path: Path):
    with open(path, newline="") as fh:
        header = next(csv.reader(fh), [])
    names = tuple(h.split(":", 1)[1] for h in header if h.startswith("metric:"))
    for schema in (ROCKSDB_SCHEMA, MYSQL_SCHEMA):
        if names == schema.names:
            return schema
    raise ValueError(f"{path}: metric columns {list(names)} match no known schema")


def _load(args, schema=None):
    data = _require_file(args.data, "--data")
    space = load_parameter_space(_require_file(args.space, "--space"))
    return load_dataset(space, schema or _schema_from_header(data), data)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _out_file(args) -> Path:
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    return out


def _write_rows(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


# --- subcommands -----------------------------------------------------------------------------


def cmd_simulate(args):
    profile = benchtarget.make_profile(args.profile, args.schema, args.noise)
    ds = benchtarget.generate_dataset(profile, args.samples, args.seed)
    out = _out_file(args)
    space_path = out.with_suffix(".space")
    save_dataset(ds, out)
    save_parameter_space(ds.space, space_path)
    return [out, space_path], {"rows": ds.N, "d": ds.space.d, "metrics": list(ds.schema.names)}


def cmd_augment(args):
    ds = _load(args)
    if args.samples is not None:
        extra = args.samples
    else:
        target = args.augment_to if args.augment_to is not None else 5000
        if target < len(ds):
            raise UsageError(f"--augment-to {target} is smaller than the dataset ({len(ds)} rows)")
        extra = target - len(ds)
    fit_ss, lhs_ss = np.random.SeedSequence(args.seed).spawn(2)
    cfg = predictor.PredictorConfig(seed=tuner._int_seed(fit_ss))
    aug, model = predictor.augment_with_model(ds, cfg, extra, lhs_ss)
    out = _out_file(args)
    save_dataset(aug, out)
    report = model.training_report if model is not None else {}
    return [out], {"measured_rows": aug.N, "augmented_rows": aug.M, "predictor": report}


def cmd_train(args):
    ds = _load(args)
    norm = NormalizationSpec.from_dataset(ds)
    inputs = dataset_inputs(ds, norm)
    l = args.latent_dim or (32 if ds.schema == MYSQL_SCHEMA else 16)
    model = latent.train_autoencoder(inputs, latent.AeConfig(latent_dim=l, epochs=args.epochs, seed=args.seed))
    out = _out_dir(args)
    latent.save_model(model, out / "autoencoder.npz")
    (out / "loss_trace.txt").write_text(
        "".join(f"{i} {loss!r}\n" for i, loss in enumerate(model.epoch_losses, start=1)))
    Z = latent.encode(model, inputs)
    _write_rows(out / "latents.csv", [f"z{i}" for i in range(l)] + ["provenance"],
                ([repr(float(v)) for v in z] + [prov] for z, prov in zip(Z, ds.provenance)))
    outputs = [out / "autoencoder.npz", out / "loss_trace.txt", out / "latents.csv"]
    return outputs, {"initial_loss": model.initial_loss, "final_loss": model.final_loss, "latent_dim": l}


def _profile(args) -> tuner.ScoreProfile:
    return tuner.ScoreProfile(args.profile_score, args.weights)


def _save_result(result, ds, out: Path):
    tuner.write_result(result, ds.space, ds.schema, out / "result.json")
    tuner.write_trace(result, out / "trace.csv")
    return [out / "result.json", out / "trace.csv"]


def cmd_tune(args):
    profile = _profile(args)
    ds = _load(args, profile.schema)
    if not args.no_augment and args.augment_to < len(ds):
        raise UsageError(f"--augment-to {args.augment_to} is smaller than the dataset ({len(ds)} rows)")
    opts = tuner.TuneOptions(iterations=args.iterations, augment_to=args.augment_to, latent_dim=args.latent_dim,
                             xi=args.xi, candidates=args.candidates, seed=args.seed,
                             use_augmentation=not args.no_augment, use_latent=not args.no_latent)
    result = tuner.tune(ds, opts, profile)
    outputs = _save_result(result, ds, _out_dir(args))
    return outputs, {"score": result.best_score, "wall_time": result.wall_time}


def cmd_baseline(args):
    profile = _profile(args)
    ds = _load(args, profile.schema)
    if args.top_k > ds.space.d:
        raise UsageError(f"--top-k {args.top_k} exceeds the number of parameters ({ds.space.d})")
    fit = baseline.rank_parameters(ds, profile, args.lambda_fraction)
    indices = baseline.top_k(fit, args.top_k)
    opts = tuner.TuneOptions(iterations=args.iterations, xi=args.xi, candidates=args.candidates, seed=args.seed)
    result = baseline.subspace_tune(ds, indices, args.iterations, args.seed, profile, opts)
    result.extras["lasso_coefficients"] = {n: float(c) for n, c in zip(ds.space.names, fit.coefficients)}
    outputs = _save_result(result, ds, _out_dir(args))
    return outputs, {"score": result.best_score, "subspace": result.extras["subspace"],
                     "wall_time": result.wall_time}


def cmd_eval(args):
    space = load_parameter_space(_require_file(args.space, "--space"))
    doc = json.loads(_require_file(args.result, "--result").read_text())
    conf = np.array(doc["config_raw"], dtype=float)
    if len(conf) != space.d:
        raise ValueError(f"result has {len(conf)} parameters, space has {space.d}")
    space.validate(conf)
    if args.profile:
        profile = benchtarget.make_profile(args.profile, args.schema)
        if profile.space.names != space.names:
            raise ValueError(f"--space does not match the parameter space of profile {args.profile}")
        conf_ss, default_ss = np.random.SeedSequence(args.seed).spawn(2)
        tuned = benchtarget.simulate(profile, conf, conf_ss)
        default = benchtarget.default_metrics(profile, default_ss)
        schema = profile.schema
    else:
        schema = MYSQL_SCHEMA if args.schema == "mysql" else ROCKSDB_SCHEMA
        cfg = benchtarget.ExternalAdapterConfig(args.bench_command, schema, timeout=args.timeout)
        default = benchtarget.run_external(cfg, space.default_config(), space)
        tuned = benchtarget.run_external(cfg, conf, space)
    score = tuner.score_report(tuned, default, schema)
    report = {"score": score, "tuned_metrics": dict(zip(schema.names, map(float, tuned))),
              "default_metrics": dict(zip(schema.names, map(float, default)))}
    out = _out_file(args)
    out.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return [out], {"score": score}


def cmd_ablate(args):
    profile = benchtarget.make_profile(args.profile)
    out = _out_dir(args)
    seeds = list(range(args.seed, args.seed + args.repeats))
    opts = tuner.TuneOptions(iterations=args.iterations, augment_to=args.augment_to, ae_epochs=args.ae_epochs)
    records = experiments.ablation(profile, seeds, opts, samples=args.samples)
    _write_rows(out / "ablation.csv", ["seed", "combination", "measured_score", "predicted_score"],
                ([r.seed, r.label, repr(r.measured), repr(r.predicted)] for r in records))
    sweep_rows = []
    cfg = latent.AeConfig(latent_dim=16, epochs=args.ae_epochs)
    for seed in seeds:
        for row in experiments.data_count_sweep(profile, args.sizes, seed, cfg):
            sweep_rows.append([seed, row["size"], repr(row["train_loss"]), repr(row["holdout_loss"])])
    _write_rows(out / "data_count.csv", ["seed", "rows", "train_loss", "holdout_loss"], sweep_rows)
    medians = experiments.median_by_label(records)
    (out / "summary.json").write_text(json.dumps({"median_measured_score": medians}, indent=2, sort_keys=True) + "\n")
    return [out / "ablation.csv", out / "data_count.csv", out / "summary.json"], {"median_measured_score": medians}


COMMANDS = {
    "simulate": cmd_simulate,
    "augment": cmd_augment,
    "train": cmd_train,
    "tune": cmd_tune,
    "baseline": cmd_baseline,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
}


def _replay_argv(args) -> list[str]:
    manifest = json.loads(_require_file(args.manifest, "manifest").read_text())
    argv = list(manifest["argv"])
    if args.out:
        if "--out" in argv:
            argv[argv.index("--out") + 1] = args.out
        else:
            argv += ["--out", args.out]
    return argv


def _absolute_paths(args) -> None:
    for name in PATH_OPTIONS:
        value = getattr(args, name, None)
        if value is not None:
            setattr(args, name, str(Path(value).resolve()))


def run(argv=None) -> int:
    parser = build_parser()
    args = None
    try:
        args = parser.parse_args(argv)
        if args.command == "replay":
            args = parser.parse_args(_replay_argv(args))
        _absolute_paths(args)
        started = _now()
        outputs, summary = COMMANDS[args.command](args)
        _write_manifest(parser, args, started, outputs, summary)
    except UsageError as exc:
        print(str(exc).rstrip(), file=sys.stderr)
        return 1
    except (ValueError, OSError, RuntimeError, KeyError, np.linalg.LinAlgError) as exc:
        print(f"ltune {getattr(args, 'command', '')}: error: {exc}", file=sys.stderr)
        tail = getattr(exc, "output_tail", "")
        if tail:
            print(tail, file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
