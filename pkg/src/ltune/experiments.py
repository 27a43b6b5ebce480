"""Experiment harnesses on the synthetic workloads: measured evaluation, random
search, the augmentation/latent ablation grid, the data-count sweep, and the
full-pipeline versus top-k comparison."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import baseline, latent, predictor
from .benchtarget import WorkloadProfile, default_metrics, generate_dataset, simulate
from .domain import Dataset, NormalizationSpec, dataset_inputs
from .sampling import lhs_configs
from .tuner import ScoreProfile, TuneOptions, TuneResult, score_report, tune

COMBINATIONS = ((True, True), (True, False), (False, True), (False, False))


def combo_label(use_augmentation: bool, use_latent: bool) -> str:
    return ("O" if use_augmentation else "X") + " " + ("O" if use_latent else "X")


def measured_score(profile: WorkloadProfile, conf: np.ndarray, seed=0) -> float:
    """Score of ``conf`` against the default configuration, both run through
    the simulator with independent noise draws."""
    conf_ss, default_ss = np.random.SeedSequence([int(seed), 0x5C0E]).spawn(2)
    return score_report(simulate(profile, conf, conf_ss), default_metrics(profile, default_ss),
                        profile.schema)


def random_search(profile: WorkloadProfile, n: int = 300, seed=0) -> np.ndarray:
    """Measured scores of ``n`` LHS probes over the whole configuration space."""
    lhs_ss, eval_ss = np.random.SeedSequence([int(seed), 0x7A2D]).spawn(2)
    confs = lhs_configs(profile.space, profile.spec, n, lhs_ss)
    seeds = eval_ss.generate_state(n)
    return np.array([measured_score(profile, c, int(s)) for c, s in zip(confs, seeds)])


@dataclass(frozen=True)
class RunRecord:
    profile: str
    seed: int
    label: str
    measured: float
    predicted: float
    wall_time: float


def run_pipeline(profile: WorkloadProfile, seed: int, opts: TuneOptions = TuneOptions(),
                 samples: int = 1000, dataset: Dataset | None = None) -> tuple[TuneResult, float]:
    """Generate ``samples`` measured rows, tune, and measure the tuned config."""
    ds = dataset if dataset is not None else generate_dataset(profile, samples, seed)
    result = tune(ds, replace(opts, seed=seed), ScoreProfile())
    return result, measured_score(profile, result.best_config, seed)


def ablation(profile: WorkloadProfile, seeds, opts: TuneOptions = TuneOptions(),
             samples: int = 1000) -> list[RunRecord]:
    """All four augmentation x latent combinations on the same per-seed datasets."""
    records = []
    for seed in seeds:
        ds = generate_dataset(profile, samples, seed)
        for aug, lat in COMBINATIONS:
            result, score = run_pipeline(profile, seed, replace(opts, use_augmentation=aug, use_latent=lat),
                                         dataset=ds)
            records.append(RunRecord(profile.name, int(seed), combo_label(aug, lat), score,
                                     result.best_score, result.wall_time))
    return records


def median_by_label(records: list[RunRecord]) -> dict[str, float]:
    labels = sorted({r.label for r in records})
    return {lab: float(np.median([r.measured for r in records if r.label == lab])) for lab in labels}


def data_count_sweep(profile: WorkloadProfile, sizes, seed: int = 0, cfg: latent.AeConfig = latent.AeConfig(latent_dim=16),
                     base_rows: int = 1000, holdout_rows: int = 500) -> list[dict]:
    """Autoencoder reconstruction loss as a function of training-set size.

    Sizes up to ``base_rows`` take a prefix of the measured rows; larger sizes
    augment the measured rows with predictor-labelled LHS samples. Every model is
    scored on the same held-out measured rows under one shared normalization."""
    base_ss, hold_ss, aug_ss, lhs_ss = np.random.SeedSequence([int(seed), 0xDA7A]).spawn(4)
    base = generate_dataset(profile, base_rows, base_ss)
    holdout = generate_dataset(profile, holdout_rows, hold_ss)
    spec = NormalizationSpec.build(profile.space, np.vstack([base.metrics, holdout.metrics]))
    hold_inputs = dataset_inputs(holdout, spec)
    sizes = sorted(int(s) for s in sizes)
    pool = base
    if sizes[-1] > base_rows:
        cfg_aug = predictor.PredictorConfig(seed=int(aug_ss.generate_state(1)[0]))
        pool = predictor.augment(base, cfg_aug, sizes[-1] - base_rows, lhs_ss)
    rows = []
    for size in sizes:
        ds = pool.subset(np.arange(size))
        inputs = dataset_inputs(ds, spec)
        model = latent.train_autoencoder(inputs, cfg)
        rows.append({"size": size, "train_loss": model.final_loss,
                     "holdout_loss": latent.reconstruction_loss(model, hold_inputs),
                     "epoch_losses": model.epoch_losses})
    return rows


def pipeline_vs_topk(profile: WorkloadProfile, seeds, k: int = 5, opts: TuneOptions = TuneOptions(),
                     samples: int = 1000, lam_fraction: float = 0.01) -> list[RunRecord]:
    """Paired runs of the full pipeline and top-k subspace tuning on the same data."""
    records = []
    for seed in seeds:
        ds = generate_dataset(profile, samples, seed)
        full, score = run_pipeline(profile, seed, opts, dataset=ds)
        records.append(RunRecord(profile.name, int(seed), "full", score, full.best_score, full.wall_time))
        fit = baseline.rank_parameters(ds, ScoreProfile(), lam_fraction)
        top = baseline.subspace_tune(ds, baseline.top_k(fit, k), opts.iterations, seed, ScoreProfile(), opts)
        records.append(RunRecord(profile.name, int(seed), f"top{k}",
                                 measured_score(profile, top.best_config, seed), top.best_score, top.wall_time))
    return records
