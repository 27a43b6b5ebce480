"""Latent-space optimization: score functions, the BO loop over a
predictor-substituted objective, and decoding of the winning latent vector."""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import latent, predictor, surrogate
from .domain import (
    MYSQL_SCHEMA,
    ROCKSDB_SCHEMA,
    Dataset,
    MetricSchema,
    NormalizationSpec,
    ParameterSpace,
    dataset_inputs,
    denormalize_config,
    normalize_config,
)

# --- scores ------------------------------------------------------------------------


@dataclass(frozen=True)
class ScoreWeights:
    w0: float = 1.0
    w1: float = 1.0
    w2: float = 1.0
    w3: float = 1.0

    def __post_init__(self):
        w = self.as_array()
        if np.any(w < 0) or not np.any(w > 0):
            raise ValueError("weights must be nonnegative and not all zero")

    def as_array(self) -> np.ndarray:
        return np.array([self.w0, self.w1, self.w2, self.w3], dtype=float)

    @classmethod
    def parse(cls, text: str) -> "ScoreWeights":
        parts = [float(v) for v in text.split(",")]
        if len(parts) != 4:
            raise ValueError("expected four comma-separated weights")
        return cls(*parts)


def score_mysql(m) -> float:
    """Throughput / latency (larger is better)."""
    throughput, latency = float(m[0]), float(m[1])
    if latency <= 0:
        raise ValueError(f"latency must be positive, got {latency}")
    return throughput / latency


def score_rocksdb(m, w: ScoreWeights = ScoreWeights()) -> float:
    """-w0*TIME + w1*RATE - w2*WAF - w3*SAF on min-max normalized metrics."""
    time_, rate, waf, saf = (float(v) for v in m)
    return -w.w0 * time_ + w.w1 * rate - w.w2 * waf - w.w3 * saf


def score_report(m, default_m, schema: MetricSchema = ROCKSDB_SCHEMA) -> float:
    """Sum of natural-log improvement ratios against the default configuration's
    metrics: ln(default/x) for minimized metrics, ln(x/default) for maximized ones.

    With the RocksDB schema this is ln(TIME0/TIME) + ln(RATE/RATE0) + ln(WAF0/WAF) + ln(SAF0/SAF)."""
    m = np.asarray(m, dtype=float)
    default_m = np.asarray(default_m, dtype=float)
    if np.any(m <= 0) or np.any(default_m <= 0):
        raise ValueError("score_report needs strictly positive metrics")
    total = 0.0
    for x, x0, direction in zip(m, default_m, schema.directions):
        total += math.log(x / x0) if direction == "maximize" else math.log(x0 / x)
    return total


@dataclass(frozen=True)
class ScoreProfile:
    """Scalar objective over a metric vector.

    ``mysql`` divides throughput by latency in raw units; ``rocksdb`` applies the
    weighted sum to metrics min-max normalized over the training rows."""

    kind: str = "rocksdb"
    weights: ScoreWeights = ScoreWeights()

    def __post_init__(self):
        if self.kind not in ("mysql", "rocksdb"):
            raise ValueError(f"unknown score profile {self.kind!r}")

    @property
    def schema(self) -> MetricSchema:
        return MYSQL_SCHEMA if self.kind == "mysql" else ROCKSDB_SCHEMA

    @property
    def default_latent_dim(self) -> int:
        return 32 if self.kind == "mysql" else 16

    def check_schema(self, schema: MetricSchema) -> None:
        if schema.names != self.schema.names:
            raise ValueError(f"score profile {self.kind} expects metrics {self.schema.names}, "
                             f"dataset has {schema.names}")

    def score_normalized(self, Y_u: np.ndarray, norm: NormalizationSpec) -> np.ndarray:
        """Scores for rows of normalized metrics (clipped to the unit interval)."""
        Y_u = np.clip(np.atleast_2d(Y_u), 0.0, 1.0)
        if self.kind == "mysql":
            raw = norm.denormalize_metrics(Y_u)
            return np.array([score_mysql(r) for r in raw])
        return np.array([score_rocksdb(r, self.weights) for r in Y_u])


# --- options and results ------------------------------------------------------------


@dataclass(frozen=True)
class TuneOptions:
    iterations: int = 300
    augment_to: int = 5000
    latent_dim: int | None = None  # None: 32 for mysql scoring, 16 for rocksdb
    xi: float = 0.01
    candidates: int = 2048
    seed: int = 0
    use_augmentation: bool = True
    use_latent: bool = True
    init_design_max: int = 512
    kernel_refit_every: int = 50
    ae_hidden_widths: tuple[int, ...] = (96, 64)
    ae_epochs: int = 500
    predictor_epochs: int = 300
    predictor_hidden_widths: tuple[int, ...] = (128, 64)

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.candidates < 1 or self.init_design_max < 1:
            raise ValueError("candidates and init_design_max must be positive")
        if self.xi < 0:
            raise ValueError("xi must be nonnegative")
        object.__setattr__(self, "ae_hidden_widths", tuple(self.ae_hidden_widths))
        object.__setattr__(self, "predictor_hidden_widths", tuple(self.predictor_hidden_widths))


@dataclass
class TuneResult:
    best_config: np.ndarray
    best_latent: np.ndarray
    best_score: float  # objective value at best_latent
    predicted_metrics: np.ndarray
    decoded_metrics: np.ndarray | None
    score_trace: list[tuple[int, np.ndarray, float, float, float]]  # (iter, z, ei, objective, incumbent)
    options: TuneOptions
    profile: ScoreProfile
    wall_time: float = 0.0
    extras: dict = field(default_factory=dict)
    models: dict = field(default_factory=dict, repr=False)  # trained models, in-process only

    def to_document(self, space: ParameterSpace, schema: MetricSchema) -> dict:
        """Deterministic summary (wall time excluded)."""
        doc = {
            "config": {p.name: p.format_value(v) for p, v in zip(space.params, self.best_config)},
            "config_raw": [float(v) for v in self.best_config],
            "best_latent": [float(v) for v in self.best_latent],
            "predicted_metrics": dict(zip(schema.names, map(float, self.predicted_metrics))),
            "score": float(self.best_score),
            "seed": self.options.seed,
            "profile": {"kind": self.profile.kind, "weights": asdict(self.profile.weights)},
            "options": asdict(self.options),
        }
        if self.decoded_metrics is not None:
            doc["decoded_metrics"] = dict(zip(schema.names, map(float, self.decoded_metrics)))
        doc.update(self.extras)
        return doc


def write_result(result: TuneResult, space: ParameterSpace, schema: MetricSchema, path) -> None:
    with open(path, "w") as fh:
        json.dump(result.to_document(space, schema), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_trace(result: TuneResult, path) -> None:
    if not result.score_trace:
        dim = len(result.best_latent)
    else:
        dim = len(result.score_trace[0][1])
    header = ["iteration"] + [f"z{i}" for i in range(dim)] + ["ei", "objective", "incumbent"]
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for it, z, ei, obj, inc in result.score_trace:
            cells = [str(it)] + [repr(float(v)) for v in z] + [repr(float(ei)), repr(float(obj)), repr(float(inc))]
            fh.write(",".join(cells) + "\n")


# --- pipeline pieces ----------------------------------------------------------------------


def _int_seed(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def fit_latent_predictor(Z: np.ndarray, Y: np.ndarray, cfg: predictor.PredictorConfig) -> predictor.PredictorModel:
    """A fresh predictor from latent vectors to normalized metrics; never the
    augmentation model."""
    return predictor.fit(Z, Y, cfg)


def decode_best(ae: latent.AutoencoderModel, z_star: np.ndarray, space: ParameterSpace,
                spec: NormalizationSpec) -> tuple[np.ndarray, np.ndarray]:
    """Decode, split at ``d``, denormalize both halves. The metric half is for reporting only."""
    x = latent.decode(ae, np.asarray(z_star, dtype=float))
    conf = denormalize_config(space, spec, x[:space.d])
    metrics = spec.denormalize_metrics(x[space.d:])
    return conf, metrics


@dataclass
class _BOState:
    Z: np.ndarray
    s: np.ndarray  # raw objective values
    mean: float
    std: float

    def standardized(self, values) -> np.ndarray:
        return (np.asarray(values, dtype=float) - self.mean) / self.std


def bayes_opt(objective, Z0: np.ndarray, s0: np.ndarray, *, iterations: int, xi: float,
              candidates: int, seed_seq: np.random.SeedSequence, refit_every: int = 50):
    """GP + EI maximization of ``objective`` over the unit cube, warm-started
    from (Z0, s0). Returns (Z_all, s_all, trace)."""
    Z0 = np.atleast_2d(np.asarray(Z0, dtype=float))
    s0 = np.asarray(s0, dtype=float)
    mean = float(np.mean(s0))
    std = float(np.std(s0)) if len(s0) > 1 and np.std(s0) > 0 else 1.0
    state = _BOState(Z0, s0, mean, std)
    kernel_ss, prop_ss = seed_seq.spawn(2)
    kernel_seed = _int_seed(kernel_ss)

    kernel = surrogate.fit_kernel(Z0, state.standardized(s0), seed=kernel_seed)
    gp = surrogate.gp_fit(Z0, state.standardized(s0), kernel)
    incumbent = float(np.max(s0))
    trace = []
    prop_seeds = prop_ss.spawn(iterations)
    for it in range(1, iterations + 1):
        params = surrogate.AcquisitionParams(f_best=float(state.standardized(incumbent)), xi=xi)
        z_next, ei = surrogate.propose(gp, params, candidates, prop_seeds[it - 1])
        value = float(objective(z_next))
        state.Z = np.vstack([state.Z, z_next])
        state.s = np.append(state.s, value)
        incumbent = max(incumbent, value)
        trace.append((it, z_next, float(ei), value, incumbent))
        if refit_every and it % refit_every == 0 and it < iterations:
            kernel = surrogate.fit_kernel(state.Z, state.standardized(state.s), seed=kernel_seed + it)
            gp = surrogate.gp_fit(state.Z, state.standardized(state.s), kernel)
        else:
            gp = surrogate.gp_append(gp, z_next, float(state.standardized(value)))
    return state.Z, state.s, trace


def _initial_design(n_rows: int, cap: int, seed_seq) -> np.ndarray:
    if n_rows <= cap:
        return np.arange(n_rows)
    rng = np.random.default_rng(seed_seq)
    return np.sort(rng.choice(n_rows, cap, replace=False))


def tune(ds: Dataset, opts: TuneOptions = TuneOptions(), profile: ScoreProfile = ScoreProfile()) -> TuneResult:
    """Augment, learn the latent space, run BO on the predicted score, decode the winner."""
    start = time.perf_counter()
    profile.check_schema(ds.schema)
    if ds.N < 2:
        raise ValueError("tuning needs at least 2 measured rows")
    ss = np.random.SeedSequence(opts.seed)
    aug_ss, lhs_ss, ae_ss, pred_ss, init_ss, bo_ss = ss.spawn(6)
    pred_cfg = predictor.PredictorConfig(hidden_widths=opts.predictor_hidden_widths,
                                         epochs=opts.predictor_epochs)

    aug_model = None
    if opts.use_augmentation and opts.augment_to > len(ds):
        ds, aug_model = predictor.augment_with_model(
            ds, replace(pred_cfg, seed=_int_seed(aug_ss)), opts.augment_to - len(ds), lhs_ss)

    norm = NormalizationSpec.from_dataset(ds)
    X_u = normalize_config(ds.space, norm, ds.configs)
    Y_u = norm.normalize_metrics(ds.metrics)

    ae = None
    if opts.use_latent:
        inputs = dataset_inputs(ds, norm)
        l = opts.latent_dim or profile.default_latent_dim
        ae = latent.train_autoencoder(inputs, latent.AeConfig(
            latent_dim=l, hidden_widths=opts.ae_hidden_widths, epochs=opts.ae_epochs, seed=_int_seed(ae_ss)))
        Z = latent.encode(ae, inputs)
    else:
        Z = X_u

    lso_model = fit_latent_predictor(Z, Y_u, replace(pred_cfg, seed=_int_seed(pred_ss)))

    def objective(z):
        return float(profile.score_normalized(predictor.predict(lso_model, z)[None, :], norm)[0])

    idx = _initial_design(len(ds), opts.init_design_max, init_ss)
    s0 = profile.score_normalized(Y_u[idx], norm)
    Z_all, s_all, trace = bayes_opt(objective, Z[idx], s0, iterations=opts.iterations, xi=opts.xi,
                                    candidates=opts.candidates, seed_seq=bo_ss,
                                    refit_every=opts.kernel_refit_every)

    best = int(np.argmax(s_all))
    z_star = np.array(Z_all[best])
    decoded_metrics = None
    if ae is not None:
        conf, decoded_metrics = decode_best(ae, z_star, ds.space, norm)
    else:
        conf = denormalize_config(ds.space, norm, z_star)
    predicted = norm.denormalize_metrics(np.clip(predictor.predict(lso_model, z_star), 0.0, 1.0))

    result = TuneResult(
        best_config=conf,
        best_latent=z_star,
        best_score=float(s_all[best]),
        predicted_metrics=predicted,
        decoded_metrics=decoded_metrics,
        score_trace=trace,
        options=opts,
        profile=profile,
        extras={"rows_used": len(ds), "augmented_rows": ds.M, "from_initial_design": bool(best < len(idx))},
        models={"augmentation": aug_model, "lso": lso_model, "autoencoder": ae},
    )
    result.wall_time = time.perf_counter() - start
    return result
