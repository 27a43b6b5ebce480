"""Core data types, unit-interval normalization and dataset persistence.

Every vector in the package follows one layout: the ``d`` configuration
dimensions in parameter-space order, followed by the ``e`` metric dimensions
in schema order.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

KINDS = ("continuous", "integer", "categorical")
MEASURED = "measured"
AUGMENTED = "augmented"


class SpaceError(ValueError):
    """Invalid parameter-space definition."""


class DatasetError(ValueError):
    """Malformed or mismatching dataset file."""


@dataclass(frozen=True)
class ParameterSpec:
    name: str
    kind: str
    lower: float = 0.0
    upper: float = 1.0
    categories: tuple[str, ...] = ()
    default: float = 0.0  # category index for categorical kinds

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpaceError(f"{self.name}: unknown kind {self.kind!r}")
        if self.kind == "categorical":
            if not self.categories:
                raise SpaceError(f"{self.name}: categorical parameter needs categories")
            if len(set(self.categories)) != len(self.categories):
                raise SpaceError(f"{self.name}: duplicate categories")
            object.__setattr__(self, "lower", 0.0)
            object.__setattr__(self, "upper", float(len(self.categories) - 1))
            if self.default not in range(len(self.categories)):
                raise SpaceError(f"{self.name}: default index {self.default} out of range")
            object.__setattr__(self, "default", float(self.default))
            return
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise SpaceError(f"{self.name}: bounds must be finite")
        if not self.lower < self.upper:
            raise SpaceError(f"{self.name}: inverted bounds [{self.lower}, {self.upper}]")
        if not self.lower <= self.default <= self.upper:
            raise SpaceError(f"{self.name}: default {self.default} outside [{self.lower}, {self.upper}]")
        if self.kind == "integer" and (self.default != round(self.default)):
            raise SpaceError(f"{self.name}: integer default {self.default} is not whole")

    @property
    def span(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float) -> bool:
        if not math.isfinite(value) or not self.lower <= value <= self.upper:
            return False
        if self.kind != "continuous":
            return value == math.floor(value)
        return True

    def format_value(self, value: float) -> str:
        if self.kind == "categorical":
            return self.categories[int(value)]
        if self.kind == "integer":
            return str(int(value))
        return repr(float(value))


@dataclass(frozen=True)
class ParameterSpace:
    params: tuple[ParameterSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        if not self.params:
            raise SpaceError("parameter space is empty")
        seen = set()
        for p in self.params:
            if p.name in seen:
                raise SpaceError(f"duplicate parameter name {p.name!r}")
            seen.add(p.name)

    @property
    def d(self) -> int:
        return len(self.params)

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.params]

    def index(self, name: str) -> int:
        return self.names.index(name)

    def default_config(self) -> np.ndarray:
        return np.array([p.default for p in self.params], dtype=float)

    def validate(self, conf: np.ndarray) -> None:
        conf = np.asarray(conf, dtype=float)
        if conf.shape != (self.d,):
            raise ValueError(f"configuration has shape {conf.shape}, expected ({self.d},)")
        for p, v in zip(self.params, conf):
            if not p.contains(float(v)):
                raise ValueError(f"{p.name}: value {v} invalid for {p.kind} parameter")

    def is_valid(self, conf: np.ndarray) -> bool:
        try:
            self.validate(conf)
        except ValueError:
            return False
        return True


@dataclass(frozen=True)
class MetricSchema:
    names: tuple[str, ...]
    directions: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "directions", tuple(self.directions))
        if not self.names:
            raise ValueError("metric schema is empty")
        if len(set(self.names)) != len(self.names):
            raise ValueError("duplicate metric names")
        if len(self.directions) != len(self.names):
            raise ValueError("one direction per metric is required")
        for d in self.directions:
            if d not in ("maximize", "minimize"):
                raise ValueError(f"unknown direction {d!r}")

    @property
    def e(self) -> int:
        return len(self.names)


MYSQL_SCHEMA = MetricSchema(("throughput", "latency"), ("maximize", "minimize"))
ROCKSDB_SCHEMA = MetricSchema(
    ("TIME", "RATE", "WAF", "SAF"), ("minimize", "maximize", "minimize", "minimize")
)


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Paired configuration/metric rows with a per-row provenance flag."""

    space: ParameterSpace
    schema: MetricSchema
    configs: np.ndarray
    metrics: np.ndarray
    provenance: tuple[str, ...] = field(default=())

    def __post_init__(self):
        configs = _freeze(np.asarray(self.configs, dtype=float).reshape(-1, self.space.d))
        metrics = _freeze(np.asarray(self.metrics, dtype=float).reshape(-1, self.schema.e))
        prov = tuple(self.provenance) if self.provenance else (MEASURED,) * len(configs)
        if len(configs) != len(metrics) or len(prov) != len(configs):
            raise ValueError("configs, metrics and provenance lengths differ")
        for tag in prov:
            if tag not in (MEASURED, AUGMENTED):
                raise ValueError(f"unknown provenance {tag!r}")
        if not np.all(np.isfinite(metrics)):
            raise ValueError("metrics must be finite")
        object.__setattr__(self, "configs", configs)
        object.__setattr__(self, "metrics", metrics)
        object.__setattr__(self, "provenance", prov)

    def __len__(self) -> int:
        return len(self.configs)

    @property
    def N(self) -> int:
        return sum(1 for p in self.provenance if p == MEASURED)

    @property
    def M(self) -> int:
        return sum(1 for p in self.provenance if p == AUGMENTED)

    def measured(self) -> "Dataset":
        mask = np.array([p == MEASURED for p in self.provenance], dtype=bool)
        return self.subset(mask)

    def subset(self, mask_or_index) -> "Dataset":
        idx = np.arange(len(self))[mask_or_index]
        return Dataset(
            self.space,
            self.schema,
            self.configs[idx],
            self.metrics[idx],
            tuple(self.provenance[i] for i in idx),
        )

    def extend(self, configs: np.ndarray, metrics: np.ndarray, provenance: str) -> "Dataset":
        configs = np.asarray(configs, dtype=float).reshape(-1, self.space.d)
        metrics = np.asarray(metrics, dtype=float).reshape(-1, self.schema.e)
        return Dataset(
            self.space,
            self.schema,
            np.vstack([self.configs, configs]),
            np.vstack([self.metrics, metrics]),
            self.provenance + (provenance,) * len(configs),
        )

    def column_labels(self) -> list[str]:
        return [f"param:{n}" for n in self.space.names] + [f"metric:{n}" for n in self.schema.names]


@dataclass(frozen=True)
class NormalizationSpec:
    """Per-feature (min, max) for config dims (from bounds) and metric dims (from data)."""

    config_min: np.ndarray
    config_max: np.ndarray
    metric_min: np.ndarray
    metric_max: np.ndarray
    categories: tuple[tuple[str, ...], ...]

    @classmethod
    def build(cls, space: ParameterSpace, metrics: np.ndarray | None = None,
              e: int | None = None) -> "NormalizationSpec":
        cmin = np.array([p.lower for p in space.params])
        cmax = np.array([p.upper for p in space.params])
        # single-category parameters always encode to 0
        cmax = np.where(cmax > cmin, cmax, cmin + 1.0)
        if metrics is None:
            mmin, mmax = np.zeros(e or 0), np.ones(e or 0)
        else:
            metrics = np.asarray(metrics, dtype=float)
            mmin, mmax = metrics.min(axis=0), metrics.max(axis=0)
            pad = np.maximum(np.abs(mmin), 1.0)
            mmax = np.where(mmax > mmin, mmax, mmin + pad)
        cats = tuple(p.categories for p in space.params)
        return cls(_freeze(cmin), _freeze(cmax), _freeze(mmin), _freeze(mmax), cats)

    @classmethod
    def from_dataset(cls, ds: Dataset) -> "NormalizationSpec":
        return cls.build(ds.space, ds.metrics)

    def normalize_metrics(self, m: np.ndarray) -> np.ndarray:
        return (np.asarray(m, dtype=float) - self.metric_min) / (self.metric_max - self.metric_min)

    def denormalize_metrics(self, u: np.ndarray) -> np.ndarray:
        return self.metric_min + np.asarray(u, dtype=float) * (self.metric_max - self.metric_min)


def normalize_config(space: ParameterSpace, spec: NormalizationSpec, conf: np.ndarray) -> np.ndarray:
    """Map a raw configuration (or a batch of them) onto the unit cube."""
    conf = np.asarray(conf, dtype=float)
    batch = conf.reshape(-1, space.d)
    lo = np.array([p.lower for p in space.params])
    hi = np.array([p.upper for p in space.params])
    bad = (batch < lo) | (batch > hi) | ~np.isfinite(batch)
    if bad.any():
        row, col = map(int, np.argwhere(bad)[0])
        raise ValueError(f"{space.params[col].name}: value {batch[row, col]} out of bounds")
    u = (batch - spec.config_min) / (spec.config_max - spec.config_min)
    return u.reshape(conf.shape)


def denormalize_config(space: ParameterSpace, spec: NormalizationSpec, u: np.ndarray) -> np.ndarray:
    """Inverse of :func:`normalize_config`; clamps to [0, 1], rounds integers half-up
    and snaps categorical indices. Never raises on finite input."""
    u = np.asarray(u, dtype=float)
    batch = np.clip(u.reshape(-1, space.d), 0.0, 1.0)
    raw = spec.config_min + batch * (spec.config_max - spec.config_min)
    discrete = np.array([p.kind != "continuous" for p in space.params])
    if discrete.any():
        raw[:, discrete] = np.floor(raw[:, discrete] + 0.5)
    lo = np.array([p.lower for p in space.params])
    hi = np.array([p.upper for p in space.params])
    raw = np.clip(raw, lo, hi)
    return raw.reshape(u.shape)


def concat_input(conf_u: np.ndarray, metric_u: np.ndarray) -> np.ndarray:
    """Autoencoder input: normalized config dims followed by normalized metric dims."""
    conf_u = np.asarray(conf_u, dtype=float)
    metric_u = np.asarray(metric_u, dtype=float)
    x = np.concatenate([conf_u, metric_u], axis=-1)
    if np.any(x < 0.0) or np.any(x > 1.0) or not np.all(np.isfinite(x)):
        raise ValueError("autoencoder input components must lie in [0, 1]")
    return x


def dataset_inputs(ds: Dataset, spec: NormalizationSpec) -> np.ndarray:
    """Stacked autoencoder inputs for every row of ``ds``."""
    cu = normalize_config(ds.space, spec, ds.configs)
    mu = np.clip(spec.normalize_metrics(ds.metrics), 0.0, 1.0)
    return concat_input(cu, mu)


# --- parameter-space documents -------------------------------------------------

def parse_parameter_space(text: str, source: str = "<string>") -> ParameterSpace:
    """Parse the line-oriented parameter-space format.

    One record per line::

        name continuous|integer <lower> <upper> <default>
        name categorical <cat1,cat2,...> <default-category>

    Blank lines and ``#`` comments are ignored.
    """
    params: list[ParameterSpec] = []
    seen: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        name = fields[0]
        where = f"{source}:{lineno}: parameter {name!r}"
        if name in seen:
            raise SpaceError(f"{where}: duplicate name (first defined on line {seen[name]})")
        if len(fields) < 2:
            raise SpaceError(f"{where}: missing kind")
        kind = fields[1]
        try:
            if kind == "categorical":
                if len(fields) != 4:
                    raise SpaceError("expected: name categorical a,b,c default")
                cats = tuple(c for c in fields[2].split(",") if c)
                if fields[3] not in cats:
                    raise SpaceError(f"default {fields[3]!r} is not a category")
                spec = ParameterSpec(name, kind, categories=cats, default=cats.index(fields[3]))
            elif kind in ("continuous", "integer"):
                if len(fields) != 5:
                    raise SpaceError(f"expected: name {kind} lower upper default")
                lo, hi, default = (float(f) for f in fields[2:5])
                spec = ParameterSpec(name, kind, lo, hi, default=default)
            else:
                raise SpaceError(f"unknown kind {kind!r}")
        except (SpaceError, ValueError) as exc:
            raise SpaceError(f"{where}: {exc}") from None
        seen[name] = lineno
        params.append(spec)
    if not params:
        raise SpaceError(f"{source}: no parameters defined")
    return ParameterSpace(tuple(params))


def load_parameter_space(path: str | Path) -> ParameterSpace:
    path = Path(path)
    return parse_parameter_space(path.read_text(), source=str(path))


def format_parameter_space(space: ParameterSpace) -> str:
    lines = ["# name kind lower upper default | name categorical choices default"]
    for p in space.params:
        if p.kind == "categorical":
            lines.append(f"{p.name} categorical {','.join(p.categories)} {p.categories[int(p.default)]}")
        else:
            lines.append(f"{p.name} {p.kind} {p.format_value(p.lower)} {p.format_value(p.upper)} "
                         f"{p.format_value(p.default)}")
    return "\n".join(lines) + "\n"


def save_parameter_space(space: ParameterSpace, path: str | Path) -> None:
    Path(path).write_text(format_parameter_space(space))


# --- dataset files ---------------------------------------------------------------

def save_dataset(ds: Dataset, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ds.column_labels() + ["provenance"])
        for conf, m, prov in zip(ds.configs, ds.metrics, ds.provenance):
            writer.writerow([repr(float(v)) for v in conf] + [repr(float(v)) for v in m] + [prov])


def load_dataset(space: ParameterSpace, schema: MetricSchema, path: str | Path) -> Dataset:
    expected = [f"param:{n}" for n in space.names] + [f"metric:{n}" for n in schema.names] + ["provenance"]
    width = len(expected)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != expected:
            raise DatasetError(f"{path}: header does not match the parameter space and metric schema")
        rows, prov = [], []
        for rowno, row in enumerate(reader, start=1):
            if len(row) != width:
                raise DatasetError(f"{path}: row {rowno} has {len(row)} cells, expected {width}")
            try:
                rows.append([float(c) for c in row[:-1]])
            except ValueError:
                raise DatasetError(f"{path}: row {rowno} has a non-numeric cell") from None
            prov.append(row[-1])
    values = np.array(rows, dtype=float).reshape(-1, width - 1)
    d = space.d
    try:
        ds = Dataset(space, schema, values[:, :d], values[:, d:], tuple(prov))
    except ValueError as exc:
        raise DatasetError(f"{path}: {exc}") from None
    for rowno, conf in enumerate(ds.configs, start=1):
        try:
            space.validate(conf)
        except ValueError as exc:
            raise DatasetError(f"{path}: row {rowno}: {exc}") from None
    return ds
