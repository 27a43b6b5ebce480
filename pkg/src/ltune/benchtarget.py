"""Benchmark stand-ins: a synthetic workload simulator with planted response
surfaces, and an adapter that runs a user-supplied benchmark command."""
from __future__ import annotations

import os
import re
import shlex
import subprocess
import tempfile
import zlib
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .domain import (
    MEASURED,
    MYSQL_SCHEMA,
    ROCKSDB_SCHEMA,
    Dataset,
    MetricSchema,
    NormalizationSpec,
    ParameterSpace,
    ParameterSpec,
    denormalize_config,
    normalize_config,
    parse_parameter_space,
)
from .sampling import lhs_configs

# (name, kind, lower, upper, default) or (name, "categorical", categories, default_index)
_KNOBS = [
    ("write_buffer_size", "integer", 1, 512, 64),
    ("max_write_buffer_number", "integer", 2, 16, 2),
    ("min_write_buffer_number_to_merge", "integer", 1, 8, 1),
    ("max_background_jobs", "integer", 1, 32, 2),
    ("max_background_compactions", "integer", 1, 32, 1),
    ("max_background_flushes", "integer", 1, 16, 1),
    ("level0_file_num_compaction_trigger", "integer", 2, 32, 4),
    ("level0_slowdown_writes_trigger", "integer", 8, 64, 20),
    ("level0_stop_writes_trigger", "integer", 16, 128, 36),
    ("target_file_size_base", "integer", 8, 512, 64),
    ("target_file_size_multiplier", "integer", 1, 8, 1),
    ("max_bytes_for_level_base", "integer", 64, 2048, 256),
    ("max_bytes_for_level_multiplier", "continuous", 4.0, 16.0, 10.0),
    ("block_size", "integer", 1, 64, 4),
    ("block_cache_size", "integer", 8, 4096, 8),
    ("cache_index_and_filter_blocks", "categorical", ("false", "true"), 0),
    ("pin_l0_filter_and_index_blocks_in_cache", "categorical", ("false", "true"), 0),
    ("bloom_bits_per_key", "integer", 0, 20, 0),
    ("compression_type", "categorical", ("none", "snappy", "lz4", "zstd"), 1),
    ("bottommost_compression", "categorical", ("none", "lz4", "zstd"), 0),
    ("compaction_style", "categorical", ("level", "universal", "fifo"), 0),
    ("compaction_pri", "categorical", ("by_size", "oldest_largest", "oldest_smallest", "min_overlap"), 0),
    ("compaction_readahead_size", "integer", 0, 8192, 0),
    ("max_subcompactions", "integer", 1, 16, 1),
    ("num_levels", "integer", 4, 10, 7),
    ("level_compaction_dynamic_level_bytes", "categorical", ("false", "true"), 0),
    ("soft_pending_compaction_bytes_limit", "integer", 16, 256, 64),
    ("hard_pending_compaction_bytes_limit", "integer", 64, 1024, 256),
    ("bytes_per_sync", "integer", 0, 16384, 0),
    ("wal_bytes_per_sync", "integer", 0, 16384, 0),
    ("delayed_write_rate", "integer", 1, 64, 16),
    ("max_open_files", "integer", 64, 65536, 5000),
    ("table_cache_numshardbits", "integer", 1, 10, 6),
    ("use_direct_reads", "categorical", ("false", "true"), 0),
    ("use_direct_io_for_flush_and_compaction", "categorical", ("false", "true"), 0),
    ("allow_mmap_reads", "categorical", ("false", "true"), 0),
    ("allow_mmap_writes", "categorical", ("false", "true"), 0),
    ("enable_pipelined_write", "categorical", ("false", "true"), 0),
    ("allow_concurrent_memtable_write", "categorical", ("false", "true"), 1),
    ("memtable_prefix_bloom_size_ratio", "continuous", 0.0, 0.25, 0.0),
    ("memtable_whole_key_filtering", "categorical", ("false", "true"), 0),
    ("max_sequential_skip_in_iterations", "integer", 4, 64, 8),
    ("arena_block_size", "integer", 0, 1024, 0),
    ("max_total_wal_size", "integer", 0, 4096, 0),
    ("writable_file_max_buffer_size", "integer", 0, 16, 1),
    ("periodic_compaction_seconds", "integer", 0, 86400, 0),
    ("ttl", "integer", 0, 86400, 0),
    ("optimize_filters_for_hits", "categorical", ("false", "true"), 0),
    ("paranoid_checks", "categorical", ("false", "true"), 1),
    ("skip_stats_update_on_db_open", "categorical", ("false", "true"), 0),
    ("stats_dump_period_sec", "integer", 0, 1200, 600),
    ("advise_random_on_open", "categorical", ("false", "true"), 1),
    ("random_access_max_buffer_size", "integer", 0, 16, 1),
    ("new_table_reader_for_compaction_inputs", "categorical", ("false", "true"), 0),
    ("index_type", "categorical", ("binary_search", "hash_search", "two_level"), 0),
    ("data_block_index_type", "categorical", ("binary_search", "binary_and_hash"), 0),
    ("format_version", "integer", 2, 5, 4),
    ("block_restart_interval", "integer", 1, 64, 16),
    ("index_block_restart_interval", "integer", 1, 16, 1),
    ("metadata_block_size", "integer", 1, 16, 4),
    ("partition_filters", "categorical", ("false", "true"), 0),
    ("compression_level", "integer", -1, 9, -1),
    ("level0_file_num_compaction_batch", "integer", 1, 8, 1),
    ("manual_wal_flush", "categorical", ("false", "true"), 0),
]

# knobs that drive each performance facet; the planted relevant subsets are
# drawn from these pools
_GROUPS = {
    "read": ["block_cache_size", "block_size", "bloom_bits_per_key", "cache_index_and_filter_blocks",
             "max_open_files", "table_cache_numshardbits", "use_direct_reads", "index_type",
             "block_restart_interval"],
    "write": ["write_buffer_size", "max_write_buffer_number", "min_write_buffer_number_to_merge",
              "level0_slowdown_writes_trigger", "level0_stop_writes_trigger", "delayed_write_rate",
              "enable_pipelined_write", "wal_bytes_per_sync", "max_total_wal_size"],
    "compaction": ["max_background_jobs", "max_background_compactions", "level0_file_num_compaction_trigger",
                   "target_file_size_base", "max_bytes_for_level_base", "max_bytes_for_level_multiplier",
                   "compaction_style", "max_subcompactions", "compaction_readahead_size"],
    "space": ["compression_type", "bottommost_compression", "num_levels",
              "level_compaction_dynamic_level_bytes", "compression_level"],
}

# per profile: (planted knobs per group, facet weight on each metric family)
# facet weights: how strongly each group drives throughput-like metrics
# (TIME, RATE), write amplification and space amplification
_PROFILES = {
    "readheavy": {"counts": {"read": 6, "write": 2, "compaction": 2, "space": 2},
                  "perf": {"read": 1.0, "write": 0.3, "compaction": 0.4, "space": 0.3},
                  "waf": {"read": 0.1, "write": 0.6, "compaction": 0.8, "space": 0.2},
                  "saf": {"read": 0.1, "write": 0.2, "compaction": 0.5, "space": 1.0},
                  "pairs": 3},
    "balanced": {"counts": {"read": 4, "write": 4, "compaction": 3, "space": 2},
                 "perf": {"read": 0.7, "write": 0.7, "compaction": 0.6, "space": 0.3},
                 "waf": {"read": 0.1, "write": 0.7, "compaction": 0.8, "space": 0.2},
                 "saf": {"read": 0.1, "write": 0.2, "compaction": 0.6, "space": 1.0},
                 "pairs": 4},
    "writeheavy": {"counts": {"read": 2, "write": 6, "compaction": 4, "space": 2},
                   "perf": {"read": 0.3, "write": 1.0, "compaction": 0.7, "space": 0.3},
                   "waf": {"read": 0.1, "write": 1.0, "compaction": 1.0, "space": 0.2},
                   "saf": {"read": 0.1, "write": 0.3, "compaction": 0.6, "space": 1.0},
                   "pairs": 4},
    # interaction-heavy: a coupled cluster of 8 knobs plus many equal-strength
    # main effects, so no small subset carries most of the gain
    "update": {"counts": {"read": 4, "write": 5, "compaction": 5, "space": 2},
               "perf": {"read": 0.5, "write": 0.5, "compaction": 0.5, "space": 0.4},
               "waf": {"read": 0.1, "write": 0.5, "compaction": 0.5, "space": 0.2},
               "saf": {"read": 0.1, "write": 0.2, "compaction": 0.4, "space": 0.5},
               "pairs": 0, "cluster": 8},
}

PROFILE_NAMES = tuple(_PROFILES)
INTERACTION_HEAVY = "update"

# nominal metric levels at the planted optimum
_BASE = {"TIME": 120.0, "RATE": 60000.0, "WAF": 3.0, "SAF": 1.1}
# log-scale sensitivity of each metric to its facet penalty
_ALPHA = {"TIME": 0.35, "RATE": 0.35, "WAF": 0.25, "SAF": 0.15}


def rocksdb_space() -> ParameterSpace:
    params = []
    for knob in _KNOBS:
        if knob[1] == "categorical":
            name, kind, cats, default = knob
            params.append(ParameterSpec(name, kind, categories=cats, default=default))
        else:
            name, kind, lo, hi, default = knob
            params.append(ParameterSpec(name, kind, float(lo), float(hi), default=float(default)))
    return ParameterSpace(tuple(params))


def mysql_space() -> ParameterSpace:
    """The bundled 138-knob MySQL 5.7 parameter space."""
    text = resources.files("ltune").joinpath("data/mysql57.space").read_text()
    return parse_parameter_space(text, source="mysql57.space")


@dataclass(frozen=True)
class WorkloadProfile:
    """A synthetic workload: each metric is a log-linear function of negative
    quadratic penalties around planted per-knob optima.

    ``penalty[f] = sum_j diag[f, j] * dev_j**2 + sum_pairs w * (dev_j + sign * dev_k)**2``
    with ``dev = u - center`` on the unit cube, for facets f in (perf, waf, saf)."""

    name: str
    space: ParameterSpace
    schema: MetricSchema
    relevant: tuple[int, ...]
    center: np.ndarray  # normalized optimum for every knob (defaults off the relevant set)
    diag: np.ndarray  # (3, d) main-effect weights per facet
    pairs: tuple[tuple[int, int, float, float], ...]  # (j, k, sign, weight), shared by all facets
    noise: float = 0.01
    optimum: np.ndarray = field(default=None)  # raw configuration

    @property
    def spec(self) -> NormalizationSpec:
        return NormalizationSpec.build(self.space, e=self.schema.e)


def _stable_seed(*parts) -> int:
    return zlib.crc32("/".join(str(p) for p in parts).encode())


def make_profile(name: str, schema: str = "rocksdb", noise: float = 0.01) -> WorkloadProfile:
    if name not in _PROFILES:
        raise ValueError(f"unknown profile {name!r}; choose from {', '.join(PROFILE_NAMES)}")
    recipe = _PROFILES[name]
    space = rocksdb_space()
    spec = NormalizationSpec.build(space, e=1)
    rng = np.random.default_rng(_stable_seed("profile", name))
    d = space.d

    relevant, group_of = [], {}
    for group, count in recipe["counts"].items():
        pool = [space.index(n) for n in _GROUPS[group]]
        for j in rng.choice(pool, size=count, replace=False):
            relevant.append(int(j))
            group_of[int(j)] = group
    relevant.sort()

    default_u = normalize_config(space, spec, space.default_config())
    center = default_u.copy()
    for j in relevant:
        # optimum sits well away from the default, on a feasible grid point
        shift = rng.uniform(0.3, 0.6) * rng.choice([-1.0, 1.0])
        target = default_u[j] + shift
        if not 0.05 <= target <= 0.95:
            target = default_u[j] - shift
        center[j] = np.clip(target, 0.05, 0.95)
    center = normalize_config(space, spec, denormalize_config(space, spec, center))

    diag = np.zeros((3, d))
    strength = rng.uniform(1.0, 2.0, size=d)
    for j in relevant:
        g = group_of[j]
        diag[:, j] = strength[j] * np.array([recipe["perf"][g], recipe["waf"][g], recipe["saf"][g]])

    pairs = []
    if recipe.get("cluster"):
        cluster = sorted(int(j) for j in rng.choice(relevant, size=recipe["cluster"], replace=False))
        for a in range(len(cluster)):
            for b in range(a + 1, len(cluster)):
                pairs.append((cluster[a], cluster[b], float(rng.choice([-1.0, 1.0])), 0.25))
    for _ in range(recipe.get("pairs", 0)):
        j, k = sorted(int(v) for v in rng.choice(relevant, size=2, replace=False))
        pairs.append((j, k, float(rng.choice([-1.0, 1.0])), float(rng.uniform(0.5, 1.5))))

    metric_schema = ROCKSDB_SCHEMA if schema == "rocksdb" else MYSQL_SCHEMA
    if schema not in ("rocksdb", "mysql"):
        raise ValueError(f"unknown schema {schema!r}")
    optimum = denormalize_config(space, spec, center)
    return WorkloadProfile(name, space, metric_schema, tuple(relevant), center, diag,
                           tuple(pairs), noise, optimum)


def penalties(profile: WorkloadProfile, conf: np.ndarray) -> np.ndarray:
    """Facet penalties (perf, waf, saf) >= 0 for raw configuration(s)."""
    u = normalize_config(profile.space, profile.spec, conf)
    dev = np.atleast_2d(u) - profile.center
    pen = (dev ** 2) @ profile.diag.T
    inter = np.zeros(len(dev))
    for j, k, sign, w in profile.pairs:
        inter += w * (dev[:, j] + sign * dev[:, k]) ** 2
    pen = pen + inter[:, None]
    return pen if np.ndim(conf) == 2 else pen[0]


def true_metrics(profile: WorkloadProfile, conf: np.ndarray) -> np.ndarray:
    """Noise-free metrics for raw configuration(s)."""
    pen = np.atleast_2d(penalties(profile, conf))
    perf, waf, saf = pen[:, 0], pen[:, 1], pen[:, 2]
    time_ = _BASE["TIME"] * np.exp(_ALPHA["TIME"] * perf)
    rate = _BASE["RATE"] * np.exp(-_ALPHA["RATE"] * perf)
    if profile.schema == MYSQL_SCHEMA:
        # throughput in ops/s, 99th-percentile latency in microseconds
        latency = 800.0 * np.exp(_ALPHA["TIME"] * perf + 0.5 * _ALPHA["WAF"] * waf)
        out = np.column_stack([rate / 15.0, latency])
    else:
        out = np.column_stack([
            time_,
            rate,
            1.0 + (_BASE["WAF"] - 1.0) * np.exp(_ALPHA["WAF"] * waf),
            1.0 + (_BASE["SAF"] - 1.0) * np.exp(_ALPHA["SAF"] * saf),
        ])
    return out if np.ndim(conf) == 2 else out[0]


def simulate(profile: WorkloadProfile, conf: np.ndarray, noise_seed) -> np.ndarray:
    """Metrics for one raw configuration with multiplicative log-normal noise
    (``profile.noise`` relative); deterministic given ``noise_seed``."""
    conf = np.asarray(conf, dtype=float)
    profile.space.validate(conf)
    m = true_metrics(profile, conf)
    if profile.noise > 0:
        eps = np.random.default_rng(noise_seed).standard_normal(len(m))
        m = m * np.exp(profile.noise * eps)
    return m


def default_metrics(profile: WorkloadProfile, noise_seed) -> np.ndarray:
    return simulate(profile, profile.space.default_config(), noise_seed)


def generate_dataset(profile: WorkloadProfile, n: int, seed) -> Dataset:
    """``n`` LHS configurations with simulated metrics, all flagged measured."""
    if n < 1:
        raise ValueError("n must be at least 1")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    lhs_seed, noise_ss = ss.spawn(2)
    confs = lhs_configs(profile.space, profile.spec, n, lhs_seed)
    noise_seeds = noise_ss.spawn(n)
    metrics = np.array([simulate(profile, c, s) for c, s in zip(confs, noise_seeds)])
    return Dataset(profile.space, profile.schema, confs, metrics, (MEASURED,) * n)


# --- external benchmark adapter ----------------------------------------------

class BenchmarkError(RuntimeError):
    def __init__(self, message: str, output_tail: str = ""):
        super().__init__(f"{message}\n--- output tail ---\n{output_tail}" if output_tail else message)
        self.output_tail = output_tail


class BenchmarkFailed(BenchmarkError):
    def __init__(self, returncode: int, output_tail: str):
        super().__init__(f"benchmark command exited with status {returncode}", output_tail)
        self.returncode = returncode


class BenchmarkTimeout(BenchmarkError):
    pass


class MissingMetric(BenchmarkError):
    def __init__(self, key: str, output_tail: str):
        super().__init__(f"benchmark output is missing metric key {key!r}", output_tail)
        self.key = key


@dataclass(frozen=True)
class ExternalAdapterConfig:
    """``command`` contains ``{config}``, replaced by the path of the generated
    ``name=value`` file. ``metric_keys`` maps output keys to schema metric names."""

    command: str
    schema: MetricSchema
    metric_keys: dict = field(default_factory=dict)
    timeout: float = 600.0

    def __post_init__(self):
        keys = dict(self.metric_keys) or {n: n for n in self.schema.names}
        missing = set(self.schema.names) - set(keys.values())
        if missing:
            raise ValueError(f"parse spec does not cover metrics: {sorted(missing)}")
        if "{config}" not in self.command:
            raise ValueError("command template needs a {config} placeholder")
        object.__setattr__(self, "metric_keys", keys)


def format_config_file(space: ParameterSpace, conf: np.ndarray) -> str:
    return "".join(f"{p.name}={p.format_value(v)}\n" for p, v in zip(space.params, conf))


_KV = re.compile(r"^\s*([A-Za-z0-9_.\-]+)\s*=\s*(\S+)\s*$")


def _tail(text: str, lines: int = 20) -> str:
    return "\n".join(text.splitlines()[-lines:])


def run_external(cfg: ExternalAdapterConfig, conf: np.ndarray, space: ParameterSpace) -> np.ndarray:
    """Run the benchmark command on ``conf`` and parse ``key=value`` metric lines.

    Blocking; callers must not run two benchmarks against the same resource at once."""
    space.validate(conf)
    fd, path = tempfile.mkstemp(prefix="ltune-conf-", suffix=".cnf")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(format_config_file(space, conf))
        argv = [a.replace("{config}", path) for a in shlex.split(cfg.command)]
        try:
            proc = subprocess.run(argv, capture_output=True, text=True, timeout=cfg.timeout)
        except subprocess.TimeoutExpired as exc:
            out = (exc.stdout or "") if isinstance(exc.stdout, str) else (exc.stdout or b"").decode(errors="replace")
            raise BenchmarkTimeout(f"benchmark timed out after {cfg.timeout} s", _tail(out)) from None
    finally:
        os.unlink(path)
    combined = proc.stdout + proc.stderr
    if proc.returncode != 0:
        raise BenchmarkFailed(proc.returncode, _tail(combined))
    found = {}
    for line in proc.stdout.splitlines():
        m = _KV.match(line)
        if m:
            found[m.group(1)] = m.group(2)
    by_metric = {metric: key for key, metric in cfg.metric_keys.items()}
    values = []
    for name in cfg.schema.names:
        key = by_metric[name]
        if key not in found:
            raise MissingMetric(key, _tail(combined))
        try:
            values.append(float(found[key]))
        except ValueError:
            raise BenchmarkError(f"metric {key!r} is not numeric: {found[key]!r}", _tail(combined)) from None
    return np.array(values)
