"""Latin Hypercube sampling of the unit cube and of parameter spaces."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import NormalizationSpec, ParameterSpace, denormalize_config


@dataclass(frozen=True)
class LhsPlan:
    n: int
    d: int
    seed: int
    matrix: np.ndarray


def lhs_sample(d: int, n: int, seed) -> LhsPlan:
    """Stratified n x d plan: each column places one point in each of the n
    equal-width strata, at a uniform offset inside the stratum."""
    if d < 1 or n < 1:
        raise ValueError(f"lhs_sample needs d >= 1 and n >= 1, got d={d}, n={n}")
    rng = np.random.default_rng(seed)
    strata = rng.permuted(np.tile(np.arange(n), (d, 1)), axis=1).T
    offsets = rng.random((n, d))
    matrix = (strata + offsets) / n
    # floor(matrix * n) must recover the stratum exactly; rounding in the
    # division can push values across a stratum edge by one ulp
    for _ in range(8):
        got = np.floor(matrix * n)
        low, high = got < strata, got > strata
        if not (low.any() or high.any()):
            break
        matrix[low] = np.nextafter(matrix[low], 1.0)
        matrix[high] = np.nextafter(matrix[high], 0.0)
    matrix.setflags(write=False)
    return LhsPlan(n=n, d=d, seed=seed, matrix=matrix)


def lhs_configs(space: ParameterSpace, spec: NormalizationSpec, n: int, seed) -> np.ndarray:
    """``n`` valid raw configurations, one per row."""
    plan = lhs_sample(space.d, n, seed)
    return denormalize_config(space, spec, plan.matrix)
