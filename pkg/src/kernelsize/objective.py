"""Per-layer kernel scoring.

For each candidate kernel size ``k`` a layer gets three raw terms:

* information gain ``ln(1 + k)``,
* modeled accuracy gain ``1 - exp(-gamma * k)`` (or a user-supplied table),
* cost, the layer's MACs with ``k`` substituted.

Each term is min-max normalized over the candidate set and combined as
``lambda1 * I + lambda2 * A - lambda3 * C``. The highest score wins, and
ties go to the smaller kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from kernelsize.arch import TUNABLE_KINDS, LayerSpec
from kernelsize.cost import layer_macs

DEFAULT_CANDIDATES = (1, 3, 5, 7, 9)
DEFAULT_GAMMA = 0.5


def check_candidates(candidates: Sequence[int]) -> tuple[int, ...]:
    ks = tuple(candidates)
    if not ks:
        raise ValueError("candidate set is empty")
    for k in ks:
        if not isinstance(k, int) or isinstance(k, bool) or k < 1 or k % 2 == 0:
            raise ValueError(f"candidate kernels must be odd integers >= 1, got {k!r}")
    if any(a >= b for a, b in zip(ks, ks[1:])):
        raise ValueError(f"candidates must be strictly ascending, got {list(ks)}")
    return ks


@dataclass(frozen=True)
class ObjectiveWeights:
    lambda1: float
    lambda2: float
    lambda3: float

    def __post_init__(self):
        values = (self.lambda1, self.lambda2, self.lambda3)
        if any(not math.isfinite(v) or v < 0 for v in values):
            raise ValueError(f"weights must be finite and non-negative, got {values}")
        if not any(v > 0 for v in values):
            raise ValueError("at least one weight must be positive")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.lambda1, self.lambda2, self.lambda3)


BALANCED = ObjectiveWeights(1 / 3, 1 / 3, 1 / 3)


def check_gamma(gamma: float) -> float:
    if not (gamma > 0 and math.isfinite(gamma)):
        raise ValueError(f"gamma must be a positive finite number, got {gamma!r}")
    return float(gamma)


def info_gain(k: int) -> float:
    if k < 1:
        raise ValueError(f"kernel size must be >= 1, got {k}")
    return math.log1p(k)


def accuracy_gain(k: int, gamma: float = DEFAULT_GAMMA) -> float:
    if k < 1:
        raise ValueError(f"kernel size must be >= 1, got {k}")
    check_gamma(gamma)
    return -math.expm1(-gamma * k)


def min_max_normalize(series: Sequence[float]) -> list[float]:
    """Map ``series`` affinely onto [0, 1]; a constant series maps to zeros."""
    if len(series) == 0:
        raise ValueError("cannot normalize an empty series")
    if not all(math.isfinite(x) for x in series):
        raise ValueError("series contains non-finite values")
    lo, hi = min(series), max(series)
    if hi == lo:
        return [0.0] * len(series)
    span = hi - lo
    # Exact ints stay exact until the final (correctly rounded) division.
    return [(x - lo) / span for x in series]


@dataclass(frozen=True)
class ScoreRow:
    k: int
    raw_I: float
    raw_A: float
    raw_C: float
    norm_I: float
    norm_A: float
    norm_C: float
    score: float


@dataclass(frozen=True)
class ScoreTable:
    layer_id: str
    rows: tuple[ScoreRow, ...]
    chosen_k: int

    def row(self, k: int) -> ScoreRow:
        for r in self.rows:
            if r.k == k:
                return r
        raise KeyError(k)

    @property
    def candidates(self) -> tuple[int, ...]:
        return tuple(r.k for r in self.rows)


def select_kernel(table: ScoreTable | Mapping[int, float]) -> int:
    """Kernel with the highest score; the smallest one on ties."""
    if isinstance(table, ScoreTable):
        scores = {r.k: r.score for r in table.rows}
    else:
        scores = dict(table)
    if not scores:
        raise ValueError("empty score table")
    best = None
    for k in sorted(scores):
        if best is None or scores[k] > scores[best]:
            best = k
    return best


def table_from_columns(
    layer_id: str,
    candidates: Sequence[int],
    raw_I: Sequence[float],
    raw_A: Sequence[float],
    raw_C: Sequence[float],
    weights: ObjectiveWeights,
) -> ScoreTable:
    """Normalize raw term columns and score them."""
    ks = check_candidates(candidates)
    if not (len(raw_I) == len(raw_A) == len(raw_C) == len(ks)):
        raise ValueError("term columns must match the candidate set in length")
    n_I = min_max_normalize(raw_I)
    n_A = min_max_normalize(raw_A)
    n_C = min_max_normalize(raw_C)
    l1, l2, l3 = weights.as_tuple()
    rows = tuple(
        ScoreRow(k, ri, ra, rc, ni, na, nc, l1 * ni + l2 * na - l3 * nc)
        for k, ri, ra, rc, ni, na, nc in zip(ks, raw_I, raw_A, raw_C, n_I, n_A, n_C)
    )
    chosen = select_kernel({r.k: r.score for r in rows})
    return ScoreTable(layer_id, rows, chosen)


def score_candidates(
    layer: LayerSpec,
    in_shape: tuple[int, int, int],
    candidates: Sequence[int] = DEFAULT_CANDIDATES,
    weights: ObjectiveWeights = BALANCED,
    gamma: float = DEFAULT_GAMMA,
    accuracy_table: Mapping[int, float] | None = None,
) -> ScoreTable:
    """Score every candidate kernel for ``layer`` at input shape ``in_shape``.

    ``accuracy_table`` maps kernel size to a measured accuracy estimate and,
    when given, replaces the modeled accuracy term before normalization.
    """
    ks = check_candidates(candidates)
    check_gamma(gamma)
    if layer.op_kind not in TUNABLE_KINDS:
        raise ValueError(f"layer {layer.id!r}: {layer.op_kind.value} has no tunable kernel")
    if layer.in_channels != in_shape[2]:
        raise ValueError(
            f"layer {layer.id!r}: in_channels {layer.in_channels} "
            f"does not match input shape {in_shape}"
        )
    raw_I = [info_gain(k) for k in ks]
    if accuracy_table is None:
        raw_A = [accuracy_gain(k, gamma) for k in ks]
    else:
        missing = [k for k in ks if k not in accuracy_table]
        if missing:
            raise ValueError(f"accuracy table has no entry for kernels {missing}")
        raw_A = [float(accuracy_table[k]) for k in ks]
    raw_C = [layer_macs(layer.with_kernel(k), in_shape) for k in ks]
    return table_from_columns(layer.id, ks, raw_I, raw_A, raw_C, weights)
