"""Network-level kernel selection, budget repair, presets and sweeps."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from kernelsize.arch import NetworkSpec, check_spec, propagate_shapes, receptive_field_trace
from kernelsize.cost import network_cost
from kernelsize.errors import InfeasibleError
from kernelsize.objective import (
    BALANCED,
    DEFAULT_CANDIDATES,
    DEFAULT_GAMMA,
    ObjectiveWeights,
    ScoreTable,
    check_candidates,
    check_gamma,
    score_candidates,
)

log = logging.getLogger(__name__)

PROFILES = {
    "balanced": (1 / 3, 1 / 3, 1 / 3),
    "cloud": (0.40, 0.45, 0.15),
    "edge": (0.20, 0.25, 0.55),
}


def profile_weights(name: str, overrides: Mapping[str, Sequence[float]] | None = None):
    """Weight preset for a deployment profile.

    ``overrides`` (e.g. loaded from a config file) may redefine existing
    presets or add new ones.
    """
    table = dict(PROFILES)
    if overrides:
        table.update({k: tuple(v) for k, v in overrides.items()})
    if name not in table:
        raise ValueError(f"unknown profile {name!r}; valid profiles: {', '.join(sorted(table))}")
    values = table[name]
    if len(values) != 3:
        raise ValueError(f"profile {name!r} must define exactly three weights")
    return ObjectiveWeights(*(float(v) for v in values))


@dataclass(frozen=True)
class OptimizationConfig:
    candidates: tuple[int, ...] = DEFAULT_CANDIDATES
    weights: ObjectiveWeights = BALANCED
    gamma: float = DEFAULT_GAMMA
    budget_macs: int | None = None
    rf_floor: int | None = None
    accuracy_table: Mapping[int, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "candidates", check_candidates(self.candidates))
        check_gamma(self.gamma)
        if self.budget_macs is not None and self.budget_macs < 1:
            raise ValueError("budget_macs must be a positive integer")
        if self.rf_floor is not None and self.rf_floor < 1:
            raise ValueError("rf_floor must be a positive integer")


@dataclass(frozen=True)
class RepairStep:
    layer_id: str
    from_k: int
    to_k: int
    score_loss: float
    macs_saved: int


@dataclass(frozen=True)
class OptimizationResult:
    optimized_spec: NetworkSpec
    decisions: tuple[ScoreTable, ...]
    config: OptimizationConfig
    total_cost_before_repair: int
    total_cost_after_repair: int
    repair_log: tuple[RepairStep, ...] = ()

    @property
    def kernels(self) -> dict[str, int]:
        return {layer.id: layer.kernel_size for layer in self.optimized_spec.layers}


def _ratio(step_loss: float, saved: int) -> Fraction:
    return Fraction(step_loss) / saved


def apply_budget_repair(
    spec: NetworkSpec, decisions: Sequence[ScoreTable], budget_macs: int
) -> tuple[NetworkSpec, list[RepairStep]]:
    """Greedily shrink kernels until total MACs fit ``budget_macs``.

    ``spec`` carries the current kernel of every decided layer. Each step
    moves one decided layer down to the next smaller candidate, picking the
    move with the least score lost per MAC saved (earliest layer on ties).
    """
    current = {layer.id: layer.kernel_size for layer in spec.layers}
    total = network_cost(spec).total_macs
    steps: list[RepairStep] = []
    while total > budget_macs:
        best = None
        for table in decisions:
            ks = table.candidates
            idx = ks.index(current[table.layer_id])
            if idx == 0:
                continue
            hi, lo = table.row(ks[idx]), table.row(ks[idx - 1])
            loss = hi.score - lo.score
            saved = hi.raw_C - lo.raw_C
            ratio = _ratio(loss, saved)
            if best is None or ratio < best[0]:
                best = (ratio, RepairStep(table.layer_id, hi.k, lo.k, loss, saved))
        if best is None:
            raise InfeasibleError(
                f"budget of {budget_macs} MACs is unreachable; "
                f"minimal achievable is {total} MACs",
                minimal_macs=total,
            )
        step = best[1]
        log.debug("repair %s: %d -> %d", step.layer_id, step.from_k, step.to_k)
        current[step.layer_id] = step.to_k
        total -= step.macs_saved
        steps.append(step)
    return spec.with_kernels(current), steps


def optimize_network(
    spec: NetworkSpec, config: OptimizationConfig = OptimizationConfig()
) -> OptimizationResult:
    """Resolve every FREE kernel in ``spec`` by per-layer argmax.

    Layers with concrete kernels are left as they are. A MAC budget, if
    set, is enforced afterwards by greedy repair; the receptive-field floor
    is only checked on the final spec.
    """
    check_spec(spec)
    ks = config.candidates
    free_ids = [layer.id for layer in spec.free_layers]

    if config.budget_macs is not None:
        minimal = network_cost(spec.with_kernels({i: ks[0] for i in free_ids})).total_macs
        if minimal > config.budget_macs:
            raise InfeasibleError(
                f"budget of {config.budget_macs} MACs is unreachable; "
                f"minimal achievable is {minimal} MACs",
                minimal_macs=minimal,
            )
    if config.rf_floor is not None:
        widest = receptive_field_trace(spec.with_kernels({i: ks[-1] for i in free_ids})).final
        if widest < config.rf_floor:
            raise InfeasibleError(
                f"receptive field floor {config.rf_floor} is unreachable; "
                f"largest achievable is {widest}",
                max_receptive_field=widest,
            )

    # Same padding: shapes do not depend on kernels, so propagate once.
    shapes = propagate_shapes(spec)
    decisions = tuple(
        score_candidates(
            layer, shapes.in_shape(i), ks, config.weights, config.gamma, config.accuracy_table
        )
        for i, layer in enumerate(spec.layers)
        if layer.is_free
    )
    chosen = spec.with_kernels({t.layer_id: t.chosen_k for t in decisions})
    before = network_cost(chosen).total_macs

    repaired, steps = chosen, []
    if config.budget_macs is not None and before > config.budget_macs:
        repaired, steps = apply_budget_repair(chosen, decisions, config.budget_macs)
    after = network_cost(repaired).total_macs

    if config.rf_floor is not None:
        final_rf = receptive_field_trace(repaired).final
        if final_rf < config.rf_floor:
            raise InfeasibleError(
                f"final receptive field {final_rf} is below the floor {config.rf_floor}",
                max_receptive_field=final_rf,
            )

    return OptimizationResult(
        optimized_spec=repaired,
        decisions=decisions,
        config=config,
        total_cost_before_repair=before,
        total_cost_after_repair=after,
        repair_log=tuple(steps),
    )


@dataclass(frozen=True)
class SweepRow:
    lambda1: float
    lambda2: float
    lambda3: float
    gamma: float
    kernels: tuple[tuple[str, int], ...] = ()
    total_macs: int | None = None
    total_params: int | None = None
    error: str | None = None


@dataclass(frozen=True)
class SweepResult:
    layer_ids: tuple[str, ...]
    candidates: tuple[int, ...]
    rows: tuple[SweepRow, ...] = field(default_factory=tuple)


def sweep(
    spec: NetworkSpec,
    lambda_grid: Iterable[Sequence[float]],
    gamma_grid: Iterable[float],
    candidates: Sequence[int] = DEFAULT_CANDIDATES,
    accuracy_table: Mapping[int, float] | None = None,
) -> SweepResult:
    """Run the unconstrained optimizer at every (weights, gamma) grid point.

    Rows come out sorted by (lambda1, lambda2, lambda3, gamma). A point that
    fails (bad weights, bad gamma) yields a row with ``error`` set rather
    than aborting the sweep.
    """
    check_spec(spec)
    ks = check_candidates(candidates)
    lambdas = [tuple(float(v) for v in row) for row in lambda_grid]
    gammas = [float(g) for g in gamma_grid]
    if not lambdas or not gammas:
        raise ValueError("sweep grids must be non-empty")
    for row in lambdas:
        if len(row) != 3:
            raise ValueError(f"lambda grid rows need three values, got {row}")

    rows = []
    for (l1, l2, l3), g in sorted((lam, g) for lam in lambdas for g in gammas):
        try:
            config = OptimizationConfig(
                ks, ObjectiveWeights(l1, l2, l3), g, accuracy_table=accuracy_table
            )
            result = optimize_network(spec, config)
        except ValueError as exc:
            rows.append(SweepRow(l1, l2, l3, g, error=str(exc)))
            continue
        cost = network_cost(result.optimized_spec)
        rows.append(
            SweepRow(
                l1, l2, l3, g,
                kernels=tuple((t.layer_id, result.kernels[t.layer_id]) for t in result.decisions),
                total_macs=cost.total_macs,
                total_params=cost.total_params,
            )
        )
    return SweepResult(tuple(layer.id for layer in spec.free_layers), ks, tuple(rows))
