"""Descriptor parsing, report rendering and spec comparison.

Descriptor format (JSON)::

    {
      "name": "tiny",
      "input": {"height": 32, "width": 32, "channels": 3},
      "layers": [
        {"id": "conv1", "kind": "standard_conv", "in_channels": 3,
         "out_channels": 16, "kernel": "free", "stride": 1}
      ]
    }

Unknown keys and wrong types are rejected.
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import singledispatch
from importlib import resources
from itertools import zip_longest

from kernelsize.arch import (
    FREE,
    LayerSpec,
    NetworkSpec,
    OpKind,
    RFTrace,
    ShapeTrace,
    Violation,
    propagate_shapes,
    receptive_field_trace,
    validate_spec,
)
from kernelsize.cost import CostReport, network_cost
from kernelsize.errors import SpecError
from kernelsize.objective import ScoreTable
from kernelsize.optimizer import OptimizationResult, SweepResult

FORMATS = ("text", "csv", "json")

_TOP_KEYS = ("name", "input", "layers")
_INPUT_KEYS = ("height", "width", "channels")
_LAYER_KEYS = ("id", "kind", "in_channels", "out_channels", "kernel", "stride")


# ---------------------------------------------------------------------------
# parsing


def _reject_duplicates(pairs):
    obj = {}
    for key, value in pairs:
        if key in obj:
            raise ValueError(f"duplicate key {key!r}")
        obj[key] = value
    return obj


def _line_of(text: str, layer_id) -> int | None:
    if not isinstance(layer_id, str):
        return None
    m = re.search(r'"id"\s*:\s*"' + re.escape(layer_id) + '"', text)
    if m is None:
        return None
    return text.count("\n", 0, m.start()) + 1


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _check_keys(obj, expected, path, problems):
    if not isinstance(obj, dict):
        problems.append(f"{path}: expected an object")
        return False
    for key in obj:
        if key not in expected:
            problems.append(f"{path}: unknown key {key!r}")
    for key in expected:
        if key not in obj:
            problems.append(f"{path}: missing key {key!r}")
    return True


def _parse_layer(obj, path, problems) -> LayerSpec | None:
    if not _check_keys(obj, _LAYER_KEYS, path, problems):
        return None
    ok = True
    if not isinstance(obj.get("id"), str):
        problems.append(f"{path}.id: expected a string")
        ok = False
    try:
        kind = OpKind(obj.get("kind"))
    except ValueError:
        valid = ", ".join(k.value for k in OpKind)
        problems.append(f"{path}.kind: unknown kind {obj.get('kind')!r} (valid: {valid})")
        ok = False
    for key in ("in_channels", "out_channels", "stride"):
        if key in obj and not _is_int(obj[key]):
            problems.append(f"{path}.{key}: expected an integer")
            ok = False
    kernel = obj.get("kernel")
    if "kernel" in obj and not (_is_int(kernel) or kernel == FREE):
        problems.append(f'{path}.kernel: expected an integer or "{FREE}"')
        ok = False
    if not ok or any(key not in obj for key in _LAYER_KEYS):
        return None
    return LayerSpec(
        id=obj["id"],
        op_kind=kind,
        in_channels=obj["in_channels"],
        out_channels=obj["out_channels"],
        kernel_size=kernel,
        stride=obj["stride"],
    )


def parse_spec(document: str) -> NetworkSpec:
    """Parse and validate a descriptor document.

    Raises :class:`SpecError` listing every problem, with JSON paths and,
    where a layer can be located, the line number.
    """
    try:
        data = json.loads(document, object_pairs_hook=_reject_duplicates)
    except json.JSONDecodeError as exc:
        raise SpecError([Violation(None, f"syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}")]) from exc
    except ValueError as exc:
        raise SpecError([Violation(None, f"syntax error: {exc}")]) from exc

    problems: list[str] = []
    if not _check_keys(data, _TOP_KEYS, "$", problems):
        raise SpecError([Violation(None, p) for p in problems])
    if not isinstance(data.get("name"), str):
        problems.append("$.name: expected a string")
    dims = data.get("input")
    if _check_keys(dims, _INPUT_KEYS, "$.input", problems):
        for key in _INPUT_KEYS:
            if key in dims and not _is_int(dims[key]):
                problems.append(f"$.input.{key}: expected an integer")
    layers = []
    raw_layers = data.get("layers")
    if not isinstance(raw_layers, list):
        problems.append("$.layers: expected a list")
    else:
        for i, raw in enumerate(raw_layers):
            layer = _parse_layer(raw, f"$.layers[{i}]", problems)
            if layer is not None:
                layers.append(layer)
    if problems:
        raise SpecError([Violation(None, p) for p in problems])

    spec = NetworkSpec(
        name=data["name"],
        input_height=dims["height"],
        input_width=dims["width"],
        input_channels=dims["channels"],
        layers=tuple(layers),
    )
    violations = validate_spec(spec)
    if violations:
        located = []
        for v in violations:
            line = _line_of(document, v.layer_id)
            msg = v.message if line is None else f"{v.message} (line {line})"
            located.append(Violation(v.layer_id, msg))
        raise SpecError(located)
    return spec


def spec_to_dict(spec: NetworkSpec) -> dict:
    return {
        "name": spec.name,
        "input": {
            "height": spec.input_height,
            "width": spec.input_width,
            "channels": spec.input_channels,
        },
        "layers": [
            {
                "id": layer.id,
                "kind": layer.op_kind.value,
                "in_channels": layer.in_channels,
                "out_channels": layer.out_channels,
                "kernel": layer.kernel_size,
                "stride": layer.stride,
            }
            for layer in spec.layers
        ],
    }


def emit_spec(spec: NetworkSpec) -> str:
    return json.dumps(spec_to_dict(spec), indent=2) + "\n"


def load_spec(path) -> NetworkSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_spec(fh.read())


FIXTURES = ("resnet18_like", "resnet18_case1", "gtsrb_like", "gtsrb_dwsep")


def fixture_path(name: str):
    """Path of a bundled case-study descriptor."""
    if name not in FIXTURES:
        raise ValueError(f"unknown fixture {name!r}; available: {', '.join(FIXTURES)}")
    return resources.files("kernelsize") / "fixtures" / f"{name}.json"


def load_fixture(name: str) -> NetworkSpec:
    return parse_spec(fixture_path(name).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# analysis and comparison


@dataclass(frozen=True)
class Analysis:
    spec: NetworkSpec
    shapes: ShapeTrace
    rf: RFTrace
    cost: CostReport


def analyze(spec: NetworkSpec, bytes_per_weight: int = 4) -> Analysis:
    return Analysis(
        spec,
        propagate_shapes(spec),
        receptive_field_trace(spec),
        network_cost(spec, bytes_per_weight),
    )


@dataclass(frozen=True)
class KernelDiff:
    index: int
    id_a: str | None
    kind_a: str | None
    kernel_a: int | None
    id_b: str | None
    kind_b: str | None
    kernel_b: int | None

    @property
    def changed(self) -> bool:
        return (self.kind_a, self.kernel_a) != (self.kind_b, self.kernel_b)


@dataclass(frozen=True)
class ComparisonReport:
    name_a: str
    name_b: str
    macs_a: int
    macs_b: int
    mac_delta_percent: float | None
    params_a: int
    params_b: int
    param_delta_percent: float | None
    size_bytes_a: int
    size_bytes_b: int
    size_delta_percent: float | None
    final_rf_a: int
    final_rf_b: int
    kernel_diff: tuple[KernelDiff, ...]


def delta_percent(a: int, b: int) -> float | None:
    """(b - a) / a * 100 from exact integers; None when ``a`` is zero."""
    if a == 0:
        return 0.0 if b == 0 else None
    return float(Fraction(b - a, a) * 100)


def compare(a: NetworkSpec, b: NetworkSpec, bytes_per_weight: int = 4) -> ComparisonReport:
    ca, cb = network_cost(a, bytes_per_weight), network_cost(b, bytes_per_weight)
    ra, rb = receptive_field_trace(a), receptive_field_trace(b)
    diffs = []
    for i, (la, lb) in enumerate(zip_longest(a.layers, b.layers)):
        diffs.append(
            KernelDiff(
                i,
                la and la.id, la and la.op_kind.value, la and la.kernel_size,
                lb and lb.id, lb and lb.op_kind.value, lb and lb.kernel_size,
            )
        )
    return ComparisonReport(
        name_a=a.name,
        name_b=b.name,
        macs_a=ca.total_macs,
        macs_b=cb.total_macs,
        mac_delta_percent=delta_percent(ca.total_macs, cb.total_macs),
        params_a=ca.total_params,
        params_b=cb.total_params,
        param_delta_percent=delta_percent(ca.total_params, cb.total_params),
        size_bytes_a=ca.model_size_bytes,
        size_bytes_b=cb.model_size_bytes,
        size_delta_percent=delta_percent(ca.model_size_bytes, cb.model_size_bytes),
        final_rf_a=ra.final,
        final_rf_b=rb.final,
        kernel_diff=tuple(diffs),
    )


# ---------------------------------------------------------------------------
# structured form


@singledispatch
def to_dict(obj) -> dict:
    raise TypeError(f"cannot render {type(obj).__name__}")


@to_dict.register
def _(table: ScoreTable) -> dict:
    return {
        "layer_id": table.layer_id,
        "chosen_k": table.chosen_k,
        "rows": [
            {
                "k": r.k,
                "raw_I": r.raw_I,
                "raw_A": r.raw_A,
                "raw_C": r.raw_C,
                "norm_I": r.norm_I,
                "norm_A": r.norm_A,
                "norm_C": r.norm_C,
                "score": r.score,
            }
            for r in table.rows
        ],
    }


def _config_dict(config) -> dict:
    return {
        "lambda1": config.weights.lambda1,
        "lambda2": config.weights.lambda2,
        "lambda3": config.weights.lambda3,
        "gamma": config.gamma,
        "candidates": list(config.candidates),
        "budget_macs": config.budget_macs,
        "rf_floor": config.rf_floor,
        "accuracy_table": (
            None
            if config.accuracy_table is None
            else {str(k): v for k, v in sorted(config.accuracy_table.items())}
        ),
    }


@to_dict.register
def _(result: OptimizationResult) -> dict:
    return {
        "config": _config_dict(result.config),
        "decisions": [to_dict(t) for t in result.decisions],
        "kernels": {
            t.layer_id: result.kernels[t.layer_id] for t in result.decisions
        },
        "total_macs_before_repair": result.total_cost_before_repair,
        "total_macs_after_repair": result.total_cost_after_repair,
        "repair_log": [
            {
                "layer_id": s.layer_id,
                "from_k": s.from_k,
                "to_k": s.to_k,
                "score_loss": s.score_loss,
                "macs_saved": s.macs_saved,
            }
            for s in result.repair_log
        ],
        "optimized_spec": spec_to_dict(result.optimized_spec),
    }


@to_dict.register
def _(analysis: Analysis) -> dict:
    layers = []
    for layer, shape, rf, cost in zip(
        analysis.spec.layers, analysis.shapes, analysis.rf, analysis.cost.layers
    ):
        layers.append(
            {
                "id": layer.id,
                "kind": layer.op_kind.value,
                "kernel": layer.kernel_size,
                "stride": layer.stride,
                "out_height": shape.out_height,
                "out_width": shape.out_width,
                "out_channels": shape.out_channels,
                "receptive_field": rf.receptive_field,
                "jump": rf.jump,
                "macs": cost.macs,
                "params": cost.params,
            }
        )
    return {
        "name": analysis.spec.name,
        "input": list(analysis.spec.input_shape),
        "layers": layers,
        "total_macs": analysis.cost.total_macs,
        "total_params": analysis.cost.total_params,
        "model_size_bytes": analysis.cost.model_size_bytes,
        "bytes_per_weight": analysis.cost.bytes_per_weight,
        "final_receptive_field": analysis.rf.final,
    }


@to_dict.register
def _(report: ComparisonReport) -> dict:
    return {
        "name_a": report.name_a,
        "name_b": report.name_b,
        "macs_a": report.macs_a,
        "macs_b": report.macs_b,
        "mac_delta_percent": report.mac_delta_percent,
        "params_a": report.params_a,
        "params_b": report.params_b,
        "param_delta_percent": report.param_delta_percent,
        "size_bytes_a": report.size_bytes_a,
        "size_bytes_b": report.size_bytes_b,
        "size_delta_percent": report.size_delta_percent,
        "final_rf_a": report.final_rf_a,
        "final_rf_b": report.final_rf_b,
        "kernel_diff": [
            {
                "index": d.index,
                "id_a": d.id_a,
                "kind_a": d.kind_a,
                "kernel_a": d.kernel_a,
                "id_b": d.id_b,
                "kind_b": d.kind_b,
                "kernel_b": d.kernel_b,
            }
            for d in report.kernel_diff
        ],
    }


def _sweep_row_dict(row, layer_ids) -> dict:
    kernels = dict(row.kernels)
    return {
        "lambda1": row.lambda1,
        "lambda2": row.lambda2,
        "lambda3": row.lambda3,
        "gamma": row.gamma,
        "kernels": {lid: kernels.get(lid) for lid in layer_ids},
        "total_macs": row.total_macs,
        "total_params": row.total_params,
        "error": row.error,
    }


@to_dict.register
def _(result: SweepResult) -> dict:
    return {
        "candidates": list(result.candidates),
        "layer_ids": list(result.layer_ids),
        "rows": [_sweep_row_dict(r, result.layer_ids) for r in result.rows],
    }


# ---------------------------------------------------------------------------
# csv


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _full(x):
    # repr keeps every bit of a float; ints and None pass through
    if x is None:
        return ""
    return repr(x) if isinstance(x, float) else x


_SCORE_COLUMNS = ["k", "raw_I", "raw_A", "raw_C", "norm_I", "norm_A", "norm_C", "score"]


def _score_rows(table: ScoreTable, prefix=()):
    for r in table.rows:
        values = [getattr(r, c) for c in _SCORE_COLUMNS]
        yield [*prefix, table.layer_id, *map(_full, values), int(r.k == table.chosen_k)]


@singledispatch
def to_csv(obj) -> str:
    raise TypeError(f"cannot render {type(obj).__name__} as csv")


@to_csv.register
def _(table: ScoreTable) -> str:
    return _csv_text(["layer_id", *_SCORE_COLUMNS, "chosen"], _score_rows(table))


@to_csv.register
def _(result: OptimizationResult) -> str:
    c = result.config
    prefix = [_full(c.weights.lambda1), _full(c.weights.lambda2), _full(c.weights.lambda3), _full(c.gamma)]
    rows = [row for t in result.decisions for row in _score_rows(t, prefix)]
    header = ["lambda1", "lambda2", "lambda3", "gamma", "layer_id", *_SCORE_COLUMNS, "chosen"]
    return _csv_text(header, rows)


@to_csv.register
def _(analysis: Analysis) -> str:
    d = to_dict(analysis)
    header = list(d["layers"][0])
    return _csv_text(header, ([layer[h] for h in header] for layer in d["layers"]))


@to_csv.register
def _(report: ComparisonReport) -> str:
    d = to_dict(report)
    header = [k for k in d if k != "kernel_diff"]
    return _csv_text(header, [[_full(d[h]) for h in header]])


@to_csv.register
def _(result: SweepResult) -> str:
    header = ["lambda1", "lambda2", "lambda3", "gamma"]
    header += [f"k_{lid}" for lid in result.layer_ids]
    header += ["total_macs", "total_params", "candidates", "error"]
    cands = " ".join(str(k) for k in result.candidates)
    rows = []
    for row in result.rows:
        kernels = dict(row.kernels)
        rows.append(
            [_full(row.lambda1), _full(row.lambda2), _full(row.lambda3), _full(row.gamma)]
            + [_full(kernels.get(lid)) for lid in result.layer_ids]
            + [_full(row.total_macs), _full(row.total_params), cands, row.error or ""]
        )
    return _csv_text(header, rows)


# ---------------------------------------------------------------------------
# text


def _g(x) -> str:
    if x is None:
        return "-"
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def _table(header, rows) -> list[str]:
    cells = [list(map(str, header))] + [[_g(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    return ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]


def _config_header(config) -> str:
    w = config.weights
    line = (
        f"weights: lambda1={_g(w.lambda1)} lambda2={_g(w.lambda2)} lambda3={_g(w.lambda3)}"
        f"  gamma={_g(config.gamma)}"
        f"  candidates={','.join(map(str, config.candidates))}"
    )
    if config.budget_macs is not None:
        line += f"  budget_macs={config.budget_macs}"
    if config.rf_floor is not None:
        line += f"  rf_floor={config.rf_floor}"
    if config.accuracy_table is not None:
        line += "  accuracy=table"
    return line


@singledispatch
def to_text(obj) -> str:
    raise TypeError(f"cannot render {type(obj).__name__} as text")


@to_text.register
def _(table: ScoreTable) -> str:
    rows = [
        ["*" if r.k == table.chosen_k else "", r.k, r.raw_I, r.raw_A, r.raw_C,
         r.norm_I, r.norm_A, r.norm_C, r.score]
        for r in table.rows
    ]
    lines = [f"layer {table.layer_id}: chosen k={table.chosen_k}"]
    lines += _table(["", *_SCORE_COLUMNS], rows)
    return "\n".join(lines) + "\n"


@to_text.register
def _(result: OptimizationResult) -> str:
    lines = [f"network: {result.optimized_spec.name}", _config_header(result.config), ""]
    kernels = result.kernels
    for table in result.decisions:
        lines.append(to_text(table).rstrip("\n"))
        final = kernels[table.layer_id]
        if final != table.chosen_k:
            lines.append(f"  repaired to k={final}")
        lines.append("")
    if result.repair_log:
        lines.append("budget repair:")
        lines += _table(
            ["layer", "from_k", "to_k", "score_loss", "macs_saved"],
            [[s.layer_id, s.from_k, s.to_k, s.score_loss, s.macs_saved] for s in result.repair_log],
        )
        lines.append("")
    lines.append(f"total MACs before repair: {result.total_cost_before_repair}")
    lines.append(f"total MACs after repair:  {result.total_cost_after_repair}")
    return "\n".join(lines) + "\n"


@to_text.register
def _(analysis: Analysis) -> str:
    spec = analysis.spec
    h, w, c = spec.input_shape
    lines = [f"network: {spec.name}  input: {h}x{w}x{c}"]
    rows = []
    for layer, shape, rf, cost in zip(spec.layers, analysis.shapes, analysis.rf, analysis.cost.layers):
        rows.append([
            layer.id, layer.op_kind.value, layer.kernel_size, layer.stride,
            f"{shape.out_height}x{shape.out_width}x{shape.out_channels}",
            rf.receptive_field, rf.jump, cost.macs, cost.params,
        ])
    lines += _table(["layer", "kind", "k", "s", "out", "rf", "jump", "macs", "params"], rows)
    cost = analysis.cost
    lines += [
        "",
        f"total MACs (FLOPs): {cost.total_macs} ({cost.total_macs / 1e6:.6g} M)",
        f"total params: {cost.total_params}",
        f"model size: {cost.model_size_bytes} bytes ({cost.model_size_bytes / 2**20:.6g} MiB"
        f" at {cost.bytes_per_weight} B/weight)",
        f"final receptive field: {analysis.rf.final}",
    ]
    return "\n".join(lines) + "\n"


@to_text.register
def _(report: ComparisonReport) -> str:
    lines = [f"compare: a={report.name_a}  b={report.name_b}"]
    lines += _table(
        ["metric", "a", "b", "delta_%"],
        [
            ["macs", report.macs_a, report.macs_b, report.mac_delta_percent],
            ["params", report.params_a, report.params_b, report.param_delta_percent],
            ["size_bytes", report.size_bytes_a, report.size_bytes_b, report.size_delta_percent],
            ["final_rf", report.final_rf_a, report.final_rf_b, None],
        ],
    )
    lines += ["", "kernel diff (by position):"]
    lines += _table(
        ["#", "a", "kind_a", "k_a", "b", "kind_b", "k_b", ""],
        [
            [d.index, d.id_a, d.kind_a, d.kernel_a, d.id_b, d.kind_b, d.kernel_b,
             "changed" if d.changed else ""]
            for d in report.kernel_diff
        ],
    )
    return "\n".join(lines) + "\n"


@to_text.register
def _(result: SweepResult) -> str:
    lines = [f"candidates={','.join(map(str, result.candidates))}"]
    header = ["lambda1", "lambda2", "lambda3", "gamma", *result.layer_ids, "total_macs", "total_params", "error"]
    rows = []
    for row in result.rows:
        kernels = dict(row.kernels)
        rows.append(
            [row.lambda1, row.lambda2, row.lambda3, row.gamma]
            + [kernels.get(lid) for lid in result.layer_ids]
            + [row.total_macs, row.total_params, row.error or ""]
        )
    lines += _table(header, rows)
    return "\n".join(lines) + "\n"


def emit_report(obj, fmt: str = "text") -> str:
    """Render an analysis, optimization, comparison, sweep or score table."""
    if fmt == "text":
        return to_text(obj)
    if fmt == "csv":
        return to_csv(obj)
    if fmt == "json":
        return json.dumps(to_dict(obj), indent=2) + "\n"
    raise ValueError(f"unknown format {fmt!r}; valid formats: {', '.join(FORMATS)}")
