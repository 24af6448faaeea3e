"""Declarative CNN descriptions with shape and receptive-field propagation.

Only "same" padding is supported, so a layer's output spatial size is
``ceil(in / stride)`` whatever its kernel size. That keeps feature-map
dimensions fixed while kernel candidates are compared at a layer.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, replace
from typing import Union

from kernelsize.errors import SpecError, UnresolvedKernelError

FREE = "free"
"""Kernel marker for layers whose size the optimizer should choose."""

Kernel = Union[int, str]

_ID_RE = re.compile(r"^[A-Za-z0-9_-]+$")


class OpKind(str, enum.Enum):
    STANDARD_CONV = "standard_conv"
    DEPTHWISE_CONV = "depthwise_conv"
    POINTWISE_CONV = "pointwise_conv"
    DWSEP_CONV = "dwsep_conv"
    MAX_POOL = "max_pool"
    IDENTITY = "identity"

    def __str__(self):
        return self.value


# Kinds whose kernel the optimizer may choose.
TUNABLE_KINDS = frozenset(
    {OpKind.STANDARD_CONV, OpKind.DEPTHWISE_CONV, OpKind.DWSEP_CONV}
)
CONV_KINDS = TUNABLE_KINDS | {OpKind.POINTWISE_CONV}
# Kinds that must keep the channel count unchanged.
CHANNEL_PRESERVING_KINDS = frozenset(
    {OpKind.DEPTHWISE_CONV, OpKind.MAX_POOL, OpKind.IDENTITY}
)


@dataclass(frozen=True)
class LayerSpec:
    id: str
    op_kind: OpKind
    in_channels: int
    out_channels: int
    kernel_size: Kernel
    stride: int = 1
    padding: str = "same"

    @property
    def is_free(self) -> bool:
        return self.kernel_size == FREE

    def with_kernel(self, k: Kernel) -> "LayerSpec":
        return replace(self, kernel_size=k)


@dataclass(frozen=True)
class NetworkSpec:
    name: str
    input_height: int
    input_width: int
    input_channels: int
    layers: tuple[LayerSpec, ...]

    def __post_init__(self):
        # Accept any sequence but store a tuple so instances stay hashable.
        object.__setattr__(self, "layers", tuple(self.layers))

    @property
    def input_shape(self) -> tuple[int, int, int]:
        return (self.input_height, self.input_width, self.input_channels)

    @property
    def free_layers(self) -> list[LayerSpec]:
        return [layer for layer in self.layers if layer.is_free]

    def with_kernels(self, kernels: dict[str, Kernel]) -> "NetworkSpec":
        """Return a copy with the kernels of the named layers replaced."""
        layers = tuple(
            layer.with_kernel(kernels[layer.id]) if layer.id in kernels else layer
            for layer in self.layers
        )
        return replace(self, layers=layers)


@dataclass(frozen=True)
class Violation:
    layer_id: str | None
    message: str

    def __str__(self):
        if self.layer_id is None:
            return self.message
        return f"layer {self.layer_id!r}: {self.message}"


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _kernel_violations(layer: LayerSpec) -> list[str]:
    k = layer.kernel_size
    kind = layer.op_kind
    if k == FREE:
        if kind not in TUNABLE_KINDS:
            return [f"FREE kernel not allowed for {kind.value}"]
        return []
    if not _is_int(k):
        return [f"kernel must be an odd integer or {FREE!r}, got {k!r}"]
    if k < 1:
        return ["kernel must be >= 1"]
    if k % 2 == 0:
        return ["kernel must be odd"]
    if kind in (OpKind.POINTWISE_CONV, OpKind.IDENTITY) and k != 1:
        return [f"{kind.value} requires kernel 1"]
    return []


def validate_spec(spec: NetworkSpec) -> list[Violation]:
    """Collect every invariant violation in ``spec``; empty means well-formed."""
    out: list[Violation] = []
    for field in ("input_height", "input_width", "input_channels"):
        value = getattr(spec, field)
        if not _is_int(value) or value < 1:
            out.append(Violation(None, f"{field} must be a positive integer"))
    if not spec.layers:
        out.append(Violation(None, "network has no layers"))
        return out

    seen = set()
    prev_channels = spec.input_channels
    for layer in spec.layers:
        lid = layer.id
        if not isinstance(lid, str) or not _ID_RE.match(lid):
            out.append(Violation(lid, "id must match [A-Za-z0-9_-]+"))
        if lid in seen:
            out.append(Violation(lid, "duplicate layer id"))
        seen.add(lid)

        if not isinstance(layer.op_kind, OpKind):
            out.append(Violation(lid, f"unknown op kind {layer.op_kind!r}"))
            continue
        for field in ("in_channels", "out_channels", "stride"):
            value = getattr(layer, field)
            if not _is_int(value) or value < 1:
                out.append(Violation(lid, f"{field} must be a positive integer"))
        if layer.padding != "same":
            out.append(Violation(lid, "only 'same' padding is supported"))
        for msg in _kernel_violations(layer):
            out.append(Violation(lid, msg))

        if _is_int(prev_channels) and layer.in_channels != prev_channels:
            out.append(
                Violation(
                    lid,
                    f"in_channels {layer.in_channels} does not match "
                    f"previous output channels {prev_channels}",
                )
            )
        if (
            layer.op_kind in CHANNEL_PRESERVING_KINDS
            and layer.out_channels != layer.in_channels
        ):
            out.append(
                Violation(lid, f"{layer.op_kind.value} requires out_channels == in_channels")
            )
        prev_channels = layer.out_channels
    return out


def check_spec(spec: NetworkSpec) -> NetworkSpec:
    """Raise :class:`SpecError` if ``spec`` has any violation."""
    violations = validate_spec(spec)
    if violations:
        raise SpecError(violations)
    return spec


def output_size(size: int, stride: int) -> int:
    return -(-size // stride)


@dataclass(frozen=True)
class ShapeEntry:
    layer_id: str
    out_height: int
    out_width: int
    out_channels: int

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.out_height, self.out_width, self.out_channels)


@dataclass(frozen=True)
class ShapeTrace:
    input_shape: tuple[int, int, int]
    entries: tuple[ShapeEntry, ...]

    def in_shape(self, index: int) -> tuple[int, int, int]:
        """(H, W, C) feeding the layer at ``index``."""
        if index == 0:
            return self.input_shape
        return self.entries[index - 1].shape

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def propagate_shapes(spec: NetworkSpec) -> ShapeTrace:
    check_spec(spec)
    h, w = spec.input_height, spec.input_width
    entries = []
    for layer in spec.layers:
        h = output_size(h, layer.stride)
        w = output_size(w, layer.stride)
        entries.append(ShapeEntry(layer.id, h, w, layer.out_channels))
    return ShapeTrace(spec.input_shape, tuple(entries))


@dataclass(frozen=True)
class RFEntry:
    layer_id: str
    receptive_field: int
    jump: int


@dataclass(frozen=True)
class RFTrace:
    entries: tuple[RFEntry, ...]

    @property
    def final(self) -> int:
        return self.entries[-1].receptive_field

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def receptive_field_trace(spec: NetworkSpec) -> RFTrace:
    """Receptive field (input pixels, one axis) of a unit after each layer.

    Starts from a single pixel and grows by ``(k - 1) * jump`` per layer,
    where ``jump`` is the product of all earlier strides. A depthwise-separable
    layer contributes its depthwise kernel once; its 1x1 half adds nothing.
    """
    check_spec(spec)
    if spec.free_layers:
        raise UnresolvedKernelError("cannot compute RF for unresolved kernels")
    rf, jump = 1, 1
    entries = []
    for layer in spec.layers:
        rf += (layer.kernel_size - 1) * jump
        entries.append(RFEntry(layer.id, rf, jump))
        jump *= layer.stride
    return RFTrace(tuple(entries))


def free_all(spec: NetworkSpec) -> NetworkSpec:
    """Copy of ``spec`` with every tunable layer's kernel set to FREE."""
    return spec.with_kernels(
        {layer.id: FREE for layer in spec.layers if layer.op_kind in TUNABLE_KINDS}
    )
