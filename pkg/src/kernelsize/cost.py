"""Multiply-accumulate and parameter counts for layers and networks.

"FLOPs" in reports means MACs: one multiply-accumulate counts once. Bias,
batch-norm and activation costs are not included.
"""

from __future__ import annotations

from dataclasses import dataclass

from kernelsize.arch import (
    LayerSpec,
    NetworkSpec,
    OpKind,
    output_size,
    propagate_shapes,
)
from kernelsize.errors import UnresolvedKernelError

DEFAULT_BYTES_PER_WEIGHT = 4
ORACLE_LIMIT = 10**7


def _concrete_kernel(layer: LayerSpec) -> int:
    if layer.is_free:
        raise UnresolvedKernelError(f"layer {layer.id!r} has an unresolved kernel")
    return layer.kernel_size


def layer_macs(layer: LayerSpec, in_shape: tuple[int, int, int]) -> int:
    k = _concrete_kernel(layer)
    h, w, c_in = in_shape
    positions = output_size(h, layer.stride) * output_size(w, layer.stride)
    kind = layer.op_kind
    if kind is OpKind.STANDARD_CONV:
        return k * k * positions * c_in * layer.out_channels
    if kind is OpKind.DEPTHWISE_CONV:
        return k * k * positions * c_in
    if kind is OpKind.POINTWISE_CONV:
        return positions * c_in * layer.out_channels
    if kind is OpKind.DWSEP_CONV:
        return k * k * positions * c_in + positions * c_in * layer.out_channels
    return 0


def layer_params(layer: LayerSpec) -> int:
    k = _concrete_kernel(layer)
    c_in, c_out = layer.in_channels, layer.out_channels
    kind = layer.op_kind
    if kind is OpKind.STANDARD_CONV:
        return k * k * c_in * c_out
    if kind is OpKind.DEPTHWISE_CONV:
        return k * k * c_in
    if kind is OpKind.POINTWISE_CONV:
        return c_in * c_out
    if kind is OpKind.DWSEP_CONV:
        return k * k * c_in + c_in * c_out
    return 0


@dataclass(frozen=True)
class LayerCost:
    layer_id: str
    macs: int
    params: int


@dataclass(frozen=True)
class CostReport:
    layers: tuple[LayerCost, ...]
    total_macs: int
    total_params: int
    model_size_bytes: int
    bytes_per_weight: int = DEFAULT_BYTES_PER_WEIGHT


def network_cost(
    spec: NetworkSpec, bytes_per_weight: int = DEFAULT_BYTES_PER_WEIGHT
) -> CostReport:
    shapes = propagate_shapes(spec)
    layers = tuple(
        LayerCost(layer.id, layer_macs(layer, shapes.in_shape(i)), layer_params(layer))
        for i, layer in enumerate(spec.layers)
    )
    total_params = sum(c.params for c in layers)
    return CostReport(
        layers=layers,
        total_macs=sum(c.macs for c in layers),
        total_params=total_params,
        model_size_bytes=total_params * bytes_per_weight,
        bytes_per_weight=bytes_per_weight,
    )


def _count_conv(h_out, w_out, k, out_channels, in_channels_for):
    """Count one MAC per (output position, output channel, input channel, tap)."""
    count = 0
    for _y in range(h_out):
        for _x in range(w_out):
            for co in range(out_channels):
                for _ci in in_channels_for(co):
                    for _dy in range(k):
                        for _dx in range(k):
                            count += 1
    return count


def oracle_macs_bruteforce(layer: LayerSpec, in_shape: tuple[int, int, int]) -> int:
    """Enumerate every MAC of ``layer`` explicitly. For tests only.

    Taps that land on zero padding are still counted, matching the usual
    convention (and the closed forms in :func:`layer_macs`).
    """
    k = _concrete_kernel(layer)
    h, w, c_in = in_shape
    c_out = layer.out_channels
    size = h * w * max(c_in, 1) * max(c_out, 1) * k * k
    if size > ORACLE_LIMIT:
        raise ValueError(f"shape too large for brute-force oracle ({size} > {ORACLE_LIMIT})")

    h_out = len(range(0, h, layer.stride))
    w_out = len(range(0, w, layer.stride))
    kind = layer.op_kind
    dense = lambda co: range(c_in)  # noqa: E731
    own = lambda co: (co,)  # noqa: E731
    if kind is OpKind.STANDARD_CONV:
        return _count_conv(h_out, w_out, k, c_out, dense)
    if kind is OpKind.DEPTHWISE_CONV:
        return _count_conv(h_out, w_out, k, c_in, own)
    if kind is OpKind.POINTWISE_CONV:
        return _count_conv(h_out, w_out, 1, c_out, dense)
    if kind is OpKind.DWSEP_CONV:
        depthwise = _count_conv(h_out, w_out, k, c_in, own)
        # pointwise half runs at the depthwise output resolution, stride 1
        return depthwise + _count_conv(h_out, w_out, 1, c_out, dense)
    return 0
