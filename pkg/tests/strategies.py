"""Hypothesis strategies for random network descriptions."""

from hypothesis import strategies as st

from kernelsize.arch import FREE, LayerSpec, NetworkSpec, OpKind

CONV = [OpKind.STANDARD_CONV, OpKind.DEPTHWISE_CONV, OpKind.DWSEP_CONV]
ALL_KINDS = CONV + [OpKind.POINTWISE_CONV, OpKind.MAX_POOL, OpKind.IDENTITY]


@st.composite
def networks(
    draw,
    min_layers=1,
    max_layers=5,
    kinds=ALL_KINDS,
    kernels=(1, 3, 5),
    strides=(1, 2),
    free_prob=0.0,
    max_hw=64,
    max_channels=16,
):
    n = draw(st.integers(min_layers, max_layers))
    h = draw(st.integers(1, max_hw))
    w = draw(st.integers(1, max_hw))
    c = draw(st.integers(1, max_channels))
    layers = []
    prev = c
    for i in range(n):
        kind = draw(st.sampled_from(kinds))
        if kind in (OpKind.DEPTHWISE_CONV, OpKind.MAX_POOL, OpKind.IDENTITY):
            out = prev
        else:
            out = draw(st.integers(1, max_channels))
        if kind in (OpKind.POINTWISE_CONV, OpKind.IDENTITY):
            k = 1
        else:
            k = draw(st.sampled_from(kernels))
            if kind in CONV and free_prob and (free_prob >= 1 or draw(st.floats(0, 1)) < free_prob):
                k = FREE
        s = draw(st.sampled_from(strides))
        layers.append(LayerSpec(f"l{i}", kind, prev, out, k, s))
        prev = out
    return NetworkSpec("rand", h, w, c, tuple(layers))


def tunable_networks(**kw):
    """Networks whose layers are all tunable convs with FREE kernels."""
    kw.setdefault("kinds", CONV)
    return networks(free_prob=1.0, **kw)
