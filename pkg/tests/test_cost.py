import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kernelsize.arch import FREE, LayerSpec, NetworkSpec, OpKind
from kernelsize.cost import layer_macs, layer_params, network_cost, oracle_macs_bruteforce
from kernelsize.errors import UnresolvedKernelError
from kernelsize.report import load_fixture
from oracles import conv_macs_closed_form
from strategies import networks

SC, DW, PW, DS = (
    OpKind.STANDARD_CONV,
    OpKind.DEPTHWISE_CONV,
    OpKind.POINTWISE_CONV,
    OpKind.DWSEP_CONV,
)


def layer(kind, c_in, c_out, k, s=1):
    return LayerSpec("x", kind, c_in, c_out, k, s)


class TestLayerMacs:
    def test_unit(self):
        assert layer_macs(layer(SC, 1, 1, 1), (1, 1, 1)) == 1

    def test_3x3_64ch(self):
        l = layer(SC, 64, 64, 3)
        assert layer_macs(l, (32, 32, 64)) == 37_748_736

    def test_dwsep(self):
        l = layer(DS, 32, 64, 3)
        assert layer_macs(l, (48, 48, 32)) == 663_552 + 4_718_592 == 5_382_144

    def test_pool_identity_free(self):
        assert layer_macs(layer(OpKind.MAX_POOL, 4, 4, 3, 2), (8, 8, 4)) == 0
        assert layer_macs(layer(OpKind.IDENTITY, 4, 4, 1), (8, 8, 4)) == 0
        with pytest.raises(UnresolvedKernelError):
            layer_macs(layer(SC, 4, 4, FREE), (8, 8, 4))


class TestParams:
    def test_examples(self):
        assert layer_params(layer(SC, 64, 64, 3)) == 36_864
        assert layer_params(layer(PW, 32, 64, 1)) == 2_048
        assert layer_params(layer(OpKind.IDENTITY, 8, 8, 1)) == 0
        assert layer_params(layer(DW, 8, 8, 5)) == 200
        assert layer_params(layer(DS, 8, 16, 3)) == 72 + 128


class TestOracle:
    def test_examples(self):
        assert oracle_macs_bruteforce(layer(SC, 2, 2, 3), (4, 4, 2)) == 576
        assert oracle_macs_bruteforce(layer(SC, 1, 1, 1), (1, 1, 1)) == 1
        assert oracle_macs_bruteforce(layer(SC, 3, 2, 5, 2), (8, 8, 3)) == 2_400

    def test_refuses_large(self):
        with pytest.raises(ValueError, match="too large"):
            oracle_macs_bruteforce(layer(SC, 64, 64, 3), (64, 64, 64))

    def test_grid_against_closed_forms(self):
        for k, h, w, s in itertools.product((1, 3), (1, 5), (1, 4), (1, 2)):
            for kind in (SC, DS):
                l = layer(kind, 3, 2, k, s)
                expect = conv_macs_closed_form(kind.value, k, h, w, 3, 2, s)
                assert oracle_macs_bruteforce(l, (h, w, 3)) == expect == layer_macs(l, (h, w, 3))


class TestProperties:
    kernels = st.sampled_from([1, 3, 5, 7, 9])
    dims = st.integers(1, 64)
    chans = st.integers(1, 128)

    @settings(max_examples=200)
    @given(st.sampled_from([SC, DW, DS]), dims, dims, chans, chans, st.sampled_from([1, 2, 3]), st.data())
    def test_strictly_increasing_in_k(self, kind, h, w, c_in, c_out, s, data):
        if kind is DW:
            c_out = c_in
        k1 = data.draw(self.kernels)
        k2 = data.draw(self.kernels.filter(lambda k: k > k1)) if k1 < 9 else None
        if k2 is None:
            return
        shape = (h, w, c_in)
        assert layer_macs(layer(kind, c_in, c_out, k1, s), shape) < layer_macs(
            layer(kind, c_in, c_out, k2, s), shape
        )

    @settings(max_examples=100)
    @given(dims, dims, chans, chans, st.sampled_from([1, 2]))
    def test_quadratic(self, h, w, c_in, c_out, s):
        ratios = {
            Fraction(layer_macs(layer(SC, c_in, c_out, k, s), (h, w, c_in)), k * k)
            for k in (1, 3, 5, 7, 9)
        }
        assert len(ratios) == 1

    @settings(max_examples=200)
    @given(dims, dims, chans, st.integers(2, 128), st.sampled_from([3, 5, 7, 9]), st.sampled_from([1, 2]))
    def test_dwsep_cheaper(self, h, w, c_in, c_out, k, s):
        shape = (h, w, c_in)
        assert layer_macs(layer(DS, c_in, c_out, k, s), shape) < layer_macs(
            layer(SC, c_in, c_out, k, s), shape
        )

    @settings(max_examples=100, deadline=None)
    @given(networks())
    def test_additivity(self, spec):
        report = network_cost(spec)
        assert report.total_macs == sum(c.macs for c in report.layers)
        assert report.total_params == sum(c.params for c in report.layers)
        assert report.model_size_bytes == 4 * report.total_params
        assert all(isinstance(c.macs, int) and isinstance(c.params, int) for c in report.layers)


class TestNetworkCost:
    def test_unit(self):
        spec = NetworkSpec("u", 1, 1, 1, (layer(SC, 1, 1, 1),))
        report = network_cost(spec)
        assert (report.total_macs, report.total_params) == (1, 1)

    def test_two_identical_layers(self):
        one = LayerSpec("a", SC, 8, 8, 3)
        single = network_cost(NetworkSpec("s", 16, 16, 8, (one,))).total_macs
        double = network_cost(NetworkSpec("d", 16, 16, 8, (one, LayerSpec("b", SC, 8, 8, 3)))).total_macs
        assert double == 2 * single

    def test_bytes_per_weight(self):
        spec = NetworkSpec("u", 4, 4, 2, (layer(SC, 2, 2, 3),))
        assert network_cost(spec, bytes_per_weight=2).model_size_bytes == 72

    def test_gtsrb_fixture_pinned(self):
        # conv1 48x48 3->32, conv2 48x48 32->32, pool, conv3 24x24 32->64, conv4 24x24 64->64
        expect = 25 * (48 * 48 * (3 * 32 + 32 * 32) + 24 * 24 * (32 * 64 + 64 * 64))
        assert expect == 152_985_600
        assert network_cost(load_fixture("gtsrb_like")).total_macs == expect

    def test_resnet_fixture_pinned(self):
        report = network_cost(load_fixture("resnet18_like"))
        assert report.total_macs == 1_698_181_632
        assert abs(report.total_macs - 1_750e6) / 1_750e6 <= 0.15
