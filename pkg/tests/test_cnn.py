import numpy as np
import pytest

from tdcim import workloads
from tdcim.cnn import (LayerDesc, NetworkDesc, extract_layer_info,
                       infer_int8_reference)
from tdcim.quant import QuantParams, QuantTensor, round_half_away


def qt(arr, scale=1.0):
    arr = np.asarray(arr, dtype=np.int8)
    return QuantTensor(arr.shape, arr.reshape(-1), QuantParams(scale=scale))


def test_single_1x1_conv_accumulator():
    net = NetworkDesc("t", [LayerDesc(kind="conv2d", in_channels=1, out_channels=1,
                                      kernel_h=1, kernel_w=1, weight_ref="w")],
                      (1, 1, 1))
    out = infer_int8_reference(net, {"w": qt([[[[2]]]])}, qt([[[1]]]))
    assert out.array.reshape(-1).tolist() == [2]


def test_3x3_ones_counting():
    net = NetworkDesc("t", [LayerDesc(kind="conv2d", in_channels=1, out_channels=1,
                                      kernel_h=3, kernel_w=3, weight_ref="w")],
                      (1, 3, 3))
    out = infer_int8_reference(net, {"w": qt(np.ones((1, 1, 3, 3)))},
                               qt(np.ones((1, 3, 3))))
    assert out.array.reshape(-1).tolist() == [9]


def naive_conv(x, w, stride, padding):
    """Independent quadruple-loop conv oracle (int64)."""
    oc, c, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (padding, padding), (padding, padding)))
    oh = (xp.shape[1] - kh) // stride + 1
    ow = (xp.shape[2] - kw) // stride + 1
    out = np.zeros((oc, oh, ow), dtype=np.int64)
    for o in range(oc):
        for oy in range(oh):
            for ox in range(ow):
                s = 0
                for ci in range(c):
                    for dy in range(kh):
                        for dx in range(kw):
                            s += int(xp[ci, oy * stride + dy, ox * stride + dx]) * \
                                 int(w[o, ci, dy, dx])
                out[o, oy, ox] = s
    return out


def test_conv_matches_naive_quadruple_loop():
    rng = np.random.default_rng(11)
    x = rng.integers(-128, 128, size=(4, 8, 8)).astype(np.int8)
    w = rng.integers(-128, 128, size=(8, 4, 3, 3)).astype(np.int8)
    net = NetworkDesc("t", [LayerDesc(kind="conv2d", in_channels=4, out_channels=8,
                                      kernel_h=3, kernel_w=3, stride=1, padding=0,
                                      weight_ref="w", out_scale=1.0)],
                      (4, 8, 8))
    out = infer_int8_reference(net, {"w": qt(w)}, qt(x))
    ref = naive_conv(x, w, 1, 0)
    # the reference output passed through the same requantization
    expect = np.clip(round_half_away(ref.astype(np.float64)), -128, 127).astype(np.int8)
    assert np.array_equal(out.array, expect)


def test_grouped_conv_matches_naive_per_group():
    rng = np.random.default_rng(12)
    x = rng.integers(-20, 20, size=(4, 5, 5)).astype(np.int8)
    w = rng.integers(-20, 20, size=(4, 1, 3, 3)).astype(np.int8)  # depthwise
    net = NetworkDesc("t", [LayerDesc(kind="conv2d", in_channels=4, out_channels=4,
                                      kernel_h=3, kernel_w=3, groups=4,
                                      weight_ref="w", out_scale=1.0)],
                      (4, 5, 5))
    out = infer_int8_reference(net, {"w": qt(w)}, qt(x))
    for g in range(4):
        ref = naive_conv(x[g : g + 1], w[g : g + 1], 1, 0)
        expect = np.clip(ref, -128, 127).astype(np.int8)
        assert np.array_equal(out.array[g : g + 1], expect)


def test_determinism():
    rng = np.random.default_rng(5)
    x = rng.integers(-128, 128, size=(2, 6, 6)).astype(np.int8)
    w = rng.integers(-128, 128, size=(3, 2, 3, 3)).astype(np.int8)
    net = NetworkDesc("t", [LayerDesc(kind="conv2d", in_channels=2, out_channels=3,
                                      kernel_h=3, kernel_w=3, weight_ref="w",
                                      out_scale=0.2)], (2, 6, 6))
    a = infer_int8_reference(net, {"w": qt(w)}, qt(x))
    b = infer_int8_reference(net, {"w": qt(w)}, qt(x))
    assert a.data.tobytes() == b.data.tobytes()


def test_accumulator_bound_no_overflow():
    # |acc| <= 9*C*127*127 for 3x3xC dot products; C = 1024 stays in int32
    bound = 9 * 1024 * 127 * 127
    assert bound < 2**31


def test_relu_clamps_at_zero_point_and_preserves_params():
    net = NetworkDesc("t", [LayerDesc(kind="relu")], (1, 2, 2))
    x = qt(np.array([[[-5, 3], [0, -1]]]), scale=0.5)
    out = infer_int8_reference(net, {}, x)
    assert out.array.reshape(-1).tolist() == [0, 3, 0, 0]
    assert out.params == x.params


def test_pool_layers():
    net = NetworkDesc("t", [LayerDesc(kind="maxpool2d", kernel_h=2, kernel_w=2,
                                      stride=2)], (1, 4, 4))
    x = qt(np.arange(16).reshape(1, 4, 4), scale=0.3)
    out = infer_int8_reference(net, {}, x)
    assert out.array.reshape(-1).tolist() == [5, 7, 13, 15]
    assert out.params == x.params

    net = NetworkDesc("t", [LayerDesc(kind="avgpool2d", kernel_h=2, kernel_w=2,
                                      stride=2)], (1, 2, 2))
    out = infer_int8_reference(net, {}, qt(np.array([[[1, 2], [2, 2]]])))
    # mean 1.75 rounds half away from zero at .5 steps only; 1.75 -> 2
    assert out.array.reshape(-1).tolist() == [2]


def test_bias_added_before_requantization():
    net = NetworkDesc("t", [LayerDesc(kind="conv2d", in_channels=1, out_channels=1,
                                      kernel_h=1, kernel_w=1, weight_ref="w",
                                      bias_ref="b", out_scale=1.0)], (1, 1, 1))
    out = infer_int8_reference(net, {"w": qt([[[[3]]]])}, qt([[[2]]]),
                               biases={"b": np.array([10], np.int32)})
    assert out.array.reshape(-1).tolist() == [16]


def test_shape_mismatch_names_layer_index():
    net = NetworkDesc("t", [
        LayerDesc(kind="conv2d", in_channels=2, out_channels=1, kernel_h=1,
                  kernel_w=1, weight_ref="w"),
    ], (1, 2, 2))
    with pytest.raises(ValueError, match="layer 0"):
        infer_int8_reference(net, {"w": qt(np.ones((1, 2, 1, 1)))},
                             qt(np.ones((1, 2, 2))))


def test_extract_layer_info_basics():
    net = NetworkDesc("t", [LayerDesc(kind="conv2d", in_channels=1, out_channels=1,
                                      kernel_h=3, kernel_w=3, weight_ref="w")],
                      (1, 3, 3))
    (wl,) = extract_layer_info(net)
    assert wl.macs == 9 and wl.weight_bytes == 9 and wl.out_elems == 1


def test_extract_fc_product():
    net = NetworkDesc("t", [LayerDesc(kind="fully_connected", in_channels=120,
                                      out_channels=84, weight_ref="w")],
                      (120, 1, 1))
    (wl,) = extract_layer_info(net)
    assert wl.macs == 10080 and wl.weight_bytes == 10080


def test_lenet5_parameter_count():
    info = extract_layer_info(workloads.lenet5())
    assert sum(wl.weight_bytes for wl in info) == 61470
