"""Minimal CNN graph and a bit-exact integer inference oracle.

The oracle does exact integer convolution/matmul with 32-bit accumulation and
requantizes between layers via `quant`. It is the accuracy reference for the
macro pipeline and the brute-force MAC oracle used throughout the tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quant import QuantParams, QuantTensor, requantize_accumulator

LAYER_KINDS = ("conv2d", "fully_connected", "relu", "maxpool2d", "avgpool2d")

# |acc| <= kh*kw*C*127*127 must stay below 2^31; 9*1024*127*127 = 1.49e8 does.
ACC_DTYPE = np.int32


@dataclass(frozen=True)
class LayerDesc:
    """One layer of the network.

    conv2d / fully_connected carry a weight_ref (and optionally bias_ref and
    an output activation scale); activation and pool layers do not. groups > 1
    expresses depthwise/grouped convolution. For pool layers kernel_h/kernel_w
    are the window size.
    """

    kind: str
    in_channels: int = 1
    out_channels: int = 1
    kernel_h: int = 1
    kernel_w: int = 1
    stride: int = 1
    padding: int = 0
    weight_ref: str | None = None
    bias_ref: str | None = None
    groups: int = 1
    out_scale: float | None = None

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        needs_w = self.kind in ("conv2d", "fully_connected")
        if needs_w and self.weight_ref is None:
            raise ValueError(f"{self.kind} layer requires a weight_ref")
        if not needs_w and self.weight_ref is not None:
            raise ValueError(f"{self.kind} layer must not carry a weight_ref")
        for name in ("in_channels", "out_channels", "kernel_h", "kernel_w", "stride"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.padding < 0:
            raise ValueError("padding must be non-negative")
        if self.in_channels % self.groups or self.out_channels % self.groups:
            raise ValueError("groups must divide in_channels and out_channels")


@dataclass(frozen=True)
class NetworkDesc:
    name: str
    layers: tuple
    input_shape: tuple  # (channels, height, width)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "input_shape", tuple(int(s) for s in self.input_shape))

    def layer_shapes(self) -> list:
        """Shape (c, h, w) at the input of each layer plus the final output."""
        shapes = [self.input_shape]
        for i, layer in enumerate(self.layers):
            shapes.append(_out_shape(layer, shapes[-1], i))
        return shapes


@dataclass(frozen=True)
class LayerWorkload:
    """Per-layer cost summary used by the mapper and the metrics model."""

    index: int
    kind: str
    macs: int
    weight_bytes: int
    out_elems: int
    n_kernels: int = 0
    rows_per_kernel: int = 0  # kh*kw*in_ch/groups; array rows one kernel occupies
    kernel_h: int = 1
    kernel_w: int = 1
    out_shape: tuple = ()


def _out_shape(layer: LayerDesc, in_shape: tuple, index: int) -> tuple:
    c, h, w = in_shape
    if layer.kind in ("relu",):
        return in_shape
    if layer.kind in ("maxpool2d", "avgpool2d"):
        oh = (h + 2 * layer.padding - layer.kernel_h) // layer.stride + 1
        ow = (w + 2 * layer.padding - layer.kernel_w) // layer.stride + 1
        if oh < 1 or ow < 1:
            raise ValueError(f"layer {index}: pool window larger than input {in_shape}")
        return (c, oh, ow)
    if layer.kind == "conv2d":
        if c != layer.in_channels:
            raise ValueError(
                f"layer {index}: expected {layer.in_channels} input channels, got {c}"
            )
        oh = (h + 2 * layer.padding - layer.kernel_h) // layer.stride + 1
        ow = (w + 2 * layer.padding - layer.kernel_w) // layer.stride + 1
        if oh < 1 or ow < 1:
            raise ValueError(f"layer {index}: kernel does not fit input {in_shape}")
        return (layer.out_channels, oh, ow)
    if layer.kind == "fully_connected":
        if c * h * w != layer.in_channels:
            raise ValueError(
                f"layer {index}: fully_connected expects {layer.in_channels} inputs, "
                f"got {c}x{h}x{w}={c * h * w}"
            )
        return (layer.out_channels, 1, 1)
    raise AssertionError(layer.kind)


def _check_weight(layer: LayerDesc, weights: dict, index: int) -> QuantTensor:
    if layer.weight_ref not in weights:
        raise ValueError(f"layer {index}: missing weight tensor {layer.weight_ref!r}")
    w = weights[layer.weight_ref]
    if layer.kind == "conv2d":
        expect = (layer.out_channels, layer.in_channels // layer.groups,
                  layer.kernel_h, layer.kernel_w)
    else:
        expect = (layer.out_channels, layer.in_channels)
    if tuple(w.shape) != expect:
        raise ValueError(
            f"layer {index}: weight {layer.weight_ref!r} has shape {w.shape}, "
            f"expected {expect}"
        )
    return w


def im2col(x: np.ndarray, kh: int, kw: int, stride: int, padding: int) -> np.ndarray:
    """(C,H,W) int array -> (positions, C*kh*kw) patch matrix, zero padded.

    Column order is (c, ky, kx) row-major, matching a (OC, C, kh, kw) weight
    tensor reshaped to (OC, C*kh*kw).
    """
    c, h, w = x.shape
    if padding:
        x = np.pad(x, ((0, 0), (padding, padding), (padding, padding)))
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (w + 2 * padding - kw) // stride + 1
    cols = np.empty((oh * ow, c, kh, kw), dtype=x.dtype)
    for dy in range(kh):
        for dx in range(kw):
            patch = x[:, dy : dy + oh * stride : stride, dx : dx + ow * stride : stride]
            cols[:, :, dy, dx] = patch.reshape(c, -1).T
    return cols.reshape(oh * ow, c * kh * kw)


def conv2d_int(x: np.ndarray, w: np.ndarray, stride: int, padding: int,
               groups: int = 1) -> np.ndarray:
    """Exact integer conv. x: (C,H,W) int, w: (OC, C/groups, kh, kw) int.

    Returns int32 accumulators of shape (OC, OH, OW).
    """
    oc, cg, kh, kw = w.shape
    c = x.shape[0]
    oh = (x.shape[1] + 2 * padding - kh) // stride + 1
    ow = (x.shape[2] + 2 * padding - kw) // stride + 1
    out = np.empty((oc, oh, ow), dtype=ACC_DTYPE)
    ocg = oc // groups
    for g in range(groups):
        xs = x[g * cg : (g + 1) * cg]
        cols = im2col(xs.astype(ACC_DTYPE), kh, kw, stride, padding)
        wm = w[g * ocg : (g + 1) * ocg].reshape(ocg, cg * kh * kw).astype(ACC_DTYPE)
        acc = cols @ wm.T  # (positions, ocg)
        out[g * ocg : (g + 1) * ocg] = acc.T.reshape(ocg, oh, ow)
    return out


def _pool_windows(x: np.ndarray, layer: LayerDesc):
    c, h, w = x.shape
    kh, kw, s, p = layer.kernel_h, layer.kernel_w, layer.stride, layer.padding
    oh = (h + 2 * p - kh) // s + 1
    ow = (w + 2 * p - kw) // s + 1
    for oy in range(oh):
        for ox in range(ow):
            y0, x0 = oy * s - p, ox * s - p
            y1, x1 = min(y0 + kh, h), min(x0 + kw, w)
            y0, x0 = max(y0, 0), max(x0, 0)
            yield oy, ox, x[:, y0:y1, x0:x1]


def maxpool2d_int(x: np.ndarray, layer: LayerDesc) -> np.ndarray:
    c = x.shape[0]
    _, oh, ow = _out_shape(layer, x.shape, -1)
    out = np.empty((c, oh, ow), dtype=x.dtype)
    for oy, ox, win in _pool_windows(x, layer):
        out[:, oy, ox] = win.max(axis=(1, 2))
    return out


def avgpool2d_int(x: np.ndarray, layer: LayerDesc) -> np.ndarray:
    """Integer average pool, half-away-from-zero rounding, pad excluded."""
    c = x.shape[0]
    _, oh, ow = _out_shape(layer, x.shape, -1)
    out = np.empty((c, oh, ow), dtype=x.dtype)
    for oy, ox, win in _pool_windows(x, layer):
        s = win.sum(axis=(1, 2), dtype=np.int64)
        n = win.shape[1] * win.shape[2]
        out[:, oy, ox] = np.sign(s) * ((2 * np.abs(s) + n) // (2 * n))
    return out


def _requant_layer(acc: np.ndarray, layer: LayerDesc, in_params: QuantParams,
                   w_params: QuantParams, bias) -> tuple:
    """Shared accumulator -> int8 activation step (reference and pipeline)."""
    if bias is not None:
        acc = acc + bias.reshape((-1,) + (1,) * (acc.ndim - 1)).astype(np.int64)
    if layer.out_scale is not None:
        out_scale = float(layer.out_scale)
    else:
        # identity multiplier: accumulator is clamped straight into int8
        out_scale = in_params.scale * w_params.scale
    out_params = QuantParams(scale=out_scale, zero_point=0, bit_width=8)
    q = requantize_accumulator(acc, in_params, w_params, out_params)
    return np.asarray(q, dtype=np.int8), out_params


def infer_int8_reference(net: NetworkDesc, weights: dict, input: QuantTensor,
                         biases: dict | None = None) -> QuantTensor:
    """Exact INT8 inference: the deterministic software baseline.

    biases maps bias_ref -> int32 numpy arrays added to the accumulator
    before requantization.
    """
    biases = biases or {}
    if tuple(input.shape) != tuple(net.input_shape):
        raise ValueError(
            f"input shape {input.shape} != network input {net.input_shape}"
        )
    x = input.array.astype(np.int8)
    params = input.params
    shapes = net.layer_shapes()
    for i, layer in enumerate(net.layers):
        if layer.kind == "relu":
            zp = params.zero_point
            x = np.maximum(x, zp).astype(np.int8)
        elif layer.kind == "maxpool2d":
            x = maxpool2d_int(x, layer)
        elif layer.kind == "avgpool2d":
            x = avgpool2d_int(x, layer)
        elif layer.kind == "conv2d":
            w = _check_weight(layer, weights, i)
            acc = conv2d_int(x.astype(ACC_DTYPE), w.array.astype(ACC_DTYPE),
                             layer.stride, layer.padding, layer.groups)
            bias = biases.get(layer.bias_ref) if layer.bias_ref else None
            x, params = _requant_layer(acc, layer, params, w.params, bias)
        elif layer.kind == "fully_connected":
            w = _check_weight(layer, weights, i)
            flat = x.reshape(-1).astype(ACC_DTYPE)
            acc = (w.array.astype(ACC_DTYPE) @ flat).astype(ACC_DTYPE)
            bias = biases.get(layer.bias_ref) if layer.bias_ref else None
            x, params = _requant_layer(acc, layer, params, w.params, bias)
            x = x.reshape(layer.out_channels, 1, 1)
        else:
            raise AssertionError(layer.kind)
        if tuple(x.shape) != shapes[i + 1]:
            raise ValueError(f"layer {i}: produced shape {x.shape}, expected {shapes[i + 1]}")
    return QuantTensor(shape=tuple(x.shape), data=x.reshape(-1), params=params)


def extract_layer_info(net: NetworkDesc, weights: dict | None = None) -> list:
    """Per-layer MAC count, weight bytes, output elements and kernel geometry.

    Weight byte counts come from layer geometry, so shape-only (weight-less)
    networks can be analyzed for design-space sweeps.
    """
    shapes = net.layer_shapes()
    info = []
    for i, layer in enumerate(net.layers):
        oc, oh, ow = shapes[i + 1]
        out_elems = oc * oh * ow
        if layer.kind == "conv2d":
            cg = layer.in_channels // layer.groups
            macs = oh * ow * layer.out_channels * cg * layer.kernel_h * layer.kernel_w
            wb = layer.out_channels * cg * layer.kernel_h * layer.kernel_w
            rows = cg * layer.kernel_h * layer.kernel_w
            info.append(LayerWorkload(i, layer.kind, macs, wb, out_elems,
                                      layer.out_channels, rows,
                                      layer.kernel_h, layer.kernel_w, shapes[i + 1]))
        elif layer.kind == "fully_connected":
            macs = layer.in_channels * layer.out_channels
            info.append(LayerWorkload(i, layer.kind, macs, macs, out_elems,
                                      layer.out_channels, layer.in_channels,
                                      1, 1, shapes[i + 1]))
        else:
            info.append(LayerWorkload(i, layer.kind, 0, 0, out_elems,
                                      out_shape=shapes[i + 1]))
    return info
