"""Symmetric INT8/INT4 post-training quantization and inter-layer requantization.

All integer arithmetic is defined bit-exactly so that the software reference
path and the macro pipeline agree without tolerance. Rounding is
half-away-from-zero throughout; the quantizer output range is [-(2^(b-1)-1),
2^(b-1)-1] so that negation maps representable codes onto representable codes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

INT8_MIN = -128
INT8_MAX = 127


def round_half_away(x: np.ndarray | float) -> np.ndarray:
    """Round half away from zero (np.round would round half to even)."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


@dataclass(frozen=True)
class QuantParams:
    """Affine quantization parameters (symmetric: zero_point == 0)."""

    scale: float
    zero_point: int = 0
    bit_width: int = 8

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if not INT8_MIN <= self.zero_point <= INT8_MAX:
            raise ValueError(f"zero_point {self.zero_point} outside [-128, 127]")
        if self.bit_width not in (4, 8):
            raise ValueError(f"bit_width must be 4 or 8, got {self.bit_width}")

    @property
    def qmax(self) -> int:
        return 2 ** (self.bit_width - 1) - 1

    @property
    def qmin(self) -> int:
        return -self.qmax


@dataclass(frozen=True)
class QuantTensor:
    """Quantized tensor: int8 data in row-major order plus its QuantParams."""

    shape: tuple
    data: np.ndarray = field(repr=False)
    params: QuantParams

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.int8)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        n = int(np.prod(self.shape)) if self.shape else data.size
        if data.size != n:
            raise ValueError(f"data length {data.size} != prod(shape) {n}")

    @property
    def array(self) -> np.ndarray:
        """Data viewed with its logical shape (int8)."""
        return self.data.reshape(self.shape)

    def dequantize(self) -> np.ndarray:
        return dequantize(self)


def quantize_tensor(values, bit_width: int = 8) -> QuantTensor:
    """Symmetric per-tensor quantization.

    scale = max(|values|) / (2^(bit_width-1) - 1), zero_point = 0. An all-zero
    tensor is a documented degenerate case: scale is defined as 1.0 and every
    output code is 0.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("cannot quantize an empty tensor")
    if bit_width not in (4, 8):
        raise ValueError(f"bit_width must be 4 or 8, got {bit_width}")
    qmax = 2 ** (bit_width - 1) - 1
    amax = float(np.max(np.abs(values)))
    scale = amax / qmax if amax > 0 else 1.0
    q = np.clip(round_half_away(values / scale), -qmax, qmax).astype(np.int8)
    return QuantTensor(
        shape=tuple(values.shape),
        data=q.reshape(-1),
        params=QuantParams(scale=scale, zero_point=0, bit_width=bit_width),
    )


def dequantize(t: QuantTensor) -> np.ndarray:
    """Element-wise (q - zero_point) * scale as float64."""
    return (t.array.astype(np.float64) - t.params.zero_point) * t.params.scale


def requantize_accumulator(
    acc,
    in_params: QuantParams,
    w_params: QuantParams,
    out_params: QuantParams,
):
    """Rescale a 32-bit accumulator into the INT8 activation range.

    result = clamp(round(acc * in_scale * w_scale / out_scale), -128, 127)
    with a single folded real multiplier and half-away-from-zero rounding.
    Saturating; accepts scalars or arrays.
    """
    mult = in_params.scale * w_params.scale / out_params.scale
    acc = np.asarray(acc, dtype=np.int64)
    q = np.clip(round_half_away(acc.astype(np.float64) * mult), INT8_MIN, INT8_MAX)
    q = q.astype(np.int8)
    if q.ndim == 0:
        return int(q)
    return q
