"""Digital MAC datapath of one macro.

An 8-bit MAC group runs in two clock cycles: cycle 1 applies the input LSB
nibbles against both stored weight nibbles, cycle 2 the input MSB nibbles.
The four TDC codes recombine as

    value = c_LL + (c_LH << 4) + (c_HL << 4) + (c_HH << 8)

which equals the exact integer dot product whenever every per-conversion
weighted count is within the TDC's code range.

Weights are stored sign-magnitude: magnitude nibbles sit in the array, signs
are applied digitally. Rows whose product sign is negative are pulsed in a
separate conversion phase within the same clock cycle (the converter samples
at twice the clock) and their code is subtracted by the accumulator. With the
calibrated discharge step no bitline ever clamps, so v_mac is linear in the
weighted count and counts beyond the code range saturate cleanly at the top
code, raising the conversion's saturation flag.

Concurrency contract: a MacroState is single-writer. MAC calls against the
same stored weights only read the array and may run concurrently across
distinct TDC groups; writeback serializes per output buffer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .analog import AnalogParams, vmac_from_hits
from .cnn import (NetworkDesc, _check_weight, _requant_layer, im2col,
                  maxpool2d_int, avgpool2d_int)
from .quant import QuantTensor
from .tdc import TdcModel, convert_batch

NIBBLE_MAX = 15
ENCODINGS = ("pulse_count", "bit_serial")

DEFAULT_E_WRITE_BIT = 30e-15  # J per bitline flip, conventional driver
DEFAULT_RECYCLE_FRACTION = 0.4  # resonant driver energy returned per write


@dataclass(frozen=True)
class MacroConfig:
    """Geometry, electrical calibration and converter of one macro."""

    rows: int = 256
    cols: int = 256
    banks: int = 1
    clock_hz: float = 0.5e9
    active_rows: int = 9
    input_encoding: str = "pulse_count"
    tdc_bits: int = 4
    ideal_tdc: bool = False
    analog: AnalogParams = None
    tdc: TdcModel = None

    def __post_init__(self):
        if self.cols % 8:
            raise ValueError("cols must be divisible by 8 (8 cells per weight)")
        if self.rows < 1 or self.banks < 1 or self.active_rows < 1:
            raise ValueError("rows, banks and active_rows must be positive")
        if self.input_encoding not in ENCODINGS:
            raise ValueError(f"input_encoding must be one of {ENCODINGS}")
        if self.analog is None:
            object.__setattr__(
                self, "analog", AnalogParams.calibrated(self.max_bitline_hits))
        if self.tdc is None:
            bits = self.effective_tdc_bits
            object.__setattr__(self, "tdc", TdcModel.for_macro(self.analog, bits))
        if self.tdc.resolution_bits != self.effective_tdc_bits:
            raise ValueError("tdc resolution does not match tdc_bits/ideal_tdc")

    @property
    def max_pulses(self) -> int:
        """Largest pulse count one input drives in a cycle."""
        return NIBBLE_MAX if self.input_encoding == "pulse_count" else 1

    @property
    def max_bitline_hits(self) -> int:
        return self.active_rows * self.max_pulses

    @property
    def max_weighted_count(self) -> int:
        """Largest per-conversion weighted count the analog chain can emit."""
        return self.max_bitline_hits * NIBBLE_MAX

    @property
    def effective_tdc_bits(self) -> int:
        if self.ideal_tdc:
            return math.ceil(math.log2(self.max_weighted_count + 1))
        return self.tdc_bits

    @property
    def tdc_count(self) -> int:
        """TDC blocks per bank: one per 4-bitline capacitor group."""
        return self.cols // 4

    @property
    def capacity_bytes(self) -> int:
        return self.rows * self.cols * self.banks // 8

    @property
    def capacity_kb(self) -> float:
        return self.capacity_bytes / 1024

    @property
    def kernel_slots(self) -> int:
        return self.banks * (self.cols // 8)

    @property
    def cycles_per_step(self) -> int:
        """Clock cycles one 8-bit MAC group takes."""
        return 2 if self.input_encoding == "pulse_count" else 8


def make_macro(size_kb: float = 8, tdc_bits: int = 4, ideal_tdc: bool = False,
               encoding: str = "pulse_count", banks: int | None = None,
               rows: int = 256, cols: int = 256, vdd: float = 1.0,
               clock_hz: float = 0.5e9, active_rows: int = 9) -> MacroConfig:
    """Build a macro of `size_kb` out of rows x cols banks."""
    bank_bytes = rows * cols // 8
    if banks is None:
        total = int(size_kb * 1024)
        if total % bank_bytes:
            raise ValueError(
                f"{size_kb} KB is not a whole number of {bank_bytes // 1024} KB banks")
        banks = total // bank_bytes
    cfg = MacroConfig(rows=rows, cols=cols, banks=banks, clock_hz=clock_hz,
                      active_rows=active_rows, input_encoding=encoding,
                      tdc_bits=tdc_bits, ideal_tdc=ideal_tdc,
                      analog=AnalogParams.calibrated(active_rows * (
                          NIBBLE_MAX if encoding == "pulse_count" else 1), vdd=vdd))
    return cfg


def shift_add_recombine(c_ll: int, c_lh: int, c_hl: int, c_hh: int):
    """Nibble partial products -> full product: LL + (LH+HL)<<4 + HH<<8."""
    return c_ll + ((c_lh + c_hl) << 4) + (c_hh << 8)


@dataclass
class MacroState:
    """Array contents after store_weights: kernels plus the output buffer."""

    config: MacroConfig
    kernels: np.ndarray = field(repr=False)  # (n_kernels, kernel_rows) int8
    loaded_bytes: int = 0
    out_buffer: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.out_buffer is None:
            self.out_buffer = np.zeros(0, dtype=np.int8)

    @property
    def n_kernels(self) -> int:
        return self.kernels.shape[0]

    @property
    def kernel_rows(self) -> int:
        return self.kernels.shape[1]


def store_weights(config: MacroConfig, kernels) -> MacroState:
    """Load signed 8-bit kernels, one per 8-column slot, rows stacked.

    kernels: (n_kernels, kernel_rows) int array in [-128, 127]. The single
    initialization pass is counted in loaded_bytes for energy accounting.
    """
    k = np.asarray(kernels)
    if k.ndim != 2:
        raise ValueError("kernels must be a (n_kernels, kernel_rows) matrix")
    if k.min(initial=0) < -128 or k.max(initial=0) > 127:
        raise ValueError("kernel weights must be signed 8-bit")
    n_kernels, kernel_rows = k.shape
    slots = config.kernel_slots
    if n_kernels > slots:
        raise ValueError(
            f"capacity exceeded: {n_kernels} kernels need {n_kernels * 8} columns, "
            f"macro provides {slots * 8} ({config.banks} banks x {config.cols} cols)")
    total_rows = config.rows * config.banks
    if kernel_rows > total_rows:
        raise ValueError(
            f"capacity exceeded: kernel spans {kernel_rows} rows, "
            f"macro provides {total_rows} ({config.banks} banks x {config.rows} rows)")
    return MacroState(config=config, kernels=k.astype(np.int8),
                      loaded_bytes=int(n_kernels * kernel_rows))


@dataclass(frozen=True)
class MacOpResult:
    value: int
    saturated: bool
    cycles: int
    conversions: int


def _nibbles(mag: np.ndarray):
    """uint8 magnitudes -> (lo, hi) nibbles."""
    m = mag.astype(np.uint8)
    return m & 0xF, m >> 4


def _weight_planes(w_signed: np.ndarray):
    """Signed weights -> per-sign nibble bit planes.

    Returns array of shape (2 signs, K, R, 2 groups, 4 bits) where sign 0
    holds magnitudes of positive weights and sign 1 of negative weights.
    """
    mag = np.abs(w_signed.astype(np.int16)).astype(np.uint8)
    lo, hi = _nibbles(mag)
    bits = np.arange(4, dtype=np.uint8)
    planes = np.stack(
        [(lo[..., None] >> bits) & 1, (hi[..., None] >> bits) & 1], axis=-2
    )  # (K, R, 2, 4)
    pos = planes * (w_signed > 0)[..., None, None]
    neg = planes * (w_signed < 0)[..., None, None]
    return np.stack([pos, neg]).astype(np.int64)


def _input_pulse_slices(mags: np.ndarray, encoding: str):
    """Yield (pulse array, shift) per clock cycle. mags: (..., R) uint8."""
    if encoding == "pulse_count":
        lo, hi = _nibbles(mags)
        yield lo.astype(np.int64), 0
        yield hi.astype(np.int64), 4
    else:
        for b in range(8):
            yield ((mags >> b) & 1).astype(np.int64), b


class _ConversionMeter:
    def __init__(self):
        self.fired = 0
        self.clipped = 0

    def rate(self) -> float:
        return self.clipped / self.fired if self.fired else 0.0


def _mac_batch(patches: np.ndarray, w_signed: np.ndarray, config: MacroConfig,
               meter: _ConversionMeter) -> np.ndarray:
    """All-positions MAC of int8 patches (P, R) against kernels (K, R).

    Slices rows into groups of <= active_rows, runs the two-cycle (or
    bit-serial) conversion schedule through the analog + TDC models, and
    returns int64 accumulators (P, K).
    """
    P, R = patches.shape
    K = w_signed.shape[0]
    acc = np.zeros((P, K), dtype=np.int64)
    x = patches.astype(np.int16)
    x_mag = np.abs(x).astype(np.uint8)
    x_sign_neg = x < 0
    planes = _weight_planes(w_signed)  # (2, K, R, 2, 4)
    for lo in range(0, R, config.active_rows):
        rows = slice(lo, min(lo + config.active_rows, R))
        w_pos, w_neg = planes[0][:, rows], planes[1][:, rows]
        has_neg_w = bool(w_neg.any())
        has_neg_x = bool(x_sign_neg[:, rows].any())
        for pulses, shift in _input_pulse_slices(x_mag[:, rows], config.input_encoding):
            p_pos = np.where(x_sign_neg[:, rows], 0, pulses)
            p_neg = np.where(x_sign_neg[:, rows], pulses, 0)
            # product-sign phases: ++/-- add, +-/-+ subtract
            phases = [(p_pos, w_pos, 1)]
            if has_neg_w:
                phases.append((p_pos, w_neg, -1))
            if has_neg_x:
                phases.append((p_neg, w_pos, -1))
                if has_neg_w:
                    phases.append((p_neg, w_neg, 1))
            for pv, wv, sgn in phases:
                hits = np.einsum("pr,krgj->pkgj", pv, wv)
                v, clamped = vmac_from_hits(hits, config.analog)
                codes, oor = convert_batch(v, config.tdc)
                meter.fired += codes.size
                # over-range counts read back as the top code (flagged by the
                # converter); a clamped bitline is also out of the linear regime
                meter.clipped += int((oor | clamped).sum())
                contrib = (codes[..., 0].astype(np.int64) << shift) + (
                    codes[..., 1].astype(np.int64) << (shift + 4))
                acc += sgn * contrib
    return acc


def mac_3x3(state: MacroState, inputs, kernel_index: int,
            row_offset: int = 0) -> MacOpResult:
    """One MAC of up to active_rows inputs against a stored kernel row group.

    inputs are unsigned 8-bit activation magnitudes (signs of activations are
    handled digitally by the network driver, see run_network).
    """
    cfg = state.config
    x = np.asarray(inputs, dtype=np.int64)
    if x.ndim != 1 or x.size > cfg.active_rows:
        raise ValueError(f"expected <= {cfg.active_rows} inputs, got shape {x.shape}")
    if x.min(initial=0) < 0 or x.max(initial=0) > 255:
        raise ValueError("inputs must be unsigned 8-bit magnitudes")
    if not 0 <= kernel_index < state.n_kernels:
        raise ValueError(f"kernel_index {kernel_index} out of range")
    w = state.kernels[kernel_index, row_offset : row_offset + x.size].astype(np.int16)
    if w.size != x.size:
        raise ValueError("row_offset leaves fewer stored rows than inputs")
    meter = _ConversionMeter()
    acc = _mac_batch(x[None, :].astype(np.int16), w[None, :], cfg, meter)
    return MacOpResult(value=int(acc[0, 0]), saturated=meter.clipped > 0,
                       cycles=cfg.cycles_per_step, conversions=meter.fired)


def writeback(result: int, state: MacroState, address: int = 0,
              e_write_bit: float = DEFAULT_E_WRITE_BIT,
              recycle_fraction: float = DEFAULT_RECYCLE_FRACTION) -> float:
    """Write a requantized output into the buffer; returns write energy.

    Dynamic energy is bits_flipped * e_write_bit * (1 - recycle_fraction):
    the resonant driver returns recycle_fraction of the conventional switch
    energy (recycle_fraction = 0 is the conventional-driver baseline).
    """
    if not -128 <= result <= 127:
        raise ValueError("writeback value must be signed 8-bit")
    if not 0 <= recycle_fraction < 1:
        raise ValueError("recycle_fraction must be in [0, 1)")
    if address >= state.out_buffer.size:
        grown = np.zeros(address + 1, dtype=np.int8)
        grown[: state.out_buffer.size] = state.out_buffer
        state.out_buffer = grown
    old = int(state.out_buffer[address]) & 0xFF
    new = int(result) & 0xFF
    flips = bin(old ^ new).count("1")
    state.out_buffer[address] = result
    return flips * e_write_bit * (1 - recycle_fraction)


@dataclass
class RunResult:
    output: QuantTensor
    op_counts: dict
    saturation_rate: float


def run_network(net: NetworkDesc, weights: dict, input: QuantTensor,
                config: MacroConfig, plan=None, biases: dict | None = None) -> RunResult:
    """Full-network inference through the macro pipeline.

    With an ideal-resolution TDC the output is bit-identical to
    cnn.infer_int8_reference; with a narrow TDC, per-conversion weighted
    counts above the code range clip at the top code and the saturation rate
    is reported. The plan (from mapper.map_network) is validated against the
    config and used for cycle accounting.
    """
    if plan is not None:
        if (plan.banks, plan.rows, plan.cols, plan.active_rows) != (
                config.banks, config.rows, config.cols, config.active_rows):
            raise ValueError("mapping plan was built for a different macro geometry")
    biases = biases or {}
    if tuple(input.shape) != tuple(net.input_shape):
        raise ValueError(f"input shape {input.shape} != network input {net.input_shape}")
    x = input.array.astype(np.int8)
    params = input.params
    meter = _ConversionMeter()
    mac_ops = 0
    wb_bits_flipped = 0
    wb_bytes = 0
    loaded_bytes = 0

    for i, layer in enumerate(net.layers):
        if layer.kind == "relu":
            x = np.maximum(x, params.zero_point).astype(np.int8)
            continue
        if layer.kind == "maxpool2d":
            x = maxpool2d_int(x, layer)
            continue
        if layer.kind == "avgpool2d":
            x = avgpool2d_int(x, layer)
            continue
        w = _check_weight(layer, weights, i)
        if layer.kind == "conv2d":
            oc = layer.out_channels
            cg = layer.in_channels // layer.groups
            ocg = oc // layer.groups
            oh = (x.shape[1] + 2 * layer.padding - layer.kernel_h) // layer.stride + 1
            ow = (x.shape[2] + 2 * layer.padding - layer.kernel_w) // layer.stride + 1
            acc = np.empty((oc, oh, ow), dtype=np.int64)
            wm = w.array.reshape(oc, cg * layer.kernel_h * layer.kernel_w)
            for g in range(layer.groups):
                xs = x[g * cg : (g + 1) * cg]
                patches = im2col(xs.astype(np.int16), layer.kernel_h, layer.kernel_w,
                                 layer.stride, layer.padding).astype(np.int8)
                kernels = wm[g * ocg : (g + 1) * ocg]
                loaded_bytes += kernels.size
                part = _mac_batch(patches, kernels, config, meter)
                acc[g * ocg : (g + 1) * ocg] = part.T.reshape(ocg, oh, ow)
            mac_ops += oc * oh * ow * cg * layer.kernel_h * layer.kernel_w
            bias = biases.get(layer.bias_ref) if layer.bias_ref else None
            x, params = _requant_layer(acc, layer, params, w.params, bias)
        elif layer.kind == "fully_connected":
            flat = x.reshape(1, -1).astype(np.int8)
            kernels = w.array
            loaded_bytes += kernels.size
            acc = _mac_batch(flat, kernels, config, meter)[0]
            mac_ops += kernels.size
            bias = biases.get(layer.bias_ref) if layer.bias_ref else None
            x, params = _requant_layer(acc, layer, params, w.params, bias)
            x = x.reshape(layer.out_channels, 1, 1)
        else:
            raise AssertionError(layer.kind)
        # writeback of this layer's outputs into a fresh buffer region
        new_bytes = x.reshape(-1).astype(np.int8)
        wb_bits_flipped += int(np.unpackbits(new_bytes.view(np.uint8)).sum())
        wb_bytes += new_bytes.size

    out = QuantTensor(shape=tuple(x.shape), data=x.reshape(-1), params=params)
    op_counts = {
        "mac_ops": mac_ops,
        "conversions": meter.fired,
        "clipped_conversions": meter.clipped,
        "writeback_bytes": wb_bytes,
        "writeback_bits_flipped": wb_bits_flipped,
        "weight_bytes_loaded": loaded_bytes,
        "latency_cycles": plan.total_latency_cycles if plan is not None else None,
    }
    return RunResult(output=out, op_counts=op_counts, saturation_rate=meter.rate())
