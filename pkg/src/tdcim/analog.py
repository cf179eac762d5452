"""Charge-domain model of the bit-cell array readout.

Each read bitline discharges by a fixed step per coincident (input pulse,
stored 1) hit; the four binary-weighted sampling capacitors of a nibble group
then share charge with the accumulation capacitor, producing the analog MAC
voltage v_mac. With the calibrated discharge step every realizable hit count
stays in the linear region, so v_mac is an exact affine function of the
weighted count W = sum_j 2^j * hits_j down to the full-discharge floor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NIBBLE_BITS = 4
CAP_WEIGHT_SUM = 2**NIBBLE_BITS - 1  # sum of 2^j over the 4 bitline capacitors


@dataclass(frozen=True)
class AnalogParams:
    """Electrical parameters of one bitline group.

    Defaults follow the reference macro: 4 fF unit capacitor, 32 fF
    accumulation capacitor, 1.0 V supply. i_ds/t_dis/c_rbl realize the
    calibrated per-hit discharge step (see `calibrated`).
    """

    vdd: float = 1.0
    i_ds: float = 0.7407407407407407e-6  # A; gives vdd/135 per hit with defaults
    t_dis: float = 40e-12  # s
    c_rbl: float = 4e-15  # F; per-bitline discharge capacitance (parasitics lumped)
    c_unit: float = 4e-15  # F; 1C of the binary-weighted sampler
    c_acc: float = 32e-15  # F
    v_floor: float = 0.2  # V; lowest meaningful v_mac for readout

    def __post_init__(self):
        for name in ("vdd", "i_ds", "t_dis", "c_rbl", "c_unit", "c_acc", "v_floor"):
            if getattr(self, name) <= 0 and name != "t_dis":
                raise ValueError(f"{name} must be strictly positive")
        if self.t_dis < 0:
            raise ValueError("t_dis must be non-negative")
        if self.v_floor >= self.vdd:
            raise ValueError("v_floor must be below vdd")

    @classmethod
    def calibrated(cls, max_hits: int, vdd: float = 1.0, **kw) -> "AnalogParams":
        """Params whose discharge step is vdd/max_hits.

        max_hits is the largest per-bitline hit count the macro can produce
        (active rows x max pulses per input). The worst-case bitline then
        lands exactly at 0 V, so the whole count range is linear and v_mac
        resolves every weighted count.
        """
        if max_hits < 1:
            raise ValueError("max_hits must be >= 1")
        base = cls(vdd=vdd, **kw)
        dv = vdd / max_hits
        i_ds = dv * base.c_rbl / base.t_dis
        return cls(vdd=vdd, i_ds=i_ds, t_dis=base.t_dis, c_rbl=base.c_rbl,
                   c_unit=base.c_unit, c_acc=base.c_acc, v_floor=base.v_floor)

    @property
    def share_cap_total(self) -> float:
        """Total capacitance on the sharing node: 15*c_unit + c_acc."""
        return CAP_WEIGHT_SUM * self.c_unit + self.c_acc

    @property
    def volts_per_count(self) -> float:
        """v_mac drop per unit of weighted count in the linear region."""
        return unit_discharge(self) * self.c_unit / self.share_cap_total


@dataclass(frozen=True)
class BitlineState:
    """One bitline of a nibble group after the multiply phase."""

    weight_bit_index: int  # 0..3; capacitor weight is 2^index * c_unit
    hit_count: int
    voltage: float

    def __post_init__(self):
        if not 0 <= self.weight_bit_index < NIBBLE_BITS:
            raise ValueError("weight_bit_index must be in 0..3")
        if self.hit_count < 0:
            raise ValueError("hit_count must be non-negative")
        if self.voltage < 0:
            raise ValueError("bitline voltage cannot be negative")


def unit_discharge(p: AnalogParams) -> float:
    """Per-hit bitline voltage drop: i_ds * t_dis / c_rbl."""
    return p.i_ds * p.t_dis / p.c_rbl


def bitline_voltage(hit_count: int, p: AnalogParams) -> float:
    """Bitline voltage after hit_count coincident hits, clamped at 0 V."""
    if hit_count < 0:
        raise ValueError("hit_count must be non-negative")
    return max(0.0, p.vdd - hit_count * unit_discharge(p))


def make_bitlines(hit_counts, p: AnalogParams) -> list:
    """BitlineState list for the 4 nibble bit positions, LSB first."""
    if len(hit_counts) != NIBBLE_BITS:
        raise ValueError(f"expected {NIBBLE_BITS} hit counts, got {len(hit_counts)}")
    return [
        BitlineState(j, int(h), bitline_voltage(int(h), p))
        for j, h in enumerate(hit_counts)
    ]


@dataclass(frozen=True)
class ChargeShareResult:
    v_mac: float
    saturated: bool  # some bitline clamped at 0 V: out of the linear regime


def charge_share(bitlines, p: AnalogParams) -> ChargeShareResult:
    """Share the binary-weighted capacitors with c_acc (precharged to vdd).

    v_mac = (sum_j 2^j c_unit V_j + c_acc vdd) / (sum_j 2^j c_unit + c_acc).
    The saturated flag marks conversions where a bitline clamped at 0 V, i.e.
    v_mac no longer encodes the weighted count linearly.
    """
    if len(bitlines) != NIBBLE_BITS:
        raise ValueError(f"expected {NIBBLE_BITS} bitlines, got {len(bitlines)}")
    seen = sorted(b.weight_bit_index for b in bitlines)
    if seen != list(range(NIBBLE_BITS)):
        raise ValueError("need exactly one bitline per nibble bit position")
    charge = p.c_acc * p.vdd
    saturated = False
    dv = unit_discharge(p)
    for b in bitlines:
        charge += (2**b.weight_bit_index) * p.c_unit * b.voltage
        if b.hit_count * dv > p.vdd:
            saturated = True
    return ChargeShareResult(v_mac=charge / p.share_cap_total, saturated=saturated)


def vmac_from_hits(hits: np.ndarray, p: AnalogParams):
    """Vectorized analog chain for the pipeline.

    hits: (..., 4) integer per-bitline hit counts, LSB bit first.
    Returns (v_mac, clamped): v_mac shaped (...,), clamped boolean mask of
    conversions where some bitline left the linear region.
    """
    hits = np.asarray(hits)
    dv = unit_discharge(p)
    v = p.vdd - hits.astype(np.float64) * dv
    clamped = v < 0
    v = np.maximum(v, 0.0)
    weights = (2 ** np.arange(NIBBLE_BITS, dtype=np.float64)) * p.c_unit
    charge = v @ weights + p.c_acc * p.vdd
    return charge / p.share_cap_total, clamped.any(axis=-1)
