"""Behavioral pulse-shrinking TDC: conversion, linearity analytics, PVT stats.

Two converter models share one calibration:

* structural -- walks the delay line: each stage narrows the clock pulse by
  dT(v_mac); the count of stages whose output pulse is still alive is the
  thermometer code, encoded to binary.
* threshold  -- a table of code transition voltages; the fast path used in
  full-network simulation.

Code polarity is fixed: the code decreases as v_mac increases (more discharge
means a larger MAC count means a slower-dying pulse).

Linearity conventions (documented here because they are load-bearing):

* Transition levels are expressed as u = v_hi - v, so the code is a
  non-decreasing staircase in u, with u_0 = 0 as the bottom of the code-0 bin.
* dnl[c], c = 0..2^bits-2: bin width of code c minus one, in LSB units, with
  LSB = (v_hi - v_lo) / 2^bits. Entry c belongs to code c (code 0 included).
* inl[i], i = 0..2^bits-2: deviation of the transition into code i+1 from a
  least-squares line fitted to all transition levels, in LSB units. A
  best-fit line (not an endpoint fit) is used; with it the identity
  inl[c] - inl[c-1] == dnl[c] holds exactly whenever the fitted slope equals
  one LSB per code, which the shipped calibration table is built to satisfy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .analog import AnalogParams

MEASURED_SNDR_DB = 19.45
MEASURED_SFDR_DB = 22.4
MEASURED_TDC_POWER_W = 1.25e-3
MEASURED_TDC_FS_HZ = 1e9


@dataclass(frozen=True, eq=False)
class TdcModel:
    """Converter calibration: window, threshold table, delay-line parameters."""

    resolution_bits: int = 4
    v_lo: float = 0.2
    v_hi: float = 0.8
    thresholds: np.ndarray = field(default=None, repr=False)
    pulse_width_in: float = 1e-9  # TDC_CLK pulse width, seconds

    def __post_init__(self):
        if self.resolution_bits < 1:
            raise ValueError("resolution_bits must be >= 1")
        if not self.v_lo < self.v_hi:
            raise ValueError("v_lo must be below v_hi")
        if self.pulse_width_in <= 0:
            raise ValueError("pulse_width_in must be positive")
        t = self.thresholds
        if t is None:
            t = ideal_thresholds(self.resolution_bits, self.v_lo, self.v_hi)
        t = np.asarray(t, dtype=np.float64)
        if t.size != self.code_max:
            raise ValueError(
                f"{self.code_max} thresholds required for {self.resolution_bits} bits, "
                f"got {t.size}"
            )
        if not np.all(np.diff(t) > 0):
            raise ValueError("thresholds must be strictly ascending")
        if t[0] < self.v_lo or t[-1] > self.v_hi:
            raise ValueError("thresholds must lie within [v_lo, v_hi]")
        object.__setattr__(self, "thresholds", t)

    @property
    def code_max(self) -> int:
        return 2**self.resolution_bits - 1

    @property
    def lsb_volts(self) -> float:
        return (self.v_hi - self.v_lo) / 2**self.resolution_bits

    # delay line: dT rises affinely from pulse_width/2^bits at v_lo to the
    # full pulse width at v_hi, so the code spans code_max..0 over the window
    def delta_t(self, v: float) -> float:
        span = self.v_hi - self.v_lo
        frac = (v - self.v_lo) / span
        dt_lo = self.pulse_width_in / 2**self.resolution_bits
        return dt_lo + (self.pulse_width_in - dt_lo) * frac

    @classmethod
    def ideal(cls, resolution_bits: int = 4, v_lo: float = 0.2,
              v_hi: float = 0.8) -> "TdcModel":
        return cls(resolution_bits=resolution_bits, v_lo=v_lo, v_hi=v_hi,
                   thresholds=ideal_thresholds(resolution_bits, v_lo, v_hi))

    @classmethod
    def from_dnl(cls, dnl, resolution_bits: int = 4, v_lo: float = 0.2,
                 v_hi: float = 0.8) -> "TdcModel":
        return cls(resolution_bits=resolution_bits, v_lo=v_lo, v_hi=v_hi,
                   thresholds=thresholds_from_dnl(dnl, resolution_bits, v_lo, v_hi))

    @classmethod
    def measured(cls) -> "TdcModel":
        """The shipped measured-converter table (reproduces published extrema)."""
        text = (resources.files("tdcim") / "data" /
                "measured_tdc_thresholds.txt").read_text()
        t = parse_thresholds(text)
        return cls(resolution_bits=4, v_lo=0.2, v_hi=0.8, thresholds=t)

    @classmethod
    def for_macro(cls, analog: AnalogParams, resolution_bits: int) -> "TdcModel":
        """Converter matched to a macro's analog swing.

        Thresholds sit halfway between the v_mac levels of consecutive
        weighted counts, so integer counts 0..code_max read back exactly and
        larger counts saturate at code_max (flagged out-of-range low).
        """
        k = analog.volts_per_count
        cmax = 2**resolution_bits - 1
        counts = np.arange(cmax, 0, -1, dtype=np.float64)  # cmax..1
        t = analog.vdd - k * (counts - 0.5)
        return cls(resolution_bits=resolution_bits,
                   v_lo=analog.vdd - k * (cmax + 0.5), v_hi=analog.vdd,
                   thresholds=t)


def ideal_thresholds(bits: int, v_lo: float, v_hi: float) -> np.ndarray:
    lsb = (v_hi - v_lo) / 2**bits
    return v_lo + lsb * np.arange(1, 2**bits)


def parse_thresholds(text: str) -> np.ndarray:
    vals = [float(line) for line in text.splitlines() if line.strip()]
    return np.asarray(vals, dtype=np.float64)


def load_thresholds(path) -> np.ndarray:
    with open(path, "r", encoding="ascii") as fh:
        return parse_thresholds(fh.read())


def save_thresholds(thresholds, path) -> None:
    t = np.asarray(thresholds, dtype=np.float64)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for v in t:
            fh.write(f"{v:.17g}\n")


# ---------------------------------------------------------------------------
# conversion

def convert_structural(v_mac: float, m: TdcModel) -> int:
    """Simulate the delay line; returns the binary code."""
    code, _ = convert_structural_flagged(v_mac, m)
    return code


def convert_structural_flagged(v_mac: float, m: TdcModel):
    if v_mac < 0:
        raise ValueError("v_mac must be non-negative")
    oor = v_mac < m.v_lo or v_mac > m.v_hi
    v = min(max(v_mac, m.v_lo), m.v_hi)
    # stage k output is alive while pulse_width - k*dT > 0; the DFF chain
    # latches one '1' per surviving stage and the encoder counts them
    ratio = m.pulse_width_in / m.delta_t(v)
    alive = int(math.ceil(ratio)) - 1
    return min(max(alive, 0), m.code_max), oor


def convert_threshold(v_mac: float, m: TdcModel) -> int:
    """Threshold-table conversion; agrees with the structural model when the
    table is derived from the same delay-line calibration."""
    code, _ = convert_threshold_flagged(v_mac, m)
    return code


def convert_threshold_flagged(v_mac: float, m: TdcModel):
    if v_mac < 0:
        raise ValueError("v_mac must be non-negative")
    oor = v_mac < m.v_lo or v_mac > m.v_hi
    v = min(max(v_mac, m.v_lo), m.v_hi)
    passed = int(np.searchsorted(m.thresholds, v, side="right"))
    return m.code_max - passed, oor


def convert_batch(v_mac: np.ndarray, m: TdcModel):
    """Vectorized threshold conversion: (codes int32, out_of_range mask)."""
    v = np.asarray(v_mac, dtype=np.float64)
    oor = (v < m.v_lo) | (v > m.v_hi)
    vc = np.clip(v, m.v_lo, m.v_hi)
    codes = m.code_max - np.searchsorted(m.thresholds, vc, side="right")
    return codes.astype(np.int32), oor


def derive_thresholds(m: TdcModel) -> np.ndarray:
    """Code transition voltages implied by the structural delay-line model."""
    dt_lo = m.pulse_width_in / 2**m.resolution_bits
    slope = (m.pulse_width_in - dt_lo) / (m.v_hi - m.v_lo)
    counts = np.arange(m.code_max, 0, -1)  # cmax..1
    dts = m.pulse_width_in / counts  # dT at which exactly `count` stages survive
    return m.v_lo + (dts - dt_lo) / slope


# ---------------------------------------------------------------------------
# linearity analytics

def transition_levels(m: TdcModel) -> np.ndarray:
    """u_c = v_hi - T for each transition into code c, ascending, c = 1..cmax."""
    return (m.v_hi - m.thresholds)[::-1].copy()


def compute_dnl(m: TdcModel) -> np.ndarray:
    """Per-code bin width error in LSB; entry c is code c, c = 0..2^bits-2."""
    u = np.concatenate(([0.0], transition_levels(m)))
    return np.diff(u) / m.lsb_volts - 1.0


def compute_inl(m: TdcModel) -> np.ndarray:
    """Transition-level deviation from the least-squares line, in LSB.

    Entry i corresponds to the transition into code i+1.
    """
    u = transition_levels(m)
    c = np.arange(1, u.size + 1, dtype=np.float64)
    slope, intercept = np.polyfit(c, u, 1)
    return (u - (slope * c + intercept)) / m.lsb_volts


def thresholds_from_dnl(dnl, bits: int, v_lo: float = 0.2,
                        v_hi: float = 0.8) -> np.ndarray:
    """Inverse of compute_dnl: build a threshold table realizing a DNL vector."""
    dnl = np.asarray(dnl, dtype=np.float64)
    cmax = 2**bits - 1
    if dnl.size != cmax:
        raise ValueError(f"need {cmax} DNL entries for {bits} bits, got {dnl.size}")
    lsb = (v_hi - v_lo) / 2**bits
    u = np.cumsum((1.0 + dnl) * lsb)
    if np.any(np.diff(u) <= 0) or np.any(dnl <= -1):
        raise ValueError("DNL vector implies non-ascending thresholds (missing code)")
    if u[-1] >= v_hi - v_lo:
        raise ValueError("DNL vector pushes the last threshold out of the window")
    return (v_hi - u)[::-1].copy()


def compute_fom(power_w: float, sndr_db: float, fs_hz: float) -> float:
    """Walden figure of merit: power / (2^ENOB * fs), ENOB = (SNDR-1.76)/6.02."""
    if power_w <= 0 or fs_hz <= 0:
        raise ValueError("power and sampling rate must be positive")
    enob = (sndr_db - 1.76) / 6.02
    return power_w / (2**enob * fs_hz)


@dataclass(frozen=True)
class ConverterAnalytics:
    dnl: tuple
    inl: tuple
    sndr_db: float
    sfdr_db: float
    enob: float
    fom_fj_per_step: float
    power_w: float
    fs_hz: float

    def to_dict(self) -> dict:
        return {
            "dnl": list(self.dnl),
            "inl": list(self.inl),
            "sndr_db": self.sndr_db,
            "sfdr_db": self.sfdr_db,
            "enob": self.enob,
            "fom_fj_per_step": self.fom_fj_per_step,
            "power_w": self.power_w,
            "fs_hz": self.fs_hz,
        }


def analyze(m: TdcModel, power_w: float = MEASURED_TDC_POWER_W,
            sndr_db: float = MEASURED_SNDR_DB, sfdr_db: float = MEASURED_SFDR_DB,
            fs_hz: float = MEASURED_TDC_FS_HZ) -> ConverterAnalytics:
    """Full converter report. SNDR/SFDR are configuration inputs echoed into
    the record (no spectral simulation at behavioral level)."""
    enob = (sndr_db - 1.76) / 6.02
    return ConverterAnalytics(
        dnl=tuple(compute_dnl(m)),
        inl=tuple(compute_inl(m)),
        sndr_db=sndr_db,
        sfdr_db=sfdr_db,
        enob=enob,
        fom_fj_per_step=compute_fom(power_w, sndr_db, fs_hz) * 1e15,
        power_w=power_w,
        fs_hz=fs_hz,
    )


# ---------------------------------------------------------------------------
# Monte Carlo PVT variation

# calibrated corners: (vdd, temp_C) -> (power mean W, power sigma W,
#                                       stage delay mean s, delay sigma s)
MC_CORNERS = {
    (0.9, 27.0): (334.8e-6, 1.72e-6, 247e-12, 2.68e-12),
    (1.0, 27.0): (432e-6, 2.29e-6, 285e-12, 2.09e-12),
    (1.1, 27.0): (512.37e-6, 2.93e-6, 309.56e-12, 1.79e-12),
    (1.0, 0.0): (430.6e-6, 3.4e-6, 287.5e-12, 2.05e-12),
    (1.0, 100.0): (485.44e-6, 2.13e-6, 279.82e-12, 2.2e-12),
}

_VDD_GRID = (0.9, 1.0, 1.1)
_TEMP_GRID = (0.0, 27.0, 100.0)


def _interp_axis(grid, table, x):
    xs = sorted(grid)
    if x < xs[0] or x > xs[-1]:
        raise ValueError(f"corner value {x} outside calibrated range {xs[0]}..{xs[-1]}")
    hi = next(i for i, g in enumerate(xs) if g >= x)
    if xs[hi] == x:
        return np.asarray(table[xs[hi]])
    lo = hi - 1
    f = (x - xs[lo]) / (xs[hi] - xs[lo])
    return (1 - f) * np.asarray(table[xs[lo]]) + f * np.asarray(table[xs[hi]])


def corner_stats(vdd: float, temp_c: float, interpolate: bool = True):
    """(power_mean, power_sigma, delay_mean, delay_sigma) at a PVT corner.

    Between calibrated corners the voltage and temperature effects combine
    additively around the (1.0 V, 27 C) nominal, each axis linearly
    interpolated: a stated modeling choice.
    """
    key = (float(vdd), float(temp_c))
    if key in MC_CORNERS:
        return MC_CORNERS[key]
    if not interpolate:
        raise ValueError(f"unknown corner {key} and interpolation disabled")
    vtab = {v: MC_CORNERS[(v, 27.0)] for v in _VDD_GRID}
    ttab = {t: MC_CORNERS[(1.0, t)] for t in _TEMP_GRID}
    nominal = np.asarray(MC_CORNERS[(1.0, 27.0)])
    vals = _interp_axis(_VDD_GRID, vtab, vdd) + _interp_axis(_TEMP_GRID, ttab, temp_c) - nominal
    if np.any(vals <= 0):
        raise ValueError(f"interpolated corner {key} produced non-physical values")
    return tuple(vals)


def monte_carlo_pvt(corner, n_samples: int, seed: int, interpolate: bool = True) -> dict:
    """Gaussian process-variation samples of TDC power and stage delay.

    corner: (vdd, temp_c) tuple or dict with 'vdd'/'temp_c'. Deterministic
    for a fixed seed: all samples come from one generator owned by the call,
    so concurrent invocations cannot interleave.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if isinstance(corner, dict):
        vdd, temp = corner["vdd"], corner["temp_c"]
    else:
        vdd, temp = corner
    p_mu, p_sig, d_mu, d_sig = corner_stats(vdd, temp, interpolate)
    rng = np.random.default_rng(seed)
    power = rng.normal(p_mu, p_sig, size=n_samples)
    delay = rng.normal(d_mu, d_sig, size=n_samples)
    return {
        "corner": {"vdd": float(vdd), "temp_c": float(temp)},
        "power_samples": power,
        "delay_samples": delay,
        "stats": {
            "power_mean": float(power.mean()),
            "power_std": float(power.std(ddof=1)),
            "delay_mean": float(delay.mean()),
            "delay_std": float(delay.std(ddof=1)),
            "configured_power_mean": p_mu,
            "configured_power_std": p_sig,
            "configured_delay_mean": d_mu,
            "configured_delay_std": d_sig,
            "n_samples": int(n_samples),
            "seed": int(seed),
        },
    }
