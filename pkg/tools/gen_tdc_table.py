#!/usr/bin/env python3
"""Construct the shipped measured-converter threshold table.

The table is data, not logic: it is built once here and frozen into
src/tdcim/data/measured_tdc_thresholds.txt.

Hard targets:
  * DNL max exactly +0.4 LSB at code 0 (unique), min exactly -0.3 LSB at
    code 7 (unique), every other |DNL| <= 0.3 LSB, no missing codes.
  * INL (least-squares convention) minimum at code 2, maximum at code 12.
  * Least-squares fitted slope exactly one LSB/code, so the cumulative
    identity inl[c] - inl[c-1] == dnl[c] holds exactly on this table.

The published INL magnitudes (-1.0 / +0.5 LSB) are not jointly realizable
with the published DNL band under any linear reference (see
notes/decisions.md); this script solves a linear program for the deepest
feasible INL swing at the published code positions and freezes that table.
"""

import sys
from pathlib import Path

import numpy as np
from scipy.optimize import linprog

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from tdcim import tdc  # noqa: E402

BITS = 4
V_LO, V_HI = 0.2, 0.8
CMAX = 2**BITS - 1  # 15 transition levels
LSB = (V_HI - V_LO) / 2**BITS

DNL_AT_0 = 0.4
DNL_AT_7 = -0.3
STEP_LO, STEP_HI = -0.295, 0.30  # bounds for every other DNL entry
GAP = 0.02  # uniqueness margin for extrema
WINDOW_SLACK = 0.53  # r_15 - r_1 bound keeping the top code bin >= ~2 mV


def solve_profile() -> np.ndarray:
    """LP over INL residuals r_1..r_15 (LSB units), fitted slope = 1."""
    n = CMAX
    c = np.arange(1, n + 1, dtype=float)

    def unit(i):
        e = np.zeros(n)
        e[i] = 1.0
        return e

    A_eq, b_eq = [], []
    A_eq.append(np.ones(n)); b_eq.append(0.0)          # LSQ: residuals sum to 0
    A_eq.append(c - c.mean()); b_eq.append(0.0)        # LSQ: zero first moment
    A_eq.append(unit(7) - unit(6)); b_eq.append(DNL_AT_7)  # the code-7 dip

    A_ub, b_ub = [], []
    for i in range(n - 1):
        step = unit(i + 1) - unit(i)
        if i == 6:
            continue  # pinned by the equality above
        A_ub.append(step); b_ub.append(STEP_HI)          # dnl[i+1] <= 0.30
        A_ub.append(-step); b_ub.append(-STEP_LO)        # dnl[i+1] >= -0.295
    for j in range(n):
        if j != 1:
            A_ub.append(unit(1) - unit(j)); b_ub.append(-GAP)   # r_2 unique min
        if j != 11:
            A_ub.append(unit(j) - unit(11)); b_ub.append(-GAP)  # r_12 unique max
    A_ub.append(unit(14) - unit(0)); b_ub.append(WINDOW_SLACK)

    # objective: deepest INL swing, min and max weighted equally
    cost = unit(1) - unit(11)
    res = linprog(cost, A_ub=np.asarray(A_ub), b_ub=np.asarray(b_ub),
                  A_eq=np.asarray(A_eq), b_eq=np.asarray(b_eq),
                  bounds=[(None, None)] * n, method="highs")
    if not res.success:
        raise RuntimeError(f"profile LP infeasible: {res.message}")
    return res.x


def main() -> int:
    r = solve_profile()
    steps = np.diff(r)
    dnl = np.concatenate(([DNL_AT_0], steps))

    assert abs(dnl[7] - DNL_AT_7) < 1e-9, dnl[7]
    others = np.delete(dnl, [0, 7])
    assert others.min() > DNL_AT_7 + 1e-6, f"dnl[7] not unique min: {others.min()}"
    assert others.max() <= STEP_HI + 1e-9, f"step bound broken: {others.max()}"
    assert dnl[0] == DNL_AT_0 and dnl[0] > others.max() + GAP / 2

    thresholds = tdc.thresholds_from_dnl(dnl, BITS, V_LO, V_HI)
    model = tdc.TdcModel(resolution_bits=BITS, v_lo=V_LO, v_hi=V_HI,
                         thresholds=thresholds)
    dnl_check = tdc.compute_dnl(model)
    inl_check = tdc.compute_inl(model)
    assert np.allclose(dnl_check, dnl, atol=1e-9)
    assert np.allclose(inl_check, r, atol=1e-7), np.abs(inl_check - r).max()
    assert int(np.argmax(dnl_check)) == 0
    assert int(np.argmin(dnl_check)) == 7
    assert int(np.argmin(inl_check)) + 1 == 2
    assert int(np.argmax(inl_check)) + 1 == 12
    assert np.all(np.abs(dnl_check) <= 0.5)
    # cumulative identity (fitted slope == 1 LSB/code by construction)
    assert np.allclose(np.diff(inl_check), dnl_check[1:], atol=1e-9)
    # every code must appear in a 1 mV ramp: every bin at least 2 mV wide
    u = tdc.transition_levels(model)
    widths = np.diff(np.concatenate(([0.0], u, [V_HI - V_LO])))
    assert widths.min() > 2e-3, widths.min()

    out = Path(__file__).resolve().parents[1] / "src" / "tdcim" / "data" / \
        "measured_tdc_thresholds.txt"
    tdc.save_thresholds(thresholds, out)
    print(f"wrote {out}")
    np.set_printoptions(precision=4, suppress=True)
    print("dnl:", dnl_check)
    print("inl:", inl_check)
    print(f"inl extrema: min {inl_check.min():+.4f} @ code "
          f"{np.argmin(inl_check) + 1}, max {inl_check.max():+.4f} @ code "
          f"{np.argmax(inl_check) + 1}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
