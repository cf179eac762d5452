"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line
(run with `pytest tests/test_acceptance.py -v -s`).

Three sub-checks assert target values that are provably unreachable from
their own companion data; they are implemented exactly as stated and marked
strict-xfail rather than weakened:
  * criterion 4: the INL extrema magnitudes (-1.0 / +0.5 LSB),
  * criterion 5: the 6-bit SAR comparison row (143.2 fJ/step),
  * criterion 9: the 24 KB selection for the small-CNN fixture.
"""

import time

import numpy as np
import pytest

from tdcim import cnn, metrics, tdc, workloads
from tdcim.mapper import map_network
from tdcim.pipeline import (_ConversionMeter, _mac_batch, make_macro,
                            run_network)

SIZES = (8, 16, 24, 32, 64, 96, 128, 192, 256)
COST = metrics.CostParams.default()


def report(num: int, name: str, detail: str = "") -> None:
    print(f"\nACCEPTANCE {num:02d} {name}: PASS {detail}")


# -- 1 -----------------------------------------------------------------------

def test_criterion_01_oracle_equivalence():
    t0 = time.time()
    ideal = make_macro(size_kb=8, ideal_tdc=True)

    # (a) exhaustive single-MAC over all 256 x 256 single-row values
    xs = np.arange(256, dtype=np.int16)
    ws = np.arange(-128, 128, dtype=np.int16)
    meter = _ConversionMeter()
    acc = _mac_batch(xs[:, None], ws[:, None], ideal, meter)
    assert np.array_equal(
        acc, np.multiply.outer(xs.astype(np.int64), ws.astype(np.int64)))

    # (b) >= 1000 random 3x3 multi-channel cases
    rng = np.random.default_rng(1)
    checked = 0
    while checked < 1000:
        channels = int(rng.integers(1, 9))
        batch = 50
        x = rng.integers(0, 256, size=(batch, 9 * channels)).astype(np.int16)
        w = rng.integers(-128, 128, size=(batch, 9 * channels)).astype(np.int16)
        for i in range(batch):
            got = _mac_batch(x[i : i + 1], w[i : i + 1], ideal, meter)[0, 0]
            assert got == int(np.dot(x[i].astype(np.int64), w[i].astype(np.int64)))
        checked += batch
    elapsed = time.time() - t0
    assert elapsed < 60
    report(1, "oracle equivalence",
           f"(65,536 exhaustive + {checked} random cases, {elapsed:.1f}s)")


# -- 2 -----------------------------------------------------------------------

def test_criterion_02_in_range_4bit_equivalence():
    t0 = time.time()
    cfg4 = make_macro(size_kb=8, tdc_bits=4)
    ideal = make_macro(size_kb=8, ideal_tdc=True)
    rng = np.random.default_rng(2)
    checked = 0
    while checked < 1000:
        x = rng.integers(0, 4, size=9)
        w = rng.integers(-5, 6, size=9)
        pos = int(np.dot(x, np.where(w > 0, w, 0)))
        neg = int(np.dot(x, np.where(w < 0, -w, 0)))
        if pos > 15 or neg > 15:
            continue  # constructed so every per-conversion count <= 15
        m4, mi = _ConversionMeter(), _ConversionMeter()
        a4 = _mac_batch(x[None, :].astype(np.int16), w[None, :].astype(np.int16),
                        cfg4, m4)[0, 0]
        ai = _mac_batch(x[None, :].astype(np.int16), w[None, :].astype(np.int16),
                        ideal, mi)[0, 0]
        assert a4 == ai == int(np.dot(x, w))
        assert m4.clipped == 0
        checked += 1
    elapsed = time.time() - t0
    assert elapsed < 60
    report(2, "in-range 4-bit equivalence", f"({checked} cases, {elapsed:.1f}s)")


# -- 3 -----------------------------------------------------------------------

def test_criterion_03_tdc_transfer_properties():
    m = tdc.TdcModel.ideal(4)
    ramp = np.arange(0.2, 0.8 + 1e-12, 1e-3)
    codes, _ = tdc.convert_batch(ramp, m)
    assert np.all(np.diff(codes) <= 0)
    assert set(codes.tolist()) == set(range(16))

    struct = tdc.TdcModel(resolution_bits=4,
                          thresholds=tdc.derive_thresholds(m))
    rng = np.random.default_rng(3)
    vs = rng.uniform(0.2, 0.8, size=10_000)
    th, _ = tdc.convert_batch(vs, struct)
    st = np.array([tdc.convert_structural(float(v), struct) for v in vs])
    assert np.array_equal(th, st)
    report(3, "TDC transfer properties",
           "(monotone 1 mV ramp, all 16 codes, structural == threshold on 10k)")


# -- 4 -----------------------------------------------------------------------

def test_criterion_04_dnl_golden_values():
    m = tdc.TdcModel.measured()
    dnl = tdc.compute_dnl(m)
    assert int(np.argmax(dnl)) == 0 and abs(dnl[0] - 0.4) <= 0.01
    assert int(np.argmin(dnl)) == 7 and abs(dnl[7] + 0.3) <= 0.01
    inl = tdc.compute_inl(m)
    assert int(np.argmin(inl)) + 1 == 2
    assert int(np.argmax(inl)) + 1 == 12
    back = tdc.compute_dnl(tdc.TdcModel.from_dnl(dnl, 4))
    assert np.max(np.abs(back - dnl)) <= 1e-9
    report(4, "DNL golden values + INL extrema positions",
           f"(DNL {dnl[0]:+.3f}@0 / {dnl[7]:+.3f}@7, round-trip "
           f"{np.max(np.abs(back - dnl)):.1e} LSB; INL extrema at codes 2/12)")


@pytest.mark.xfail(strict=True, reason=(
    "target INL magnitudes (-1.0 LSB at code 2, +0.5 LSB at code 12) are "
    "unrealizable from any threshold table whose DNL lies in [-0.3, +0.4] "
    "LSB, under every linear reference convention; the shipped table attains "
    "the deepest feasible swing at the target code positions"))
def test_criterion_04_inl_golden_magnitudes():
    m = tdc.TdcModel.measured()
    inl = tdc.compute_inl(m)
    assert abs(inl[2 - 1] + 1.0) <= 0.01
    assert abs(inl[12 - 1] - 0.5) <= 0.01


# -- 5 -----------------------------------------------------------------------

def test_criterion_05_fom_arithmetic():
    fom = tdc.compute_fom(1.25e-3, 19.45, 1e9)
    assert abs(fom - 162.8e-15) <= 0.01 * 162.8e-15
    apccas = tdc.compute_fom(4.27e-3, 54.69, 0.5e9)
    assert abs(apccas - 19.29e-15) <= 0.02 * 19.29e-15
    rfic = tdc.compute_fom(83.4e-3, 38.4, 8.8e9)
    assert abs(rfic - 139.5e-15) <= 0.02 * 139.5e-15
    report(5, "Walden FoM arithmetic",
           f"(this work {fom * 1e15:.1f}, prior art {apccas * 1e15:.2f} / "
           f"{rfic * 1e15:.1f} fJ/step)")


@pytest.mark.xfail(strict=True, reason=(
    "the 6-bit SAR comparison row is internally inconsistent: its stated "
    "67 dB SNDR exceeds the 6-bit bound, and its row data give 12.5 fJ/step "
    "under the Walden formula, not the stated 143.2 fJ/step"))
def test_criterion_05_fom_sar_row():
    esscirc = tdc.compute_fom(32e-3, 67.0, 1.4e9)
    assert abs(esscirc - 143.2e-15) <= 0.02 * 143.2e-15


# -- 6 -----------------------------------------------------------------------

def test_criterion_06_monte_carlo_statistics():
    t0 = time.time()
    corners = [(0.9, 27.0), (1.0, 27.0), (1.1, 27.0),
               (1.0, 0.0), (1.0, 27.0), (1.0, 100.0)]
    for corner in corners:
        mc = tdc.monte_carlo_pvt(corner, 2000, seed=42)
        s = mc["stats"]
        assert abs(s["power_mean"] - s["configured_power_mean"]) <= \
            4 * s["configured_power_std"] / np.sqrt(2000)
        assert abs(s["delay_mean"] - s["configured_delay_mean"]) <= \
            4 * s["configured_delay_std"] / np.sqrt(2000)
        again = tdc.monte_carlo_pvt(corner, 2000, seed=42)
        assert np.array_equal(mc["power_samples"], again["power_samples"])
    elapsed = time.time() - t0
    assert elapsed < 10
    report(6, "Monte Carlo statistics",
           f"(6 corners x 2000 samples, 4-sigma z-test, {elapsed:.1f}s)")


# -- 7 -----------------------------------------------------------------------

def test_criterion_07_reference_anchors():
    net = workloads.reference_full_utilization()
    r = metrics.evaluate(net, None, make_macro(size_kb=16), cost=COST)
    assert abs(r.throughput_gops - 320.0) <= 0.10 * 320.0
    assert abs(r.efficiency_tops_per_w - 38.46) <= 0.10 * 38.46
    report(7, "reference throughput/efficiency anchors",
           f"({r.throughput_gops:.1f} GOPS, {r.efficiency_tops_per_w:.2f} TOPS/W)")


# -- 8 -----------------------------------------------------------------------

def test_criterion_08_trend_reproduction():
    t0 = time.time()
    net = workloads.lenet5()
    reports = [metrics.evaluate(net, None, make_macro(size_kb=kb), cost=COST)
               for kb in SIZES]
    energy = [r.energy_j for r in reports]
    assert all(b <= a for a, b in zip(energy, energy[1:]))  # (a)
    ratio = energy[SIZES.index(32)] / energy[SIZES.index(256)]
    assert 4.0 <= ratio <= 12.0  # (b)
    cyc = [r.latency_cycles for r in reports]
    reduction = 1 - cyc[SIZES.index(24)] / cyc[SIZES.index(8)]
    assert 0.55 <= reduction <= 0.85  # (c)
    powers = [r.power_w for r in reports]
    flat = max(powers) / min(powers)
    assert flat <= 1.5  # (d)
    elapsed = time.time() - t0
    assert elapsed < 60
    report(8, "size-sweep trends",
           f"(energy monotone; 32->256 KB ratio {ratio:.2f}x; 8->24 KB latency "
           f"-{reduction * 100:.0f}%; power max/min {flat:.2f})")


# -- 9 -----------------------------------------------------------------------

def test_criterion_09_selection_argmin_consistency():
    for name, build in workloads.BENCHMARKS.items():
        sel = metrics.select_macro(build(), None, SIZES, cost=COST)
        energies = [r.energy_j for r in sel.table]
        assert sel.best_report.energy_j == min(energies), name
    report(9, "selection == argmin of the metrics table",
           f"({len(workloads.BENCHMARKS)} benchmark workloads)")


@pytest.mark.xfail(strict=True, reason=(
    "jointly infeasible with criterion 8: flat power (max/min <= 1.5) and "
    "latency strictly decreasing in size force energy = power x latency to "
    "keep decreasing, so the energy argmin is always the largest candidate; "
    "a 24 KB optimum cannot coexist with the criterion-8 sweep trends"))
def test_criterion_09_small_cnn_picks_24kb():
    sel = metrics.select_macro(workloads.lenet5(), None, SIZES, cost=COST)
    assert sel.best_config.capacity_kb == 24


# -- 10 ----------------------------------------------------------------------

def test_criterion_10_classification_agreement(lenet_model, mnist100):
    t0 = time.time()
    net, weights, biases = lenet_model
    images, labels = mnist100
    cfg4 = make_macro(size_kb=8, tdc_bits=4)
    plan = map_network(net, cfg4)
    agree = 0
    correct = 0
    for x, label in zip(images, labels):
        ref = cnn.infer_int8_reference(net, weights, x, biases)
        res = run_network(net, weights, x, cfg4, plan, biases)
        a = int(np.argmax(ref.array.reshape(-1)))
        b = int(np.argmax(res.output.array.reshape(-1)))
        agree += a == b
        correct += b == label
    elapsed = time.time() - t0
    assert agree >= 99
    assert elapsed < 120
    report(10, "narrow-TDC classification agreement",
           f"({agree}/100 agree with software INT8, {correct}/100 correct, "
           f"{elapsed:.0f}s)")
