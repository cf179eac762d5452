import math

import pytest

from tdcim import workloads
from tdcim.cnn import LayerDesc, NetworkDesc
from tdcim.metrics import (CostParams, calculate_inductor, evaluate,
                           select_macro)
from tdcim.pipeline import make_macro

COST = CostParams.default()
SIZES = (8, 16, 24, 32, 64, 96, 128, 192, 256)


def test_report_internal_consistency():
    net = workloads.lenet5()
    for kb in (8, 64, 256):
        r = evaluate(net, None, make_macro(size_kb=kb), cost=COST)
        assert r.power_w * r.latency_s == pytest.approx(r.energy_j, rel=1e-12)
        eff_ops = r.efficiency_tops_per_w * 1e12
        thr_ops = r.throughput_gops * 1e9
        assert eff_ops * r.power_w == pytest.approx(thr_ops, rel=1e-12)
        assert r.energy_j == pytest.approx(sum(r.energy_terms.values()), rel=1e-12)


def test_zero_layer_network_all_zero_report():
    net = NetworkDesc("empty", [], (1, 4, 4))
    r = evaluate(net, None, make_macro(size_kb=8), cost=COST)
    assert r.energy_j == 0.0 and r.latency_s == 0.0 and r.power_w == 0.0


def test_anchor_throughput_and_efficiency():
    net = workloads.reference_full_utilization()
    r = evaluate(net, None, make_macro(size_kb=16), cost=COST)
    assert abs(r.throughput_gops - 320.0) <= 32.0
    assert abs(r.efficiency_tops_per_w - 38.46) <= 3.846
    assert r.compute_density_tops_per_mm2 == pytest.approx(2.1, rel=1e-6)


def test_energy_monotone_and_trend_bands():
    net = workloads.lenet5()
    reports = [evaluate(net, None, make_macro(size_kb=kb), cost=COST)
               for kb in SIZES]
    e = [r.energy_j for r in reports]
    assert all(b < a for a, b in zip(e, e[1:]))
    ratio = e[SIZES.index(32)] / e[SIZES.index(256)]
    assert 4.0 <= ratio <= 12.0
    powers = [r.power_w for r in reports]
    assert max(powers) / min(powers) <= 1.5


def test_select_single_candidate():
    sel = select_macro(workloads.lenet5(), None, [16], cost=COST)
    assert sel.best_config.capacity_kb == 16
    assert len(sel.table) == 1


def test_select_dominant_candidate_wins():
    # kernel-step counts divide exactly for the anchor workload, so the
    # 16 KB candidate dominates 8 KB on every single energy term
    sel = select_macro(workloads.reference_full_utilization(), None, [8, 16],
                       cost=COST)
    t8, t16 = sel.table
    assert all(t16.energy_terms[k] <= t8.energy_terms[k] for k in t8.energy_terms)
    assert t16.energy_j < t8.energy_j
    assert sel.best_config.capacity_kb == 16


def test_select_argmin_consistency_all_benchmarks():
    for name, build in workloads.BENCHMARKS.items():
        sel = select_macro(build(), None, SIZES, cost=COST)
        assert sel.best_report.energy_j == min(r.energy_j for r in sel.table), name


def test_select_empty_survivors_reports_reasons():
    huge_kernel = NetworkDesc("h", [
        LayerDesc(kind="fully_connected", in_channels=20000, out_channels=1,
                  weight_ref="w"),
    ], (20000, 1, 1))
    with pytest.raises(ValueError, match="8.0 KB"):
        select_macro(huge_kernel, None, [8.0], cost=COST)


def test_inductor_examples():
    cfg = make_macro(size_kb=8)
    # closed-form example: 0.5 GHz, 1 pF
    L = 1.0 / ((2 * math.pi * 0.5e9) ** 2 * 1e-12)
    got = calculate_inductor(cfg, c_wbl_per_line=1e-12 / 256)
    assert got == pytest.approx(L, rel=1e-12)
    assert L == pytest.approx(101.3e-9, rel=0.001)
    # quadrupling C quarters L
    assert calculate_inductor(cfg, c_wbl_per_line=4e-15) == pytest.approx(
        calculate_inductor(cfg, c_wbl_per_line=1e-15) / 4)
    # halving f quadruples L
    assert calculate_inductor(cfg, f_res=0.25e9) == pytest.approx(
        4 * calculate_inductor(cfg, f_res=0.5e9))
    with pytest.raises(ValueError):
        calculate_inductor(cfg, c_wbl_per_line=0.0)


def test_cost_params_file_round_trip(tmp_path):
    path = tmp_path / "costs.txt"
    path.write_text(COST.to_text(), encoding="ascii")
    assert CostParams.from_file(path) == COST


def test_cost_params_rejects_bad_files(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("e_mac_cycle = 1e-15\nwhat = 3\n", encoding="ascii")
    with pytest.raises(ValueError, match="unknown key"):
        CostParams.from_file(path)
    path.write_text("e_mac_cycle = 1e-15\n", encoding="ascii")
    with pytest.raises(ValueError, match="missing keys"):
        CostParams.from_file(path)
