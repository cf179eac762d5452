import numpy as np
import pytest

from tdcim.analog import (AnalogParams, bitline_voltage,
                          charge_share, make_bitlines, unit_discharge,
                          vmac_from_hits)

EX = AnalogParams(vdd=1.0, i_ds=1e-6, t_dis=40e-12, c_rbl=1e-15)


def test_unit_discharge_arithmetic():
    assert unit_discharge(EX) == pytest.approx(0.040)


def test_unit_discharge_zero_window():
    p = AnalogParams(i_ds=1e-6, t_dis=0.0, c_rbl=1e-15)
    assert unit_discharge(p) == 0.0


def test_unit_discharge_linearity():
    p2 = AnalogParams(vdd=1.0, i_ds=2e-6, t_dis=40e-12, c_rbl=1e-15)
    assert unit_discharge(p2) == pytest.approx(2 * unit_discharge(EX))


def test_bitline_no_hits_stays_at_vdd():
    assert bitline_voltage(0, EX) == EX.vdd


def test_bitline_nine_hits():
    assert bitline_voltage(9, EX) == pytest.approx(0.64)


def test_bitline_monotone_discharge():
    v = [bitline_voltage(n, EX) for n in range(10)]
    assert all(b <= a for a, b in zip(v, v[1:]))


def test_bitline_clamps_at_zero():
    assert bitline_voltage(100, EX) == 0.0


def test_charge_share_all_at_vdd():
    res = charge_share(make_bitlines([0, 0, 0, 0], EX), EX)
    assert res.v_mac == pytest.approx(EX.vdd)
    assert not res.saturated


def test_charge_share_single_lsb_hit():
    res = charge_share(make_bitlines([1, 0, 0, 0], EX), EX)
    assert res.v_mac == pytest.approx(1 - (4e-15 * 0.04) / 92e-15)


def brute_force_vmac(hits, p):
    """Charge-bookkeeping oracle: sum Q over all five capacitors, divide by C."""
    q = 0.0
    c = 0.0
    for j, h in enumerate(hits):
        cap = (2**j) * p.c_unit
        v = max(0.0, p.vdd - h * unit_discharge(p))
        q += cap * v
        c += cap
    q += p.c_acc * p.vdd
    c += p.c_acc
    return q / c


def test_weighted_sum_equivalence_against_charge_oracle():
    rng = np.random.default_rng(17)
    dv = unit_discharge(EX)
    for _ in range(200):
        hits = rng.integers(0, 6, size=4)
        res = charge_share(make_bitlines(hits, EX), EX)
        assert res.v_mac == pytest.approx(brute_force_vmac(hits, EX), abs=1e-15)
        w = int(np.dot(hits, [1, 2, 4, 8]))
        # affine in the weighted count while no bitline clamps
        assert EX.vdd - res.v_mac == pytest.approx(w * dv * EX.c_unit / 92e-15)


def test_charge_conservation():
    hits = [3, 1, 4, 2]
    res = charge_share(make_bitlines(hits, EX), EX)
    q_before = EX.c_acc * EX.vdd + sum(
        (2**j) * EX.c_unit * bitline_voltage(h, EX) for j, h in enumerate(hits))
    q_after = res.v_mac * EX.share_cap_total
    assert abs(q_before - q_after) <= 1e-18


def test_saturation_flag_on_clamped_bitline():
    res = charge_share(make_bitlines([40, 0, 0, 0], EX), EX)  # 40*40mV > vdd
    assert res.saturated


def test_calibrated_discharge_keeps_worst_case_linear():
    p = AnalogParams.calibrated(max_hits=135)
    assert unit_discharge(p) == pytest.approx(1.0 / 135)
    assert bitline_voltage(135, p) == pytest.approx(0.0, abs=1e-12)
    # one count of weighted swing per volts_per_count
    assert p.volts_per_count == pytest.approx(unit_discharge(p) * 4 / 92)


def test_vmac_from_hits_matches_scalar_path():
    p = AnalogParams.calibrated(max_hits=135)
    rng = np.random.default_rng(2)
    hits = rng.integers(0, 136, size=(50, 4))
    v, clamped = vmac_from_hits(hits, p)
    for i in range(50):
        res = charge_share(make_bitlines(hits[i], p), p)
        assert v[i] == pytest.approx(res.v_mac, abs=1e-15)
        assert bool(clamped[i]) == res.saturated


def test_param_validation():
    with pytest.raises(ValueError):
        AnalogParams(vdd=-1.0)
    with pytest.raises(ValueError):
        AnalogParams(v_floor=1.5)
    with pytest.raises(ValueError):
        charge_share(make_bitlines([0, 0, 0, 0], EX)[:3], EX)
