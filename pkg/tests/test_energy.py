import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from bladelink import energy as en

pos = st.floats(1e-6, 1e6, allow_nan=False)


def test_energy_examples():
    p = en.EnergyProfile(0.05, 2e6, 0.1, 1e6)
    assert en.energy_no_compression(p, 1e6) == pytest.approx(0.1)
    assert en.energy_no_compression(p, 0) == 0
    assert en.energy_no_compression(p, 2e6) == 2 * en.energy_no_compression(p, 1e6)
    # 0.05*1e6/2e6 + 0.1*1e6/(4*1e6)
    assert en.energy_with_compression(p, 1e6, 4) == pytest.approx(0.025 + 0.025)
    assert en.energy_with_compression(p, 1e6, 1) > en.energy_no_compression(p, 1e6)
    assert en.energy_with_compression(p, 1e6, 1e12) == pytest.approx(0.025, rel=1e-9)


def test_profile_validation():
    with pytest.raises(ValueError):
        en.EnergyProfile(0, 1, 1, 1)


@pytest.mark.parametrize("overhead,expect", [(0.21875, 1.28), (0.0, None), (1.5, None), (1.0, None)])
def test_becr_examples(overhead, expect):
    if overhead == 0:
        p = en.EnergyProfile(1e-300, 1, 1, 1)
        assert en.becr(p) == pytest.approx(1.0)
        return
    p = en.profile_from_overhead(overhead, 0.01, 1e6, 2e6)
    assert p.overhead == pytest.approx(overhead)
    assert en.becr(p) == (None if expect is None else pytest.approx(expect))


def test_pes_examples():
    p = en.profile_from_overhead(1 - 1 / 1.28, 0.01, 1e6, 2e6)
    assert en.pes(p, 2.12) == pytest.approx((1 / 1.28 - 1 / 2.12) * 100)
    assert abs(en.pes(p, 2.12) - 30.9) <= 0.5
    q = en.profile_from_overhead(1 - 1 / 1.35, 0.01, 1e6, 2e6)
    assert abs(en.pes(q, 4.0) - 49.0) <= 0.2
    assert en.pes(p, 1.28) == pytest.approx(0.0, abs=1e-12)
    assert en.pes(p, 1.1) < 0
    with pytest.raises(ValueError):
        en.pes(p, 0.5)


@given(pos, pos, pos, pos, st.floats(1, 1e3))
def test_pes_identity_and_predicate(p_cpr, th_cpr, p_tx, th_tx, cr):
    p = en.EnergyProfile(p_cpr, th_cpr, p_tx, th_tx)
    b = en.becr(p)
    direct = (1 - en.energy_with_compression(p, 1.0, cr) / en.energy_no_compression(p, 1.0)) * 100
    assert en.pes(p, cr) == pytest.approx(direct, rel=1e-12, abs=1e-9)
    if b is not None:
        assert en.pes(p, cr) == pytest.approx((1 / b - 1 / cr) * 100, rel=1e-9, abs=1e-9)
        if abs(cr - b) > 1e-9 * b:
            assert en.is_beneficial(p, cr) == (cr > b)
    else:
        assert not en.is_beneficial(p, cr)


def test_average_power():
    b = en.PowerBudget(32, 0.083, 0.142, 11e-6)
    assert en.average_power(b) == pytest.approx(0.083 * 0.142 + 0.917 * 11e-6)
    assert en.average_power(b) * 1e3 == pytest.approx(11.8, abs=0.05)
    assert en.average_power(en.PowerBudget(32, 1.0, 0.142, 11e-6)) == 0.142
    assert en.average_power(en.PowerBudget(32, 1e-12, 0.142, 11e-6)) == pytest.approx(11e-6, rel=1e-6)


def test_budget_validation():
    with pytest.raises(ValueError):
        en.PowerBudget(32, 0, 0.1)
    with pytest.raises(ValueError):
        en.PowerBudget(32, 0.5, 0.1, 0.2)


def test_lifetime_examples():
    assert en.estimate_lifetime(en.PowerBudget(32, 1.0, 0.0118, 0.0118)) == pytest.approx(113, abs=0.5)
    assert en.estimate_lifetime(en.PowerBudget(32, 1.0, 0.011, 0.011)) == pytest.approx(121.2, abs=0.5)
    assert en.estimate_lifetime(en.PowerBudget(0, 1.0, 0.011)) == 0


@given(st.floats(1e-3, 1), st.floats(0.02, 1), st.floats(1.0001, 2))
def test_lifetime_monotone(dc, active, k):
    base = en.estimate_lifetime(en.PowerBudget(32, dc, active))
    assert en.estimate_lifetime(en.PowerBudget(32, dc, active * k)) < base
    if dc * k <= 1:
        assert en.estimate_lifetime(en.PowerBudget(32, dc * k, active)) < base


def test_self_sustainable_examples():
    budget12 = en.PowerBudget(32, 1.0, 0.012, 0.012)
    ok, _ = en.self_sustainable(en.SolarModel(111, 207e-6, 0.8), budget12)
    assert ok and en.SolarModel(111, 207e-6, 0.8).harvested_power == pytest.approx(18.38e-3, rel=1e-3)
    budget11 = en.PowerBudget(32, 1.0, 0.011, 0.011)
    ok, area = en.self_sustainable(en.SolarModel(111, 27.5e-6, 0.8), budget11)
    assert not ok and area == math.ceil(0.011 / (27.5e-6 * 0.8))
    assert en.SolarModel(111, 27.5e-6, 0.8).harvested_power == pytest.approx(2.442e-3, rel=1e-3)


def test_solar_validation():
    with pytest.raises(ValueError):
        en.SolarModel(margin=0.5)
    with pytest.raises(ValueError):
        en.SolarModel(harvester_efficiency=1.2)


def test_presets():
    for turbine in en.PRESET_OVERHEADS:
        for codec in ("pressure", "fft-hpf", "adpcm"):
            p = en.preset_profile(turbine, codec)
            assert p.overhead == pytest.approx(en.PRESET_OVERHEADS[turbine][codec])
    with pytest.raises(ValueError):
        en.preset_profile("nope")
