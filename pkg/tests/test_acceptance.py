"""Acceptance checks, one per criterion.

Each check records a PASS/FAIL line; the lines are printed at the end of the
pytest run (see conftest.py) and also when this file is executed directly::

    python3 tests/test_acceptance.py
"""

import audioop
import math
import time
import warnings
from dataclasses import replace

import numpy as np
import pytest

from bladelink import synth
from bladelink.adpcm import adpcm_decode, adpcm_encode, payload_ratio, unpack_nibbles
from bladelink.audio import (
    SENTINEL_CODE,
    band_quantize,
    cutoff_bin,
    decode_spectra,
    encode_audio_fft_hpf,
    nominal_payload_ratio,
    step_from_code,
)
from bladelink.codecs import decode_packet, encode_block
from bladelink.core import SampleBlock, compute_raw_bandwidth, default_suite, sample_limits
from bladelink.energy import (
    BATTERY_WH,
    P_95_W_CM2,
    P_MEDIAN_W_CM2,
    PRESET_CR,
    TURBINES,
    PowerBudget,
    SolarModel,
    becr,
    estimate_lifetime,
    pes,
    preset_profile,
    self_sustainable,
)
from bladelink.pressure import estimate_rice_param, rice_code_length
from bladelink.rtpc import (
    ControlEvent,
    ControllerConfig,
    LinkScenario,
    RtpcState,
    boost_update,
    bundled_scenarios,
    load_scenario,
    simulate,
)

RESULTS: list[str] = []
SEED = 20240531


def record(number, name, ok, detail, elapsed=None):
    timing = f" [{elapsed:.2f} s]" if elapsed is not None else ""
    RESULTS.append(f"{'PASS' if ok else 'FAIL'}  {number}. {name}: {detail}{timing}")
    assert ok, detail


def near(value, target, tol):
    return abs(value - target) <= tol


# -- 1 ------------------------------------------------------------------------

def _pressure_block(rng, regime):
    lo, hi = sample_limits(24)
    shape = (40, 512)
    if regime == "constant":
        x = np.broadcast_to(rng.integers(lo, hi + 1, size=(40, 1)), shape)
    elif regime == "ramp":
        start = rng.integers(lo // 2, hi // 2, size=(40, 1))
        slope = rng.integers(-4000, 4001, size=(40, 1))
        x = np.clip(start + slope * np.arange(512), lo, hi)
    elif regime == "noise":
        x = rng.integers(lo, hi + 1, size=shape)
    else:  # max magnitude
        x = rng.choice(np.array([lo, hi]), size=shape)
    return SampleBlock(np.array(x), 24, 100, "pressure")


def test_lossless_round_trip():
    rng = np.random.default_rng(SEED)
    regimes = ("constant", "ramp", "noise", "max")
    blocks = [_pressure_block(rng, regimes[k % 4]) for k in range(1000)]
    t0 = time.perf_counter()
    bad = sum(not np.array_equal(decode_packet(encode_block(b, "pressure-ll")).data, b.data) for b in blocks)
    elapsed = time.perf_counter() - t0
    record(1, "lossless round-trip", bad == 0 and elapsed < 10,
           f"{1000 - bad}/1000 blocks bit-exact over {len(regimes)} regimes", elapsed)


# -- 2 ------------------------------------------------------------------------

def test_rice_near_optimal():
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    worst = 0.0
    parts = []
    for p in (0.9, 0.5, 0.1, 0.01):
        u = rng.geometric(p, size=40 * 512) - 1
        m = estimate_rice_param(u.mean())
        cost = rice_code_length(u, m) / u.size
        best = min(rice_code_length(u, k) for k in range(21)) / u.size
        worst = max(worst, cost - best)
        parts.append(f"p={p}: M={m} +{cost - best:.3f}")
    elapsed = time.perf_counter() - t0
    record(2, "Rice near-optimality", worst <= 0.2 and elapsed < 5,
           f"{'; '.join(parts)} bits/sample (limit 0.2)", elapsed)


# -- 3 ------------------------------------------------------------------------

def test_pes_table():
    small = {c: pes(preset_profile("aventa", c), PRESET_CR[c]) for c in PRESET_CR}
    large = {c: pes(preset_profile("dtu10mw", c), PRESET_CR[c]) for c in PRESET_CR}
    ratios = {c: round(becr(preset_profile("aventa", c)), 2) for c in PRESET_CR}
    ok = (near(small["pressure"], 30.9, 0.5) and near(small["fft-hpf"], 43.9, 0.5)
          and near(small["adpcm"], 49.0, 0.2)
          and ratios == {"pressure": 1.28, "fft-hpf": 1.46, "adpcm": 1.35}
          and near(large["pressure"], 46.1, 0.05) and near(large["fft-hpf"], 65.7, 0.05)
          and near(large["adpcm"], 67.1, 0.05))
    fmt = lambda d: "/".join(f"{d[c]:.1f}" for c in PRESET_CR)  # noqa: E731
    record(3, "energy savings", ok,
           f"small PES {fmt(small)} %, BECR {'/'.join(str(ratios[c]) for c in PRESET_CR)}; large PES {fmt(large)} %")


# -- 4 ------------------------------------------------------------------------

def test_fft_hpf():
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    crs, bound_ok, dropped_ok = [], True, True
    for _ in range(20):
        block = SampleBlock(synth.audio_channels(rng), 24, 16000, "audio")
        packet = encode_audio_fft_hpf(block)
        crs.append(packet.compression_ratio)
        h, spectra = decode_spectra(packet)
        k0 = cutoff_bin(h.n_fft, h.sample_rate, h.cutoff_hz)
        width = 2 * h.band_size
        for c, rec in enumerate(spectra):
            orig = np.fft.rfft(block.data[c].astype(float))
            dropped_ok &= not rec[:k0].any()
            vo = np.column_stack([orig[k0:].real, orig[k0:].imag]).reshape(-1)
            vr = np.column_stack([rec[k0:].real, rec[k0:].imag]).reshape(-1)
            for s in range(0, vo.size, width):
                _, code = band_quantize(vo[s:s + width], h.quant_bits)
                if code == SENTINEL_CODE:
                    dropped_ok &= not vr[s:s + width].any()
                else:
                    bound_ok &= bool((np.abs(vo[s:s + width] - vr[s:s + width]) <= 0.55 * step_from_code(code)).all())
    elapsed = time.perf_counter() - t0
    payload = nominal_payload_ratio(1024, 16000, 100, 24, 4)
    lo, hi = min(crs), max(crs)
    ok = 3.9 <= lo and hi <= 4.1 and near(payload, 4.047, 5e-4) and bound_ok and dropped_ok and elapsed < 10
    record(4, "FFT-HPF", ok,
           f"CR {lo:.3f}..{hi:.3f} over 20 blocks, payload CR {payload:.3f}, "
           f"error<=0.55*step {'yes' if bound_ok else 'no'}, dropped bins zero {'yes' if dropped_ok else 'no'}", elapsed)


# -- 5 ------------------------------------------------------------------------

def _snr(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    return 10 * np.log10((x**2).sum() / ((x - y) ** 2).sum())


def test_adpcm():
    t0 = time.perf_counter()
    x = synth.sine(1024, 1000, 16000, 32767)
    packet = adpcm_encode(SampleBlock(x[None, :], 16, 16000, "audio"))
    y = adpcm_decode(packet).data[0]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DeprecationWarning)
        packed, _ = audioop.lin2adpcm(x.astype("<i2").tobytes(), 2, None)
        ref = np.frombuffer(audioop.adpcm2lin(packed, 2, None)[0], "<i2")
    # the reference codec always starts from predictor 0 / index 0; ours seeds the state,
    # so compare each against the input rather than sample-by-sample
    snr_ours, snr_ref = _snr(x, y), _snr(x, ref)
    cr = payload_ratio(packet)
    elapsed = time.perf_counter() - t0
    record(5, "ADPCM", cr == 4.0 and snr_ours > 20 and snr_ref > 20 and elapsed < 5,
           f"payload CR {cr:.3f}, SNR {snr_ours:.1f} dB (reference codec {snr_ref:.1f} dB)", elapsed)


# -- 6, 7 -----------------------------------------------------------------------

def _budget(turbine):
    return PowerBudget(BATTERY_WH, 0.083, TURBINES[turbine].active_power_w)


def test_lifetime():
    days = {t: estimate_lifetime(_budget(t)) for t in ("aventa", "dtu10mw")}
    sleep_uw = _budget("aventa").sleep_power * 1e6
    ok = (near(days["aventa"], 114, 11.4) and near(days["dtu10mw"], 120, 12.0)
          and round(days["aventa"]) == 113 and round(days["dtu10mw"]) == 119 and near(sleep_uw, 11, 0.5))
    record(6, "battery lifetime", ok,
           f"{days['aventa']:.1f} / {days['dtu10mw']:.1f} days at sleep {sleep_uw:.1f} uW (targets 114 / 120 +-10%)")


def test_self_sustainability():
    cells = {}
    for label, irr in (("median", P_MEDIAN_W_CM2), ("p95", P_95_W_CM2)):
        for t in ("aventa", "dtu10mw"):
            cells[label, t] = self_sustainable(SolarModel(irradiance=irr, harvester_efficiency=0.8), _budget(t))[0]
    ok = all(cells["median", t] for t in TURBINES) and not any(cells["p95", t] for t in TURBINES)
    yn = lambda b: "yes" if b else "no"  # noqa: E731
    record(7, "self-sustainability", ok,
           f"median {yn(cells['median', 'aventa'])}/{yn(cells['median', 'dtu10mw'])}, "
           f"P95 {yn(cells['p95', 'aventa'])}/{yn(cells['p95', 'dtu10mw'])}")


# -- 8 ------------------------------------------------------------------------

def _boost_rules_hold():
    cfg = ControllerConfig()
    cap = cfg.queue_capacity_bits

    def run(state, *events):
        for e in events:
            state = boost_update(state, e, cfg)
        return state

    per_high = run(RtpcState(), ControlEvent("per_report", 0, 0.12)).boost == cfg.boost_normal
    clean = run(RtpcState(boost=4), *[ControlEvent("per_report", 0, 0.02)] * 6).boost == 4 - cfg.boost_decrease
    high = run(RtpcState(queue_level="normal"), ControlEvent("queue_sample", 1.0, 0.6 * cap))
    recheck = run(high, ControlEvent("timer", high.recheck_at))
    queue_high = high.boost == cfg.boost_normal and recheck.boost == 2 * cfg.boost_normal
    critical = run(RtpcState(queue_level="normal"), ControlEvent("queue_sample", 0, 0.9 * cap)).boost == cfg.boost_critical
    low = run(RtpcState(boost=6, queue_level="normal"), ControlEvent("queue_sample", 0, 0.05 * cap)).boost == 6 - cfg.boost_decrease
    return {"per>high": per_high, "clean run": clean, "queue high+recheck": queue_high,
            "queue critical": critical, "queue low": low}


def test_rtpc():
    t0 = time.perf_counter()
    notes, ok = [], True

    s, c = load_scenario("aventa")
    deterministic = simulate(s, c, 10).to_csv() == simulate(s, c, 10).to_csv()
    ok &= deterministic
    notes.append(f"(a) deterministic {'yes' if deterministic else 'no'}")

    ff_cfg = replace(ControllerConfig(), per_high=1.0)
    txs = [simulate(LinkScenario(hub_distance=float(d), shadowing_sigma=0.0), ff_cfg, 2).column("tx_power")[0]
           for d in np.linspace(20, 420, 21)]
    monotone = bool(np.all(np.diff(txs) >= 0))
    ok &= monotone
    notes.append(f"(b) monotone {'yes' if monotone else 'no'} ({txs[0]:.0f}..{txs[-1]:.0f} dBm)")

    rules = _boost_rules_hold()
    ok &= all(rules.values())
    notes.append(f"(c) rules {sum(rules.values())}/5")

    worst_time = 0.0
    for name in bundled_scenarios():
        s, c = load_scenario(name)
        t1 = time.perf_counter()
        rt = simulate(s, c, 30).summary()
        fx = simulate(s, c, 30, "fixed-max").summary()
        worst_time = max(worst_time, time.perf_counter() - t1)
        good = rt["total_radio_energy_j"] <= fx["total_radio_energy_j"] and rt["mean_per"] <= 0.15
        ok &= good
        notes.append(f"(d) {name} {rt['total_radio_energy_j']:.2f} J vs {fx['total_radio_energy_j']:.2f} J, "
                     f"PER {100 * rt['mean_per']:.1f}%")
    ok &= worst_time < 30

    s, c = load_scenario("static-200m")
    near_gp = simulate(s, c, 30).summary()["mean_goodput_bps"]
    far_gp = simulate(LinkScenario(hub_distance=438), c, 30).summary()["mean_goodput_bps"]
    calibrated = near(near_gp, 1.2e6, 0.18e6) and near(far_gp, 850e3, 127.5e3)
    ok &= calibrated
    notes.append(f"calibration {near_gp / 1e3:.0f} kbps @200 m, {far_gp / 1e3:.0f} kbps @438 m")
    record(8, "RTPC", ok, "; ".join(notes), time.perf_counter() - t0)


# -- 9 ------------------------------------------------------------------------

def test_bandwidth():
    suite = default_suite()
    total = compute_raw_bandwidth(suite)
    sub = {e.kind: e.bandwidth for e in suite}
    ok = 4.0e6 <= total <= 4.3e6 and sub["microphone"] == 3_840_000 and sub["barometer"] == 96_000
    record(9, "raw bandwidth", ok,
           f"total {total:,.0f} bps, microphone {sub['microphone']:,.0f}, barometer {sub['barometer']:,.0f}")


if __name__ == "__main__":
    checks = [v for k, v in sorted(globals().items()) if k.startswith("test_")]
    for check in checks:
        try:
            check()
        except AssertionError:
            pass
    for line in sorted(RESULTS, key=lambda s: int(s.split()[1].rstrip("."))):
        print(line)
    raise SystemExit(0 if all(r.startswith("PASS") for r in RESULTS) else 1)
