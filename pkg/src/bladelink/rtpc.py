"""Real-time transmission power control over a rotating-blade radio link.

The node hears the base station (fixed 20 dBm) and, by channel
reciprocity, estimates the RSSI its own packets will arrive with.  It picks
the smallest TX power that lands the base-station RSSI on a target, after
low-pass filtering its RSSI readings.  A non-negative boost is added to
the target when the base station reports packet loss or the transmit queue
backs up, and removed again once the link is clean.

The simulator is a deterministic discrete-event loop over BLE connection
events plus queue recheck timers.
"""

from __future__ import annotations

import csv
import heapq
import io
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .kvconfig import check_keys, load_kv, parse_kv

BASE_TX_DBM = 20.0
TRACE_COLUMNS = ("t", "distance", "rssi_aero", "filtered", "tx_power", "boost", "per", "goodput", "radio_energy")


@dataclass(frozen=True)
class LinkScenario:
    hub_distance: float = 200.0  # m
    rotor_radius: float = 0.0  # m
    rot_speed: float = 0.0  # rpm
    path_loss_exponent: float = 2.0
    reference_loss: float = 55.34  # dB at 1 m
    shadowing_sigma: float = 1.0  # dB
    base_tx_power: float = BASE_TX_DBM  # dBm
    base_antenna_gain: float = 17.5  # dBi
    phy_rate: float = 2.0e6  # bit/s
    protocol_efficiency: float = 0.6
    connection_interval: float = 0.02  # s
    rng_seed: int = 1
    per_midpoint: float = -72.0  # dBm
    per_slope: float = 1.5  # dB
    packet_bits: int = 2008
    offered_load: float = 1.0e6  # bit/s

    def __post_init__(self):
        if self.hub_distance <= 0:
            raise ConfigError("hub_distance must be positive")
        if not 0 <= self.rotor_radius < self.hub_distance:
            raise ConfigError("rotor_radius must lie in [0, hub_distance)")
        if not 0 < self.protocol_efficiency <= 1:
            raise ConfigError("protocol_efficiency must lie in (0, 1]")
        if self.phy_rate <= 0 or self.connection_interval <= 0 or self.packet_bits <= 0:
            raise ConfigError("phy_rate, connection_interval and packet_bits must be positive")
        if self.per_slope <= 0:
            raise ConfigError("per_slope must be positive")
        if self.shadowing_sigma < 0 or self.offered_load < 0 or self.rot_speed < 0:
            raise ConfigError("shadowing_sigma, offered_load and rot_speed must be non-negative")

    @property
    def event_rate(self) -> float:
        return 1.0 / self.connection_interval

    @property
    def packets_per_event(self) -> int:
        return max(1, round(self.phy_rate * self.protocol_efficiency * self.connection_interval / self.packet_bits))


# piecewise-linear radio supply power (W) versus TX power (dBm)
DEFAULT_POWER_MAP = ((-20.0, 0.0060), (0.0, 0.0090), (5.0, 0.0140), (10.0, 0.0260), (15.0, 0.0520), (20.0, 0.1100))


@dataclass(frozen=True)
class ControllerConfig:
    rx_target: float = -66.0  # dBm
    per_high: float = 0.10
    per_low: float = 0.05
    low_events: int = 6
    queue_capacity_bits: float = 256 * 1024 * 8
    queue_low: float = 0.10
    queue_high: float = 0.50
    queue_critical: float = 0.85
    boost_normal: float = 4.0  # dB
    boost_critical: float = 8.0
    boost_decrease: float = 2.0
    max_boost: float = 40.0
    recheck_delay: float = 0.100  # s
    filter_cutoff: float = 1.0  # Hz
    min_tx: float = -20.0  # dBm
    max_tx: float = 20.0
    power_grid: float = 1.0  # dB
    power_map: tuple = DEFAULT_POWER_MAP

    def __post_init__(self):
        if not self.per_low < self.per_high:
            raise ConfigError("per_low must be below per_high")
        if not self.queue_low < self.queue_high < self.queue_critical:
            raise ConfigError("queue thresholds must satisfy low < high < critical")
        if self.low_events < 1 or self.recheck_delay <= 0 or self.power_grid <= 0:
            raise ConfigError("low_events, recheck_delay and power_grid must be positive")
        if not self.min_tx < self.max_tx:
            raise ConfigError("min_tx must be below max_tx")
        if min(self.boost_normal, self.boost_critical, self.boost_decrease, self.max_boost) < 0:
            raise ConfigError("boost steps must be non-negative")

    def radio_power(self, tx_dbm: float) -> float:
        xs, ys = zip(*self.power_map)
        return float(np.interp(tx_dbm, xs, ys))


# -- link model -----------------------------------------------------------------

def instantaneous_distance(scenario: LinkScenario, t: float) -> float:
    """Base station to a point circling the hub in the plane containing the link.

    The base station sits ``hub_distance`` from the hub; the point's angle
    advances at the rotor speed, so the distance swings between
    ``hub_distance - rotor_radius`` and ``hub_distance + rotor_radius``.
    """
    theta = 2 * math.pi * scenario.rot_speed / 60.0 * t
    r, d = scenario.rotor_radius, scenario.hub_distance
    return math.hypot(d - r * math.cos(theta), r * math.sin(theta))


def path_gain(scenario: LinkScenario, distance: float) -> float:
    """Antenna gains minus log-distance path loss, dB."""
    if distance <= 0:
        raise ValueError("distance must be positive")
    return scenario.base_antenna_gain - scenario.reference_loss - 10 * scenario.path_loss_exponent * math.log10(distance)


def rx_power(scenario: LinkScenario, tx_power: float, distance: float, rng: np.random.Generator | None = None) -> float:
    shadow = rng.normal(0.0, scenario.shadowing_sigma) if rng is not None else 0.0
    return tx_power + path_gain(scenario, distance) + shadow


def per_from_rssi(rssi: float, midpoint: float = -72.0, slope: float = 1.5) -> float:
    if slope <= 0:
        raise ValueError("slope must be positive")
    z = (rssi - midpoint) / slope
    if z > 700:
        return 0.0
    return 1.0 / (1.0 + math.exp(z))


def estimate_base_rssi(rssi_aero: float, tx_aero: float) -> float:
    """Reciprocity estimate of the base station's RSSI for a node TX power."""
    return rssi_aero + tx_aero - BASE_TX_DBM


# -- RSSI filter ----------------------------------------------------------------

@dataclass
class Biquad:
    """Second-order section, transposed direct form II, normalized a0 = 1."""

    b: tuple[float, float, float]
    a: tuple[float, float]
    z1: float = 0.0
    z2: float = 0.0

    def reset(self, value: float) -> None:
        """Put the filter in steady state for a constant input ``value``."""
        b0, b1, b2 = self.b
        a1, a2 = self.a
        y = value * (b0 + b1 + b2) / (1 + a1 + a2)
        self.z2 = b2 * value - a2 * y
        self.z1 = b1 * value - a1 * y + self.z2

    def step(self, x: float) -> float:
        b0, b1, b2 = self.b
        a1, a2 = self.a
        y = b0 * x + self.z1
        self.z1 = b1 * x - a1 * y + self.z2
        self.z2 = b2 * x - a2 * y
        return y

    def response(self, freq: float, fs: float) -> complex:
        z = np.exp(-2j * np.pi * freq / fs)
        b0, b1, b2 = self.b
        a1, a2 = self.a
        return complex((b0 + b1 * z + b2 * z * z) / (1 + a1 * z + a2 * z * z))


def butterworth_lowpass(cutoff: float, fs: float) -> Biquad:
    """Second-order Butterworth low-pass by the bilinear transform with prewarping."""
    if not 0 < cutoff < fs / 2:
        raise ConfigError(f"cutoff {cutoff} Hz is invalid at an event rate of {fs} Hz")
    k = math.tan(math.pi * cutoff / fs)
    norm = 1.0 / (1.0 + math.sqrt(2.0) * k + k * k)
    b0 = k * k * norm
    return Biquad((b0, 2 * b0, b0), (2 * (k * k - 1) * norm, (1 - math.sqrt(2.0) * k + k * k) * norm))


def iir_step(filt: Biquad, sample: float) -> float:
    return filt.step(sample)


# -- controller -----------------------------------------------------------------

@dataclass(frozen=True)
class RtpcState:
    filtered_rssi: float = -60.0
    boost: float = 0.0
    queue_bits: float = 0.0
    tx_power: float = BASE_TX_DBM
    per_window: tuple[float, ...] = ()
    queue_level: str = "low"  # low | normal | high | critical
    recheck_at: float | None = None


@dataclass(frozen=True)
class ControlEvent:
    kind: str  # per_report | queue_sample | timer
    time: float = 0.0
    value: float = 0.0


def select_tx_power(state: RtpcState, config: ControllerConfig) -> float:
    """Smallest grid power putting the estimated base-station RSSI at target + boost."""
    need = config.rx_target + state.boost + BASE_TX_DBM - state.filtered_rssi
    grid = config.power_grid
    # tolerance keeps exact grid values from rounding up a step
    need = math.ceil(need / grid - 1e-9) * grid
    return min(config.max_tx, max(config.min_tx, need))


def _queue_level(fraction: float, config: ControllerConfig) -> str:
    if fraction > config.queue_critical:
        return "critical"
    if fraction > config.queue_high:
        return "high"
    if fraction < config.queue_low:
        return "low"
    return "normal"


def boost_update(state: RtpcState, event: ControlEvent, config: ControllerConfig) -> RtpcState:
    """Apply one controller rule.

    * PER report above ``per_high``: boost up by the normal step.
    * ``low_events`` consecutive reports below ``per_low``: boost down.
    * queue crossing above the high threshold: boost up, recheck later;
      crossing above the critical threshold: boost up by the critical step.
    * recheck with the queue still above high: boost up again and re-arm.
    * queue sinking below the low threshold: boost down.
    """
    boost = state.boost
    window = state.per_window
    level = state.queue_level
    recheck = state.recheck_at
    queue = state.queue_bits

    if event.kind == "per_report":
        per = event.value
        if per > config.per_high:
            boost += config.boost_normal
            window = ()
        elif per < config.per_low:
            window = (window + (per,))[-config.low_events:]
            if len(window) >= config.low_events:
                boost -= config.boost_decrease
                window = ()
        else:
            window = ()
    elif event.kind == "queue_sample":
        queue = event.value
        new = _queue_level(queue / config.queue_capacity_bits, config)
        if new == "critical" and level != "critical":
            boost += config.boost_critical
            recheck = recheck if recheck is not None else event.time + config.recheck_delay
        elif new == "high" and level not in ("high", "critical"):
            boost += config.boost_normal
            recheck = recheck if recheck is not None else event.time + config.recheck_delay
        elif new == "low" and level != "low":
            boost -= config.boost_decrease
        level = new
    elif event.kind == "timer":
        if recheck is not None and event.time + 1e-12 >= recheck:
            recheck = None
            if level == "critical":
                boost += config.boost_critical
            elif level == "high":
                boost += config.boost_normal
            if level in ("high", "critical"):
                recheck = event.time + config.recheck_delay
    else:
        raise ValueError(f"unknown controller event {event.kind!r}")

    boost = min(config.max_boost, max(0.0, boost))
    return replace(state, boost=boost, per_window=window, queue_level=level, recheck_at=recheck, queue_bits=queue)


# -- simulation -----------------------------------------------------------------

@dataclass
class SimulationResult:
    rows: list[tuple]
    delivered_bits: float
    dropped_bits: float
    policy: str

    def column(self, name: str) -> np.ndarray:
        return np.array([r[TRACE_COLUMNS.index(name)] for r in self.rows], dtype=np.float64)

    @property
    def total_energy(self) -> float:
        return float(self.column("radio_energy").sum())

    @property
    def energy_per_byte(self) -> float:
        return self.total_energy / (self.delivered_bits / 8) if self.delivered_bits else math.inf

    def summary(self) -> dict[str, float]:
        return {
            "policy": self.policy,
            "events": len(self.rows),
            "mean_goodput_bps": float(self.column("goodput").mean()),
            "mean_tx_power_dbm": float(self.column("tx_power").mean()),
            "mean_per": float(self.column("per").mean()),
            "total_radio_energy_j": self.total_energy,
            "energy_per_byte_j": self.energy_per_byte,
            "delivered_bits": self.delivered_bits,
            "dropped_bits": self.dropped_bits,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in self.rows:
            w.writerow([f"{v:.9g}" for v in r])
        return buf.getvalue()


def simulate(scenario: LinkScenario, config: ControllerConfig | None = None, duration: float = 30.0,
             policy: str = "rtpc") -> SimulationResult:
    """Run the link for ``duration`` seconds.

    ``policy`` is ``"rtpc"`` (closed loop) or ``"fixed-max"`` (always
    ``max_tx``).  Each connection event: choose TX power from the filtered
    RSSI and boost, send ``packets_per_event`` packets through the PER
    curve, drain the queue, update the RSSI filter, then feed the PER
    report and queue sample to the controller.
    """
    config = config or ControllerConfig()
    if policy not in ("rtpc", "fixed-max"):
        raise ConfigError(f"unknown policy {policy!r}")
    if duration <= 0:
        raise ConfigError("duration must be positive")
    dt = scenario.connection_interval
    filt = butterworth_lowpass(config.filter_cutoff, scenario.event_rate)
    shadow_rng, loss_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(scenario.rng_seed).spawn(2))
    npk = scenario.packets_per_event
    sigma = scenario.shadowing_sigma
    link_rate = scenario.phy_rate * scenario.protocol_efficiency

    first = rx_power(scenario, scenario.base_tx_power, instantaneous_distance(scenario, 0.0), shadow_rng)
    filt.reset(first)
    state = RtpcState(filtered_rssi=first)

    n_events = int(round(duration / dt))
    queue: list[tuple[float, int, str]] = [(k * dt, 2 * k, "conn") for k in range(n_events)]
    heapq.heapify(queue)
    seq = 2 * n_events
    armed: float | None = None
    rows = []
    delivered = dropped = 0.0

    while queue:
        t, _, kind = heapq.heappop(queue)
        if kind == "timer":
            state = boost_update(state, ControlEvent("timer", t), config)
        else:
            distance = instantaneous_distance(scenario, t)
            gain = path_gain(scenario, distance)
            shadow = shadow_rng.normal(0.0, sigma)
            tx = config.max_tx if policy == "fixed-max" else select_tx_power(state, config)
            per_true = per_from_rssi(tx + gain + shadow, scenario.per_midpoint, scenario.per_slope)
            lost = int(np.count_nonzero(loss_rng.random(npk) < per_true))
            per = lost / npk
            goodput = link_rate * (1.0 - per)

            backlog = state.queue_bits + scenario.offered_load * dt
            served = min(backlog, goodput * dt)
            backlog -= served
            if backlog > config.queue_capacity_bits:
                dropped += backlog - config.queue_capacity_bits
                backlog = config.queue_capacity_bits
            delivered += served
            airtime = min(dt, served / goodput) if goodput > 0 else (dt if served or backlog else 0.0)
            energy = config.radio_power(tx) * airtime

            rssi_aero = scenario.base_tx_power + gain + shadow
            filtered = filt.step(rssi_aero)
            state = replace(state, filtered_rssi=filtered, tx_power=tx)
            if policy == "rtpc":
                state = boost_update(state, ControlEvent("per_report", t, per), config)
                state = boost_update(state, ControlEvent("queue_sample", t, backlog), config)
            else:
                state = replace(state, queue_bits=backlog)
            rows.append((t, distance, rssi_aero, filtered, tx, state.boost, per, goodput, energy))

        if state.recheck_at is not None and state.recheck_at != armed:
            armed = state.recheck_at
            if armed < n_events * dt:
                heapq.heappush(queue, (armed, seq, "timer"))
                seq += 1
    return SimulationResult(rows, delivered, dropped, policy)


# -- scenario files -------------------------------------------------------------

_SCENARIO_KEYS = {f.name: f.type for f in fields(LinkScenario)}
_CONTROLLER_KEYS = {f.name: f.type for f in fields(ControllerConfig) if f.name != "power_map"}


def _convert(key: str, value: str, source: str):
    try:
        if key in ("rng_seed", "packet_bits", "low_events"):
            return int(value)
        return float(value)
    except ValueError:
        raise ConfigError(f"{source}: {key} = {value!r} is not a number") from None


def scenario_from_mapping(values: dict[str, str], source: str = "<scenario>",
                          seed: int | None = None) -> tuple[LinkScenario, ControllerConfig]:
    check_keys(values, set(_SCENARIO_KEYS) | set(_CONTROLLER_KEYS) | {"name"}, source)
    link = {k: _convert(k, v, source) for k, v in values.items() if k in _SCENARIO_KEYS}
    ctrl = {k: _convert(k, v, source) for k, v in values.items() if k in _CONTROLLER_KEYS}
    if seed is not None:
        link["rng_seed"] = seed
    return LinkScenario(**link), ControllerConfig(**ctrl)


BUNDLED_DIR = Path(__file__).with_name("scenarios")


def bundled_scenarios() -> list[str]:
    return sorted(p.stem for p in BUNDLED_DIR.glob("*.scenario"))


def load_scenario(path_or_name: str | Path, seed: int | None = None) -> tuple[LinkScenario, ControllerConfig]:
    """Load a scenario file, or a bundled scenario by name."""
    path = Path(path_or_name)
    if not path.exists():
        candidate = BUNDLED_DIR / f"{path_or_name}.scenario"
        if not candidate.exists():
            candidate = BUNDLED_DIR / str(path_or_name)
        if not candidate.exists():
            raise ConfigError(f"no scenario file or bundled scenario named {path_or_name!r}")
        path = candidate
    return scenario_from_mapping(load_kv(path), str(path), seed)


def parse_scenario(text: str, seed: int | None = None) -> tuple[LinkScenario, ControllerConfig]:
    return scenario_from_mapping(parse_kv(text), seed=seed)
