"""Compression/transmission energy trade-off and node power budget.

Compressing before sending pays off when

    P_cpr * S / Th_cpr + P_tx * S / (CR * Th_tx) <= P_tx * S / Th_tx

which is governed by a single dimensionless overhead,
``(P_cpr * Th_tx) / (P_tx * Th_cpr)``: the energy spent compressing one
bit relative to the energy spent sending it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

SECONDS_PER_DAY = 86_400.0
NOMINAL_BATTERY_V = 3.7
SLEEP_CURRENT_A = 3e-6
BATTERY_WH = 32.0
DUTY_CYCLE = 10 / 120
P_MEDIAN_W_CM2 = 207e-6
P_95_W_CM2 = 27.5e-6
PANEL_AREA_CM2 = 111.0
HARVESTER_EFFICIENCY = 0.8


@dataclass(frozen=True)
class EnergyProfile:
    p_cpr: float  # W
    th_cpr: float  # bit/s
    p_tx: float  # W
    th_tx: float  # bit/s

    def __post_init__(self):
        if min(self.p_cpr, self.th_cpr, self.p_tx, self.th_tx) <= 0:
            raise ValueError("all energy profile quantities must be strictly positive")

    @property
    def overhead(self) -> float:
        return (self.p_cpr * self.th_tx) / (self.p_tx * self.th_cpr)


def energy_no_compression(profile: EnergyProfile, s_orig: float) -> float:
    """Joules to transmit ``s_orig`` bits uncompressed."""
    return profile.p_tx * s_orig / profile.th_tx


def energy_with_compression(profile: EnergyProfile, s_orig: float, cr: float) -> float:
    """Joules to compress ``s_orig`` bits and transmit the result."""
    return profile.p_cpr * s_orig / profile.th_cpr + profile.p_tx * s_orig / (cr * profile.th_tx)


def becr(profile: EnergyProfile) -> float | None:
    """Break-even compression ratio, or None if compression can never pay off."""
    o = profile.overhead
    if o >= 1:
        return None
    return 1.0 / (1.0 - o)


def pes(profile: EnergyProfile, cr: float) -> float:
    """Percentage of energy saved by compressing at ratio ``cr`` (negative below break-even)."""
    if cr < 1:
        raise ValueError("compression ratio must be >= 1")
    # S_orig cancels; evaluate at one bit
    return (1.0 - energy_with_compression(profile, 1.0, cr) / energy_no_compression(profile, 1.0)) * 100.0


def is_beneficial(profile: EnergyProfile, cr: float) -> bool:
    return energy_with_compression(profile, 1.0, cr) < energy_no_compression(profile, 1.0)


def profile_from_overhead(overhead: float, p_tx: float, th_tx: float, th_cpr: float) -> EnergyProfile:
    """Profile realising a given compression overhead for a given radio."""
    return EnergyProfile(overhead * p_tx * th_cpr / th_tx, th_cpr, p_tx, th_tx)


# Overheads back-derived from the reported break-even ratios (small turbine)
# and from the reported savings at the reported ratios (large turbine).
PRESET_OVERHEADS = {
    "aventa": {"pressure": 1 - 1 / 1.28, "fft-hpf": 1 - 1 / 1.46, "adpcm": 1 - 1 / 1.35},
    "dtu10mw": {
        "pressure": 1 - 0.461 - 1 / 2.12,
        "fft-hpf": 1 - 0.657 - 1 / 4.024,
        "adpcm": 1 - 0.671 - 1 / 4.0,
    },
}
PRESET_CR = {"pressure": 2.12, "fft-hpf": 4.024, "adpcm": 4.0}
# radio energy per byte on each turbine, J/byte
PRESET_TX_ENERGY_PER_BYTE = {"aventa": 80e-9, "dtu10mw": 180e-9}
PRESET_TH_TX = 1.0e6
PRESET_TH_CPR = 2.0e6


def preset_profile(turbine: str, codec: str = "pressure") -> EnergyProfile:
    try:
        overhead = PRESET_OVERHEADS[turbine][codec]
    except KeyError:
        raise ValueError(f"no preset for turbine {turbine!r} / codec {codec!r}") from None
    p_tx = PRESET_TX_ENERGY_PER_BYTE[turbine] / 8 * PRESET_TH_TX
    return profile_from_overhead(overhead, p_tx, PRESET_TH_TX, PRESET_TH_CPR)


# -- power budget -------------------------------------------------------------

@dataclass(frozen=True)
class PowerBudget:
    battery_energy: float  # Wh
    duty_cycle: float
    active_power: float  # W
    sleep_power: float = SLEEP_CURRENT_A * NOMINAL_BATTERY_V  # W

    def __post_init__(self):
        if not 0 < self.duty_cycle <= 1:
            raise ValueError("duty cycle must lie in (0, 1]")
        if self.sleep_power > self.active_power:
            raise ValueError("sleep power cannot exceed active power")
        if self.battery_energy < 0 or self.sleep_power < 0:
            raise ValueError("battery energy and sleep power must be non-negative")


@dataclass(frozen=True)
class SolarModel:
    panel_area: float = PANEL_AREA_CM2  # cm^2
    irradiance: float = P_MEDIAN_W_CM2  # W/cm^2
    harvester_efficiency: float = HARVESTER_EFFICIENCY
    margin: float = 1.0

    def __post_init__(self):
        if self.panel_area <= 0 or self.irradiance <= 0:
            raise ValueError("panel area and irradiance must be positive")
        if not 0 < self.harvester_efficiency <= 1:
            raise ValueError("harvester efficiency must lie in (0, 1]")
        if self.margin < 1:
            raise ValueError("margin must be >= 1")

    @property
    def harvested_power(self) -> float:
        return self.panel_area * self.irradiance * self.harvester_efficiency


def average_power(budget: PowerBudget) -> float:
    return budget.duty_cycle * budget.active_power + (1 - budget.duty_cycle) * budget.sleep_power


def estimate_lifetime(budget: PowerBudget) -> float:
    """Battery lifetime in days."""
    p = average_power(budget)
    if p <= 0:
        raise ValueError("average power must be positive")
    return budget.battery_energy * 3600.0 / p / SECONDS_PER_DAY


def self_sustainable(solar: SolarModel, budget: PowerBudget) -> tuple[bool, float]:
    """Whether harvesting covers the average load, and the panel area (cm^2) that would."""
    need = solar.margin * average_power(budget)
    area = math.ceil(need / (solar.irradiance * solar.harvester_efficiency))
    return solar.harvested_power >= need, float(area)


@dataclass(frozen=True)
class TurbinePreset:
    name: str
    rot_speed_rpm: float
    hub_height_m: float
    rotor_radius_m: float
    active_power_w: float

    def budget(self) -> PowerBudget:
        return PowerBudget(BATTERY_WH, DUTY_CYCLE, self.active_power_w)


TURBINES = {
    "aventa": TurbinePreset("aventa", 40, 18, 6.5, 0.142),
    "dtu10mw": TurbinePreset("dtu10mw", 10, 119, 79, 0.135),
}
