"""Device and network presets.

The four phone presets carry power-model coefficients solved from measured
anchor targets (see ``demos/calibrate_presets.py`` for the derivation):

* J7DUO idle with WiFi, 600 s at 4.0 V integrates to 359 J; LMX210 to 270 J.
* J7DUO video playback shifts its median current from 160 mA to 220 mA when
  screen mirroring turns on, which fixes the CPU coefficient at 400 mA/unit
  given the 0.15 mirroring CPU overhead.
* SMJ337A is tuned so a browsing workload replayed without mirroring lands
  roughly 13% below the mirrored recording in total energy.

The anchor state for "idle" is: brightness 50, preferred WiFi band on,
Bluetooth off, no foreground app, mirroring off.

Three additional presets model newer phones whose battery stats report far
more often than the classic 30 s cadence.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping

from .errors import NotFoundError

WIFI_BANDS = ("off", "2.4GHz", "5GHz")

# Current draw of standard simulated apps while foregrounded (fraction of CPU).
VIDEO_PLAYBACK_CPU = 0.026041666666666644  # J7DUO video median lands at 160 mA
NEWS_BROWSING_CPU = 0.42
BROWSER_IDLE_CPU = 0.05

# CPU bump applied transiently by every delivered input event.
INPUT_BUMP_CPU = 0.08
INPUT_BUMP_SECONDS = 0.5


@dataclass(frozen=True)
class PowerModel:
    """Parametric current-draw model, all terms in mA.

    Instantaneous current is ``base + brightness_coeff * brightness
    + cpu_coeff * effective_cpu + wifi term + bluetooth term + noise``,
    clamped at zero, where ``effective_cpu`` adds the mirroring CPU overhead
    when the screen is being mirrored.
    """

    base_ma: float
    brightness_coeff_ma: float
    cpu_coeff_ma: float
    wifi_ma: Mapping[str, float]
    bluetooth_ma: float
    mirroring_cpu_overhead: float = 0.15
    noise_ma: float = 5.0
    supply_voltage: float = 4.0

    def __post_init__(self):
        for name, value in (
            ("base_ma", self.base_ma),
            ("brightness_coeff_ma", self.brightness_coeff_ma),
            ("cpu_coeff_ma", self.cpu_coeff_ma),
            ("bluetooth_ma", self.bluetooth_ma),
        ):
            if value < 0:
                raise ValueError(f"{name} must be >= 0")

    def effective_cpu(self, cpu_load: float, mirroring: bool) -> float:
        extra = self.mirroring_cpu_overhead if mirroring else 0.0
        return min(1.0, cpu_load + extra)

    def current_ma(
        self,
        brightness: int,
        cpu_load: float,
        wifi_band: str,
        bluetooth: bool,
        mirroring: bool,
    ) -> float:
        """Deterministic part of the model (noise is drawn by the device)."""
        current = (
            self.base_ma
            + self.brightness_coeff_ma * brightness
            + self.cpu_coeff_ma * self.effective_cpu(cpu_load, mirroring)
            + self.wifi_ma.get(wifi_band, 0.0)
            + (self.bluetooth_ma if bluetooth else 0.0)
        )
        return max(0.0, current)


@dataclass(frozen=True)
class DeviceProfile:
    """Named parameter set binding a power model to device facts."""

    name: str
    os: str  # "android" | "ios"
    screen: tuple[int, int]
    supports_5ghz: bool
    reporting_cadence_s: float
    battery_mah: int
    model: PowerModel

    def __post_init__(self):
        if self.screen[0] <= 0 or self.screen[1] <= 0:
            raise ValueError("screen dimensions must be positive")
        if self.reporting_cadence_s <= 0:
            raise ValueError("reporting cadence must be positive")

    @property
    def voltage(self) -> float:
        return self.model.supply_voltage

    def preferred_band(self) -> str:
        return "5GHz" if self.supports_5ghz else "2.4GHz"


_WIFI = MappingProxyType({"2.4GHz": 30.0, "5GHz": 36.0})


def _phone(name, os, screen, ghz5, cadence, mah, base, cpu_coeff) -> DeviceProfile:
    return DeviceProfile(
        name=name,
        os=os,
        screen=screen,
        supports_5ghz=ghz5,
        reporting_cadence_s=cadence,
        battery_mah=mah,
        model=PowerModel(
            base_ma=base,
            brightness_coeff_ma=0.6,
            cpu_coeff_ma=cpu_coeff,
            wifi_ma=_WIFI,
            bluetooth_ma=8.0,
        ),
    )


# Coefficients below are outputs of demos/calibrate_presets.py; do not hand
# edit the anchored ones (J7DUO base/cpu, LMX210 base) without re-running it.
PROFILES: dict[str, DeviceProfile] = {
    p.name: p
    for p in (
        _phone("J7DUO", "android", (720, 1280), True, 30.0, 3000,
               base=83.58333333333334, cpu_coeff=400.0),
        _phone("IPHONE7", "ios", (750, 1334), True, 30.0, 1960,
               base=39.0, cpu_coeff=350.0),
        _phone("SMJ337A", "android", (720, 1280), False, 30.0, 2600,
               base=70.0, cpu_coeff=240.0),
        _phone("LMX210", "android", (720, 1280), False, 30.0, 2500,
               base=52.5, cpu_coeff=300.0),
        # Faster software-reporting cadences measured on newer devices.
        _phone("PIXEL3A", "android", (1080, 2220), True, 2.23, 3000,
               base=85.0, cpu_coeff=500.0),
        _phone("PIXEL4", "android", (1080, 2280), True, 0.66, 2800,
               base=90.0, cpu_coeff=520.0),
        _phone("PIXEL5", "android", (1080, 2340), True, 0.60, 4080,
               base=95.0, cpu_coeff=540.0),
    )
}


def profile(name: str) -> DeviceProfile:
    try:
        return PROFILES[name]
    except KeyError:
        raise NotFoundError(f"unknown device profile {name!r}") from None


@dataclass(frozen=True)
class NetworkProfile:
    """Network conditions a vantage point can emulate."""

    name: str
    download_mbps: float
    upload_mbps: float
    latency_ms: float


NETWORK_PROFILES: dict[str, NetworkProfile] = {
    p.name: p
    for p in (
        NetworkProfile("south-africa-johannesburg", 6.26, 9.77, 222.04),
        NetworkProfile("china-hong-kong", 7.64, 7.77, 286.32),
        NetworkProfile("japan-bunkyo", 9.68, 7.76, 239.38),
        NetworkProfile("brazil-sao-paulo", 9.75, 8.82, 235.05),
        NetworkProfile("ca-usa-santa-clara", 10.63, 14.87, 215.16),
    )
}


def network_profile(name: str) -> NetworkProfile:
    try:
        return NETWORK_PROFILES[name]
    except KeyError:
        raise NotFoundError(f"unknown network profile {name!r}") from None
