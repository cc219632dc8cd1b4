"""
The simulated device and its power model
========================================

A device's current draw is affine in brightness and effective CPU load,
plus per-radio constants and seeded noise. The device also produces its
own coarse software battery readings at the profile's reporting cadence,
which is what makes software-vs-hardware comparisons possible.
"""

from powerbench import commands as cmds
from powerbench.device import SimDevice
from powerbench.profiles import PROFILES, profile

# Every preset at rest (brightness 50, WiFi on), deterministic part only.
print("preset idle currents (brightness 50, preferred band):")
for name, p in PROFILES.items():
    dev = SimDevice("x", p, noise=False)
    dev.brightness = 50
    dev.set_wifi(p.preferred_band())
    print(f"  {name:8s} {dev.det_current_ma():8.3f} mA at {p.voltage} V")

# Brightness staircase on the LMX210: stepping 0 -> 250 by 50 every 60 s.
# The software readings (30 s cadence) track the steps as a staircase.
dev = SimDevice("lm", profile("LMX210"), seed=0, noise=False)
dev.brightness = 0
dev.start_workload(
    [(60.0 * k, {"action": "set_brightness", "value": 50 * k}) for k in range(1, 6)]
)
dev.advance_to(360.0)
print("\nLMX210 software readings during the brightness staircase:")
for t, value in dev.reading_series().readings:
    bar = "#" * int((value - 80) / 4)
    print(f"  t={t:5.0f}s {value:7.2f} mA {bar}")

# Inputs change state and bump CPU transiently.
dev2 = SimDevice("j7", profile("J7DUO"), seed=1, noise=False)
dev2.install_app("video_player", cpu_load=0.25)
before = dev2.det_current_ma()
dev2.apply_input(cmds.LaunchApp("video_player"))
during = dev2.det_current_ma()
dev2.advance_to(dev2.now + 2.0)  # the input transient expires
settled = dev2.det_current_ma()
print(f"\nJ7DUO current: idle {before:.1f} mA, launch transient {during:.1f} mA, "
      f"video settled {settled:.1f} mA")

# Mirroring adds CPU overhead on the device itself, which is exactly why
# measured runs keep it off (see the record-and-replay demo).
dev2.mirroring_active = True
print(f"with mirroring: {dev2.det_current_ma():.1f} mA")

# The newer-device presets report far more often than the 30 s classic.
fast = SimDevice("p5", profile("PIXEL5"), noise=False)
fast.advance_to(30.0)
print(f"\nPIXEL5 produced {len(fast.reading_series().readings)} readings in 30 s "
      f"(cadence {fast.profile.reporting_cadence_s} s)")
