"""
Power traces: building, integrating, downsampling, exporting
============================================================

The trace engine is the substrate for every energy number on the
platform: current samples (mA) at a fixed rate under a fixed rail
voltage.
"""

import numpy as np

from powerbench import trace as tr

# A trace can be built directly from a current array. Here: a device that
# draws a constant 100 mA for 10 seconds, sampled at 5 kHz.
rate = 5000.0
constant = tr.trace_from_currents(np.full(50_000, 100.0), voltage=4.0,
                                  sample_rate=rate, trace_id="demo-constant")
print(f"constant trace: {len(constant)} samples over {constant.duration:.1f} s")

# Energy is V * sum(I/1000) * dt with compensated summation, so millions of
# small samples do not drift: 0.1 A * 4 V * 10 s = 4 J.
print(f"energy: {tr.energy(constant):.6f} J")

# A 1 Hz sinusoidal ripple around the same mean integrates to the same
# energy (the sine spends as much time above the mean as below it).
ts = np.arange(50_000) / rate
ripple = tr.trace_from_currents(100.0 * (1.0 + np.sin(2 * np.pi * ts)),
                                4.0, rate, trace_id="demo-ripple")
print(f"ripple energy: {tr.energy(ripple):.6f} J (same mean current)")

# Downsampling gives display-friendly bucket means. Partial tail buckets
# are kept and flagged rather than silently dropped.
buckets = tr.downsample(ripple, period=3.0)
for b in buckets:
    tag = " (partial)" if b.partial else ""
    print(f"  bucket t={b.t:4.1f}s mean={b.mean_ma:8.3f} mA "
          f"({b.count} samples){tag}")

# Bucketed energy equals trace energy: downsampling never loses charge.
recomputed = tr.energy_from_buckets(buckets, ripple.voltage, ripple.sample_rate)
print(f"energy from buckets: {recomputed:.6f} J")

# Export is a fixed-format CSV plus a JSON metadata sidecar; the round
# trip is the identity at the printed precision.
csv_path = "/tmp/powerbench-demo-trace.csv"
n = tr.export_csv(ripple, csv_path)
tr.write_metadata_sidecar(ripple, csv_path)
back = tr.import_csv(csv_path)
print(f"exported {n} bytes; re-imported {len(back)} samples at "
      f"{back.sample_rate:.0f} Hz, voltage {back.voltage} V")
