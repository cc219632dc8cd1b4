"""Power-trace engine: acquisition buffers, energy integration, downsampling,
software-vs-hardware comparison, and CSV export.

A trace is a sequence of current samples (mA) taken at a fixed rate under a
fixed supply voltage. Timestamps are relative to trace start: sample ``i``
sits at ``i / sample_rate``. Energy uses the configured rail voltage, not a
per-sample voltage, because the simulated monitor supplies a constant rail.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import RangeError, StateError, ValidationError


@dataclass(frozen=True)
class PowerSample:
    """One current reading: ``t`` seconds since trace start, current in mA."""

    t: float
    current_ma: float


class PowerTrace:
    """Append-only current buffer; immutable once sealed."""

    def __init__(
        self,
        trace_id: str,
        voltage: float,
        sample_rate: float,
        device_id: str | None = None,
        job_id: str | None = None,
        started_at: float = 0.0,
    ):
        if voltage <= 0:
            raise RangeError("voltage must be positive")
        if sample_rate <= 0:
            raise RangeError("sample_rate must be positive")
        self.trace_id = trace_id
        self.voltage = float(voltage)
        self.sample_rate = float(sample_rate)
        self.device_id = device_id
        self.job_id = job_id
        self.started_at = float(started_at)
        self.sealed = False
        self.fault: str | None = None
        self._blocks: list[np.ndarray] = []
        self._currents: np.ndarray | None = None
        self._n = 0

    def __len__(self) -> int:
        return self._n

    def append_block(self, currents: np.ndarray) -> None:
        if self.sealed:
            raise StateError(f"trace {self.trace_id} is sealed")
        block = np.asarray(currents, dtype=np.float64)
        if block.ndim != 1:
            raise ValidationError("sample block must be one-dimensional")
        if block.size:
            self._blocks.append(block)
            self._n += block.size

    def append(self, current_ma: float) -> None:
        self.append_block(np.array([current_ma], dtype=np.float64))

    def seal(self, fault: str | None = None) -> "PowerTrace":
        if not self.sealed:
            self.sealed = True
            self.fault = fault
            self._currents = (
                np.concatenate(self._blocks) if self._blocks else np.empty(0)
            )
            self._blocks = []
        return self

    def currents(self) -> np.ndarray:
        if self._currents is not None:
            return self._currents
        return np.concatenate(self._blocks) if self._blocks else np.empty(0)

    def timestamps(self) -> np.ndarray:
        return np.arange(self._n, dtype=np.float64) / self.sample_rate

    @property
    def duration(self) -> float:
        return self._n / self.sample_rate

    def samples(self) -> Iterator[PowerSample]:
        dt = 1.0 / self.sample_rate
        for i, c in enumerate(self.currents()):
            yield PowerSample(i * dt, float(c))

    def metadata(self) -> dict:
        return {
            "trace_id": self.trace_id,
            "device_id": self.device_id,
            "job_id": self.job_id,
            "voltage_v": self.voltage,
            "sample_rate_hz": self.sample_rate,
            "sample_count": self._n,
            "started_at": self.started_at,
            "sealed": self.sealed,
            "fault": self.fault,
        }


def trace_from_currents(
    currents: Sequence[float] | np.ndarray,
    voltage: float,
    sample_rate: float,
    trace_id: str = "adhoc",
    sealed: bool = True,
) -> PowerTrace:
    """Build a trace directly from a current array (tests, demos, imports)."""
    trace = PowerTrace(trace_id, voltage, sample_rate)
    trace.append_block(np.asarray(currents, dtype=np.float64))
    if sealed:
        trace.seal()
    return trace


def concat(a: PowerTrace, b: PowerTrace, trace_id: str = "concat") -> PowerTrace:
    """Concatenate two sealed traces with identical voltage and rate."""
    if not (a.sealed and b.sealed):
        raise StateError("can only concatenate sealed traces")
    if a.voltage != b.voltage or a.sample_rate != b.sample_rate:
        raise ValidationError("traces differ in voltage or sample rate")
    return trace_from_currents(
        np.concatenate([a.currents(), b.currents()]),
        a.voltage,
        a.sample_rate,
        trace_id=trace_id,
    )


def energy(trace: PowerTrace) -> float:
    """Integrated energy in joules: ``V * sum(I_mA / 1000) * dt``.

    Uses exact compensated summation (``math.fsum``) so hundreds of seconds
    of 5 kHz samples do not accumulate float error.
    """
    if not trace.sealed:
        raise StateError("energy requires a sealed trace")
    if len(trace) == 0:
        return 0.0
    total_ma = math.fsum(trace.currents())
    return trace.voltage * (total_ma / 1000.0) / trace.sample_rate


@dataclass(frozen=True)
class Bucket:
    """One downsample bucket: start time, mean current, and exact contents."""

    t: float
    mean_ma: float
    sum_ma: float
    count: int
    partial: bool


def downsample(trace: PowerTrace, period: float) -> list[Bucket]:
    """Bucket a sealed trace into contiguous windows of ``period`` seconds.

    Each bucket's value is the arithmetic mean of the contained samples. A
    trailing bucket that does not span a full period is kept and flagged.
    """
    if not trace.sealed:
        raise StateError("downsample requires a sealed trace")
    if period < 2.0 / trace.sample_rate:
        raise ValidationError("period must cover at least two samples")
    n = len(trace)
    if n == 0:
        return []
    currents = trace.currents()
    rate = trace.sample_rate
    buckets: list[Bucket] = []
    k = 0
    start_idx = 0
    while start_idx < n:
        # Sample i belongs to bucket k iff i/rate < (k+1)*period.
        end_idx = min(n, math.ceil((k + 1) * period * rate - 1e-9))
        chunk = currents[start_idx:end_idx]
        s = math.fsum(chunk)
        full = end_idx - start_idx
        # The bucket is partial when the trace ends before the window does.
        partial = end_idx == n and n / rate < (k + 1) * period - 1e-9
        buckets.append(Bucket(k * period, s / full, s, full, partial))
        start_idx = end_idx
        k += 1
    return buckets


def energy_from_buckets(buckets: list[Bucket], voltage: float, sample_rate: float) -> float:
    """Recompute energy from bucket sums; equals ``energy()`` by linearity."""
    total_ma = math.fsum(b.sum_ma for b in buckets)
    return voltage * (total_ma / 1000.0) / sample_rate


@dataclass
class SoftwareReadingSeries:
    """Device-reported coarse current readings at a fixed cadence.

    ``readings`` holds ``(t, current_ma)`` where ``t`` is the *end* of the
    averaging window, i.e. the instant the reading became visible.
    """

    cadence: float
    readings: list[tuple[float, float]] = field(default_factory=list)

    def validate(self) -> None:
        if self.cadence <= 0:
            raise ValidationError("cadence must be positive")
        prev = None
        for t, _ in self.readings:
            if prev is not None:
                gap = t - prev
                if not (0.9 * self.cadence <= gap <= 1.1 * self.cadence):
                    raise ValidationError(
                        f"reading spacing {gap:.3f}s deviates more than 10% "
                        f"from cadence {self.cadence:.3f}s"
                    )
            prev = t


@dataclass(frozen=True)
class ComparisonReport:
    """Software-vs-hardware alignment: per-window errors and trend agreement."""

    window_errors: list[float]
    window_means: list[float]
    readings: list[float]
    correlation: float | None  # None when either series has zero variance


def compare_software(trace: PowerTrace, series: SoftwareReadingSeries) -> ComparisonReport:
    """Align each software reading to its trace window and score agreement.

    Per-window relative error is ``|reading - window_mean| / window_mean``;
    the trend statistic is the Pearson coefficient between readings and
    window means (reported as not-applicable on zero variance).
    """
    if not trace.sealed:
        raise StateError("compare_software requires a sealed trace")
    series.validate()
    rate = trace.sample_rate
    currents = trace.currents()
    n = len(trace)
    cadence = series.cadence
    readings: list[float] = []
    means: list[float] = []
    errors: list[float] = []
    for t_end, value in series.readings:
        t_start = t_end - cadence
        i0 = max(0, math.ceil(t_start * rate - 1e-9))
        i1 = min(n, math.ceil(t_end * rate - 1e-9))
        if i1 - i0 < 1 or t_start < -1e-9 or t_end > n / rate + cadence * 0.1 + 1e-9:
            continue  # window not covered by the trace
        mean = float(np.mean(currents[i0:i1]))
        readings.append(value)
        means.append(mean)
        errors.append(abs(value - mean) / mean if mean != 0 else math.inf)
    if not readings:
        raise ValidationError("series does not overlap the trace interval")
    correlation: float | None = None
    if len(readings) >= 2:
        r = np.asarray(readings)
        m = np.asarray(means)
        if np.std(r) > 0 and np.std(m) > 0:
            correlation = float(np.corrcoef(r, m)[0, 1])
    return ComparisonReport(errors, means, readings, correlation)


CSV_HEADER = "t_s,current_mA,voltage_V"


def csv_bytes(trace: PowerTrace) -> bytes:
    """Encode a sealed trace as CSV (t to 6 places, current to 3)."""
    if not trace.sealed:
        raise StateError("export requires a sealed trace")
    dt = 1.0 / trace.sample_rate
    lines = [CSV_HEADER]
    volts = f"{trace.voltage:.3f}"
    for i, c in enumerate(trace.currents()):
        lines.append(f"{i * dt:.6f},{c:.3f},{volts}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def export_csv(trace: PowerTrace, path) -> int:
    """Write the sealed trace as CSV; returns bytes written.

    The fixed formatting makes the round-trip through ``import_csv`` the
    identity at the printed precision.
    """
    data = csv_bytes(trace)
    with open(path, "wb") as fh:
        fh.write(data)
    return len(data)


def write_metadata_sidecar(trace: PowerTrace, csv_path) -> str:
    """Write the JSON metadata sidecar next to an exported CSV."""
    sidecar = str(csv_path) + ".json"
    with open(sidecar, "w", encoding="utf-8") as fh:
        json.dump(trace.metadata(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return sidecar


def import_csv(path, trace_id: str = "imported") -> PowerTrace:
    """Read a trace back from ``export_csv`` output (plus sidecar if present)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValidationError(f"unexpected CSV header: {header!r}")
        ts: list[float] = []
        cs: list[float] = []
        voltage = None
        for line in fh:
            line = line.strip()
            if not line:
                continue
            t_s, c_s, v_s = line.split(",")
            ts.append(float(t_s))
            cs.append(float(c_s))
            voltage = float(v_s)
    meta = None
    try:
        with open(str(path) + ".json", "r", encoding="utf-8") as fh:
            meta = json.load(fh)
    except FileNotFoundError:
        pass
    if meta is not None:
        voltage = meta["voltage_v"]
        rate = meta["sample_rate_hz"]
    else:
        if voltage is None:
            raise ValidationError("empty CSV and no metadata sidecar")
        if len(ts) >= 2:
            rate = round(1.0 / (ts[1] - ts[0]))
        else:
            rate = 1.0
    trace = trace_from_currents(cs, voltage, rate, trace_id=trace_id, sealed=False)
    if meta is not None:
        trace.device_id = meta.get("device_id")
        trace.job_id = meta.get("job_id")
    trace.seal()
    return trace
