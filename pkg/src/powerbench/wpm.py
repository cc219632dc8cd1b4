"""Website energy pipeline: URL prefilter, measured loads over a synthetic
site catalog, repetition with median aggregation, CPU percentile summaries,
and report emission.

A run executes exactly: node setup, device setup, then per repetition a
fresh browser setup followed by the test pass over every URL, and finally
cleanup. One measurement session spans all loads; per-URL energy is sliced
out of the session trace by load window, so the fixed per-URL slot keeps
runs comparable across vantage points.
"""

from __future__ import annotations

import json
import math
import urllib.parse
from dataclasses import dataclass, field

import numpy as np

from . import commands as cmds
from .errors import NotFoundError, ValidationError
from .profiles import BROWSER_IDLE_CPU, NetworkProfile, network_profile
from .trace import PowerTrace, downsample

PAGE_LOAD_BURST_S = 6.0  # emulated typical page-load time
INTERACT_SCROLLS = 4
CPU_SAMPLE_PERIOD_S = 3.0
DISPLAY_DOWNSAMPLE_S = 0.1
INSTALL_S = 2.0
CLEAR_S = 0.5
FRESH_START_S = 1.0
ONBOARDING_S = 1.0

RESULT_SCHEMA = "wpm-result/v1"
REQUEST_SCHEMA = "wpm-request/v1"


# --------------------------------------------------------------- catalog


@dataclass
class LoadPhase:
    at_s: float
    cpu: float
    bandwidth_mbps: float

    def to_dict(self):
        return {"at_s": self.at_s, "cpu": self.cpu, "bandwidth_mbps": self.bandwidth_mbps}


@dataclass
class SiteCatalogEntry:
    url: str
    status: str = "active"  # active | cert_error | timeout | http_error | filtered
    probe_latency_s: float = 0.5
    page_weight_bytes: int = 2_000_000
    load_profile: list[LoadPhase] = field(default_factory=list)

    def to_dict(self):
        return {
            "url": self.url,
            "status": self.status,
            "probe_latency_s": self.probe_latency_s,
            "page_weight_bytes": self.page_weight_bytes,
            "load_profile": [p.to_dict() for p in self.load_profile],
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(
            url=doc["url"],
            status=doc.get("status", "active"),
            probe_latency_s=float(doc.get("probe_latency_s", 0.5)),
            page_weight_bytes=int(doc.get("page_weight_bytes", 2_000_000)),
            load_profile=[
                LoadPhase(float(p["at_s"]), float(p["cpu"]), float(p["bandwidth_mbps"]))
                for p in doc.get("load_profile", [])
            ],
        )


class SiteCatalog:
    """Ordered site list; position is popularity rank (0 = most popular)."""

    def __init__(self, entries: list[SiteCatalogEntry]):
        self.entries = list(entries)
        self._by_url = {e.url: e for e in self.entries}

    def __len__(self):
        return len(self.entries)

    def get(self, url: str) -> SiteCatalogEntry | None:
        return self._by_url.get(url)

    def rank(self, url: str) -> int:
        for i, e in enumerate(self.entries):
            if e.url == url:
                return i
        return len(self.entries)

    def to_dict(self):
        return {"sites": [e.to_dict() for e in self.entries]}

    @classmethod
    def from_dict(cls, doc):
        return cls([SiteCatalogEntry.from_dict(d) for d in doc.get("sites", [])])

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def synthesize_catalog(
    n: int,
    seed: int = 0,
    cert_errors: int = 0,
    timeouts: int = 0,
    http_errors: int = 0,
    duplicate_tlds: int = 0,
) -> SiteCatalog:
    """Deterministic synthetic catalog with injected failures.

    Failure statuses are spread over the tail of the list so the most
    popular sites stay measurable; duplicates add a second top-level domain
    for an existing base name.
    """
    rng = np.random.default_rng(seed)
    entries = []
    for i in range(n):
        burst_cpu = float(rng.uniform(0.45, 0.9))
        settle_cpu = float(rng.uniform(0.08, 0.2))
        bandwidth = float(rng.uniform(4.0, 40.0))
        profile = [
            LoadPhase(0.0, burst_cpu, bandwidth),
            LoadPhase(PAGE_LOAD_BURST_S * 0.5, burst_cpu * 0.7, bandwidth * 0.5),
            LoadPhase(PAGE_LOAD_BURST_S, settle_cpu, bandwidth * 0.05),
        ]
        entries.append(
            SiteCatalogEntry(
                url=f"https://site{i:03d}.example.com",
                page_weight_bytes=int(rng.uniform(0.4, 4.0) * 1e6),
                load_profile=profile,
            )
        )
    tail = list(range(n))[::-1]
    cursor = 0
    for count, status in ((cert_errors, "cert_error"), (timeouts, "timeout"),
                          (http_errors, "http_error")):
        for _ in range(count):
            entries[tail[cursor]].status = status
            cursor += 1
    for d in range(duplicate_tlds):
        twin = SiteCatalogEntry(
            url=f"https://site{d:03d}.example.fr",
            page_weight_bytes=entries[d].page_weight_bytes,
            load_profile=entries[d].load_profile,
        )
        entries.append(twin)
    return SiteCatalog(entries)


# -------------------------------------------------------------- prefilter


@dataclass
class PrefilterResult:
    active: list[str] = field(default_factory=list)
    filtered: list[str] = field(default_factory=list)
    cert_error: list[str] = field(default_factory=list)
    timeout: list[str] = field(default_factory=list)
    http_error: list[str] = field(default_factory=list)

    def counts(self) -> dict:
        return {
            "active": len(self.active),
            "filtered": len(self.filtered),
            "cert_error": len(self.cert_error),
            "timeout": len(self.timeout),
            "http_error": len(self.http_error),
        }


def _base_name(url: str) -> str:
    host = urllib.parse.urlsplit(url).hostname or url
    host = host.removeprefix("www.")
    parts = host.split(".")
    return ".".join(parts[:-1]) if len(parts) > 1 else host


def prefilter(
    urls: list[str],
    catalog: SiteCatalog,
    denylist: tuple[str, ...] = (),
    probe_budget_s: float = 30.0,
) -> PrefilterResult:
    """Classify URLs with a bounded probe against the catalog resolver.

    Denylisted URLs and less-popular duplicates of the same base name are
    filtered before probing; probes that cannot classify count as timeouts.
    """
    result = PrefilterResult()
    best_rank: dict[str, tuple[int, str]] = {}
    for url in urls:
        base = _base_name(url)
        rank = catalog.rank(url)
        if base not in best_rank or rank < best_rank[base][0]:
            best_rank[base] = (rank, url)
    for url in urls:
        if any(marker in url for marker in denylist):
            result.filtered.append(url)
            continue
        if best_rank[_base_name(url)][1] != url:
            result.filtered.append(url)  # a more popular twin wins
            continue
        entry = catalog.get(url)
        if entry is None:
            result.timeout.append(url)
            continue
        if entry.status == "timeout" or entry.probe_latency_s > probe_budget_s:
            result.timeout.append(url)
        elif entry.status == "cert_error":
            result.cert_error.append(url)
        elif entry.status == "http_error":
            result.http_error.append(url)
        else:
            result.active.append(url)
    return result


# ----------------------------------------------------------- aggregation


def aggregate(values: list[float]) -> float:
    """Median: middle element, or the mean of the two middle ones."""
    if not values:
        raise ValidationError("cannot aggregate zero values")
    ordered = sorted(values)
    n = len(ordered)
    if n % 2:
        return ordered[n // 2]
    return (ordered[n // 2 - 1] + ordered[n // 2]) / 2.0


def cpu_percentiles(samples: list[float]) -> tuple[float, float, float] | None:
    """Nearest-rank 25th/50th/75th percentiles; None marks no samples."""
    if not samples:
        return None
    ordered = sorted(samples)
    n = len(ordered)

    def rank(p: float) -> float:
        return ordered[max(0, math.ceil(p / 100.0 * n) - 1)]

    return (rank(25), rank(50), rank(75))


# -------------------------------------------------------------- requests


@dataclass
class WpmRequest:
    url_list: list[str]
    device_id: str
    browser: str = "browser"
    reps: int = 3
    power: bool = True
    visual: bool = False
    automation: str = "simple_load"  # simple_load | interact
    per_page_budget_s: float = 30.0
    page_slot_s: float = 120.0
    network: str | None = None  # a named network profile

    def validate(self) -> None:
        if self.reps < 1:
            raise ValidationError("reps must be >= 1")
        if not self.url_list:
            raise ValidationError("url_list must be nonempty")
        if self.per_page_budget_s > self.page_slot_s:
            raise ValidationError("per-page budget cannot exceed the page slot")
        if self.automation not in ("simple_load", "interact"):
            raise ValidationError(f"unknown automation {self.automation!r}")

    def to_dict(self) -> dict:
        return {
            "schema": REQUEST_SCHEMA,
            "url_list": self.url_list,
            "device_id": self.device_id,
            "browser": self.browser,
            "reps": self.reps,
            "power": self.power,
            "visual": self.visual,
            "automation": self.automation,
            "per_page_budget_s": self.per_page_budget_s,
            "page_slot_s": self.page_slot_s,
            "network": self.network,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "WpmRequest":
        return cls(
            url_list=list(doc["url_list"]),
            device_id=doc["device_id"],
            browser=doc.get("browser", "browser"),
            reps=int(doc.get("reps", 3)),
            power=bool(doc.get("power", True)),
            visual=bool(doc.get("visual", False)),
            automation=doc.get("automation", "simple_load"),
            per_page_budget_s=float(doc.get("per_page_budget_s", 30.0)),
            page_slot_s=float(doc.get("page_slot_s", 120.0)),
            network=doc.get("network"),
        )


@dataclass
class LoadRecord:
    url: str
    rep: int
    t_start: float  # seconds relative to trace start
    t_end: float
    energy_j: float | None
    page_bytes: int
    cpu_samples: list[float]
    ok: bool = True

    def to_dict(self):
        return {
            "url": self.url, "rep": self.rep,
            "t_start": self.t_start, "t_end": self.t_end,
            "energy_j": self.energy_j, "page_bytes": self.page_bytes,
            "cpu_samples": self.cpu_samples, "ok": self.ok,
        }


@dataclass
class UrlMetrics:
    url: str
    failed: bool
    energy_j_median: float | None
    page_bytes_median: float | None
    cpu_p25: float | None
    cpu_p50: float | None
    cpu_p75: float | None
    loads: list[LoadRecord]

    def to_dict(self):
        return {
            "url": self.url, "failed": self.failed,
            "energy_j_median": self.energy_j_median,
            "page_bytes_median": self.page_bytes_median,
            "cpu_p25": self.cpu_p25, "cpu_p50": self.cpu_p50, "cpu_p75": self.cpu_p75,
            "loads": [l.to_dict() for l in self.loads],
        }


@dataclass
class WpmResult:
    request: WpmRequest
    step_log: list[str]
    urls: list[UrlMetrics]
    trace_id: str | None
    total_energy_j: float | None
    idle_energy_j: float | None
    started_at: float
    finished_at: float
    current_series: list[tuple[float, float]]  # downsampled for display

    def to_dict(self):
        return {
            "schema": RESULT_SCHEMA,
            "request": self.request.to_dict(),
            "step_log": self.step_log,
            "urls": [u.to_dict() for u in self.urls],
            "trace_id": self.trace_id,
            "total_energy_j": self.total_energy_j,
            "idle_energy_j": self.idle_energy_j,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "current_series": [[t, v] for t, v in self.current_series],
        }

    @classmethod
    def from_dict(cls, doc):
        if doc.get("schema") != RESULT_SCHEMA:
            raise ValidationError(f"not a {RESULT_SCHEMA} document")
        return cls(
            request=WpmRequest.from_dict(doc["request"]),
            step_log=list(doc["step_log"]),
            urls=[
                UrlMetrics(
                    url=u["url"], failed=u["failed"],
                    energy_j_median=u["energy_j_median"],
                    page_bytes_median=u["page_bytes_median"],
                    cpu_p25=u["cpu_p25"], cpu_p50=u["cpu_p50"], cpu_p75=u["cpu_p75"],
                    loads=[
                        LoadRecord(
                            url=l["url"], rep=l["rep"], t_start=l["t_start"],
                            t_end=l["t_end"], energy_j=l["energy_j"],
                            page_bytes=l["page_bytes"], cpu_samples=l["cpu_samples"],
                            ok=l["ok"],
                        )
                        for l in u["loads"]
                    ],
                )
                for u in doc["urls"]
            ],
            trace_id=doc["trace_id"],
            total_energy_j=doc["total_energy_j"],
            idle_energy_j=doc["idle_energy_j"],
            started_at=doc["started_at"],
            finished_at=doc["finished_at"],
            current_series=[(t, v) for t, v in doc["current_series"]],
        )


def slice_energy(trace: PowerTrace, t_start: float, t_end: float) -> float:
    """Energy over [t_start, t_end) in trace-relative seconds."""
    rate = trace.sample_rate
    i0 = max(0, math.ceil(t_start * rate - 1e-9))
    i1 = min(len(trace), math.ceil(t_end * rate - 1e-9))
    if i1 <= i0:
        return 0.0
    total_ma = math.fsum(trace.currents()[i0:i1])
    return trace.voltage * (total_ma / 1000.0) / rate


# ----------------------------------------------------------------- runner


class WpmRunner:
    """Drives one request end to end on a controller."""

    def __init__(self, controller, catalog: SiteCatalog | None):
        self.controller = controller
        self.catalog = catalog or SiteCatalog([])
        self._onboarded = True  # set False when a setup installs the browser

    def run(self, request: WpmRequest) -> WpmResult:
        request.validate()
        c = self.controller
        device = c.devices.get(request.device_id)
        if device is None:
            raise NotFoundError(f"unknown device {request.device_id!r}")
        net = network_profile(request.network) if request.network else None

        step_log: list[str] = []
        loads: list[LoadRecord] = []
        started_at = c.clock.now()
        trace_id = None

        def log(name):
            step_log.append(name)

        try:
            c.node_setup(request.device_id, power=request.power, visual=request.visual)
            log("node_setup")
            c.device_setup(request.device_id)
            log("device_setup")
            if request.power:
                budget = self._duration_estimate(request)
                trace_id = c.start_monitor(request.device_id, budget)
            for rep in range(request.reps):
                self._browser_setup(request, device)
                log("browser_setup")
                self._run_test(request, device, rep, loads, net, trace_id)
                log("run_test")
        finally:
            if trace_id is not None and c.session is not None \
                    and c.session.state == "running":
                c.stop_monitor()
            c.cleanup(request.device_id)
            log("cleanup")
        finished_at = c.clock.now()

        trace = c.traces.get(trace_id) if trace_id else None
        total = idle = None
        series: list[tuple[float, float]] = []
        if trace is not None:
            from .trace import energy

            for record in loads:
                if record.ok:
                    record.energy_j = slice_energy(trace, record.t_start, record.t_end)
            total = energy(trace)
            covered = math.fsum(
                r.energy_j for r in loads if r.ok and r.energy_j is not None
            )
            idle = total - covered
            series = [
                (b.t, b.mean_ma) for b in downsample(trace, DISPLAY_DOWNSAMPLE_S)
            ]
        return WpmResult(
            request=request,
            step_log=step_log,
            urls=self._aggregate_urls(request, loads),
            trace_id=trace_id,
            total_energy_j=total,
            idle_energy_j=idle,
            started_at=started_at,
            finished_at=finished_at,
            current_series=series,
        )

    # ------------------------------------------------------------ phases

    def _duration_estimate(self, request: WpmRequest) -> float:
        setup = INSTALL_S + CLEAR_S + FRESH_START_S + ONBOARDING_S
        per_rep = setup + len(request.url_list) * request.page_slot_s
        return request.reps * per_rep + 5.0

    def _browser_setup(self, request: WpmRequest, device) -> None:
        """Install if needed, clear cache/config, fresh-start the browser."""
        from .device import Rect, Scene, ScrollRegion

        c = self.controller
        if request.browser not in device.apps:
            w, h = device.screen
            page = Scene(scroll_regions=[
                ScrollRegion("page", Rect(0, int(h * 0.1), w, int(h * 0.85)),
                             extent=10 * h)
            ])
            device.install_app(request.browser, cpu_load=BROWSER_IDLE_CPU, scene=page)
            c.advance(INSTALL_S)
            self._onboarded = False
        # Fresh start: stop the running instance, wipe cache and config.
        device.force_stop(request.browser)
        device.clear_app_state(request.browser)
        device.set_app_cpu(request.browser, BROWSER_IDLE_CPU)
        c.advance(CLEAR_S)
        c.execute_command(request.device_id, cmds.LaunchApp(request.browser))
        c.advance(FRESH_START_S)
        if not self._onboarded:
            c.advance(ONBOARDING_S)  # first-launch onboarding flow
            self._onboarded = True

    def _run_test(self, request, device, rep, loads, net, trace_id) -> None:
        c = self.controller
        trace = c.traces.get(trace_id) if trace_id else None
        for url in request.url_list:
            entry = self.catalog.get(url)
            slot_start = c.clock.now()
            ok = entry is not None and entry.status == "active"
            record = LoadRecord(
                url=url,
                rep=rep,
                t_start=(slot_start - trace.started_at) if trace else 0.0,
                t_end=0.0,
                energy_j=None,
                page_bytes=0,
                cpu_samples=[],
                ok=ok,
            )
            if ok:
                self._load_page(request, device, entry, net, record)
            window_end = c.clock.now()
            record.t_end = (window_end - trace.started_at) if trace else 0.0
            # Idle out the rest of the synchronization slot.
            slot_end = slot_start + request.page_slot_s
            if slot_end > c.clock.now():
                c.advance(slot_end - c.clock.now())
            loads.append(record)

    def _load_page(self, request, device, entry, net, record) -> None:
        c = self.controller
        budget = request.per_page_budget_s
        # Schedule the site's load phases onto the browser app, then restore
        # the idle draw at the end of the measured window.
        actions = [
            {"action": "set_app_cpu", "app": request.browser,
             "cpu": phase.cpu, "at": phase.at_s}
            for phase in entry.load_profile
            if phase.at_s < budget
        ]
        actions.append({"action": "set_app_cpu", "app": request.browser,
                        "cpu": BROWSER_IDLE_CPU, "at": budget})
        device.start_workload([(a["at"], a) for a in actions])
        device.advance_to(device.now)  # apply the t=0 phase before sampling

        timeline: list[tuple[float, str]] = []
        k = 0
        while k * CPU_SAMPLE_PERIOD_S < budget - 1e-9:
            timeline.append((k * CPU_SAMPLE_PERIOD_S, "sample"))
            k += 1
        if request.automation == "interact":
            span = budget - PAGE_LOAD_BURST_S
            if span > 0:
                for s in range(INTERACT_SCROLLS):
                    timeline.append(
                        (PAGE_LOAD_BURST_S + s * span / INTERACT_SCROLLS, "scroll")
                    )
        timeline.sort()
        origin = c.clock.now()
        w, h = device.screen
        down = True
        for offset, what in timeline:
            target = origin + offset
            if target > c.clock.now():
                c.advance(target - c.clock.now())
            if what == "sample":
                record.cpu_samples.append(device.effective_cpu)
            else:
                y1, y2 = (int(h * 0.8), int(h * 0.2)) if down else (int(h * 0.2), int(h * 0.8))
                c.execute_command(
                    request.device_id, cmds.Swipe(w // 2, y1, w // 2, y2, 300)
                )
                down = not down
        end = origin + budget
        if end > c.clock.now():
            c.advance(end - c.clock.now())
        record.page_bytes = self._transferred_bytes(entry, net, budget)

    def _transferred_bytes(self, entry, net: NetworkProfile | None, budget: float) -> int:
        """Integrate the bandwidth profile over the window, capped by weight."""
        phases = sorted(entry.load_profile, key=lambda p: p.at_s)
        total_bits = 0.0
        for i, phase in enumerate(phases):
            start = phase.at_s
            end = phases[i + 1].at_s if i + 1 < len(phases) else budget
            end = min(end, budget)
            if end <= start:
                continue
            mbps = phase.bandwidth_mbps
            if net is not None:
                mbps = min(mbps, net.download_mbps)
            total_bits += mbps * 1e6 * (end - start)
        return min(entry.page_weight_bytes, int(total_bits / 8))

    # -------------------------------------------------------- aggregation

    def _aggregate_urls(self, request, loads) -> list[UrlMetrics]:
        out = []
        for url in request.url_list:
            url_loads = [l for l in loads if l.url == url]
            good = [l for l in url_loads if l.ok]
            if not good:
                out.append(UrlMetrics(url, True, None, None, None, None, None, url_loads))
                continue
            energies = [l.energy_j for l in good if l.energy_j is not None]
            perc = [cpu_percentiles(l.cpu_samples) for l in good]
            perc = [p for p in perc if p is not None]
            out.append(
                UrlMetrics(
                    url=url,
                    failed=False,
                    energy_j_median=aggregate(energies) if energies else None,
                    page_bytes_median=aggregate([float(l.page_bytes) for l in good]),
                    cpu_p25=aggregate([p[0] for p in perc]) if perc else None,
                    cpu_p50=aggregate([p[1] for p in perc]) if perc else None,
                    cpu_p75=aggregate([p[2] for p in perc]) if perc else None,
                    loads=url_loads,
                )
            )
        return out


# ----------------------------------------------------------------- report


def report(result: WpmResult, format: str = "json") -> dict:
    """Emit the result document plus plot-ready series for the console."""
    if format != "json":
        raise ValidationError(f"unknown report format {format!r}")
    active = [u for u in result.urls if not u.failed]
    return {
        "schema": RESULT_SCHEMA,
        "result": result.to_dict(),
        "series": {
            "current_ma": [[t, v] for t, v in result.current_series],
            "energy_per_url": [
                {"url": u.url, "energy_j": u.energy_j_median} for u in active
            ],
            "cpu_percentile_boxes": [
                {"url": u.url, "p25": u.cpu_p25, "p50": u.cpu_p50, "p75": u.cpu_p75}
                for u in active
            ],
        },
    }
