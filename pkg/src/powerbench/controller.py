"""Vantage-point daemon: relay bank, power monitor, device links, mirroring,
and the setup/teardown pipelines jobs are built from.

Hardware safety rules enforced here, in order of precedence:

* the meter socket never turns off while a measurement runs or any relay
  channel still bypasses a battery;
* at most one channel feeds the monitor (it measures one device at a time);
* a measured device has USB cut, so bridge traffic cannot pollute the trace.

All state-mutating calls serialize through one lock; sample acquisition is
driven by :meth:`Controller.advance`, which moves every simulated device and
the active measurement in lockstep with the controller clock.
"""

from __future__ import annotations

import base64
import enum
import math
import threading
import time
from dataclasses import dataclass

import numpy as np

from . import commands as cmds
from .automation import Backend, Dispatcher, LinkState, select_backend
from .clock import SimClock
from .device import SimDevice
from .errors import (
    ExclusivityError,
    NotFoundError,
    RangeError,
    SafetyError,
    StateError,
    ValidationError,
)
from .trace import PowerTrace, csv_bytes

VOLTAGE_MIN = 0.8
VOLTAGE_MAX = 13.5
DEFAULT_SAMPLE_RATE = 5000.0
CURRENT_LIMIT_A = 6.0
STALE_APP_SECONDS = 7 * 86400.0
DEFAULT_BRIGHTNESS = 50


class MeterSocket(str, enum.Enum):
    ON = "on"
    OFF = "off"


class Channel(str, enum.Enum):
    BATTERY = "battery"
    MONITOR = "monitor"


@dataclass
class MonitorConfig:
    voltage: float | None = None  # must be set after every power-on
    sample_rate: float = DEFAULT_SAMPLE_RATE
    current_limit_a: float = CURRENT_LIMIT_A


@dataclass
class MeasurementSession:
    trace: PowerTrace
    device_id: str
    started_at: float
    ends_at: float
    state: str = "running"  # running | stopped | faulted
    next_index: int = 0


class InjectedFailure(RuntimeError):
    """Raised by the test failure hook to simulate a step going wrong."""


class SetupError(StateError):
    def __init__(self, step: str, cause: Exception):
        super().__init__(f"setup failed at step {step!r}: {cause}")
        self.step = step
        self.cause = cause


class Controller:
    def __init__(
        self,
        node_id: str,
        devices: list[SimDevice],
        clock: SimClock | None = None,
        location: str = "",
        address: str = "",
    ):
        self.node_id = node_id
        self.clock = clock or SimClock()
        self.location = location
        self.address = address
        self.devices: dict[str, SimDevice] = {}
        self.links: dict[str, LinkState] = {}
        self.channels: dict[str, Channel] = {}
        for dev in devices:
            if dev.device_id in self.devices:
                raise ValidationError(f"duplicate device id {dev.device_id!r}")
            self.devices[dev.device_id] = dev
            self.links[dev.device_id] = LinkState()
            self.channels[dev.device_id] = Channel.BATTERY
        self.meter = MeterSocket.OFF
        self.config = MonitorConfig()
        self.session: MeasurementSession | None = None
        self.last_session: MeasurementSession | None = None
        self.traces: dict[str, PowerTrace] = {}
        self.provisioned = False
        self.recordings: dict[str, object] = {}
        self.site_catalog = None  # attached by the website-energy pipeline
        self._lock = threading.RLock()
        self._trace_seq = 0
        self._recording_seq = 0
        self._job_id: str | None = None
        self._job_trace_ids: list[str] = []
        self._extra_artifacts: list[dict] = []
        # Test hook: called with each pipeline step name; may raise
        # InjectedFailure to exercise rollback paths.
        self.fail_injector = None
        self.dispatcher = Dispatcher(advance=self.advance)

    # ------------------------------------------------------------- helpers

    def _device(self, device_id: str) -> SimDevice:
        try:
            return self.devices[device_id]
        except KeyError:
            raise NotFoundError(f"unknown device {device_id!r}") from None

    def _monitored_device(self) -> str | None:
        for device_id, channel in self.channels.items():
            if channel is Channel.MONITOR:
                return device_id
        return None

    def _maybe_fail(self, step: str) -> None:
        if self.fail_injector is not None:
            self.fail_injector(step)

    def meter_active(self, device_id: str) -> bool:
        return self.meter is MeterSocket.ON and self.channels.get(device_id) is Channel.MONITOR

    # ------------------------------------------------------------ core API

    def power_monitor(self, state: str) -> str:
        """Toggle the meter socket. Refuses to cut power mid-measurement."""
        with self._lock:
            if state not in ("on", "off"):
                raise ValidationError("state must be 'on' or 'off'")
            if state == "off":
                if self.session is not None and self.session.state == "running":
                    raise SafetyError("cannot power off the monitor during a measurement")
                if self._monitored_device() is not None:
                    raise SafetyError("remove the battery bypass before powering off")
                self.meter = MeterSocket.OFF
            else:
                if self.meter is MeterSocket.OFF:
                    self.config.voltage = None  # must be re-set after power-on
                self.meter = MeterSocket.ON
            return self.meter.value

    def set_voltage(self, volts: float) -> MonitorConfig:
        with self._lock:
            if self.meter is not MeterSocket.ON:
                raise StateError("monitor socket is off; cannot set voltage")
            if not (VOLTAGE_MIN <= volts <= VOLTAGE_MAX):
                raise RangeError(
                    f"voltage {volts} outside [{VOLTAGE_MIN}, {VOLTAGE_MAX}] V"
                )
            self.config.voltage = float(volts)
            return self.config

    def batt_switch(self, device_id: str) -> str:
        """Toggle one relay channel between battery and monitor feed."""
        with self._lock:
            device = self._device(device_id)
            if self.channels[device_id] is Channel.BATTERY:
                if self.meter is not MeterSocket.ON:
                    raise StateError("monitor is off; cannot bypass the battery")
                if self.config.voltage is None:
                    raise StateError("set a voltage before bypassing the battery")
                other = self._monitored_device()
                if other is not None:
                    raise ExclusivityError(
                        f"monitor already feeds {other!r}; one device at a time"
                    )
                self.channels[device_id] = Channel.MONITOR
                device.power_source = "monitor"  # make-before-break: no power gap
            else:
                if self.session is not None and self.session.state == "running" \
                        and self.session.device_id == device_id:
                    raise SafetyError("cannot drop the bypass mid-measurement")
                self.channels[device_id] = Channel.BATTERY
                device.power_source = "battery"
            return self.channels[device_id].value

    def start_monitor(self, device_id: str, duration: float) -> str:
        with self._lock:
            device = self._device(device_id)
            if duration <= 0:
                raise ValidationError("duration must be > 0")
            if self.channels[device_id] is not Channel.MONITOR:
                raise StateError(f"{device_id} is not on the monitor feed")
            if self.links[device_id].usb_on:
                raise StateError("USB must be off while measuring (noise rule)")
            if self.session is not None and self.session.state == "running":
                raise ExclusivityError("another measurement is already running")
            self._trace_seq += 1
            trace_id = f"{self.node_id}-tr{self._trace_seq:04d}"
            trace = PowerTrace(
                trace_id,
                voltage=self.config.voltage,
                sample_rate=self.config.sample_rate,
                device_id=device_id,
                job_id=self._job_id,
                started_at=self.clock.now(),
            )
            self.traces[trace_id] = trace
            self.session = MeasurementSession(
                trace=trace,
                device_id=device_id,
                started_at=self.clock.now(),
                ends_at=self.clock.now() + duration,
            )
            if self._job_id is not None:
                self._job_trace_ids.append(trace_id)
            return trace_id

    def stop_monitor(self) -> str:
        """Seal and return the active trace; idempotent after auto-stop."""
        with self._lock:
            if self.session is not None and self.session.state == "running":
                self._finalize_session("stopped")
            if self.last_session is None:
                raise StateError("no measurement to stop")
            return self.last_session.trace.trace_id

    def _finalize_session(self, state: str, fault: str | None = None) -> None:
        session = self.session
        session.state = state
        session.trace.seal(fault)
        self.last_session = session
        self.session = None

    def device_mirroring(self, device_id: str, state: str) -> dict:
        with self._lock:
            device = self._device(device_id)
            if state not in ("on", "off"):
                raise ValidationError("state must be 'on' or 'off'")
            device.mirroring_active = state == "on"
            self.links[device_id].mirroring = device.mirroring_active
            return self.link_state(device_id)

    def execute_command(
        self,
        device_id: str,
        command,
        automation: str | Backend | None = None,
        needs_mobile_network: bool = False,
    ) -> dict:
        """Deliver a command through the backend the selection rules pick."""
        from dataclasses import replace as _replace

        with self._lock:
            device = self._device(device_id)
            # The device's radio state is authoritative for WiFi availability.
            link = _replace(self.links[device_id], wifi_band=device.wifi)
            if automation is None:
                backend = select_backend(
                    device.os, link, self.meter_active(device_id), needs_mobile_network
                )
            else:
                backend = Backend(automation) if not isinstance(automation, Backend) else automation
            self._maybe_fail("execute_command")
            if isinstance(command, str):
                if backend is Backend.BLUETOOTH_HID:
                    raise StateError("shell strings need a debug-bridge backend")
                if backend is Backend.USB_ADB and not link.usb_on:
                    raise StateError("USB bridge is down")
                ack = device.execute_shell(command)
                return {"backend": backend.value, "ack": ack, "command": command}
            if isinstance(command, dict):
                command = cmds.command_from_dict(command)
            report = self.dispatcher.dispatch(command, device, link, backend)
            return {
                "backend": report.backend.value,
                "ack": report.ack,
                "adb_command": report.adb_command,
                "hid_reports": report.hid_reports,
            }

    # -------------------------------------------------------- control jobs

    def node_setup(self, device_id: str, power: bool, visual: bool,
                   needs_mobile_network: bool = False) -> dict:
        """Prepare the node to measure one device; rolls back on failure."""
        with self._lock:
            device = self._device(device_id)
            if self.session is not None and self.session.state == "running":
                raise StateError("cannot run node setup during a measurement")
            report: dict = {"node": self.node_id, "device": device_id, "steps": []}

            def step(name, fn):
                try:
                    self._maybe_fail(name)
                    fn()
                except Exception as exc:
                    raise SetupError(name, exc) from exc
                report["steps"].append(name)

            try:
                if power:
                    step("power_monitor_on", lambda: (
                        self.power_monitor("on") if self.meter is MeterSocket.OFF else None
                    ))
                    step("set_voltage", lambda: self.set_voltage(device.profile.voltage))
                    if self.channels[device_id] is not Channel.MONITOR:
                        step("batt_switch", lambda: self.batt_switch(device_id))
                step("select_wifi_band", lambda: device.set_wifi(device.profile.preferred_band()))
                if device.os == "android":
                    step("enable_wifi_bridge", lambda: setattr(
                        self.links[device_id], "adb_over_wifi", True))
                else:
                    step("pair_hid_service", lambda: setattr(
                        self.links[device_id], "bluetooth_paired", True))
                step("usb_off", lambda: setattr(self.links[device_id], "usb_on", False))
                if visual:
                    step("mirroring_on", lambda: self.device_mirroring(device_id, "on"))
            except SetupError:
                try:
                    self.cleanup(device_id)
                except Exception:
                    pass  # rollback is best effort; safety check runs after
                raise
            return report

    def device_setup(self, device_id: str, brightness: int | None = None,
                     use_mobile: bool = False) -> dict:
        """Quiet the device so the upcoming measurement sees minimal noise."""
        with self._lock:
            device = self._device(device_id)
            self._maybe_fail("device_setup")
            device.notifications_enabled = False
            device.airplane = True  # WiFi stays up unless mobile was requested
            if use_mobile:
                device.airplane = False
            device.close_background_apps()
            device.foreground_app = "home"
            device.auto_brightness = False
            device.set_brightness(DEFAULT_BRIGHTNESS if brightness is None else brightness)
            return {
                "device": device_id,
                "brightness": device.brightness,
                "auto_brightness": device.auto_brightness,
                "airplane": device.airplane,
                "foreground": device.foreground_app,
                "background_apps": sorted(device.background_apps),
            }

    def cleanup(self, device_id: str | None = None) -> dict:
        """Return the node to the safe state; succeeds from any state.

        Channels drop to battery before the meter can power off; devices
        being measured right now are deferred and reported as such.
        """
        with self._lock:
            targets = [device_id] if device_id else list(self.devices)
            measured = (
                self.session.device_id
                if self.session is not None and self.session.state == "running"
                else None
            )
            report = {"node": self.node_id, "devices": {}, "deferred": []}
            for did in targets:
                device = self._device(did)
                if did == measured:
                    report["deferred"].append(did)
                    continue
                if self.channels[did] is Channel.MONITOR:
                    self.channels[did] = Channel.BATTERY
                    device.power_source = "battery"
                self.links[did].usb_on = True  # battery charging resumes
                removed = []
                for app_id, info in list(device.apps.items()):
                    if self.clock.now() - info.last_used >= STALE_APP_SECONDS:
                        device.uninstall_app(app_id)
                        removed.append(app_id)
                report["devices"][did] = {"channel": "battery", "usb": "on",
                                          "removed_apps": removed}
            if measured is None and self._monitored_device() is None \
                    and self.meter is MeterSocket.ON:
                self.power_monitor("off")
            report["meter"] = self.meter.value
            return report

    def provision(self) -> dict:
        """First job on a fresh node: verify meter, relays, and mirroring."""
        with self._lock:
            if self.session is not None and self.session.state == "running":
                raise StateError("cannot provision while measuring")
            checks = {}
            self._maybe_fail("provision")
            was_on = self.meter is MeterSocket.ON
            if not was_on:
                self.power_monitor("on")
            self.set_voltage(VOLTAGE_MIN)
            checks["monitor_connectivity"] = True
            relay_ok = True
            for did in self.devices:
                self.set_voltage(self._device(did).profile.voltage)
                self.batt_switch(did)
                relay_ok &= self.channels[did] is Channel.MONITOR
                self.batt_switch(did)
                relay_ok &= self.channels[did] is Channel.BATTERY
            checks["relay_stability"] = relay_ok
            if not was_on:
                self.power_monitor("off")
            mirror_ok = True
            for did, device in self.devices.items():
                self.device_mirroring(did, "on")
                mirror_ok &= device.render_frame().seq > 0
                self.device_mirroring(did, "off")
            checks["device_mirroring"] = mirror_ok
            checks["device_connectivity"] = {did: True for did in self.devices}
            self.provisioned = True
            return checks

    # ---------------------------------------------------------- simulation

    def advance(self, dt: float) -> None:
        """Move simulated time forward, sampling the measured device."""
        if dt < 0:
            raise ValidationError("dt must be >= 0")
        with self._lock:
            target = self.clock.now() + dt
            while True:
                now = self.clock.now()
                if now >= target - 1e-12:
                    break
                seg_end = target
                for device in self.devices.values():
                    seg_end = min(seg_end, max(device.next_boundary(), now))
                session = self.session
                if session is not None and session.state == "running":
                    seg_end = min(seg_end, session.ends_at)
                    self._acquire_block(session, now, seg_end)
                for device in self.devices.values():
                    device.advance_to(seg_end)
                self.clock.advance_to(seg_end)
                if session is not None and session.state == "running" \
                        and seg_end >= session.ends_at - 1e-12:
                    self._finalize_session("stopped")

    def _acquire_block(self, session: MeasurementSession, now: float, seg_end: float) -> None:
        """Vectorized sampling over one constant-state segment."""
        device = self.devices[session.device_id]
        trace = session.trace
        rate = trace.sample_rate
        t0 = session.started_at
        last_index = math.ceil((seg_end - t0) * rate - 1e-9)
        n = last_index - session.next_index
        if n <= 0:
            return
        det = device.det_current_ma()
        block = np.maximum(det + device.draw_noise(n), 0.0)
        limit_ma = self.config.current_limit_a * 1000.0
        over = np.nonzero(block > limit_ma)[0]
        if over.size:
            trace.append_block(block[: over[0] + 1])
            session.next_index += int(over[0]) + 1
            self._finalize_session("faulted", fault="overcurrent")
            return
        trace.append_block(block)
        session.next_index = last_index

    # -------------------------------------------------------------- status

    def device_summary(self, device_id: str) -> dict:
        device = self._device(device_id)
        link = self.links[device_id]
        return {
            "device_id": device_id,
            "os": device.os,
            "screen": list(device.screen),
            "adb_available": device.os == "android",
            "address": device.address,
            "profile": device.profile.name,
            "battery_mah": device.profile.battery_mah,
        }

    def link_state(self, device_id: str) -> dict:
        link = self.links[device_id]
        return {
            "device_id": device_id,
            "usb": "on" if link.usb_on else "off",
            "wifi_band": self._device(device_id).wifi,
            "bluetooth_paired": link.bluetooth_paired,
            "adb_over_wifi": link.adb_over_wifi,
            "mirroring": "on" if link.mirroring else "off",
            "channel": self.channels[device_id].value,
        }

    def status(self) -> dict:
        """Probe document served to the access server and the console."""
        with self._lock:
            return {
                "node_id": self.node_id,
                "location": self.location,
                "time": self.clock.now(),
                "provisioned": self.provisioned,
                "meter": self.meter.value,
                "voltage": self.config.voltage,
                "sample_rate": self.config.sample_rate,
                "running_session": (
                    self.session.trace.trace_id
                    if self.session is not None and self.session.state == "running"
                    else None
                ),
                "devices": [self.device_summary(d) for d in sorted(self.devices)],
                "links": {d: self.link_state(d) for d in sorted(self.devices)},
            }

    def frames(self, device_id: str, count: int = 1) -> list[dict]:
        with self._lock:
            device = self._device(device_id)
            out = []
            for _ in range(count):
                frame = device.render_frame()
                out.append({"seq": frame.seq, "digest": frame.digest, "size": len(frame.data)})
            return out

    # ----------------------------------------------------------------- jobs

    def run_job(self, job_id: str, steps: list[dict], cancel_event=None) -> dict:
        """Execute a dispatched pipeline; collect traces as artifacts."""
        with self._lock:
            self._job_id = job_id
            self._job_trace_ids = []
        report = {"job_id": job_id, "node": self.node_id, "ok": True,
                  "aborted": False, "steps": [], "artifacts": []}
        try:
            for step in steps:
                if cancel_event is not None and cancel_event.is_set():
                    report["aborted"] = True
                    report["ok"] = False
                    # Forced safe state after an abort: seal any measurement,
                    # then full cleanup.
                    if self.session is not None and self.session.state == "running":
                        self.stop_monitor()
                    self.cleanup()
                    break
                name = step.get("name")
                try:
                    detail = self._run_step(name, step)
                    report["steps"].append({"name": name, "ok": True, "detail": detail})
                except Exception as exc:
                    report["steps"].append({"name": name, "ok": False, "error": str(exc)})
                    report["ok"] = False
                    report["error"] = f"{name}: {exc}"
                    break
        finally:
            with self._lock:
                for trace_id in self._job_trace_ids:
                    trace = self.traces[trace_id]
                    if not trace.sealed:
                        continue
                    report["artifacts"].append(
                        {
                            "name": f"trace-{trace_id}.csv",
                            "content_b64": base64.b64encode(csv_bytes(trace)).decode("ascii"),
                        }
                    )
                    report["artifacts"].append(
                        {
                            "name": f"trace-{trace_id}.json",
                            "content_b64": base64.b64encode(
                                _json_bytes(trace.metadata())
                            ).decode("ascii"),
                        }
                    )
                report["artifacts"].extend(self._extra_artifacts)
                self._extra_artifacts = []
                self._job_id = None
                self._job_trace_ids = []
        return report

    def _run_step(self, name: str, step: dict):
        if name == "node_setup":
            return self.node_setup(
                step["device_id"], step.get("power", True), step.get("visual", False)
            )
        if name == "device_setup":
            return self.device_setup(step["device_id"], step.get("brightness"))
        if name == "cleanup":
            return self.cleanup(step.get("device_id"))
        if name == "start_monitor":
            return self.start_monitor(step["device_id"], step["duration"])
        if name == "stop_monitor":
            return self.stop_monitor()
        if name == "sleep":
            self.advance(float(step["seconds"]))
            return f"advanced {step['seconds']}s"
        if name == "hold":
            # Wall-clock occupancy: used to exercise scheduler exclusion.
            self.advance(float(step["seconds"]))
            time.sleep(float(step["seconds"]))
            return f"held {step['seconds']}s"
        if name == "execute_command":
            return self.execute_command(
                step["device_id"], step.get("command"), step.get("automation")
            )
        if name == "workload":
            device = self._device(step["device_id"])
            device.start_workload([(a["at"], a) for a in step["actions"]])
            return f"scheduled {len(step['actions'])} actions"
        if name == "run_workload":
            self._device(step["device_id"]).run_workload(step["workload"])
            return f"started workload {step['workload']!r}"
        if name == "provision":
            return self.provision()
        if name == "replay":
            from .replay import AutomationScript, replay_script

            script = AutomationScript.from_entries(step["script"])
            log, trace_id = replay_script(
                script, self, step["device_id"],
                mirroring=step.get("mirroring", False),
                measure=step.get("measure", False),
            )
            return {"log": log, "trace_id": trace_id}
        if name == "wpm":
            from .wpm import WpmRequest, WpmRunner

            runner = WpmRunner(self, self.site_catalog)
            result = runner.run(WpmRequest.from_dict(step["request"]))
            self._job_artifact("wpm-result.json", _json_bytes(result.to_dict()))
            return {"urls": len(result.urls)}
        raise ValidationError(f"unknown job step {name!r}")

    def _job_artifact(self, name: str, content: bytes) -> None:
        # Non-trace artifacts are merged into the job report by run_job.
        self._extra_artifacts.append(
            {"name": name, "content_b64": base64.b64encode(content).decode("ascii")}
        )

    # ------------------------------------------------------------ replay IO

    def open_recording(self, device_id: str):
        from .replay import RecordingSession

        with self._lock:
            device = self._device(device_id)
            self._recording_seq += 1
            session_id = f"{self.node_id}-rec{self._recording_seq:04d}"
            session = RecordingSession(session_id, device_id, device.screen)
            self.recordings[session_id] = session
            return session

    def recording(self, session_id: str):
        try:
            return self.recordings[session_id]
        except KeyError:
            raise NotFoundError(f"unknown recording session {session_id!r}") from None


def _json_bytes(doc) -> bytes:
    import json

    return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode("utf-8")


def check_safety(controller: Controller) -> None:
    """Assert the safety invariants; used after every call in model checks."""
    monitored = [d for d, ch in controller.channels.items() if ch is Channel.MONITOR]
    assert len(monitored) <= 1, "more than one channel feeds the monitor"
    if controller.meter is MeterSocket.OFF:
        assert not monitored, "meter off while a battery bypass is active"
    if monitored:
        assert controller.meter is MeterSocket.ON, "bypass without meter power"
        assert controller.config.voltage is not None, "bypass without a set voltage"
    session = controller.session
    running = session is not None and session.state == "running"
    if running:
        assert not controller.links[session.device_id].usb_on, \
            "USB on for the measured device"
        assert controller.channels[session.device_id] is Channel.MONITOR, \
            "measuring a device that is not on the monitor feed"


def assert_safe_state(controller: Controller) -> None:
    """The post-cleanup contract: meter off, no bypass, USB restored."""
    assert controller.meter is MeterSocket.OFF
    assert all(ch is Channel.BATTERY for ch in controller.channels.values())
    assert all(link.usb_on for link in controller.links.values())
    assert controller.session is None or controller.session.state != "running"
