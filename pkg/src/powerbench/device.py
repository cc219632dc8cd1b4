"""Simulated mobile device.

The device is a state machine whose deterministic current draw changes only
at discrete boundaries (inputs, workload actions, transient-bump expiries).
Between boundaries the draw is constant, which lets the monitor vectorize
sample generation while single-step sampling stays bit-identical: noise is
drawn from one seeded stream regardless of block size.

Time is the device's own simulated seconds. A controller drives it in
lockstep with its clock; standalone use just calls :meth:`SimDevice.step`.
"""

from __future__ import annotations

import hashlib
import heapq
import itertools
from dataclasses import dataclass, field

import numpy as np

from . import commands as cmds
from .errors import NotFoundError, StateError, ValidationError
from .profiles import (
    INPUT_BUMP_CPU,
    INPUT_BUMP_SECONDS,
    WIFI_BANDS,
    DeviceProfile,
    profile as get_profile,
)
from .trace import PowerSample

HOME = "home"


@dataclass(frozen=True)
class Rect:
    x: float
    y: float
    w: float
    h: float

    def contains(self, px: float, py: float) -> bool:
        return self.x <= px <= self.x + self.w and self.y <= py <= self.y + self.h

    def center(self) -> tuple[int, int]:
        return (int(self.x + self.w / 2), int(self.y + self.h / 2))


@dataclass(frozen=True)
class SceneTarget:
    """A tappable element. ``action`` is "launch:<app>", "focus:<field>" or "none"."""

    name: str
    rect: Rect
    action: str = "none"


@dataclass
class ScrollRegion:
    name: str
    rect: Rect
    extent: float  # maximum scroll offset in px
    offset: float = 0.0


@dataclass
class Scene:
    """Declarative screen description for one app (or the home grid)."""

    targets: list[SceneTarget] = field(default_factory=list)
    scroll_regions: list[ScrollRegion] = field(default_factory=list)
    fields: dict[str, str] = field(default_factory=dict)
    focused_field: str | None = None

    def validate(self, screen: tuple[int, int]) -> None:
        w, h = screen
        for t in self.targets:
            r = t.rect
            if r.x < 0 or r.y < 0 or r.x + r.w > w or r.y + r.h > h:
                raise ValidationError(f"target {t.name!r} lies outside the screen")

    def target_at(self, x: float, y: float) -> SceneTarget | None:
        for t in self.targets:
            if t.rect.contains(x, y):
                return t
        return None

    def region_at(self, x: float, y: float) -> ScrollRegion | None:
        for r in self.scroll_regions:
            if r.rect.contains(x, y):
                return r
        return None


@dataclass
class AppInfo:
    app_id: str
    cpu_load: float = 0.0  # CPU fraction drawn while foregrounded
    installed_at: float = 0.0
    last_used: float = 0.0


def scene_from_dict(doc: dict) -> Scene:
    return Scene(
        targets=[
            SceneTarget(t["name"], Rect(*t["rect"]), t.get("action", "none"))
            for t in doc.get("targets", [])
        ],
        scroll_regions=[
            ScrollRegion(r["name"], Rect(*r["rect"]), float(r["extent"]),
                         float(r.get("offset", 0.0)))
            for r in doc.get("scroll_regions", [])
        ],
        fields=dict(doc.get("fields", {})),
        focused_field=doc.get("focused_field"),
    )


def scene_to_dict(scene: Scene) -> dict:
    return {
        "targets": [
            {"name": t.name, "rect": [t.rect.x, t.rect.y, t.rect.w, t.rect.h],
             "action": t.action}
            for t in scene.targets
        ],
        "scroll_regions": [
            {"name": r.name, "rect": [r.rect.x, r.rect.y, r.rect.w, r.rect.h],
             "extent": r.extent, "offset": r.offset}
            for r in scene.scroll_regions
        ],
        "fields": dict(scene.fields),
        "focused_field": scene.focused_field,
    }


@dataclass(frozen=True)
class Frame:
    seq: int
    digest: str
    data: bytes


@dataclass(frozen=True)
class StateDelta:
    """What an input did: used for acknowledgments and debugging."""

    kind: str
    detail: str = ""


class SimDevice:
    """One simulated phone; single-writer (its owning controller loop)."""

    def __init__(
        self,
        device_id: str,
        profile: DeviceProfile | str,
        seed: int = 0,
        start_time: float = 0.0,
        address: str = "",
        noise: bool = True,
    ):
        self.device_id = device_id
        self.profile = get_profile(profile) if isinstance(profile, str) else profile
        self.model = self.profile.model
        self.os = self.profile.os
        self.screen = self.profile.screen
        self.address = address or f"10.0.0.{abs(hash(device_id)) % 200 + 2}"

        self.brightness = 150
        self.auto_brightness = True
        self.airplane = False
        self.wifi: str = "2.4GHz"
        self.bluetooth = False
        self.foreground_app: str = HOME
        self.background_apps: set[str] = set()
        self.apps: dict[str, AppInfo] = {}
        self.mirroring_active = False
        self.notifications_enabled = True
        self.power_source = "battery"  # "battery" | "monitor"

        self.mirror_bitrate_bps = 1_000_000.0
        self.mirror_fps = 30

        self.noise_enabled = noise
        self._seed = seed
        self._rng = np.random.default_rng(seed)
        self._t = float(start_time)
        self._eventseq = itertools.count()
        self._events: list[tuple[float, int, dict]] = []  # heap of scheduled actions
        self._bumps: list[tuple[float, float]] = []  # (amount, expires_at)
        self._scenes: dict[str, Scene] = {}
        self._frame_seq = 0
        self.workloads: dict[str, list[tuple[float, dict]]] = {}

        # Software battery-report bookkeeping: integral of the deterministic
        # current over the in-progress cadence window.
        self._win_start = float(start_time)
        self._win_acc = 0.0
        self._last_acc_t = float(start_time)
        self._readings: list[tuple[float, float]] = []

    # ---------------------------------------------------------------- state

    @property
    def now(self) -> float:
        return self._t

    @property
    def cpu_load(self) -> float:
        base = self.apps[self.foreground_app].cpu_load if self.foreground_app in self.apps else 0.0
        return min(1.0, base + sum(a for a, _ in self._bumps))

    @property
    def effective_cpu(self) -> float:
        return self.model.effective_cpu(self.cpu_load, self.mirroring_active)

    def det_current_ma(self) -> float:
        """Model current right now, without noise."""
        return self.model.current_ma(
            self.brightness, self.cpu_load, self.wifi, self.bluetooth, self.mirroring_active
        )

    def draw_noise(self, n: int) -> np.ndarray:
        if not self.noise_enabled or self.model.noise_ma == 0:
            return np.zeros(n)
        return self._rng.normal(0.0, self.model.noise_ma, n)

    def state_snapshot(self) -> dict:
        """Full comparable state (used by backend-equivalence checks).

        Times are quantized to nanoseconds: transports may pace a gesture in
        differently-sized sleeps, and float summation order is not state.
        """
        return {
            "brightness": self.brightness,
            "auto_brightness": self.auto_brightness,
            "airplane": self.airplane,
            "wifi": self.wifi,
            "bluetooth": self.bluetooth,
            "foreground_app": self.foreground_app,
            "background_apps": sorted(self.background_apps),
            "apps": {
                k: (v.cpu_load, v.installed_at, v.last_used) for k, v in sorted(self.apps.items())
            },
            "mirroring": self.mirroring_active,
            "notifications": self.notifications_enabled,
            "bumps": sorted((a, round(e, 9)) for a, e in self._bumps),
            "scenes": {
                name: {
                    "fields": dict(s.fields),
                    "focused": s.focused_field,
                    "offsets": {r.name: r.offset for r in s.scroll_regions},
                }
                for name, s in sorted(self._scenes.items())
            },
            "t": round(self._t, 9),
        }

    # ----------------------------------------------------------- app/scene

    def install_app(self, app_id: str, cpu_load: float = 0.0, scene: Scene | None = None,
                    last_used: float | None = None) -> AppInfo:
        info = AppInfo(app_id, cpu_load, installed_at=self._t,
                       last_used=self._t if last_used is None else last_used)
        self.apps[app_id] = info
        if scene is not None:
            scene.validate(self.screen)
            self._scenes[app_id] = scene
        return info

    def uninstall_app(self, app_id: str) -> None:
        self.apps.pop(app_id, None)
        self._scenes.pop(app_id, None)
        self.background_apps.discard(app_id)
        if self.foreground_app == app_id:
            self.foreground_app = HOME

    def set_app_cpu(self, app_id: str, cpu_load: float) -> None:
        if app_id not in self.apps:
            raise NotFoundError(f"app {app_id!r} not installed")
        self.apps[app_id].cpu_load = min(1.0, max(0.0, cpu_load))

    def close_background_apps(self) -> None:
        self.background_apps.clear()

    def force_stop(self, app_id: str) -> None:
        self.background_apps.discard(app_id)
        if self.foreground_app == app_id:
            self.foreground_app = HOME

    def clear_app_state(self, app_id: str) -> None:
        """Drop cached UI state (fields, scroll positions, focus)."""
        scene = self._scenes.get(app_id)
        if scene is not None:
            scene.fields.clear()
            scene.focused_field = None
            for region in scene.scroll_regions:
                region.offset = 0.0

    def home_scene(self) -> Scene:
        """Icon grid synthesized from the installed apps, 4 per row."""
        w, h = self.screen
        cell_w = w // 4
        cell_h = 120
        targets = []
        for i, app_id in enumerate(sorted(self.apps)):
            row, col = divmod(i, 4)
            y = 80 + row * cell_h
            if y + cell_h > h:
                break  # icons past the first page are unreachable
            targets.append(
                SceneTarget(
                    name=f"icon:{app_id}",
                    rect=Rect(col * cell_w + 10, y + 10, cell_w - 20, cell_h - 20),
                    action=f"launch:{app_id}",
                )
            )
        return Scene(targets=targets)

    def active_scene(self) -> Scene:
        if self.foreground_app == HOME:
            return self.home_scene()
        return self._scenes.setdefault(self.foreground_app, Scene())

    def app_icon_center(self, app_id: str) -> tuple[int, int]:
        for t in self.home_scene().targets:
            if t.action == f"launch:{app_id}":
                return t.rect.center()
        raise NotFoundError(f"no home-screen icon for {app_id!r}")

    # -------------------------------------------------------------- inputs

    def _bump_cpu(self, amount: float = INPUT_BUMP_CPU, duration: float = INPUT_BUMP_SECONDS):
        expires = self._t + duration
        self._bumps.append((amount, expires))
        self._schedule(expires, {"action": "_expire_bumps"})

    def _launch(self, app_id: str) -> None:
        if app_id not in self.apps:
            raise NotFoundError(f"app {app_id!r} not installed")
        if self.foreground_app not in (HOME, app_id):
            self.background_apps.add(self.foreground_app)
        self.foreground_app = app_id
        self.apps[app_id].last_used = self._t

    def _check_bounds(self, x: float, y: float) -> None:
        w, h = self.screen
        if not (0 <= x <= w and 0 <= y <= h):
            raise ValidationError(f"({x}, {y}) outside the {w}x{h} screen")

    def apply_input(self, cmd: cmds.InputCommand) -> StateDelta:
        """Deliver one high-level input event at device coordinates."""
        if isinstance(cmd, cmds.Tap):
            self._check_bounds(cmd.x, cmd.y)
            self._bump_cpu()
            target = self.active_scene().target_at(cmd.x, cmd.y)
            if target is None:
                return StateDelta("tap", "no target")
            kind, _, arg = target.action.partition(":")
            if kind == "launch":
                self._launch(arg)
                return StateDelta("tap", f"launched {arg}")
            if kind == "focus":
                scene = self.active_scene()
                scene.focused_field = arg
                scene.fields.setdefault(arg, "")
                return StateDelta("tap", f"focused {arg}")
            return StateDelta("tap", f"hit {target.name}")
        if isinstance(cmd, cmds.Swipe):
            self._check_bounds(cmd.x1, cmd.y1)
            self._check_bounds(cmd.x2, cmd.y2)
            self._bump_cpu()
            region = self.active_scene().region_at(cmd.x1, cmd.y1)
            if region is not None:
                region.offset = min(region.extent, max(0.0, region.offset + (cmd.y1 - cmd.y2)))
                return StateDelta("swipe", f"scrolled {region.name} to {region.offset:.0f}")
            return StateDelta("swipe", "no scrollable region")
        if isinstance(cmd, cmds.Text):
            self._bump_cpu()
            scene = self.active_scene()
            if scene.focused_field is not None:
                scene.fields[scene.focused_field] = (
                    scene.fields.get(scene.focused_field, "") + cmd.text
                )
                return StateDelta("text", f"appended {len(cmd.text)} chars")
            return StateDelta("text", "no focused field")
        if isinstance(cmd, cmds.Key):
            self._bump_cpu()
            scene = self.active_scene()
            if scene.focused_field is not None:
                ch = {"enter": "\n", "tab": "\t"}[cmd.name]
                scene.fields[scene.focused_field] = (
                    scene.fields.get(scene.focused_field, "") + ch
                )
            return StateDelta("key", cmd.name)
        if isinstance(cmd, cmds.LaunchApp):
            self._bump_cpu()
            self._launch(cmd.app_id)
            return StateDelta("launch", cmd.app_id)
        if isinstance(cmd, cmds.Wait):
            return StateDelta("wait", f"{cmd.ms} ms")
        raise ValidationError(f"unsupported input {cmd!r}")

    # --------------------------------------------------------------- shell

    def execute_shell(self, command: str) -> str:
        """Device-side interpreter for debug-bridge shell strings."""
        from .adb import parse_shell_command  # local import to avoid a cycle

        parsed = parse_shell_command(command)
        if parsed is None:
            return ""  # plain shell no-ops (sleep handled by the dispatcher)
        delta = self.apply_input(parsed)
        return f"{delta.kind}: {delta.detail}"

    # ------------------------------------------------------ time and power

    def _schedule(self, t: float, action: dict) -> None:
        heapq.heappush(self._events, (max(t, self._t), next(self._eventseq), action))

    def start_workload(self, script: list[tuple[float, dict]]) -> None:
        """Schedule an ordered (time offset, action) script from now."""
        for offset, action in script:
            if offset < 0:
                raise ValidationError("workload offsets must be >= 0")
            self._schedule(self._t + offset, dict(action))

    def _apply_action(self, action: dict) -> None:
        kind = action["action"]
        if kind == "_expire_bumps":
            self._bumps = [(a, e) for a, e in self._bumps if e > self._t + 1e-12]
        elif kind == "set_app_cpu":
            self.set_app_cpu(action["app"], action["cpu"])
        elif kind == "launch_app":
            self._launch(action["app"])
        elif kind == "cpu_burst":
            self._bump_cpu(action["amount"], action["duration"])
        elif kind == "set_brightness":
            self.brightness = int(action["value"])
        elif kind == "set_wifi":
            self.set_wifi(action["band"])
        elif kind == "mirroring":
            self.mirroring_active = bool(action["on"])
        elif kind == "input":
            self.apply_input(cmds.command_from_dict(action["command"]))
        else:
            raise ValidationError(f"unknown workload action {kind!r}")

    def next_boundary(self) -> float:
        """Next instant at which device state (hence current) may change."""
        return self._events[0][0] if self._events else float("inf")

    def advance_to(self, t: float) -> None:
        """Advance device time, applying scheduled boundaries in order."""
        if t < self._t - 1e-12:
            raise ValueError("device time cannot go backwards")
        while self._events and self._events[0][0] <= t + 1e-12:
            event_t = self._events[0][0]
            self._integrate(max(self._t, event_t))
            self._t = max(self._t, event_t)
            _, _, action = heapq.heappop(self._events)
            self._apply_action(action)
        self._integrate(t)
        self._t = max(self._t, t)

    def _integrate(self, t: float) -> None:
        """Accumulate the software-report integral up to ``t``.

        Must be called before any state change so the in-progress window sees
        the pre-change current; closes (and reports) windows passed on the way.
        """
        if t <= self._last_acc_t + 1e-15:
            return
        cadence = self.profile.reporting_cadence_s
        det = self.det_current_ma()
        cursor = self._last_acc_t
        while self._win_start + cadence <= t + 1e-12:
            end = self._win_start + cadence
            self._win_acc += det * (end - cursor)
            self._readings.append((end, self._win_acc / cadence))
            self._win_start = end
            self._win_acc = 0.0
            cursor = end
        if t > cursor:
            self._win_acc += det * (t - cursor)
            cursor = t
        self._last_acc_t = cursor

    def step(self, dt: float) -> PowerSample:
        """Advance simulated time by ``dt`` and return one current sample."""
        if dt <= 0:
            raise ValidationError("dt must be > 0")
        self.advance_to(self._t + dt)
        current = max(0.0, self.det_current_ma() + float(self.draw_noise(1)[0]))
        return PowerSample(self._t, current)

    # ----------------------------------------------------- device services

    def set_wifi(self, band: str) -> None:
        if band not in WIFI_BANDS:
            raise ValidationError(f"unknown WiFi band {band!r}")
        if band == "5GHz" and not self.profile.supports_5ghz:
            raise ValidationError(f"{self.profile.name} does not support 5GHz")
        self.wifi = band

    def set_brightness(self, value: int) -> None:
        if not (0 <= value <= 250):
            raise ValidationError("brightness must be in [0, 250]")
        self.brightness = int(value)

    def software_battery_reading(self) -> tuple[float, float, float] | None:
        """Latest completed cadence-window mean, or None before the first."""
        if not self._readings:
            return None
        t, mean = self._readings[-1]
        return (t, mean, self.profile.voltage)

    def reading_series(self, relative_to: float = 0.0):
        """Readings as a comparable series; ``relative_to`` rebases the
        timestamps (pass a trace's start time to align with its windows)."""
        from .trace import SoftwareReadingSeries

        readings = [
            (t - relative_to, v) for t, v in self._readings if t - relative_to > 1e-12
        ]
        return SoftwareReadingSeries(
            cadence=self.profile.reporting_cadence_s, readings=readings
        )

    # -------------------------------------------------------------- config

    @classmethod
    def from_config(cls, doc: dict, start_time: float = 0.0) -> "SimDevice":
        """Build a device from one entry of a controller's device config."""
        dev = cls(
            device_id=doc["device_id"],
            profile=doc["profile"],
            seed=int(doc.get("seed", 0)),
            start_time=start_time,
            address=doc.get("address", ""),
            noise=bool(doc.get("noise", True)),
        )
        for app in doc.get("apps", []):
            scene = scene_from_dict(app["scene"]) if app.get("scene") else None
            dev.install_app(app["app_id"], float(app.get("cpu_load", 0.0)), scene)
        for name, script in doc.get("workloads", {}).items():
            dev.workloads[name] = [(float(a["at"]), dict(a)) for a in script]
        return dev

    def run_workload(self, name: str) -> None:
        try:
            script = self.workloads[name]
        except KeyError:
            raise NotFoundError(f"no workload named {name!r}") from None
        self.start_workload(script)

    def render_frame(self) -> Frame:
        """One mirroring frame; content is a function of visible state only."""
        if not self.mirroring_active:
            raise StateError("mirroring is not active")
        scene = self.active_scene()
        basis = repr(
            (
                self.foreground_app,
                self.brightness,
                sorted(scene.fields.items()),
                [(r.name, r.offset) for r in scene.scroll_regions],
            )
        ).encode()
        digest = hashlib.sha1(basis).hexdigest()
        frame_budget = int(self.mirror_bitrate_bps / 8 / self.mirror_fps)
        payload = (digest.encode() * (frame_budget // 40 + 1))[:frame_budget]
        self._frame_seq += 1
        return Frame(self._frame_seq, digest, payload)
