"""Action replay: capture raw console input, map it into device coordinates,
compile it into an automation script, and play it back without mirroring.

A recording keeps every raw event; compilation reduces matched mouse
down/up pairs to taps (small, quick) or swipes (anything else), coalesces
printable keystrokes into text runs, and preserves the original pacing so a
replayed session spends its time where the human did.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

from . import commands as cmds
from .errors import StateError, ValidationError

MOUSE_KINDS = ("mouse_down", "mouse_up", "mouse_move")
KEY_KINDS = ("key_down", "key_up")

# Gesture classification defaults: a press that moved less than TAP_MAX_PX
# (device space) and lasted under TAP_MAX_MS is a tap.
TAP_MAX_PX = 20.0
TAP_MAX_MS = 250.0
TEXT_GAP_MS = 1000.0


@dataclass(frozen=True)
class RecordedEvent:
    t_ms: float
    kind: str  # mouse_down | mouse_up | mouse_move | key_down | key_up
    x: float | None = None
    y: float | None = None
    key: str | None = None
    view_w: int = 0
    view_h: int = 0

    def __post_init__(self):
        if self.kind not in MOUSE_KINDS + KEY_KINDS:
            raise ValidationError(f"unknown event kind {self.kind!r}")
        if self.kind in MOUSE_KINDS and (self.x is None or self.y is None):
            raise ValidationError("mouse events need a position")
        if self.kind in KEY_KINDS and not self.key:
            raise ValidationError("key events need a key")

    def to_dict(self) -> dict:
        doc = {"t_ms": self.t_ms, "kind": self.kind,
               "view_w": self.view_w, "view_h": self.view_h}
        if self.kind in MOUSE_KINDS:
            doc.update(x=self.x, y=self.y)
        else:
            doc.update(key=self.key)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "RecordedEvent":
        return cls(
            t_ms=float(doc["t_ms"]),
            kind=doc["kind"],
            x=doc.get("x"),
            y=doc.get("y"),
            key=doc.get("key"),
            view_w=int(doc.get("view_w", 0)),
            view_h=int(doc.get("view_h", 0)),
        )


class RecordingSession:
    """Ordered raw-event buffer for one device; single writer."""

    def __init__(self, session_id: str, device_id: str, device_size: tuple[int, int]):
        self.session_id = session_id
        self.device_id = device_id
        self.device_size = (int(device_size[0]), int(device_size[1]))
        self.events: list[RecordedEvent] = []
        self.open = True

    def ingest(self, event: RecordedEvent) -> int:
        """Append one event; returns the new count.

        Timestamps that run backwards are clamped to the predecessor, and
        positions outside the declared view are rejected.
        """
        if not self.open:
            raise StateError(f"recording {self.session_id} is closed")
        if event.kind in MOUSE_KINDS:
            if not (0 <= event.x <= event.view_w and 0 <= event.y <= event.view_h):
                raise ValidationError(
                    f"position ({event.x}, {event.y}) outside the "
                    f"{event.view_w}x{event.view_h} view"
                )
        if self.events and event.t_ms < self.events[-1].t_ms:
            event = RecordedEvent(
                t_ms=self.events[-1].t_ms,
                kind=event.kind,
                x=event.x,
                y=event.y,
                key=event.key,
                view_w=event.view_w,
                view_h=event.view_h,
            )
        self.events.append(event)
        return len(self.events)

    def close(self) -> "RecordingSession":
        self.open = False
        return self

    @property
    def span_ms(self) -> float:
        return self.events[-1].t_ms if self.events else 0.0


def map_coords(
    p: tuple[float, float],
    view_size: tuple[float, float],
    device_size: tuple[int, int],
) -> tuple[int, int]:
    """Scale a console-view point into device pixels (round half up, clamp)."""
    vw, vh = view_size
    dw, dh = device_size
    if vw <= 0 or vh <= 0:
        raise ValidationError("view size must be positive")
    x = math.floor(p[0] * dw / vw + 0.5)
    y = math.floor(p[1] * dh / vh + 0.5)
    return (min(max(x, 0), dw), min(max(y, 0), dh))


@dataclass(frozen=True)
class ScriptEntry:
    delay_ms: float  # pause before dispatching the command
    command: cmds.InputCommand


@dataclass
class AutomationScript:
    entries: list[ScriptEntry] = field(default_factory=list)

    def __post_init__(self):
        for e in self.entries:
            if e.delay_ms < 0:
                raise ValidationError("delays must be >= 0")

    def __len__(self):
        return len(self.entries)

    @property
    def total_duration_ms(self) -> float:
        total = 0.0
        for e in self.entries:
            total += e.delay_ms
            if isinstance(e.command, cmds.Swipe):
                total += e.command.duration_ms
            elif isinstance(e.command, cmds.Wait):
                total += e.command.ms
        return total

    def to_entries(self) -> list[dict]:
        return [
            {"delay_ms": e.delay_ms, "command": cmds.command_to_dict(e.command)}
            for e in self.entries
        ]

    @classmethod
    def from_entries(cls, docs: list[dict]) -> "AutomationScript":
        return cls(
            [ScriptEntry(float(d["delay_ms"]), cmds.command_from_dict(d["command"]))
             for d in docs]
        )

    def save(self, path) -> None:
        """Line-oriented JSON, one (delay, command) record per line."""
        with open(path, "w", encoding="utf-8") as fh:
            for doc in self.to_entries():
                fh.write(json.dumps(doc, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "AutomationScript":
        with open(path, "r", encoding="utf-8") as fh:
            docs = [json.loads(line) for line in fh if line.strip()]
        return cls.from_entries(docs)


@dataclass(frozen=True)
class _Gesture:
    start_ms: float
    end_ms: float
    command: cmds.InputCommand
    emitted_ms: float  # duration carried by the command itself


def compile_session(
    session: RecordingSession,
    tap_max_px: float = TAP_MAX_PX,
    tap_max_ms: float = TAP_MAX_MS,
    text_gap_ms: float = TEXT_GAP_MS,
) -> AutomationScript:
    """Reduce a recording to a replayable script.

    Each matched down/up pair becomes a tap (displacement < tap_max_px and
    duration < tap_max_ms, both in device space) or a swipe between the
    mapped endpoints; runs of printable keys coalesce into text commands.
    Every command replays at its original offset from session start.
    """
    dsize = session.device_size
    gestures: list[_Gesture] = []
    pending_down: RecordedEvent | None = None
    run_chars: list[str] = []
    run_start = run_last = 0.0

    def flush_text():
        nonlocal run_chars
        if run_chars:
            gestures.append(
                _Gesture(run_start, run_last, cmds.Text("".join(run_chars)), 0.0)
            )
            run_chars = []

    for ev in session.events:
        if ev.kind == "key_down":
            key = ev.key
            if len(key) == 1 and key.isprintable():
                if run_chars and ev.t_ms - run_last > text_gap_ms:
                    flush_text()
                if not run_chars:
                    run_start = ev.t_ms
                run_chars.append(key)
                run_last = ev.t_ms
            elif key in ("Enter", "Tab"):
                flush_text()
                name = key.lower()
                gestures.append(_Gesture(ev.t_ms, ev.t_ms, cmds.Key(name), 0.0))
            else:
                flush_text()  # unsupported named key: breaks the run, dropped
        elif ev.kind == "key_up":
            continue
        else:
            flush_text()  # any mouse event breaks a text run
            if ev.kind == "mouse_down":
                pending_down = ev
            elif ev.kind == "mouse_up" and pending_down is not None:
                down, up = pending_down, ev
                pending_down = None
                p1 = map_coords((down.x, down.y), (down.view_w, down.view_h), dsize)
                p2 = map_coords((up.x, up.y), (up.view_w, up.view_h), dsize)
                duration = up.t_ms - down.t_ms
                displacement = math.hypot(p2[0] - p1[0], p2[1] - p1[1])
                if displacement < tap_max_px and duration < tap_max_ms:
                    gestures.append(
                        _Gesture(down.t_ms, up.t_ms, cmds.Tap(*p1), 0.0)
                    )
                else:
                    dur = max(1, round(duration))
                    gestures.append(
                        _Gesture(down.t_ms, up.t_ms, cmds.Swipe(*p1, *p2, dur), dur)
                    )
            # mouse_move: endpoints determine gestures; moves are dropped
    flush_text()
    if pending_down is not None:
        warnings.warn(
            f"recording {session.session_id}: trailing mouse_down without an "
            "up event was dropped",
            stacklevel=2,
        )

    # Delays carry the original inter-gesture gaps (end of one gesture to the
    # start of the next), so the scripted timeline telescopes back to the
    # recording span when source gesture durations are added in.
    entries: list[ScriptEntry] = []
    cursor = 0.0
    for g in gestures:
        delay = max(0.0, g.start_ms - cursor)
        entries.append(ScriptEntry(delay, g.command))
        cursor = g.end_ms
    return AutomationScript(entries)


def replay_script(
    script: AutomationScript,
    controller,
    device_id: str,
    mirroring: bool = False,
    measure: bool = False,
    automation=None,
    margin_s: float = 1.0,
):
    """Dispatch a compiled script, honoring its delays on the sim clock.

    Mirroring is forced to the requested state first (off by default, so a
    measured replay excludes the mirroring overhead). Returns the execution
    log and the trace id when measuring.
    """
    controller.device_mirroring(device_id, "on" if mirroring else "off")
    trace_id = None
    if measure:
        duration = script.total_duration_ms / 1000.0 + margin_s
        trace_id = controller.start_monitor(device_id, duration)
    log = []
    try:
        for entry in script.entries:
            if entry.delay_ms > 0:
                controller.advance(entry.delay_ms / 1000.0)
            report = controller.execute_command(device_id, entry.command, automation)
            log.append({"command": cmds.command_to_dict(entry.command),
                        "backend": report["backend"]})
    except Exception:
        if measure and controller.session is not None:
            controller.stop_monitor()
        raise
    if measure:
        controller.advance(margin_s / 2)
        controller.stop_monitor()
    return log, trace_id
