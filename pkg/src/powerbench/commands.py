"""High-level input command vocabulary shared by every automation backend."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .errors import ValidationError


@dataclass(frozen=True)
class Tap:
    x: int
    y: int

    def __post_init__(self):
        if self.x < 0 or self.y < 0:
            raise ValidationError("tap coordinates must be >= 0")


@dataclass(frozen=True)
class Swipe:
    x1: int
    y1: int
    x2: int
    y2: int
    duration_ms: int

    def __post_init__(self):
        if min(self.x1, self.y1, self.x2, self.y2) < 0:
            raise ValidationError("swipe coordinates must be >= 0")
        if self.duration_ms <= 0:
            raise ValidationError("swipe duration must be > 0")


@dataclass(frozen=True)
class Text:
    text: str

    def __post_init__(self):
        if not self.text:
            raise ValidationError("text must be nonempty")


@dataclass(frozen=True)
class Key:
    name: str  # "enter" | "tab"

    def __post_init__(self):
        if self.name not in ("enter", "tab"):
            raise ValidationError(f"unsupported key {self.name!r}")


@dataclass(frozen=True)
class LaunchApp:
    app_id: str

    def __post_init__(self):
        if not self.app_id:
            raise ValidationError("app id must be nonempty")


@dataclass(frozen=True)
class Wait:
    ms: int

    def __post_init__(self):
        if self.ms < 0:
            raise ValidationError("wait must be >= 0 ms")


InputCommand = Union[Tap, Swipe, Text, Key, LaunchApp, Wait]

_KINDS = {
    "tap": Tap,
    "swipe": Swipe,
    "text": Text,
    "key": Key,
    "launch_app": LaunchApp,
    "wait": Wait,
}


def command_to_dict(cmd: InputCommand) -> dict:
    """JSON-friendly encoding used by script files and HTTP payloads."""
    if isinstance(cmd, Tap):
        return {"type": "tap", "x": cmd.x, "y": cmd.y}
    if isinstance(cmd, Swipe):
        return {
            "type": "swipe",
            "x1": cmd.x1, "y1": cmd.y1, "x2": cmd.x2, "y2": cmd.y2,
            "duration_ms": cmd.duration_ms,
        }
    if isinstance(cmd, Text):
        return {"type": "text", "text": cmd.text}
    if isinstance(cmd, Key):
        return {"type": "key", "name": cmd.name}
    if isinstance(cmd, LaunchApp):
        return {"type": "launch_app", "app_id": cmd.app_id}
    if isinstance(cmd, Wait):
        return {"type": "wait", "ms": cmd.ms}
    raise ValidationError(f"not an input command: {cmd!r}")


def command_from_dict(doc: dict) -> InputCommand:
    kind = doc.get("type")
    if kind == "tap":
        return Tap(doc["x"], doc["y"])
    if kind == "swipe":
        return Swipe(doc["x1"], doc["y1"], doc["x2"], doc["y2"], doc["duration_ms"])
    if kind == "text":
        return Text(doc["text"])
    if kind == "key":
        return Key(doc["name"])
    if kind == "launch_app":
        return LaunchApp(doc["app_id"])
    if kind == "wait":
        return Wait(doc["ms"])
    raise ValidationError(f"unknown command type {kind!r}")
