"""Bluetooth HID wire format: usage reports for a combo keyboard/pointer.

The pointer uses relative boot-mouse reports (3 bytes: button bitmask, dx,
dy as signed bytes), the keyboard the standard 8-byte report (modifier
bitmask, reserved zero, six keycode slots). Keycode scope is printable
ASCII plus enter/tab; shifted characters set the left-shift modifier 0x02.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import EncodingError, ValidationError

LEFT_SHIFT = 0x02
BUTTON_LEFT = 0x01

# HID service identity for the combo device.
HID_DEVICE_SUBCLASS = 0xC0  # combined keyboard + pointing device

# Combo report map: keyboard as report id 1, relative mouse as report id 2.
COMBO_REPORT_DESCRIPTOR = bytes(
    [
        # Keyboard
        0x05, 0x01,        # Usage Page (Generic Desktop)
        0x09, 0x06,        # Usage (Keyboard)
        0xA1, 0x01,        # Collection (Application)
        0x85, 0x01,        #   Report ID (1)
        0x05, 0x07,        #   Usage Page (Key Codes)
        0x19, 0xE0, 0x29, 0xE7,  # Usage Minimum/Maximum (modifiers)
        0x15, 0x00, 0x25, 0x01,  # Logical Minimum/Maximum (0, 1)
        0x75, 0x01, 0x95, 0x08,  # Report Size 1, Count 8
        0x81, 0x02,        #   Input (Data, Variable, Absolute)
        0x95, 0x01, 0x75, 0x08,  # Report Count 1, Size 8 (reserved)
        0x81, 0x01,        #   Input (Constant)
        0x95, 0x06, 0x75, 0x08,  # Report Count 6, Size 8 (key slots)
        0x15, 0x00, 0x25, 0x65,  # Logical Minimum/Maximum (0, 101)
        0x05, 0x07, 0x19, 0x00, 0x29, 0x65,  # Usage Min/Max
        0x81, 0x00,        #   Input (Data, Array)
        0xC0,              # End Collection
        # Mouse
        0x05, 0x01,        # Usage Page (Generic Desktop)
        0x09, 0x02,        # Usage (Mouse)
        0xA1, 0x01,        # Collection (Application)
        0x85, 0x02,        #   Report ID (2)
        0x09, 0x01,        #   Usage (Pointer)
        0xA1, 0x00,        #   Collection (Physical)
        0x05, 0x09,        #     Usage Page (Buttons)
        0x19, 0x01, 0x29, 0x03,  # Usage Minimum/Maximum (3 buttons)
        0x15, 0x00, 0x25, 0x01,  # Logical Minimum/Maximum (0, 1)
        0x95, 0x03, 0x75, 0x01,  # Report Count 3, Size 1
        0x81, 0x02,        #     Input (Data, Variable, Absolute)
        0x95, 0x01, 0x75, 0x05,  # Padding: Count 1, Size 5
        0x81, 0x01,        #     Input (Constant)
        0x05, 0x01,        #     Usage Page (Generic Desktop)
        0x09, 0x30, 0x09, 0x31,  # Usage (X), Usage (Y)
        0x15, 0x81, 0x25, 0x7F,  # Logical Minimum/Maximum (-127, 127)
        0x75, 0x08, 0x95, 0x02,  # Report Size 8, Count 2
        0x81, 0x06,        #     Input (Data, Variable, Relative)
        0xC0,              #   End Collection
        0xC0,              # End Collection
    ]
)


@dataclass(frozen=True)
class HidServiceDescriptor:
    subclass: int = HID_DEVICE_SUBCLASS
    report_descriptor: bytes = COMBO_REPORT_DESCRIPTOR

    def __post_init__(self):
        if self.subclass != HID_DEVICE_SUBCLASS:
            raise ValidationError("combo keyboard/pointing subclass must be 0xC0")


# Keycode map per the standard usage table: char -> (usage id, needs shift).
_BASE = {}
for i, ch in enumerate("abcdefghijklmnopqrstuvwxyz"):
    _BASE[ch] = (0x04 + i, False)
    _BASE[ch.upper()] = (0x04 + i, True)
for i, ch in enumerate("123456789"):
    _BASE[ch] = (0x1E + i, False)
_BASE["0"] = (0x27, False)
for ch, code in zip("!@#$%^&*", range(0x1E, 0x26)):
    _BASE[ch] = (code, True)
_BASE["("] = (0x26, True)
_BASE[")"] = (0x27, True)
_BASE["\n"] = (0x28, False)
_BASE["\t"] = (0x2B, False)
_BASE[" "] = (0x2C, False)
for plain, shifted, code in (
    ("-", "_", 0x2D),
    ("=", "+", 0x2E),
    ("[", "{", 0x2F),
    ("]", "}", 0x30),
    ("\\", "|", 0x31),
    (";", ":", 0x33),
    ("'", '"', 0x34),
    ("`", "~", 0x35),
    (",", "<", 0x36),
    (".", ">", 0x37),
    ("/", "?", 0x38),
):
    _BASE[plain] = (code, False)
    _BASE[shifted] = (code, True)

KEYCODES = dict(_BASE)
_REVERSE = {(code, shift): ch for ch, (code, shift) in KEYCODES.items()}


def _signed_byte(v: int) -> int:
    return v & 0xFF


def _unsigned_to_signed(b: int) -> int:
    return b - 256 if b >= 128 else b


@dataclass(frozen=True)
class HidMouseReport:
    """3-byte relative pointer report: buttons, dx, dy."""

    buttons: int
    dx: int
    dy: int

    def __post_init__(self):
        if not (0 <= self.buttons <= 0x07):
            raise ValidationError("buttons must use the low three bits only")
        if not (-127 <= self.dx <= 127 and -127 <= self.dy <= 127):
            raise ValidationError("pointer deltas must be in [-127, 127]")

    def to_bytes(self) -> bytes:
        return bytes([self.buttons, _signed_byte(self.dx), _signed_byte(self.dy)])

    @classmethod
    def from_bytes(cls, raw: bytes) -> "HidMouseReport":
        if len(raw) != 3:
            raise ValidationError("mouse report must be 3 bytes")
        return cls(raw[0], _unsigned_to_signed(raw[1]), _unsigned_to_signed(raw[2]))


@dataclass(frozen=True)
class HidKeyboardReport:
    """8-byte keyboard report: modifiers, reserved 0x00, six keycode slots."""

    modifiers: int
    keycodes: tuple[int, ...] = ()

    def __post_init__(self):
        if not (0 <= self.modifiers <= 0xFF):
            raise ValidationError("modifier byte out of range")
        if len(self.keycodes) > 6:
            raise ValidationError("at most six keycode slots")
        nonzero = [k for k in self.keycodes if k]
        if len(nonzero) != len(set(nonzero)):
            raise ValidationError("duplicate nonzero keycodes")
        if any(not (0 <= k <= 0xFF) for k in self.keycodes):
            raise ValidationError("keycode out of range")

    def to_bytes(self) -> bytes:
        slots = list(self.keycodes) + [0] * (6 - len(self.keycodes))
        return bytes([self.modifiers, 0x00] + slots)

    @classmethod
    def from_bytes(cls, raw: bytes) -> "HidKeyboardReport":
        if len(raw) != 8:
            raise ValidationError("keyboard report must be 8 bytes")
        if raw[1] != 0x00:
            raise ValidationError("reserved byte must be 0x00")
        codes = tuple(k for k in raw[2:] if k)
        return cls(raw[0], codes)


RELEASE = HidKeyboardReport(0, ())


def encode_keystrokes(text: str) -> list[HidKeyboardReport]:
    """Press/release report pair per character."""
    reports: list[HidKeyboardReport] = []
    for ch in text:
        entry = KEYCODES.get(ch)
        if entry is None:
            raise EncodingError(f"no keycode for character {ch!r}")
        code, shift = entry
        reports.append(HidKeyboardReport(LEFT_SHIFT if shift else 0, (code,)))
        reports.append(RELEASE)
    return reports


def decode_keystrokes(reports: list[HidKeyboardReport]) -> str:
    """Inverse of encode_keystrokes (press reports carry the characters)."""
    out = []
    for rep in reports:
        for code in rep.keycodes:
            ch = _REVERSE.get((code, bool(rep.modifiers & LEFT_SHIFT)))
            if ch is None:
                raise EncodingError(f"unmapped keycode 0x{code:02X}")
            out.append(ch)
    return "".join(out)


def _clamp127(v: int) -> int:
    return max(-127, min(127, v))


def pointer_moves(dx: int, dy: int, buttons: int = 0) -> list[HidMouseReport]:
    """Split a displacement into reports whose deltas sum to it exactly."""
    reports: list[HidMouseReport] = []
    rx, ry = int(dx), int(dy)
    while rx or ry:
        step_x, step_y = _clamp127(rx), _clamp127(ry)
        reports.append(HidMouseReport(buttons, step_x, step_y))
        rx -= step_x
        ry -= step_y
    return reports


def click_reports(buttons: int = BUTTON_LEFT) -> list[HidMouseReport]:
    return [HidMouseReport(buttons, 0, 0), HidMouseReport(0, 0, 0)]


def encode_pointer(dx: int, dy: int, click: bool = False) -> list[HidMouseReport]:
    """Moves covering (dx, dy), then a press/release pair when clicking."""
    reports = pointer_moves(dx, dy)
    if click:
        reports.extend(click_reports())
    return reports


@dataclass(frozen=True)
class PointerPath:
    total_dx: int
    total_dy: int
    clicks: tuple[tuple[int, int], ...]  # cursor offset at each completed click


def decode_pointer(reports: list[HidMouseReport]) -> PointerPath:
    """Integrate deltas and recover click positions (relative to start)."""
    x = y = 0
    pressed = False
    clicks: list[tuple[int, int]] = []
    for rep in reports:
        x += rep.dx
        y += rep.dy
        down = bool(rep.buttons & BUTTON_LEFT)
        if pressed and not down:
            clicks.append((x, y))
        pressed = down
    return PointerPath(x, y, tuple(clicks))
