"""Debug-bridge command strings: generation and the device-side parser.

``to_adb`` turns a high-level command into the exact shell string the input
tool expects ("input tap 100 200", spaces in text encoded as "%s"), and
``parse_shell_command`` is its inverse on the simulated device.
"""

from __future__ import annotations

from . import commands as cmds
from .errors import EncodingError, ValidationError

# Characters the input tool requires backslash-escaping for.
_SHELL_SPECIALS = set("\\()<>|;&*~\"'`$?[]#!{}")

_KEYEVENTS = {"enter": "KEYCODE_ENTER", "tab": "KEYCODE_TAB"}
_KEYEVENTS_INV = {v: k for k, v in _KEYEVENTS.items()}
_KEYEVENTS_INV.update({"66": "enter", "61": "tab"})


def escape_text(text: str) -> str:
    out = []
    for ch in text:
        if ord(ch) < 0x20 or ord(ch) == 0x7F:
            raise EncodingError(f"control character {ch!r} cannot be sent as text")
        if ch == " ":
            out.append("%s")
        elif ch in _SHELL_SPECIALS:
            out.append("\\" + ch)
        else:
            out.append(ch)
    return "".join(out)


def unescape_text(encoded: str) -> str:
    out = []
    i = 0
    while i < len(encoded):
        ch = encoded[i]
        if ch == "\\" and i + 1 < len(encoded):
            out.append(encoded[i + 1])
            i += 2
        elif ch == "%" and encoded[i : i + 2] == "%s":
            out.append(" ")
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def to_adb(cmd: cmds.InputCommand) -> str:
    """Deterministic shell string for a command."""
    if isinstance(cmd, cmds.Tap):
        return f"input tap {cmd.x} {cmd.y}"
    if isinstance(cmd, cmds.Swipe):
        return f"input swipe {cmd.x1} {cmd.y1} {cmd.x2} {cmd.y2} {cmd.duration_ms}"
    if isinstance(cmd, cmds.Text):
        return f"input text {escape_text(cmd.text)}"
    if isinstance(cmd, cmds.Key):
        return f"input keyevent {_KEYEVENTS[cmd.name]}"
    if isinstance(cmd, cmds.LaunchApp):
        return f"monkey -p {cmd.app_id} -c android.intent.category.LAUNCHER 1"
    if isinstance(cmd, cmds.Wait):
        return f"sleep {cmd.ms / 1000:g}"
    raise ValidationError(f"cannot translate {cmd!r}")


def parse_shell_command(command: str) -> cmds.InputCommand | None:
    """Parse a shell string back into a command; None for non-input shell."""
    parts = command.strip().split()
    if not parts:
        return None
    if parts[0] == "input" and len(parts) >= 2:
        sub = parts[1]
        if sub == "tap" and len(parts) == 4:
            return cmds.Tap(int(parts[2]), int(parts[3]))
        if sub == "swipe" and len(parts) in (6, 7):
            dur = int(parts[6]) if len(parts) == 7 else 300
            return cmds.Swipe(int(parts[2]), int(parts[3]), int(parts[4]), int(parts[5]), dur)
        if sub == "text" and len(parts) >= 3:
            return cmds.Text(unescape_text(" ".join(parts[2:])))
        if sub == "keyevent" and len(parts) == 3:
            name = _KEYEVENTS_INV.get(parts[2])
            if name is None:
                raise ValidationError(f"unsupported keyevent {parts[2]!r}")
            return cmds.Key(name)
        raise ValidationError(f"malformed input command: {command!r}")
    if parts[0] == "monkey":
        try:
            app = parts[parts.index("-p") + 1]
        except (ValueError, IndexError):
            raise ValidationError(f"malformed monkey command: {command!r}") from None
        return cmds.LaunchApp(app)
    if parts[0] == "sleep":
        return None
    return None
