"""Unified input delivery: one command vocabulary, three transports.

Backend choice follows the platform rules: USB debug bridge whenever the
power monitor is idle (it injects measurable current otherwise), WiFi
bridge during measurements, and the Bluetooth HID service for iOS or when
the experiment needs the mobile network. Every transport must leave the
device in the same state for the same command; the HID path earns that by
actually encoding, shipping, and decoding usage reports.

HID app launches require the home grid to be visible (a pointer cannot tap
an icon that is not on screen); callers launch from the home screen or use
a bridge backend.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

from . import adb, commands as cmds, hid
from .device import SimDevice
from .errors import PartialDeliveryError, RoutingError


class Backend(str, enum.Enum):
    USB_ADB = "usb_adb"
    WIFI_ADB = "wifi_adb"
    BLUETOOTH_HID = "bluetooth_hid"


@dataclass
class LinkState:
    """Connectivity flags the selector and dispatcher consult."""

    usb_on: bool = True
    wifi_band: str = "2.4GHz"  # "off" disables the WiFi bridge
    bluetooth_paired: bool = False
    adb_over_wifi: bool = False
    mirroring: bool = False


def available_backends(os: str, link: LinkState) -> set[Backend]:
    out: set[Backend] = set()
    if os == "android" and link.usb_on:
        out.add(Backend.USB_ADB)
    if os == "android" and link.wifi_band != "off":
        out.add(Backend.WIFI_ADB)
    if link.bluetooth_paired:
        out.add(Backend.BLUETOOTH_HID)
    return out


def select_backend(
    os: str,
    link: LinkState,
    meter_active: bool,
    needs_mobile_network: bool = False,
) -> Backend:
    """Pick the transport for a dispatch. Pure function of its arguments."""
    avail = available_backends(os, link)
    if not avail:
        raise RoutingError(f"no automation backend available for this {os} device")
    if os == "ios":
        choice = Backend.BLUETOOTH_HID
    elif not meter_active:
        choice = Backend.USB_ADB
    elif needs_mobile_network:
        choice = Backend.BLUETOOTH_HID
    else:
        choice = Backend.WIFI_ADB
    if choice in avail:
        return choice
    # Preferred transport is down; degrade deterministically.
    for fallback in (Backend.WIFI_ADB, Backend.BLUETOOTH_HID, Backend.USB_ADB):
        if fallback in avail and not (fallback == Backend.USB_ADB and meter_active):
            return fallback
    raise RoutingError("no backend satisfies the dispatch constraints")


@dataclass
class DispatchReport:
    backend: Backend
    command: cmds.InputCommand
    ack: str
    adb_command: str | None = None
    hid_reports: int = 0


@dataclass
class HidSession:
    """Controller-side HID host state for one paired device."""

    cursor: tuple[int, int] = (0, 0)  # homed at session start


class Dispatcher:
    """Serialized per-device command delivery across the three transports.

    ``advance`` is the owner's pass-time function (the controller's, so a
    measured swipe keeps sampling while it runs); a bare device works too.
    """

    def __init__(self, advance: Callable[[float], None] | None = None):
        self.advance = advance
        self._hid: dict[str, HidSession] = {}
        # Test hook: called with each outgoing HID report / bridge delivery;
        # raising simulates a mid-dispatch transport loss.
        self.delivery_hook: Callable[[int], None] | None = None

    def hid_session(self, device_id: str) -> HidSession:
        return self._hid.setdefault(device_id, HidSession())

    def _sleep(self, seconds: float) -> None:
        if self.advance is not None and seconds > 0:
            self.advance(seconds)

    def dispatch(
        self,
        command: cmds.InputCommand,
        device: SimDevice,
        link: LinkState,
        backend: Backend,
    ) -> DispatchReport:
        if backend not in available_backends(device.os, link):
            raise RoutingError(f"{backend.value} is not available for {device.device_id}")
        if isinstance(command, cmds.Wait):
            self._sleep(command.ms / 1000.0)
            return DispatchReport(backend, command, ack="waited")
        if backend in (Backend.USB_ADB, Backend.WIFI_ADB):
            return self._dispatch_adb(command, device, backend)
        return self._dispatch_hid(command, device, backend)

    # --------------------------------------------------------------- bridge

    def _dispatch_adb(self, command, device, backend) -> DispatchReport:
        shell = adb.to_adb(command)
        if self.delivery_hook is not None:
            try:
                self.delivery_hook(0)
            except Exception as exc:
                raise PartialDeliveryError("bridge lost before delivery", []) from exc
        if isinstance(command, cmds.Swipe):
            self._sleep(command.duration_ms / 1000.0)
        ack = device.execute_shell(shell)
        return DispatchReport(backend, command, ack=ack, adb_command=shell)

    # ------------------------------------------------------------------ hid

    def _ship(self, sent: list, report) -> None:
        if self.delivery_hook is not None:
            try:
                self.delivery_hook(len(sent))
            except Exception as exc:
                raise PartialDeliveryError(
                    f"transport lost after {len(sent)} reports", list(sent)
                ) from exc
        sent.append(report)

    def _move_cursor(self, session, device, sent, target: tuple[int, int]) -> None:
        dx = target[0] - session.cursor[0]
        dy = target[1] - session.cursor[1]
        for rep in hid.pointer_moves(dx, dy):
            self._ship(sent, rep)
            session.cursor = (session.cursor[0] + rep.dx, session.cursor[1] + rep.dy)

    def _dispatch_hid(self, command, device, backend) -> DispatchReport:
        session = self.hid_session(device.device_id)
        sent: list = []
        if isinstance(command, cmds.Tap):
            self._move_cursor(session, device, sent, (command.x, command.y))
            for rep in hid.click_reports():
                self._ship(sent, rep)
            ack = device.apply_input(cmds.Tap(*session.cursor))
        elif isinstance(command, cmds.Swipe):
            self._move_cursor(session, device, sent, (command.x1, command.y1))
            self._ship(sent, hid.HidMouseReport(hid.BUTTON_LEFT, 0, 0))  # press
            moves = hid.pointer_moves(
                command.x2 - command.x1, command.y2 - command.y1, buttons=hid.BUTTON_LEFT
            )
            delay = command.duration_ms / 1000.0 / max(1, len(moves))
            for rep in moves:
                self._ship(sent, rep)
                session.cursor = (session.cursor[0] + rep.dx, session.cursor[1] + rep.dy)
                self._sleep(delay)
            if not moves:
                self._sleep(command.duration_ms / 1000.0)
            self._ship(sent, hid.HidMouseReport(0, 0, 0))  # release
            ack = device.apply_input(
                cmds.Swipe(command.x1, command.y1, *session.cursor, command.duration_ms)
            )
        elif isinstance(command, cmds.Text):
            for rep in hid.encode_keystrokes(command.text):
                self._ship(sent, rep)
            text = hid.decode_keystrokes([r for r in sent if isinstance(r, hid.HidKeyboardReport)])
            ack = device.apply_input(cmds.Text(text))
        elif isinstance(command, cmds.Key):
            ch = {"enter": "\n", "tab": "\t"}[command.name]
            for rep in hid.encode_keystrokes(ch):
                self._ship(sent, rep)
            ack = device.apply_input(cmds.Key(command.name))
        elif isinstance(command, cmds.LaunchApp):
            if device.foreground_app != "home":
                raise RoutingError(
                    "HID launch needs the home grid visible; go home or use a bridge backend"
                )
            icon = device.app_icon_center(command.app_id)
            self._move_cursor(session, device, sent, icon)
            for rep in hid.click_reports():
                self._ship(sent, rep)
            ack = device.apply_input(cmds.Tap(*session.cursor))
        else:
            raise RoutingError(f"HID cannot carry {command!r}")
        return DispatchReport(
            backend, command, ack=f"{ack.kind}: {ack.detail}", hid_reports=len(sent)
        )
