"""
One command vocabulary, three transports
========================================

High-level input commands (tap, swipe, text, ...) are translated per
backend: debug-bridge shell strings over USB or WiFi, or Bluetooth HID
usage reports for iOS and mobile-network experiments. All three leave the
device in the same state for the same command.
"""

from powerbench import adb, commands as cmds, hid
from powerbench.automation import Backend, Dispatcher, LinkState, select_backend
from powerbench.device import SimDevice
from powerbench.profiles import profile

# Bridge strings are deterministic and match the input tool's syntax.
for command in (cmds.Tap(100, 200), cmds.Swipe(0, 0, 0, 500, 300),
                cmds.Text("a b"), cmds.Key("enter")):
    print(f"{command!r:42s} -> {adb.to_adb(command)}")

# Backend selection rules: USB while the meter is idle, WiFi during
# measurements, HID for iOS or when the mobile network must stay usable.
link = LinkState(usb_on=True, wifi_band="2.4GHz", bluetooth_paired=True)
cases = [
    ("android", False, False),
    ("android", True, False),
    ("android", True, True),
    ("ios", False, False),
]
print("\nselection rules:")
for os_name, metered, mobile in cases:
    chosen = select_backend(os_name, link, metered, mobile)
    print(f"  {os_name:7s} meter={str(metered):5s} mobile={str(mobile):5s} "
          f"-> {chosen.value}")

# HID keyboard reports: 8 bytes, press then release, shift as modifier 0x02.
print("\nHID reports for 'Hi':")
for report in hid.encode_keystrokes("Hi"):
    print("  ", report.to_bytes().hex(" "))

# Pointer displacements are chunked to the signed-byte range and sum
# exactly; a click is a press/release pair.
print("\npointer reports for a 300 px move plus click:")
for report in hid.encode_pointer(300, 0, click=True):
    print("  ", report.to_bytes().hex(" "))

# The HID path really ships reports: the dispatcher moves the virtual
# cursor, then the decoded click lands on the device at the target.
device = SimDevice("iph", profile("IPHONE7"), seed=3, noise=False)
device.install_app("maps")
dispatcher = Dispatcher(advance=lambda s: device.advance_to(device.now + s))
icon = device.app_icon_center("maps")
report = dispatcher.dispatch(cmds.Tap(*icon), device, link, Backend.BLUETOOTH_HID)
print(f"\nHID tap at {icon}: {report.hid_reports} reports, "
      f"foreground now {device.foreground_app!r}")
print(f"combo HID service subclass: 0x{hid.HidServiceDescriptor().subclass:02X}")
