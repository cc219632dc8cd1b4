"""
A measurement session on one vantage point
==========================================

The controller owns the relay bank, the monitor socket, and the device
links. The safety rules are enforced at the API: the monitor only powers
off once every battery bypass is removed, one channel feeds it at a time,
and a measured device always has USB cut.
"""

from powerbench import commands as cmds
from powerbench.controller import Controller
from powerbench.device import SimDevice
from powerbench.errors import SafetyError
from powerbench.profiles import profile
from powerbench.trace import energy

controller = Controller(
    "node1",
    [
        SimDevice("j7", profile("J7DUO"), seed=1),
        SimDevice("lm", profile("LMX210"), seed=2),
    ],
    location="uk",
)

# The node-setup pipeline: meter on, voltage from the device profile,
# battery bypass, WiFi band selection, bridge/HID enablement, USB off.
report = controller.node_setup("j7", power=True, visual=False)
print("node_setup steps:", ", ".join(report["steps"]))
print("meter:", controller.meter.value, "| voltage:", controller.config.voltage)

# Device setup quiets the device so the measurement sees minimal noise.
controller.device_setup("j7")

# The safety rules hold mid-session:
trace_id = controller.start_monitor("j7", duration=30.0)
try:
    controller.power_monitor("off")
except SafetyError as exc:
    print("refused mid-session power-off:", exc)

# Time advances explicitly in simulation; sampling rides along at 5 kHz.
controller.advance(30.0)
controller.stop_monitor()
trace = controller.traces[trace_id]
print(f"measured {len(trace)} samples -> {energy(trace):.2f} J over 30 s")

# Commands route around the measurement: the WiFi bridge carries input
# while the monitor is attached, USB only when it is not.
print("during bypass:", controller.execute_command("j7", cmds.Tap(100, 200))["backend"])
controller.cleanup("j7")
print("after cleanup:", controller.execute_command("j7", cmds.Tap(100, 200))["backend"])

# Cleanup restored the safe state: meter off, all channels on battery,
# USB (charging) back on.
print("meter:", controller.meter.value,
      "| channels:", {d: ch.value for d, ch in controller.channels.items()},
      "| usb:", {d: l.usb_on for d, l in controller.links.items()})
