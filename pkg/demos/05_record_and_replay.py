"""
Action replay: record once with mirroring, measure the replay without it
========================================================================

Screen mirroring costs real device CPU, which poisons usability-test
measurements. The way out: record the human's raw input during a mirrored
session, compile it into an automation script, and replay it with
mirroring off. The replayed run reproduces the interaction at a fraction
of the energy error.
"""

from powerbench.controller import Controller
from powerbench.device import Rect, Scene, SceneTarget, ScrollRegion, SimDevice
from powerbench.profiles import NEWS_BROWSING_CPU, profile
from powerbench.replay import RecordedEvent, RecordingSession, compile_session, replay_script
from powerbench.trace import energy


def build_platform(seed=4242):
    scene = Scene(
        targets=[SceneTarget("headline", Rect(40, 200, 640, 60), "none")],
        scroll_regions=[ScrollRegion("page", Rect(0, 150, 720, 1000), 40_000.0)],
    )
    device = SimDevice("dut", profile("SMJ337A"), seed=seed)
    device.install_app("news", cpu_load=NEWS_BROWSING_CPU, scene=scene)
    return Controller("rep", [device]), device


# ---- record: a tester reads ten articles (synthetic raw console input)
controller, device = build_platform()
session = RecordingSession("s1", "dut", device.screen)
icon = device.app_icon_center("news")


def press(t, x, y, hold=70):
    session.ingest(RecordedEvent(t, "mouse_down", x, y, view_w=720, view_h=1280))
    session.ingest(RecordedEvent(t + hold, "mouse_up", x, y, view_w=720, view_h=1280))


def drag(t, y1, y2):
    session.ingest(RecordedEvent(t, "mouse_down", 100, y1, view_w=720, view_h=1280))
    session.ingest(RecordedEvent(t + 350, "mouse_up", 100, y2, view_w=720, view_h=1280))


press(0.0, *icon)
t = 2000.0
for _ in range(10):
    press(t, 360, 230)
    for k in range(4):
        drag(t + 6000 + k * 7000, *(900, 400) if k % 2 == 0 else (400, 900))
    t += 38_000.0
session.close()

script = compile_session(session)
kinds = {}
for entry in script.entries:
    kinds[type(entry.command).__name__] = kinds.get(type(entry.command).__name__, 0) + 1
print(f"compiled {len(session.events)} raw events into {len(script)} commands: {kinds}")
print(f"scripted duration: {script.total_duration_ms / 1000:.0f} s")


# ---- measure both ways on identical device seeds
def measured_run(mirroring):
    c, _ = build_platform()
    c.node_setup("dut", power=True, visual=mirroring)
    c.device_setup("dut")
    _, trace_id = replay_script(script, c, "dut", mirroring=mirroring, measure=True)
    return energy(c.traces[trace_id])


recorded = measured_run(mirroring=True)   # what the live mirrored session costs
replayed = measured_run(mirroring=False)  # the bot, mirroring off
gap = (recorded - replayed) / recorded * 100
print(f"\nrecorded (mirroring on):  {recorded:6.1f} J")
print(f"replayed (mirroring off): {replayed:6.1f} J")
print(f"energy gap: {gap:.1f}%  <- the mirroring overhead the replay avoids")
