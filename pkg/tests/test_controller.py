import random

import pytest

from powerbench import commands as cmds
from powerbench import trace as tr
from powerbench.controller import (
    Channel,
    Controller,
    InjectedFailure,
    MeterSocket,
    SetupError,
    assert_safe_state,
    check_safety,
)
from powerbench.device import SimDevice
from powerbench.errors import (
    ExclusivityError,
    NotFoundError,
    RangeError,
    SafetyError,
    StateError,
)
from powerbench.profiles import profile


def make_controller(*device_specs, node_id="node1"):
    if not device_specs:
        device_specs = [("d1", "J7DUO"), ("d2", "LMX210")]
    devices = [
        SimDevice(did, profile(name), seed=i, noise=False)
        for i, (did, name) in enumerate(device_specs)
    ]
    return Controller(node_id, devices)


def measured(controller, device_id="d1"):
    controller.node_setup(device_id, power=True, visual=False)
    return controller


class TestMeterAndRelay:
    def test_power_on(self):
        c = make_controller()
        assert c.power_monitor("on") == "on"

    def test_off_during_session_refused(self):
        c = measured(make_controller())
        c.start_monitor("d1", duration=10.0)
        with pytest.raises(SafetyError):
            c.power_monitor("off")
        assert c.meter is MeterSocket.ON

    def test_off_with_bypass_refused(self):
        c = measured(make_controller())
        with pytest.raises(SafetyError):
            c.power_monitor("off")

    def test_power_on_invalidates_voltage(self):
        c = make_controller()
        c.power_monitor("on")
        c.set_voltage(4.2)
        c.power_monitor("off")
        c.power_monitor("on")
        assert c.config.voltage is None
        with pytest.raises(StateError):
            c.batt_switch("d1")

    def test_set_voltage_range(self):
        c = make_controller()
        c.power_monitor("on")
        assert c.set_voltage(4.2).voltage == 4.2
        with pytest.raises(RangeError):
            c.set_voltage(0.5)
        with pytest.raises(RangeError):
            c.set_voltage(14.0)

    def test_set_voltage_socket_off(self):
        c = make_controller()
        with pytest.raises(StateError):
            c.set_voltage(4.2)

    def test_batt_switch_exclusive(self):
        c = make_controller()
        c.power_monitor("on")
        c.set_voltage(4.0)
        assert c.batt_switch("d1") == "monitor"
        with pytest.raises(ExclusivityError):
            c.batt_switch("d2")

    def test_batt_switch_back_allows_power_off(self):
        c = make_controller()
        c.power_monitor("on")
        c.set_voltage(4.0)
        c.batt_switch("d1")
        assert c.batt_switch("d1") == "battery"
        assert c.power_monitor("off") == "off"

    def test_switch_has_no_power_gap(self):
        c = make_controller()
        c.power_monitor("on")
        c.set_voltage(4.0)
        dev = c.devices["d1"]
        assert dev.power_source == "battery"
        c.batt_switch("d1")
        assert dev.power_source == "monitor"

    def test_unknown_device(self):
        c = make_controller()
        with pytest.raises(NotFoundError):
            c.batt_switch("ghost")


class TestMeasurement:
    def test_sample_count_matches_duration(self):
        c = measured(make_controller())
        trace_id = c.start_monitor("d1", duration=10.0)
        c.advance(10.0)
        assert c.stop_monitor() == trace_id
        assert len(c.traces[trace_id]) == 50_000

    def test_usb_on_refused(self):
        c = measured(make_controller())
        c.links["d1"].usb_on = True
        with pytest.raises(StateError):
            c.start_monitor("d1", duration=1.0)

    def test_second_session_refused(self):
        c = measured(make_controller())
        c.start_monitor("d1", duration=5.0)
        with pytest.raises(ExclusivityError):
            c.start_monitor("d1", duration=1.0)

    def test_stop_without_session(self):
        c = make_controller()
        with pytest.raises(StateError):
            c.stop_monitor()

    def test_stop_after_elapse_is_idempotent(self):
        c = measured(make_controller())
        trace_id = c.start_monitor("d1", duration=1.0)
        c.advance(2.0)  # session auto-stops at 1 s
        assert c.stop_monitor() == trace_id
        assert c.stop_monitor() == trace_id
        assert c.traces[trace_id].sealed

    def test_mid_session_stop_sample_count(self):
        c = measured(make_controller())
        trace_id = c.start_monitor("d1", duration=100.0)
        c.advance(3.0)
        c.stop_monitor()
        assert abs(len(c.traces[trace_id]) - 15_000) <= 1

    def test_overcurrent_faults_session(self):
        from dataclasses import replace

        hot_profile = profile("J7DUO")
        hot_profile = replace(hot_profile, model=replace(hot_profile.model, base_ma=7000.0))
        c = Controller("node1", [SimDevice("hot", hot_profile, noise=False)])
        c.node_setup("hot", power=True, visual=False)
        c.start_monitor("hot", duration=5.0)
        c.advance(1.0)
        assert c.last_session is not None
        assert c.last_session.state == "faulted"
        assert c.last_session.trace.fault == "overcurrent"
        assert c.last_session.trace.sealed

    def test_energy_of_constant_device(self):
        c = make_controller(("flat", "J7DUO"))
        dev = c.devices["flat"]
        dev.brightness = 0
        dev.wifi = "off"
        c.power_monitor("on")
        c.set_voltage(4.0)
        c.batt_switch("flat")
        c.links["flat"].usb_on = False
        trace_id = c.start_monitor("flat", duration=10.0)
        c.advance(10.0)
        c.stop_monitor()
        trace = c.traces[trace_id]
        expected = 4.0 * dev.model.base_ma / 1000.0 * 10.0
        assert tr.energy(trace) == pytest.approx(expected, rel=1e-9)


class TestPipelines:
    def test_node_setup_end_state(self):
        c = make_controller()
        c.node_setup("d1", power=True, visual=False)
        assert c.meter is MeterSocket.ON
        assert c.config.voltage == c.devices["d1"].profile.voltage
        assert c.channels["d1"] is Channel.MONITOR
        assert not c.links["d1"].usb_on
        assert not c.links["d1"].mirroring
        assert c.devices["d1"].wifi == "5GHz"  # J7DUO prefers 5 GHz

    def test_node_setup_visual_only(self):
        c = make_controller()
        c.node_setup("d1", power=False, visual=True)
        assert c.meter is MeterSocket.OFF
        assert c.links["d1"].mirroring

    def test_node_setup_idempotent(self):
        c = make_controller()
        first = c.node_setup("d1", power=True, visual=False)
        again = c.node_setup("d1", power=True, visual=False)
        assert c.channels["d1"] is Channel.MONITOR
        assert c.meter is MeterSocket.ON
        assert not c.links["d1"].usb_on
        assert set(again["steps"]) <= set(first["steps"])

    def test_node_setup_during_session_refused(self):
        c = measured(make_controller())
        c.start_monitor("d1", duration=10.0)
        with pytest.raises(StateError):
            c.node_setup("d2", power=False, visual=False)

    def test_node_setup_rollback_on_failure(self):
        c = make_controller()

        def explode(step):
            if step == "usb_off":
                raise InjectedFailure(step)

        c.fail_injector = explode
        with pytest.raises(SetupError) as err:
            c.node_setup("d1", power=True, visual=False)
        assert err.value.step == "usb_off"
        c.fail_injector = None
        assert_safe_state(c)

    def test_device_setup_defaults(self):
        c = make_controller()
        report = c.device_setup("d1")
        dev = c.devices["d1"]
        assert report["brightness"] == 50
        assert not dev.auto_brightness
        assert dev.foreground_app == "home"
        assert dev.background_apps == set()
        assert not dev.notifications_enabled
        assert dev.airplane and dev.wifi != "off"

    def test_device_setup_requested_brightness(self):
        c = make_controller()
        assert c.device_setup("d1", brightness=250)["brightness"] == 250

    def test_device_setup_idempotent(self):
        c = make_controller()
        first = c.device_setup("d1")
        second = c.device_setup("d1")
        assert first == second

    def test_cleanup_restores_safe_state(self):
        c = make_controller()
        c.node_setup("d1", power=True, visual=True)
        c.cleanup("d1")
        assert_safe_state(c)

    def test_cleanup_uninstalls_stale_apps(self):
        c = make_controller()
        dev = c.devices["d1"]
        dev.install_app("old", last_used=-8 * 86400.0)
        dev.install_app("fresh")
        report = c.cleanup("d1")
        assert report["devices"]["d1"]["removed_apps"] == ["old"]
        assert "fresh" in dev.apps

    def test_cleanup_idempotent_on_clean_node(self):
        c = make_controller()
        first = c.cleanup()
        second = c.cleanup()
        assert first == second
        assert_safe_state(c)

    def test_cleanup_defers_measured_device(self):
        c = measured(make_controller())
        c.start_monitor("d1", duration=10.0)
        report = c.cleanup()
        assert report["deferred"] == ["d1"]
        assert c.channels["d1"] is Channel.MONITOR  # untouched mid-measurement
        assert c.links["d2"].usb_on

    def test_provision_reports_checks(self):
        c = make_controller()
        checks = c.provision()
        assert checks["monitor_connectivity"] and checks["relay_stability"]
        assert c.provisioned
        assert_safe_state(c)


class TestExecuteCommand:
    def test_android_meter_off_uses_usb(self):
        c = make_controller()
        report = c.execute_command("d1", cmds.Tap(100, 200))
        assert report["backend"] == "usb_adb"
        assert report["adb_command"] == "input tap 100 200"

    def test_android_meter_on_uses_wifi(self):
        c = measured(make_controller())
        report = c.execute_command("d1", cmds.Tap(100, 200))
        assert report["backend"] == "wifi_adb"

    def test_ios_uses_hid(self):
        c = make_controller(("iph", "IPHONE7"))
        c.node_setup("iph", power=False, visual=False)  # pairs the HID service
        report = c.execute_command("iph", cmds.Tap(10, 20))
        assert report["backend"] == "bluetooth_hid"
        assert report["hid_reports"] > 0

    def test_shell_string_delivery(self):
        c = make_controller()
        report = c.execute_command("d1", "input tap 5 5")
        assert report["ack"].startswith("tap")

    def test_wifi_backend_follows_device_radio_state(self):
        c = measured(make_controller())
        c.devices["d1"].wifi = "off"  # radio down: the WiFi bridge is gone
        c.links["d1"].bluetooth_paired = True
        report = c.execute_command("d1", cmds.Tap(1, 1))
        assert report["backend"] == "bluetooth_hid"

    def test_status_document(self):
        c = make_controller()
        doc = c.status()
        assert doc["node_id"] == "node1"
        assert [d["device_id"] for d in doc["devices"]] == ["d1", "d2"]
        assert doc["devices"][0]["adb_available"] is True


class TestJobRunner:
    def test_pipeline_with_measurement_collects_artifacts(self):
        c = make_controller()
        steps = [
            {"name": "node_setup", "device_id": "d1", "power": True},
            {"name": "device_setup", "device_id": "d1"},
            {"name": "start_monitor", "device_id": "d1", "duration": 0.5},
            {"name": "sleep", "seconds": 0.5},
            {"name": "stop_monitor"},
            {"name": "cleanup"},
        ]
        report = c.run_job("job-1", steps)
        assert report["ok"]
        names = [a["name"] for a in report["artifacts"]]
        assert any(n.endswith(".csv") for n in names)
        assert any(n.endswith(".json") for n in names)
        assert_safe_state(c)

    def test_step_failure_stops_pipeline(self):
        c = make_controller()
        steps = [
            {"name": "start_monitor", "device_id": "d1", "duration": 1.0},  # not set up
            {"name": "sleep", "seconds": 1.0},
        ]
        report = c.run_job("job-2", steps)
        assert not report["ok"]
        assert report["steps"][0]["ok"] is False
        assert len(report["steps"]) == 1

    def test_replay_step_in_pipeline(self):
        c = make_controller()
        script = [
            {"delay_ms": 0.0, "command": {"type": "tap", "x": 5, "y": 5}},
            {"delay_ms": 100.0, "command": {"type": "wait", "ms": 50}},
        ]
        steps = [
            {"name": "node_setup", "device_id": "d1", "power": True},
            {"name": "replay", "device_id": "d1", "script": script, "measure": True},
            {"name": "cleanup"},
        ]
        report = c.run_job("job-3", steps)
        assert report["ok"], report
        detail = report["steps"][1]["detail"]
        assert detail["trace_id"] is not None
        assert len(detail["log"]) == 2
        assert any(a["name"].endswith(".csv") for a in report["artifacts"])

    def test_named_workload_step(self):
        c = make_controller()
        c.devices["d1"].install_app("video_player", cpu_load=0.2)
        c.devices["d1"].workloads["video"] = [
            (0.0, {"action": "launch_app", "app": "video_player"})
        ]
        report = c.run_job("job-4", [
            {"name": "run_workload", "device_id": "d1", "workload": "video"},
            {"name": "sleep", "seconds": 0.1},
        ])
        assert report["ok"]
        assert c.devices["d1"].foreground_app == "video_player"


OPS = [
    "power_on", "power_off", "set_voltage", "set_voltage_bad", "batt_switch",
    "start_monitor", "stop_monitor", "advance", "mirror_on", "mirror_off",
    "node_setup", "device_setup", "cleanup", "execute",
]


def random_call(c, rng, fail_rate=0.0):
    """One random API call; guard exceptions, which are part of the contract."""
    op = rng.choice(OPS)
    did = rng.choice(list(c.devices))
    if fail_rate and rng.random() < fail_rate:
        c.fail_injector = lambda step: (_ for _ in ()).throw(InjectedFailure(step))
    else:
        c.fail_injector = None
    try:
        if op == "power_on":
            c.power_monitor("on")
        elif op == "power_off":
            c.power_monitor("off")
        elif op == "set_voltage":
            c.set_voltage(rng.uniform(0.8, 13.5))
        elif op == "set_voltage_bad":
            c.set_voltage(rng.choice([0.0, 0.5, 20.0]))
        elif op == "batt_switch":
            c.batt_switch(did)
        elif op == "start_monitor":
            c.start_monitor(did, rng.uniform(0.01, 0.2))
        elif op == "stop_monitor":
            c.stop_monitor()
        elif op == "advance":
            c.advance(rng.uniform(0.0, 0.1))
        elif op == "mirror_on":
            c.device_mirroring(did, "on")
        elif op == "mirror_off":
            c.device_mirroring(did, "off")
        elif op == "node_setup":
            c.node_setup(did, power=rng.random() < 0.7, visual=rng.random() < 0.3)
        elif op == "device_setup":
            c.device_setup(did)
        elif op == "cleanup":
            c.cleanup(did if rng.random() < 0.5 else None)
        elif op == "execute":
            c.execute_command(did, cmds.Tap(rng.randrange(720), rng.randrange(1280)))
    except Exception:
        pass
    finally:
        c.fail_injector = None


def test_randomized_safety_smoke():
    # Small-scale version of the full model check in the acceptance suite.
    rng = random.Random(7)
    for _ in range(300):
        c = make_controller()
        for _ in range(rng.randrange(2, 9)):
            random_call(c, rng, fail_rate=0.15)
            check_safety(c)
        try:
            c.stop_monitor()
        except StateError:
            pass
        c.cleanup()
        assert_safe_state(c)
