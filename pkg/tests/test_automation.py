import random

import pytest

from powerbench import adb, commands as cmds
from powerbench.automation import (
    Backend,
    Dispatcher,
    LinkState,
    available_backends,
    select_backend,
)
from powerbench.device import SimDevice
from powerbench.errors import EncodingError, PartialDeliveryError, RoutingError
from powerbench.profiles import profile

ALL_ON = LinkState(usb_on=True, wifi_band="2.4GHz", bluetooth_paired=True)


class TestAdbStrings:
    def test_tap(self):
        assert adb.to_adb(cmds.Tap(100, 200)) == "input tap 100 200"

    def test_swipe(self):
        assert adb.to_adb(cmds.Swipe(0, 0, 0, 500, 300)) == "input swipe 0 0 0 500 300"

    def test_text_space_encoding(self):
        assert adb.to_adb(cmds.Text("a b")) == "input text a%sb"

    def test_text_control_char_rejected(self):
        with pytest.raises(EncodingError):
            adb.to_adb(cmds.Text("a\x07b"))

    def test_key_and_launch(self):
        assert adb.to_adb(cmds.Key("enter")) == "input keyevent KEYCODE_ENTER"
        assert adb.to_adb(cmds.LaunchApp("org.x.app")).startswith("monkey -p org.x.app")

    @pytest.mark.parametrize(
        "cmd",
        [
            cmds.Tap(5, 9),
            cmds.Swipe(1, 2, 3, 4, 250),
            cmds.Text("hello world"),
            cmds.Text("a+b (c)"),
            cmds.Key("tab"),
            cmds.LaunchApp("com.example"),
        ],
    )
    def test_parse_inverts_translate(self, cmd):
        assert adb.parse_shell_command(adb.to_adb(cmd)) == cmd

    def test_plain_shell_passthrough(self):
        assert adb.parse_shell_command("sleep 0.3") is None
        assert adb.parse_shell_command("") is None


class TestSelectBackend:
    def test_android_meter_off_prefers_usb(self):
        assert select_backend("android", ALL_ON, meter_active=False) == Backend.USB_ADB

    def test_android_meter_on_uses_wifi(self):
        assert select_backend("android", ALL_ON, meter_active=True) == Backend.WIFI_ADB

    def test_android_meter_on_mobile_uses_hid(self):
        got = select_backend("android", ALL_ON, meter_active=True, needs_mobile_network=True)
        assert got == Backend.BLUETOOTH_HID

    def test_ios_always_hid(self):
        for meter in (False, True):
            assert select_backend("ios", ALL_ON, meter_active=meter) == Backend.BLUETOOTH_HID

    def test_no_backend_is_routing_error(self):
        nothing = LinkState(usb_on=False, wifi_band="off", bluetooth_paired=False)
        with pytest.raises(RoutingError):
            select_backend("android", nothing, meter_active=False)

    def test_pure_function(self):
        args = ("android", ALL_ON, True, False)
        assert select_backend(*args) == select_backend(*args)

    def test_availability(self):
        link = LinkState(usb_on=False, wifi_band="5GHz", bluetooth_paired=True)
        assert available_backends("android", link) == {Backend.WIFI_ADB, Backend.BLUETOOTH_HID}
        assert available_backends("ios", link) == {Backend.BLUETOOTH_HID}


def fresh_device(seed=7, os_name="android"):
    name = "IPHONE7" if os_name == "ios" else "SMJ337A"
    dev = SimDevice("d1", profile(name), seed=seed, noise=False)
    dev.install_app("news", cpu_load=0.3)
    dev.install_app("shop", cpu_load=0.2)
    return dev


def paced(dev):
    return Dispatcher(advance=lambda s: dev.advance_to(dev.now + s))


class TestDispatch:
    def test_tap_equivalent_across_backends(self):
        results = []
        for backend in (Backend.WIFI_ADB, Backend.BLUETOOTH_HID):
            dev = fresh_device()
            x, y = dev.app_icon_center("news")
            paced(dev).dispatch(cmds.Tap(x, y), dev, ALL_ON, backend)
            results.append(dev.state_snapshot())
        assert results[0] == results[1]
        assert results[0]["foreground_app"] == "news"

    def test_swipe_hid_path_visits_endpoints(self):
        dev = fresh_device()
        dispatcher = paced(dev)
        shipped = []
        dispatcher.delivery_hook = lambda n: shipped.append(n)
        report = dispatcher.dispatch(cmds.Swipe(100, 900, 100, 400, 300), dev, ALL_ON,
                                     Backend.BLUETOOTH_HID)
        # Cursor ends at the swipe endpoint; press/release bracket the moves.
        assert dispatcher.hid_session("d1").cursor == (100, 400)
        assert report.hid_reports == len(shipped)

    def test_usb_unavailable_during_measurement(self):
        dev = fresh_device()
        link = LinkState(usb_on=False, wifi_band="2.4GHz", bluetooth_paired=True)
        with pytest.raises(RoutingError):
            paced(dev).dispatch(cmds.Tap(1, 1), dev, link, Backend.USB_ADB)

    def test_text_via_hid_round_trips_through_reports(self):
        dev = fresh_device()
        dev.install_app("pad")
        from powerbench.device import Rect, Scene, SceneTarget

        dev._scenes["pad"] = Scene(
            targets=[SceneTarget("box", Rect(0, 0, 100, 50), "focus:box")]
        )
        dev.apply_input(cmds.LaunchApp("pad"))
        dev.apply_input(cmds.Tap(10, 10))
        paced(dev).dispatch(cmds.Text("Hi there!"), dev, ALL_ON, Backend.BLUETOOTH_HID)
        assert dev.active_scene().fields["box"] == "Hi there!"

    def test_partial_delivery_reports_prefix(self):
        dev = fresh_device()
        dispatcher = paced(dev)

        def hook(sent_so_far):
            if sent_so_far >= 3:
                raise ConnectionError("lost pairing")

        dispatcher.delivery_hook = hook
        with pytest.raises(PartialDeliveryError) as err:
            dispatcher.dispatch(cmds.Tap(600, 900), dev, ALL_ON, Backend.BLUETOOTH_HID)
        assert len(err.value.delivered) == 3

    def test_hid_launch_needs_home_grid(self):
        dev = fresh_device()
        dev.apply_input(cmds.LaunchApp("news"))
        with pytest.raises(RoutingError):
            paced(dev).dispatch(cmds.LaunchApp("shop"), dev, ALL_ON, Backend.BLUETOOTH_HID)

    def test_wait_advances_time_on_all_backends(self):
        for backend in (Backend.USB_ADB, Backend.WIFI_ADB, Backend.BLUETOOTH_HID):
            dev = fresh_device()
            paced(dev).dispatch(cmds.Wait(1500), dev, ALL_ON, backend)
            assert dev.now == pytest.approx(1.5)


def random_command(rng, dev):
    w, h = dev.screen
    kind = rng.choice(["tap", "swipe", "text", "key", "launch", "wait"])
    if kind == "tap":
        return cmds.Tap(rng.randrange(w), rng.randrange(h))
    if kind == "swipe":
        return cmds.Swipe(rng.randrange(w), rng.randrange(h),
                          rng.randrange(w), rng.randrange(h), rng.randrange(50, 800))
    if kind == "text":
        alphabet = "abc XYZ123!?"
        return cmds.Text("".join(rng.choice(alphabet) for _ in range(rng.randrange(1, 12))))
    if kind == "key":
        return cmds.Key(rng.choice(["enter", "tab"]))
    if kind == "launch":
        return cmds.LaunchApp(rng.choice(["news", "shop"]))
    return cmds.Wait(rng.randrange(0, 400))


def randomize_state(rng, dev):
    dev.brightness = rng.randrange(0, 251)
    dev.wifi = rng.choice(["off", "2.4GHz"])
    dev.bluetooth = rng.random() < 0.5
    if rng.random() < 0.4:
        dev.apply_input(cmds.LaunchApp(rng.choice(["news", "shop"])))
        dev.advance_to(dev.now + rng.random())


def test_backend_equivalence_randomized():
    rng = random.Random(2024)
    for round_no in range(60):
        seed = rng.randrange(10_000)
        setup = random.Random(seed)
        devices = []
        for _ in range(3):
            dev = fresh_device(seed=seed)
            randomize_state(random.Random(seed + 1), dev)
            devices.append(dev)
        command = random_command(setup, devices[0])
        if isinstance(command, cmds.LaunchApp):
            for dev in devices:
                dev.foreground_app = "home"
        snapshots = []
        for dev, backend in zip(devices, Backend):
            paced(dev).dispatch(command, dev, ALL_ON, backend)
            snapshots.append(dev.state_snapshot())
        assert snapshots[0] == snapshots[1] == snapshots[2], f"diverged on {command}"
