import pytest
import requests

from powerbench.controller import Controller
from powerbench.device import SimDevice
from powerbench.http_api import AccessServerService, ControllerService
from powerbench.profiles import profile
from powerbench.server import AccessServer, HttpControllerClient
from powerbench.wpm import synthesize_catalog


@pytest.fixture()
def controller_service():
    controller = Controller(
        "node1",
        [SimDevice("d1", profile("J7DUO"), seed=1, noise=False)],
        location="uk",
    )
    controller.site_catalog = synthesize_catalog(2, seed=1)
    service = ControllerService(controller, port=0).start()
    yield service, controller
    service.stop()


@pytest.fixture()
def platform(controller_service):
    ctrl_service, controller = controller_service
    server = AccessServer(refresh_period=60.0)
    server.add_principal("alice", "experimenter")
    service = AccessServerService(server, port=0).start()
    server.attach_controller("node1", HttpControllerClient(ctrl_service.base_url))
    yield service, server, ctrl_service, controller
    service.stop()


def post(base, path, body=None, principal="root", expect=200):
    resp = requests.post(
        f"{base}{path}", json=body or {}, headers={"X-Principal": principal}, timeout=10
    )
    assert resp.status_code == expect, resp.text
    return resp


class TestControllerService:
    def test_status_and_core_ops(self, controller_service):
        service, controller = controller_service
        base = service.base_url
        status = requests.get(f"{base}/status", timeout=5).json()
        assert status["node_id"] == "node1"
        assert status["devices"][0]["device_id"] == "d1"

        assert post(base, "/power_monitor", {"state": "on"}).json() == {"meter": "on"}
        assert post(base, "/set_voltage", {"voltage": 4.2}).json() == {"voltage": 4.2}
        assert post(base, "/batt_switch", {"device_id": "d1"}).json() == {
            "channel": "monitor"
        }
        post(base, "/set_voltage", {"voltage": 0.2}, expect=400)
        post(base, "/power_monitor", {"state": "off"}, expect=409)  # bypass active

    def test_measurement_over_http(self, controller_service):
        service, controller = controller_service
        base = service.base_url
        post(base, "/node_setup", {"device_id": "d1", "power": True})
        trace_id = post(
            base, "/start_monitor", {"device_id": "d1", "duration": 0.5}
        ).json()["trace_id"]
        post(base, "/advance", {"seconds": 0.5})
        assert post(base, "/stop_monitor").json() == {"trace_id": trace_id}

    def test_execute_command_payload(self, controller_service):
        service, _ = controller_service
        report = post(
            service.base_url,
            "/execute_command",
            {"device_id": "d1", "command": {"type": "tap", "x": 5, "y": 6}},
        ).json()
        assert report["backend"] == "usb_adb"
        assert report["adb_command"] == "input tap 5 6"

    def test_input_session_round_trip(self, controller_service):
        service, controller = controller_service
        base = service.base_url
        opened = post(base, "/input", {"action": "open", "device_id": "d1"}).json()
        sid = opened["session_id"]
        events = [
            {"t_ms": 0, "kind": "mouse_down", "x": 10, "y": 10,
             "view_w": 720, "view_h": 1280},
            {"t_ms": 60, "kind": "mouse_up", "x": 10, "y": 10,
             "view_w": 720, "view_h": 1280},
        ]
        appended = post(base, "/input", {"session_id": sid, "events": events}).json()
        assert appended["events"] == 2
        closed = post(base, "/input", {"action": "close", "session_id": sid}).json()
        assert closed["events"] == 2
        assert not controller.recording(sid).open

    def test_frames_endpoint(self, controller_service):
        service, controller = controller_service
        base = service.base_url
        post(base, "/device_mirroring", {"device_id": "d1", "state": "on"})
        doc = requests.get(
            f"{base}/frames", params={"device_id": "d1", "count": 3}, timeout=5
        ).json()
        seqs = [f["seq"] for f in doc["frames"]]
        assert seqs == sorted(seqs) and len(seqs) == 3

    def test_unknown_route_404(self, controller_service):
        service, _ = controller_service
        assert requests.get(f"{service.base_url}/nope", timeout=5).status_code == 404


class TestAccessServerService:
    def register_node(self, base, ctrl_base):
        return post(
            base,
            "/nodes",
            {"id": "node1", "address": ctrl_base, "credential": "key-1",
             "location": "uk"},
        ).json()

    def test_register_and_refresh(self, platform):
        service, server, ctrl_service, _ = platform
        record = self.register_node(service.base_url, ctrl_service.base_url)
        assert record["dns_name"] == "node1.batterylab.test"
        snapshot = post(service.base_url, "/refresh").json()
        assert snapshot["nodes"]["node1"]["state"] == "online"
        nodes = requests.get(
            f"{service.base_url}/nodes", params={"state": "online"}, timeout=5
        ).json()["nodes"]
        assert [n["id"] for n in nodes] == ["node1"]

    def test_register_requires_admin(self, platform):
        service, *_ = platform
        post(service.base_url, "/nodes", {"id": "x", "address": "a"},
             principal="alice", expect=403)

    def test_register_bad_id(self, platform):
        service, _, ctrl_service, _ = platform
        post(service.base_url, "/nodes",
             {"id": "NODE 1", "address": "a", "credential": "k"}, expect=400)

    def test_device_listing(self, platform):
        service, _, ctrl_service, _ = platform
        self.register_node(service.base_url, ctrl_service.base_url)
        post(service.base_url, "/refresh")
        doc = requests.get(
            f"{service.base_url}/nodes/node1/devices", timeout=5
        ).json()
        assert doc["stale"] is False
        assert doc["devices"][0]["device_id"] == "d1"

    def test_job_lifecycle_over_http(self, platform):
        service, server, ctrl_service, controller = platform
        base = service.base_url
        self.register_node(base, ctrl_service.base_url)
        post(base, "/refresh")
        spec = {
            "job_id": "web-1",
            "vantage_id": "node1",
            "owner": "alice",
            "steps": [
                {"name": "node_setup", "device_id": "d1", "power": True},
                {"name": "start_monitor", "device_id": "d1", "duration": 0.2},
                {"name": "sleep", "seconds": 0.2},
                {"name": "stop_monitor"},
                {"name": "cleanup"},
            ],
        }
        job_id = post(base, "/jobs", spec, principal="alice").json()["job_id"]
        assert server.scheduler.wait_idle(15.0)
        job = requests.get(f"{base}/jobs/{job_id}", timeout=5).json()
        assert job["state"] == "succeeded"
        csv_name = next(n for n in job["artifacts"] if n.endswith(".csv"))
        content = requests.get(
            f"{base}/jobs/{job_id}/artifacts/{csv_name}", timeout=5
        ).content
        assert content.startswith(b"t_s,current_mA,voltage_V")

    def test_submit_requires_known_principal(self, platform):
        service, *_ = platform
        post(service.base_url, "/jobs", {"job_id": "j", "steps": [{"name": "cleanup"}]},
             principal="ghost", expect=403)

    def test_wpm_job_over_http(self, platform):
        service, server, ctrl_service, controller = platform
        base = service.base_url
        self.register_node(base, ctrl_service.base_url)
        post(base, "/refresh")
        urls = [e.url for e in controller.site_catalog.entries]
        spec = {
            "job_id": "wpm-1",
            "vantage_id": "node1",
            "owner": "alice",
            "steps": [{
                "name": "wpm",
                "request": {
                    "url_list": urls, "device_id": "d1", "reps": 1,
                    "per_page_budget_s": 2.0, "page_slot_s": 3.0,
                },
            }],
        }
        post(base, "/jobs", spec, principal="alice")
        assert server.scheduler.wait_idle(20.0)
        job = requests.get(f"{base}/jobs/wpm-1", timeout=5).json()
        assert job["state"] == "succeeded"
        assert "wpm-result.json" in job["artifacts"]
        import json as _json

        doc = _json.loads(requests.get(
            f"{base}/jobs/wpm-1/artifacts/wpm-result.json", timeout=5
        ).content)
        assert doc["schema"] == "wpm-result/v1"
        assert len(doc["urls"]) == len(urls)
