import threading
import time

import pytest

from powerbench.controller import Controller, assert_safe_state
from powerbench.device import SimDevice
from powerbench.errors import NotFoundError, PermissionError_, ValidationError
from powerbench.profiles import profile
from powerbench.scheduler import JobSpec, JobState, Principal, Role
from powerbench.server import AccessServer, LocalControllerClient

EXPERIMENTER = Principal("alice", Role.EXPERIMENTER)
TESTER = Principal("tessa", Role.TESTER)


def build_platform(node_ids=("node1", "node2"), devices_per_node=1,
                   refresh_period=60.0):
    """Access server with in-process controllers attached and probed."""
    server = AccessServer(refresh_period=refresh_period)
    server.add_principal("alice", "experimenter")
    server.add_principal("tessa", "tester")
    controllers = {}
    for i, node_id in enumerate(node_ids):
        devices = [
            SimDevice(f"{node_id}-d{j}", profile("SMJ337A"), seed=i * 10 + j, noise=False)
            for j in range(devices_per_node)
        ]
        controller = Controller(node_id, devices)
        controllers[node_id] = controller
        server.attach_controller(node_id, LocalControllerClient(controller))
        server.register_vantage_point(node_id, f"10.0.0.{i}:8081", f"key-{i}", "root")
    server.refresh()
    # Run each node's provisioning join job before tests queue real work.
    server.schedule()
    assert server.scheduler.wait_idle(10.0)
    return server, controllers


def sleep_job(job_id, seconds=0.005, **constraints):
    return JobSpec(
        job_id=job_id,
        steps=[{"name": "hold", "seconds": seconds}],
        owner="alice",
        **constraints,
    )


class TestSubmit:
    def test_valid_spec_queued(self):
        server, _ = build_platform()
        job_id = server.submit_job(sleep_job("j1", vantage_id="node1"), EXPERIMENTER)
        assert server.job(job_id)["state"] == "queued"

    def test_unknown_device_rejected(self):
        server, _ = build_platform()
        with pytest.raises(ValidationError):
            server.submit_job(sleep_job("j1", device_id="ghost"), EXPERIMENTER)

    def test_unknown_vantage_rejected(self):
        server, _ = build_platform()
        with pytest.raises(NotFoundError):
            server.submit_job(sleep_job("j1", vantage_id="ghost"), EXPERIMENTER)

    def test_tester_cannot_submit(self):
        server, _ = build_platform()
        with pytest.raises(PermissionError_):
            server.submit_job(sleep_job("j1"), TESTER)

    def test_tester_cannot_register(self):
        server, _ = build_platform()
        with pytest.raises(PermissionError_):
            server.register_vantage_point("n9", "a", "k", TESTER)

    def test_both_constraints_rejected(self):
        server, _ = build_platform()
        with pytest.raises(ValidationError):
            server.submit_job(
                sleep_job("j1", vantage_id="node1", device_id="node1-d0"), EXPERIMENTER
            )

    def test_empty_steps_rejected(self):
        server, _ = build_platform()
        with pytest.raises(ValidationError):
            server.submit_job(
                JobSpec(job_id="j1", steps=[], owner="alice"), EXPERIMENTER
            )


class TestDispatch:
    def test_one_job_per_node(self):
        server, _ = build_platform(("node1",))
        server.submit_job(sleep_job("a", 0.05, vantage_id="node1"), EXPERIMENTER)
        server.submit_job(sleep_job("b", 0.05, vantage_id="node1"), EXPERIMENTER)
        dispatched = server.schedule()
        assert dispatched == ["a"]
        assert server.job("b")["state"] == "queued"
        assert server.scheduler.wait_idle(10.0)
        assert server.job("a")["state"] == "succeeded"
        assert server.job("b")["state"] == "succeeded"

    def test_two_nodes_dispatch_in_parallel(self):
        server, _ = build_platform(("node1", "node2"))
        server.submit_job(sleep_job("a", vantage_id="node1"), EXPERIMENTER)
        server.submit_job(sleep_job("b", vantage_id="node2"), EXPERIMENTER)
        assert sorted(server.schedule()) == ["a", "b"]

    def test_empty_queue(self):
        server, _ = build_platform()
        assert server.schedule() == []

    def test_fifo_among_satisfiable(self):
        server, controllers = build_platform(("node1",))
        order = []

        class RecordingClient(LocalControllerClient):
            def run_job(self, job_id, steps, cancel_event=None):
                order.append(job_id)
                return super().run_job(job_id, steps, cancel_event)

        server.attach_controller("node1", RecordingClient(controllers["node1"]))
        for i in range(5):
            server.submit_job(sleep_job(f"j{i}", 0.001, vantage_id="node1"), EXPERIMENTER)
        for _ in range(20):
            server.schedule()
            if server.scheduler.all_terminal():
                break
            time.sleep(0.01)
        assert server.scheduler.wait_idle(10.0)
        assert order == [f"j{i}" for i in range(5)]

    def test_device_constraint_routes_to_hosting_node(self):
        server, _ = build_platform(("node1", "node2"))
        server.submit_job(sleep_job("j1", device_id="node2-d0"), EXPERIMENTER)
        server.schedule()
        assert server.scheduler.wait_idle(10.0)
        assert server.job("j1")["vantage_id"] == "node2"

    def test_unreachable_node_fails_job_and_marks_offline(self):
        server, controllers = build_platform(("node1",))
        down = {"flag": False}
        server.attach_controller(
            "node1",
            LocalControllerClient(controllers["node1"], reachable=lambda: down["flag"]),
        )
        server.submit_job(sleep_job("j1", vantage_id="node1"), EXPERIMENTER)
        server.schedule()
        assert server.scheduler.wait_idle(10.0)
        assert server.job("j1")["state"] == "failed"
        assert server.list_nodes()[0]["state"] == "offline"

    def test_offline_node_gets_nothing(self):
        server, controllers = build_platform(("node1",))
        server.registry.update_from_probe("node1", None)
        server.submit_job(sleep_job("j1", vantage_id="node1"), EXPERIMENTER)
        assert server.schedule() == []
        assert server.job("j1")["state"] == "queued"


class TestAbort:
    def test_queued_job_abort(self):
        server, _ = build_platform(("node1",))
        server.submit_job(sleep_job("a", 0.1, vantage_id="node1"), EXPERIMENTER)
        server.submit_job(sleep_job("b", 0.1, vantage_id="node1"), EXPERIMENTER)
        server.schedule()
        server.abort_job("b")
        assert server.job("b")["state"] == "aborted"
        assert server.scheduler.wait_idle(10.0)
        assert server.job("a")["state"] == "succeeded"

    def test_overdue_job_aborted_and_node_cleaned(self):
        server, controllers = build_platform(("node1",))
        spec = JobSpec(
            job_id="slow",
            steps=[{"name": "node_setup", "device_id": "node1-d0", "power": True}]
            + [{"name": "hold", "seconds": 0.02}] * 50,
            owner="alice",
            vantage_id="node1",
            max_duration=0.05,
        )
        server.submit_job(spec, EXPERIMENTER)
        server.schedule()
        deadline = time.monotonic() + 10.0
        while time.monotonic() < deadline:
            server.schedule()  # the periodic tick that notices the overrun
            if server.job("slow")["state"] == "aborted":
                break
            time.sleep(0.01)
        assert server.job("slow")["state"] == "aborted"
        assert server.scheduler.wait_idle(10.0)
        assert_safe_state(controllers["node1"])

    def test_finished_at_set_only_on_terminal(self):
        server, _ = build_platform(("node1",))
        server.submit_job(sleep_job("j1", 0.02, vantage_id="node1"), EXPERIMENTER)
        assert server.job("j1")["finished_at"] is None
        server.schedule()
        assert server.scheduler.wait_idle(10.0)
        assert server.job("j1")["finished_at"] is not None


class TestArtifacts:
    def test_measurement_job_artifacts_exposed(self):
        server, _ = build_platform(("node1",))
        spec = JobSpec(
            job_id="measure",
            steps=[
                {"name": "node_setup", "device_id": "node1-d0", "power": True},
                {"name": "start_monitor", "device_id": "node1-d0", "duration": 0.2},
                {"name": "sleep", "seconds": 0.2},
                {"name": "stop_monitor"},
                {"name": "cleanup"},
            ],
            owner="alice",
            vantage_id="node1",
        )
        server.submit_job(spec, EXPERIMENTER)
        server.schedule()
        assert server.scheduler.wait_idle(10.0)
        job = server.job("measure")
        assert job["state"] == "succeeded"
        csv_names = [n for n in job["artifacts"] if n.endswith(".csv")]
        assert csv_names
        content = server.artifact("measure", csv_names[0])
        assert content.startswith(b"t_s,current_mA,voltage_V")

    def test_missing_artifact(self):
        server, _ = build_platform(("node1",))
        server.submit_job(sleep_job("j1", vantage_id="node1"), EXPERIMENTER)
        server.schedule()
        assert server.scheduler.wait_idle(10.0)
        with pytest.raises(NotFoundError):
            server.artifact("j1", "nope.csv")


class TestRefresh:
    def test_refresh_populates_devices(self):
        server, controllers = build_platform(("node1",))
        devices, stale = server.list_devices("node1")
        assert not stale
        assert devices[0]["device_id"] == "node1-d0"
        assert devices[0]["os"] == "android"

    def test_new_device_appears_after_refresh(self):
        from powerbench.automation import LinkState
        from powerbench.controller import Channel

        server, controllers = build_platform(("node1",))
        controller = controllers["node1"]
        controller.devices["late"] = SimDevice("late", profile("LMX210"), noise=False)
        controller.links["late"] = LinkState()
        controller.channels["late"] = Channel.BATTERY
        server.refresh()
        devices, _ = server.list_devices("node1")
        assert {d["device_id"] for d in devices} == {"node1-d0", "late"}

    def test_queued_jobs_survive_node_timeout(self):
        server, controllers = build_platform(("node1",))
        server.submit_job(sleep_job("j1", vantage_id="node1"), EXPERIMENTER)
        server.attach_controller(
            "node1", LocalControllerClient(controllers["node1"], reachable=lambda: False)
        )
        server.refresh()
        assert server.job("j1")["state"] == "queued"
        assert server.list_nodes()[0]["state"] == "offline"


def test_exclusion_under_concurrent_submitters():
    """Scaled-down version of the acceptance criterion (full one: 200 jobs)."""
    server, controllers = build_platform(("n1", "n2", "n3"), refresh_period=600.0)
    violations = []
    stop = threading.Event()

    def watch():
        while not stop.is_set():
            counts = server.scheduler.live_counts_per_node()
            bad = {k: v for k, v in counts.items() if v > 1}
            if bad:
                violations.append(bad)
            time.sleep(0.0005)

    watcher = threading.Thread(target=watch, daemon=True)
    watcher.start()

    def submitter(prefix):
        for i in range(15):
            target = ["n1", "n2", "n3", None][i % 4]
            kw = {"vantage_id": target} if target else {}
            server.submit_job(sleep_job(f"{prefix}-{i}", 0.002, **kw), EXPERIMENTER)
            server.schedule()

    threads = [threading.Thread(target=submitter, args=(f"s{k}",)) for k in range(3)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for _ in range(200):
        server.schedule()
        if server.scheduler.all_terminal():
            break
        time.sleep(0.005)
    stop.set()
    watcher.join(timeout=2.0)
    assert server.scheduler.wait_idle(20.0)
    assert violations == []
    states = {e.spec.job_id: e.state for e in server.scheduler.jobs()}
    assert all(s == JobState.SUCCEEDED for s in states.values())
