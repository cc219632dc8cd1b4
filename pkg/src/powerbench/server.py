"""Central coordinator: registry plus scheduler plus periodic reachability
refresh, fronted by controller clients (in-process or HTTP).

Registering a node enqueues its provisioning pipeline as the first job, the
same way a freshly joined vantage point gets its software installed and
verified before anyone can target it.
"""

from __future__ import annotations

import itertools
import threading

from .clock import WallClock
from .errors import NotFoundError, PermissionError_
from .registry import DEFAULT_REFRESH_PERIOD, DEFAULT_ZONE, Registry
from .scheduler import JobSpec, Principal, Role, Scheduler


class LocalControllerClient:
    """Direct in-process transport to a simulated controller."""

    def __init__(self, controller, reachable=lambda: True):
        self.controller = controller
        self.reachable = reachable

    def status(self) -> dict:
        if not self.reachable():
            raise ConnectionError(f"{self.controller.node_id} unreachable")
        return self.controller.status()

    def run_job(self, job_id: str, steps: list[dict], cancel_event=None) -> dict:
        if not self.reachable():
            raise ConnectionError(f"{self.controller.node_id} unreachable")
        return self.controller.run_job(job_id, steps, cancel_event)


class HttpControllerClient:
    """Requests-based transport to a remote controller endpoint."""

    def __init__(self, base_url: str, timeout: float = 10.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def status(self) -> dict:
        import requests

        resp = requests.get(f"{self.base_url}/status", timeout=self.timeout)
        resp.raise_for_status()
        return resp.json()

    def run_job(self, job_id: str, steps: list[dict], cancel_event=None) -> dict:
        import requests

        resp = requests.post(
            f"{self.base_url}/jobs/run",
            json={"job_id": job_id, "steps": steps},
            timeout=max(self.timeout, 120.0),
        )
        resp.raise_for_status()
        return resp.json()


class AccessServer:
    def __init__(
        self,
        zone: str = DEFAULT_ZONE,
        state_dir: str | None = None,
        clock=None,
        refresh_period: float = DEFAULT_REFRESH_PERIOD,
    ):
        self.clock = clock or WallClock()
        self.registry = Registry(
            zone=zone, state_dir=state_dir, clock=self.clock,
            refresh_period=refresh_period,
        )
        self.scheduler = Scheduler(self.registry, self.client_for, clock=self.clock)
        self.clients: dict[str, object] = {}
        self.principals: dict[str, Principal] = {
            "root": Principal("root", Role.ADMINISTRATOR),
        }
        self._control_seq = itertools.count(1)
        self._refresh_thread: threading.Thread | None = None
        self._scheduler_thread: threading.Thread | None = None
        self._stop = threading.Event()

    # ---------------------------------------------------------- principals

    def add_principal(self, principal_id: str, role: str | Role) -> Principal:
        principal = Principal(principal_id, Role(role))
        self.principals[principal_id] = principal
        return principal

    def principal(self, principal_id: str) -> Principal:
        principal = self.principals.get(principal_id)
        if principal is None:
            raise PermissionError_(f"unknown principal {principal_id!r}")
        return principal

    # ------------------------------------------------------------- clients

    def attach_controller(self, node_id: str, client) -> None:
        self.clients[node_id] = client

    def client_for(self, node_id: str):
        client = self.clients.get(node_id)
        if client is None:
            record = self.registry.get(node_id)
            if record.address.startswith("http"):
                client = HttpControllerClient(record.address)
                self.clients[node_id] = client
        return client

    # ------------------------------------------------------------ registry

    def register_vantage_point(
        self,
        node_id: str,
        address: str,
        credential: str,
        principal: Principal | str,
        location: str = "",
    ):
        principal = self._resolve(principal)
        if not principal.can_register_nodes():
            raise PermissionError_("only administrators may register vantage points")
        known = node_id in {n["id"] for n in self.registry.list_nodes()}
        record = self.registry.register(node_id, address, credential, location)
        if not known:
            # First contact: the join pipeline is the node's first job.
            self.scheduler.submit_control(
                JobSpec(
                    job_id=f"join-{node_id}-{next(self._control_seq)}",
                    steps=[{"name": "provision"}],
                    owner="system",
                    kind="control",
                    vantage_id=node_id,
                )
            )
        return record

    def remove_vantage_point(self, node_id: str, principal: Principal | str) -> None:
        principal = self._resolve(principal)
        if not principal.can_register_nodes():
            raise PermissionError_("only administrators may remove vantage points")
        self.registry.remove(node_id)
        self.clients.pop(node_id, None)

    def _resolve(self, principal: Principal | str) -> Principal:
        if isinstance(principal, Principal):
            return principal
        return self.principal(principal)

    def list_nodes(self, label=None, state=None):
        return self.registry.list_nodes(label=label, state=state)

    def list_devices(self, node_id: str):
        return self.registry.list_devices(node_id)

    # ---------------------------------------------------------------- jobs

    def submit_job(self, spec: JobSpec | dict, principal: Principal | str) -> str:
        if isinstance(spec, dict):
            spec = JobSpec.from_dict(spec)
        return self.scheduler.submit(spec, self._resolve(principal))

    def schedule(self) -> list[str]:
        return self.scheduler.schedule()

    def job(self, job_id: str) -> dict:
        return self.scheduler.job(job_id).to_dict()

    def abort_job(self, job_id: str) -> dict:
        return self.scheduler.abort(job_id).to_dict()

    def artifact(self, job_id: str, name: str) -> bytes:
        execution = self.scheduler.job(job_id)
        try:
            return execution.artifacts[name]
        except KeyError:
            raise NotFoundError(f"job {job_id!r} has no artifact {name!r}") from None

    # ------------------------------------------------------------- refresh

    def refresh(self) -> dict:
        """Probe every node; per-node failures never fail the sweep."""
        for node in self.registry.list_nodes():
            node_id = node["id"]
            try:
                client = self.client_for(node_id)
                status = client.status() if client is not None else None
            except Exception:
                status = None
            try:
                self.registry.update_from_probe(node_id, status)
            except NotFoundError:
                pass  # node removed while the sweep was running
        self.registry.persist()
        return self.registry.snapshot()

    # ---------------------------------------------------------- background

    def start_background_loops(self, schedule_period: float = 0.5) -> None:
        self._stop.clear()

        def refresh_loop():
            while not self._stop.wait(self.registry.refresh_period):
                self.refresh()

        def schedule_loop():
            while not self._stop.wait(schedule_period):
                self.scheduler.schedule()

        self._refresh_thread = threading.Thread(target=refresh_loop, daemon=True)
        self._scheduler_thread = threading.Thread(target=schedule_loop, daemon=True)
        self._refresh_thread.start()
        self._scheduler_thread.start()

    def stop_background_loops(self) -> None:
        self._stop.set()
