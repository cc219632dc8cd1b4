"""Job queue and dispatch with per-vantage-point exclusion.

Policy: strict FIFO by submission order among the jobs whose constraints a
node satisfies. A node never carries two live jobs at once; the busy flag
outlives the job's terminal state until its runner thread has fully left
the node, so an abort can never lead to two pipelines interleaving there.
Jobs that outrun their declared budget are aborted and the node is sent a
cleanup so the meter-off safety rule holds after any failure.
"""

from __future__ import annotations

import base64
import enum
import itertools
import threading
from dataclasses import dataclass, field

from .errors import NotFoundError, PermissionError_, ValidationError


class Role(str, enum.Enum):
    ADMINISTRATOR = "administrator"
    EXPERIMENTER = "experimenter"
    TESTER = "tester"


@dataclass(frozen=True)
class Principal:
    id: str
    role: Role

    def can_register_nodes(self) -> bool:
        return self.role is Role.ADMINISTRATOR

    def can_submit_jobs(self) -> bool:
        return self.role in (Role.ADMINISTRATOR, Role.EXPERIMENTER)


class JobState(str, enum.Enum):
    QUEUED = "queued"
    DISPATCHED = "dispatched"
    RUNNING = "running"
    SUCCEEDED = "succeeded"
    FAILED = "failed"
    ABORTED = "aborted"


TERMINAL_STATES = {JobState.SUCCEEDED, JobState.FAILED, JobState.ABORTED}

_LEGAL = {
    JobState.QUEUED: {JobState.DISPATCHED, JobState.ABORTED},
    JobState.DISPATCHED: {JobState.RUNNING, JobState.ABORTED, JobState.FAILED},
    JobState.RUNNING: {JobState.SUCCEEDED, JobState.FAILED, JobState.ABORTED},
}


@dataclass
class JobSpec:
    job_id: str
    steps: list[dict]
    owner: str
    kind: str = "experiment"  # experiment | control
    device_id: str | None = None
    vantage_id: str | None = None
    labels: set[str] | None = None
    max_duration: float = 3600.0

    def validate(self) -> None:
        if not self.steps:
            raise ValidationError("a job needs at least one step")
        if self.max_duration <= 0:
            raise ValidationError("max_duration must be > 0")
        if self.device_id and self.vantage_id:
            raise ValidationError("constrain by device or vantage point, not both")
        if self.kind not in ("experiment", "control"):
            raise ValidationError(f"unknown job kind {self.kind!r}")

    @classmethod
    def from_dict(cls, doc: dict) -> "JobSpec":
        labels = doc.get("labels")
        return cls(
            job_id=doc["job_id"],
            steps=doc["steps"],
            owner=doc.get("owner", ""),
            kind=doc.get("kind", "experiment"),
            device_id=doc.get("device_id"),
            vantage_id=doc.get("vantage_id"),
            labels=set(labels) if labels else None,
            max_duration=float(doc.get("max_duration", 3600.0)),
        )


@dataclass
class JobExecution:
    spec: JobSpec
    seq: int
    submitted_at: float
    state: JobState = JobState.QUEUED
    vantage_id: str | None = None
    started_at: float | None = None
    finished_at: float | None = None
    error: str | None = None
    artifacts: dict[str, bytes] = field(default_factory=dict)
    cancel_event: threading.Event = field(default_factory=threading.Event)

    def to_dict(self) -> dict:
        return {
            "job_id": self.spec.job_id,
            "kind": self.spec.kind,
            "owner": self.spec.owner,
            "state": self.state.value,
            "vantage_id": self.vantage_id,
            "submitted_at": self.submitted_at,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "error": self.error,
            "artifacts": sorted(self.artifacts),
        }


class Scheduler:
    """Single logical writer over job state; all mutations take the lock."""

    def __init__(self, registry, client_for, clock=None):
        from .clock import WallClock

        self.registry = registry
        self.client_for = client_for  # node_id -> controller client
        self.clock = clock or WallClock()
        self._lock = threading.RLock()
        self._jobs: dict[str, JobExecution] = {}
        self._order = itertools.count()
        self._busy: set[str] = set()
        self._threads: list[threading.Thread] = []

    # ------------------------------------------------------------- submit

    def submit(self, spec: JobSpec, principal: Principal) -> str:
        if not principal.can_submit_jobs():
            raise PermissionError_(
                f"role {principal.role.value!r} may not submit jobs"
            )
        spec.validate()
        with self._lock:
            if spec.job_id in self._jobs:
                raise ValidationError(f"duplicate job id {spec.job_id!r}")
            self._validate_constraints(spec)
            execution = JobExecution(
                spec=spec, seq=next(self._order), submitted_at=self.clock.now()
            )
            self._jobs[spec.job_id] = execution
            return spec.job_id

    def submit_control(self, spec: JobSpec) -> str:
        """Platform-internal control jobs bypass the role check."""
        spec.validate()
        with self._lock:
            self._validate_constraints(spec)
            execution = JobExecution(
                spec=spec, seq=next(self._order), submitted_at=self.clock.now()
            )
            self._jobs[spec.job_id] = execution
            return spec.job_id

    def _validate_constraints(self, spec: JobSpec) -> None:
        if spec.vantage_id is not None:
            self.registry.get(spec.vantage_id)  # raises NotFoundError
        if spec.device_id is not None:
            for node in self.registry.list_nodes():
                if any(d.get("device_id") == spec.device_id for d in node["devices"]):
                    return
            raise ValidationError(f"no vantage point hosts device {spec.device_id!r}")

    # ------------------------------------------------------------ queries

    def job(self, job_id: str) -> JobExecution:
        with self._lock:
            execution = self._jobs.get(job_id)
            if execution is None:
                raise NotFoundError(f"unknown job {job_id!r}")
            return execution

    def jobs(self) -> list[JobExecution]:
        with self._lock:
            return sorted(self._jobs.values(), key=lambda e: e.seq)

    def live_counts_per_node(self) -> dict[str, int]:
        """Nodes mapped to their count of dispatched/running jobs."""
        with self._lock:
            counts: dict[str, int] = {}
            for execution in self._jobs.values():
                if execution.state in (JobState.DISPATCHED, JobState.RUNNING):
                    counts[execution.vantage_id] = counts.get(execution.vantage_id, 0) + 1
            return counts

    def all_terminal(self) -> bool:
        with self._lock:
            return all(e.state in TERMINAL_STATES for e in self._jobs.values())

    # ------------------------------------------------------- state machine

    def _transition(self, execution: JobExecution, to: JobState) -> bool:
        with self._lock:
            if to not in _LEGAL.get(execution.state, set()):
                return False
            execution.state = to
            if to in TERMINAL_STATES:
                execution.finished_at = self.clock.now()
            return True

    # ----------------------------------------------------------- schedule

    def _satisfies(self, node: dict, spec: JobSpec) -> bool:
        if spec.vantage_id is not None:
            return node["id"] == spec.vantage_id
        if spec.device_id is not None:
            return any(d.get("device_id") == spec.device_id for d in node["devices"])
        if spec.labels:
            return node["location"] in spec.labels
        return True

    def schedule(self) -> list[str]:
        """One dispatch pass; returns the job ids sent out this tick."""
        self._abort_overdue()
        dispatched: list[str] = []
        with self._lock:
            nodes = self.registry.list_nodes(state="online")
            queued = sorted(
                (e for e in self._jobs.values() if e.state is JobState.QUEUED),
                key=lambda e: e.seq,
            )
            for node in nodes:
                if node["id"] in self._busy:
                    continue
                for execution in queued:
                    if execution.state is not JobState.QUEUED:
                        continue
                    if not self._satisfies(node, execution.spec):
                        continue
                    self._dispatch(execution, node["id"])
                    dispatched.append(execution.spec.job_id)
                    break
        return dispatched

    def _dispatch(self, execution: JobExecution, node_id: str) -> None:
        execution.vantage_id = node_id
        execution.started_at = self.clock.now()
        if not self._transition(execution, JobState.DISPATCHED):
            return
        self._busy.add(node_id)
        thread = threading.Thread(
            target=self._run, args=(execution, node_id), daemon=True,
            name=f"job-{execution.spec.job_id}",
        )
        self._threads.append(thread)
        thread.start()

    def _run(self, execution: JobExecution, node_id: str) -> None:
        try:
            client = self.client_for(node_id)
            if client is None:
                raise ConnectionError(f"no route to {node_id}")
            self._transition(execution, JobState.RUNNING)
            report = client.run_job(
                execution.spec.job_id, execution.spec.steps, execution.cancel_event
            )
            with self._lock:
                for artifact in report.get("artifacts", []):
                    execution.artifacts[artifact["name"]] = base64.b64decode(
                        artifact["content_b64"]
                    )
            if report.get("aborted"):
                self._transition(execution, JobState.ABORTED)
            elif report.get("ok"):
                self._transition(execution, JobState.SUCCEEDED)
            else:
                execution.error = report.get("error")
                self._transition(execution, JobState.FAILED)
        except Exception as exc:
            execution.error = str(exc)
            self._transition(execution, JobState.FAILED)
            try:
                self.registry.update_from_probe(node_id, None)  # mark offline
            except NotFoundError:
                pass
        finally:
            with self._lock:
                self._busy.discard(node_id)
            self.schedule()  # liveness: completion triggers the next dispatch

    # -------------------------------------------------------------- abort

    def _abort_overdue(self) -> None:
        with self._lock:
            overdue = [
                e for e in self._jobs.values()
                if e.state in (JobState.DISPATCHED, JobState.RUNNING)
                and e.started_at is not None
                and self.clock.now() - e.started_at > e.spec.max_duration
            ]
        for execution in overdue:
            self.abort(execution.spec.job_id)

    def abort(self, job_id: str) -> JobExecution:
        """Abort a queued or live job; live runners clean their node up."""
        with self._lock:
            execution = self.job(job_id)
            if execution.state in TERMINAL_STATES:
                return execution
            execution.cancel_event.set()
            self._transition(execution, JobState.ABORTED)
            return execution

    # --------------------------------------------------------------- misc

    def wait_idle(self, timeout: float = 30.0) -> bool:
        """Block until every job is terminal and all nodes are free."""
        import time

        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            with self._lock:
                if self.all_terminal() and not self._busy:
                    return True
            time.sleep(0.002)
        return False
