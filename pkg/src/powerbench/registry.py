"""Vantage-point registry: naming, reachability state, and persistence.

Records live in memory; every mutation appends to a JSONL event log and
rewrites a materialized snapshot file (stable key order), so a restarted
server recovers without a database. Names are assigned once: the derived
DNS-style name survives any number of address changes.
"""

from __future__ import annotations

import json
import os
import re
import threading
from dataclasses import dataclass, field

from .errors import NotFoundError, PermissionError_, ValidationError

ID_PATTERN = re.compile(r"^[a-z0-9-]{1,32}$")
DEFAULT_ZONE = "batterylab.test"
DEFAULT_REFRESH_PERIOD = 1800.0  # 30 minutes


@dataclass
class VantagePointRecord:
    id: str
    address: str
    dns_name: str
    credential: str
    state: str = "offline"  # online | offline
    last_seen: float | None = None
    location: str = ""
    devices: list[dict] = field(default_factory=list)
    refreshed: bool = False  # False until the first probe lands

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "address": self.address,
            "dns_name": self.dns_name,
            "state": self.state,
            "last_seen": self.last_seen,
            "location": self.location,
            "devices": self.devices,
            "refreshed": self.refreshed,
        }


class Registry:
    def __init__(
        self,
        zone: str = DEFAULT_ZONE,
        state_dir: str | None = None,
        clock=None,
        refresh_period: float = DEFAULT_REFRESH_PERIOD,
    ):
        from .clock import WallClock

        self.zone = zone
        self.refresh_period = refresh_period
        self.clock = clock or WallClock()
        self.state_dir = state_dir
        self._records: dict[str, VantagePointRecord] = {}
        self._lock = threading.RLock()
        if state_dir:
            os.makedirs(state_dir, exist_ok=True)
            self._load()

    # --------------------------------------------------------- persistence

    @property
    def _snapshot_path(self):
        return os.path.join(self.state_dir, "registry.json")

    @property
    def _log_path(self):
        return os.path.join(self.state_dir, "events.jsonl")

    def _load(self) -> None:
        try:
            with open(self._snapshot_path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except FileNotFoundError:
            return
        for node in doc.get("nodes", {}).values():
            self._records[node["id"]] = VantagePointRecord(
                id=node["id"],
                address=node["address"],
                dns_name=node["dns_name"],
                credential=node.get("credential", ""),
                state=node["state"],
                last_seen=node["last_seen"],
                location=node.get("location", ""),
                devices=node.get("devices", []),
                refreshed=node.get("refreshed", False),
            )

    def _log_event(self, event: str, **data) -> None:
        if not self.state_dir:
            return
        entry = {"ts": self.clock.now(), "event": event, **data}
        with open(self._log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")

    def _persist_snapshot(self) -> None:
        if not self.state_dir:
            return
        tmp = self._snapshot_path + ".tmp"
        doc = self.snapshot(include_credentials=True)
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, self._snapshot_path)

    # ----------------------------------------------------------- mutation

    def register(self, node_id: str, address: str, credential: str,
                 location: str = "") -> VantagePointRecord:
        """Add a node or update an existing node's address.

        Re-registration with the same id keeps the assigned name; a
        different credential for a known id is rejected outright.
        """
        if not ID_PATTERN.match(node_id or ""):
            raise ValidationError(
                f"node id {node_id!r} must match [a-z0-9-]{{1,32}}"
            )
        with self._lock:
            existing = self._records.get(node_id)
            if existing is not None:
                if existing.credential != credential:
                    raise PermissionError_(
                        f"node {node_id!r} already registered with a different credential"
                    )
                existing.address = address
                if location:
                    existing.location = location
                self._log_event("reregistered", id=node_id, address=address)
                self._persist_snapshot()
                return existing
            record = VantagePointRecord(
                id=node_id,
                address=address,
                dns_name=f"{node_id}.{self.zone}",
                credential=credential,
                location=location,
            )
            self._records[node_id] = record
            self._log_event("registered", id=node_id, address=address,
                            dns_name=record.dns_name)
            self._persist_snapshot()
            return record

    def remove(self, node_id: str) -> None:
        with self._lock:
            if node_id not in self._records:
                raise NotFoundError(f"unknown vantage point {node_id!r}")
            del self._records[node_id]
            self._log_event("removed", id=node_id)
            self._persist_snapshot()

    def update_from_probe(self, node_id: str, status: dict | None) -> VantagePointRecord:
        """Apply one probe result; ``None`` means the probe timed out."""
        with self._lock:
            record = self._require(node_id)
            record.refreshed = True
            if status is None:
                record.state = "offline"
            else:
                record.state = "online"
                record.last_seen = self.clock.now()
                record.devices = status.get("devices", [])
                if status.get("location"):
                    record.location = status["location"]
            self._log_event("probed", id=node_id, state=record.state)
            return record

    # -------------------------------------------------------------- reads

    def _require(self, node_id: str) -> VantagePointRecord:
        record = self._records.get(node_id)
        if record is None:
            raise NotFoundError(f"unknown vantage point {node_id!r}")
        return record

    def get(self, node_id: str) -> VantagePointRecord:
        with self._lock:
            return self._require(node_id)

    def effective_state(self, record: VantagePointRecord) -> str:
        """Downgrade stale 'online' records: recency is part of the claim."""
        if record.state == "online":
            if record.last_seen is None:
                return "offline"
            if self.clock.now() - record.last_seen > 2 * self.refresh_period:
                return "offline"
        return record.state

    def list_nodes(self, label: str | None = None, state: str | None = None) -> list[dict]:
        with self._lock:
            out = []
            for node_id in sorted(self._records):
                record = self._records[node_id]
                view = record.to_dict()
                view["state"] = self.effective_state(record)
                if label is not None and record.location != label:
                    continue
                if state is not None and view["state"] != state:
                    continue
                out.append(view)
            return out

    def list_devices(self, node_id: str) -> tuple[list[dict], bool]:
        """Device summaries from the latest probe, plus a staleness flag."""
        with self._lock:
            record = self._require(node_id)
            return (list(record.devices), not record.refreshed)

    def snapshot(self, include_credentials: bool = False) -> dict:
        with self._lock:
            nodes = {}
            for node_id in sorted(self._records):
                view = self._records[node_id].to_dict()
                if include_credentials:
                    view["credential"] = self._records[node_id].credential
                nodes[node_id] = view
            return {
                "zone": self.zone,
                "refresh_period_s": self.refresh_period,
                "nodes": nodes,
            }

    def persist(self) -> None:
        with self._lock:
            self._persist_snapshot()
