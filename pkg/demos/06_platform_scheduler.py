"""
The full platform: access server, vantage points, jobs
======================================================

The access server keeps the vantage-point registry (with stable derived
names), probes reachability, and dispatches queued jobs under a strict
one-job-per-node rule. Registering a node enqueues its provisioning
pipeline as the first job, like a freshly joined member installation.
"""

import time

from powerbench.controller import Controller
from powerbench.device import SimDevice
from powerbench.profiles import profile
from powerbench.scheduler import JobSpec
from powerbench.server import AccessServer, LocalControllerClient

server = AccessServer(refresh_period=60.0)
server.add_principal("alice", "experimenter")

for i, (node_id, location) in enumerate([("node1", "uk"), ("node2", "nj")]):
    controller = Controller(
        node_id,
        [SimDevice(f"{node_id}-d0", profile("SMJ337A"), seed=i)],
        location=location,
    )
    server.attach_controller(node_id, LocalControllerClient(controller))
    record = server.register_vantage_point(node_id, f"10.0.0.{i}:8081", f"key-{i}",
                                           "root", location=location)
    print(f"registered {record.id} as {record.dns_name}")

# The refresh sweep probes every node and persists the JSON registry.
server.refresh()
for node in server.list_nodes():
    devices, _ = server.list_devices(node["id"])
    print(f"  {node['id']}: {node['state']}, "
          f"{len(devices)} device(s) at {node['location']}")

# Provisioning join jobs run first.
server.schedule()
server.scheduler.wait_idle(10.0)
print("join pipelines:", [e.state.value for e in server.scheduler.jobs()])

# A measurement job: the pipeline runs on the node, the trace comes back
# as a job artifact.
spec = JobSpec(
    job_id="exp-1",
    owner="alice",
    device_id="node1-d0",
    steps=[
        {"name": "node_setup", "device_id": "node1-d0", "power": True},
        {"name": "device_setup", "device_id": "node1-d0"},
        {"name": "start_monitor", "device_id": "node1-d0", "duration": 5.0},
        {"name": "sleep", "seconds": 5.0},
        {"name": "stop_monitor"},
        {"name": "cleanup"},
    ],
)
server.submit_job(spec, server.principal("alice"))
server.schedule()
server.scheduler.wait_idle(10.0)
job = server.job("exp-1")
print(f"\njob exp-1: {job['state']} on {job['vantage_id']}")
for name in job["artifacts"]:
    print(f"  artifact: {name} ({len(server.artifact('exp-1', name))} bytes)")

# Exclusion: back-to-back jobs on one node never overlap.
for k in range(3):
    server.submit_job(
        JobSpec(job_id=f"q{k}", owner="alice", vantage_id="node1",
                steps=[{"name": "hold", "seconds": 0.01}]),
        server.principal("alice"),
    )
print("\ndispatched this tick:", server.schedule(), "(the rest stay queued)")
while not server.scheduler.all_terminal():
    server.schedule()
    time.sleep(0.005)
print("final states:", {e.spec.job_id: e.state.value
                        for e in server.scheduler.jobs() if e.spec.job_id.startswith("q")})
