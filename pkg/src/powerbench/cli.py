"""Command-line entry points: pb-server, pb-controller, pb-wpm."""

from __future__ import annotations

import argparse
import json
import sys
import threading
import time

from .controller import Controller
from .device import SimDevice
from .http_api import AccessServerService, ControllerService
from .server import AccessServer
from .wpm import SiteCatalog


def parse_duration(text: str) -> float:
    """Seconds from '45', '45s', '30m', or '2h'."""
    text = text.strip().lower()
    factor = 1.0
    if text.endswith("h"):
        factor, text = 3600.0, text[:-1]
    elif text.endswith("m"):
        factor, text = 60.0, text[:-1]
    elif text.endswith("s"):
        text = text[:-1]
    return float(text) * factor


def parse_listen(text: str, default_port: int) -> tuple[str, int]:
    if ":" in text:
        host, _, port = text.rpartition(":")
        return (host or "127.0.0.1", int(port))
    return (text, default_port)


def server_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pb-server", description="Run the central access server."
    )
    parser.add_argument("--listen", default="127.0.0.1:8080", metavar="ADDR")
    parser.add_argument("--zone", default="batterylab.test")
    parser.add_argument("--refresh-period", default="30m", metavar="DUR",
                        help="reachability sweep period (e.g. 30m, 45s)")
    parser.add_argument("--state-dir", default=None, metavar="PATH",
                        help="where the registry snapshot and event log live")
    args = parser.parse_args(argv)

    host, port = parse_listen(args.listen, 8080)
    server = AccessServer(
        zone=args.zone,
        state_dir=args.state_dir,
        refresh_period=parse_duration(args.refresh_period),
    )
    server.start_background_loops()
    service = AccessServerService(server, host=host, port=port)
    print(f"access server on {service.base_url} (zone {args.zone})")
    try:
        service.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop_background_loops()
        service.stop()
    return 0


def load_controller(node_id: str, devices_path: str, location: str = "") -> Controller:
    with open(devices_path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    devices = [SimDevice.from_config(d) for d in doc.get("devices", [])]
    controller = Controller(node_id, devices, location=doc.get("location", location))
    catalog = doc.get("site_catalog")
    if isinstance(catalog, str):
        controller.site_catalog = SiteCatalog.load(catalog)
    elif isinstance(catalog, dict):
        controller.site_catalog = SiteCatalog.from_dict(catalog)
    return controller


def controller_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pb-controller", description="Run one vantage-point controller."
    )
    parser.add_argument("--listen", default="127.0.0.1:8081", metavar="ADDR")
    parser.add_argument("--server", default=None, metavar="ADDR",
                        help="access server base URL to register with")
    parser.add_argument("--node-id", required=True, metavar="LABEL")
    parser.add_argument("--devices", required=True, metavar="FILE",
                        help="device config file (JSON)")
    parser.add_argument("--location", default="", metavar="LABEL")
    parser.add_argument("--credential", default="", metavar="KEY")
    parser.add_argument("--principal", default="root",
                        help="principal used for the registration call")
    parser.add_argument("--realtime", action=argparse.BooleanOptionalAction,
                        default=True, help="advance the simulation with wall time")
    args = parser.parse_args(argv)

    host, port = parse_listen(args.listen, 8081)
    controller = load_controller(args.node_id, args.devices, args.location)
    service = ControllerService(controller, host=host, port=port)
    print(f"controller {args.node_id} on {service.base_url} "
          f"({len(controller.devices)} devices)")

    stop = threading.Event()
    if args.realtime:
        def pace():
            while not stop.wait(0.05):
                controller.advance(0.05)

        threading.Thread(target=pace, daemon=True).start()

    if args.server:
        import requests

        resp = requests.post(
            f"{args.server.rstrip('/')}/nodes",
            json={
                "id": args.node_id,
                "address": service.base_url,
                "credential": args.credential,
                "location": args.location,
            },
            headers={"X-Principal": args.principal},
            timeout=10,
        )
        if resp.status_code != 200:
            print(f"registration failed: {resp.status_code} {resp.text}",
                  file=sys.stderr)
        else:
            print(f"registered as {resp.json()['dns_name']}")

    try:
        service.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        stop.set()
        service.stop()
    return 0


def wpm_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pb-wpm", description="Submit a website-energy run and wait for it."
    )
    parser.add_argument("--server", required=True, metavar="ADDR")
    parser.add_argument("--device", required=True, metavar="ID")
    parser.add_argument("--urls", required=True, metavar="FILE",
                        help="file with one URL per line")
    parser.add_argument("--reps", type=int, default=3)
    parser.add_argument("--automation", default="simple_load",
                        choices=["simple_load", "interact"])
    parser.add_argument("--budget", default="30s", metavar="DUR",
                        help="per-page load budget")
    parser.add_argument("--slot", default="120s", metavar="DUR",
                        help="fixed per-page slot for cross-site synchronization")
    parser.add_argument("--browser", default="browser")
    parser.add_argument("--visual", action="store_true")
    parser.add_argument("--principal", default="root")
    parser.add_argument("--out", default="wpm-result.json", metavar="FILE")
    parser.add_argument("--poll-period", type=float, default=2.0)
    args = parser.parse_args(argv)

    import requests

    with open(args.urls, "r", encoding="utf-8") as fh:
        urls = [line.strip() for line in fh if line.strip()]
    base = args.server.rstrip("/")
    job_id = f"wpm-{int(time.time())}"
    request = {
        "url_list": urls,
        "device_id": args.device,
        "browser": args.browser,
        "reps": args.reps,
        "power": True,
        "visual": args.visual,
        "automation": args.automation,
        "per_page_budget_s": parse_duration(args.budget),
        "page_slot_s": parse_duration(args.slot),
    }
    resp = requests.post(
        f"{base}/jobs",
        json={
            "job_id": job_id,
            "owner": args.principal,
            "device_id": args.device,
            "steps": [{"name": "wpm", "request": request}],
        },
        headers={"X-Principal": args.principal},
        timeout=30,
    )
    resp.raise_for_status()
    print(f"submitted {job_id} ({len(urls)} URLs, {args.reps} reps)")

    while True:
        job = requests.get(f"{base}/jobs/{job_id}", timeout=10).json()
        print(f"  state: {job['state']}")
        if job["state"] in ("succeeded", "failed", "aborted"):
            break
        time.sleep(args.poll_period)
        requests.post(f"{base}/schedule", timeout=10)
    if job["state"] != "succeeded":
        print(f"job ended {job['state']}: {job.get('error')}", file=sys.stderr)
        return 1

    content = requests.get(
        f"{base}/jobs/{job_id}/artifacts/wpm-result.json", timeout=30
    ).content
    with open(args.out, "wb") as fh:
        fh.write(content)
    result = json.loads(content)
    print(f"result written to {args.out}")
    for url_doc in result["urls"]:
        if url_doc["failed"]:
            print(f"  {url_doc['url']}: failed")
        else:
            print(f"  {url_doc['url']}: {url_doc['energy_j_median']:.2f} J median")
    return 0
