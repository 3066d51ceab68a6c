"""Command-line entry points: ``arcall-sim`` and ``arcall-relay``."""

from __future__ import annotations

import argparse
import asyncio
import json
import logging
import os
import sys

from . import metrics as metrics_mod
from . import sim as sim_mod
from .errors import ArcallError


def _parse_net(spec: str, seed: int) -> sim_mod.NetworkModel:
    parts = [int(p) for p in spec.split(",")]
    if len(parts) == 2:
        base, jitter, proc = parts[0], parts[1], 5
    elif len(parts) == 3:
        base, jitter, proc = parts
    else:
        raise argparse.ArgumentTypeError("--net expects base,jitter[,processing] in ms")
    return sim_mod.NetworkModel(base_delay_ms=base, jitter_ms=jitter, processing_ms=proc, seed=seed)


def _parse_thermal(spec: str) -> sim_mod.ThermalState:
    parts = [float(p) for p in spec.split(",")]
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("--thermal expects ambient,heat,cool,cutoff")
    ambient, heat, cool, cutoff = parts
    return sim_mod.ThermalState.from_celsius(ambient, heat, cool, cutoff)


def sim_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="arcall-sim", description="deterministic call simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario file and emit a JSON-lines event log")
    run_p.add_argument("scenario", help="scenario JSON file")
    run_p.add_argument("--seed", type=int, default=sim_mod.DEFAULT_SEED)
    run_p.add_argument("--net", default=None, help="base,jitter[,processing] in ms")
    run_p.add_argument("--thermal", default=None, help="ambient,heat,cool,cutoff (degrees C)")
    run_p.add_argument("--tick", type=int, default=sim_mod.TICK_INTERVAL_MS, help="tick interval ms")
    run_p.add_argument("--out", default=None, help="log file (default: stdout)")

    metrics_p = sub.add_parser("metrics", help="compute aggregates over an event log")
    metrics_p.add_argument("log", help="JSON-lines event log")
    metrics_p.add_argument("--breakdown", action="store_true", help="include the latency breakdown")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            scenario = sim_mod.Scenario.from_file(args.scenario)
            network = _parse_net(args.net, args.seed) if args.net else sim_mod.NetworkModel(seed=args.seed)
            thermal = _parse_thermal(args.thermal) if args.thermal else sim_mod.ThermalState()
            log = sim_mod.run_scenario(scenario, network, thermal, tick_interval_ms=args.tick)
            payload = sim_mod.log_to_jsonl(log)
            if args.out:
                with open(args.out, "wb") as fh:
                    fh.write(payload)
                print(f"wrote {len(log)} events to {args.out}", file=sys.stderr)
            else:
                sys.stdout.buffer.write(payload)
            return 0
        records = sim_mod.load_log(args.log)
        report = metrics_mod.compute_metrics(records).to_dict()
        if args.breakdown:
            report["latency_breakdown"] = metrics_mod.latency_breakdown(records).to_dict()
        print(json.dumps(report, indent=2, sort_keys=True))
        return 0
    except ArcallError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def relay_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="arcall-relay", description="relay server")
    parser.add_argument("--listen-addr", default="127.0.0.1:9800", help="TCP envelope listener")
    parser.add_argument("--ws-addr", default="127.0.0.1:9801", help="HTTP/WebSocket listener")
    parser.add_argument("--store-dir", default="./arcall-store",
                        help="state directory (ARCALL_STORE_DIR overrides)")
    parser.add_argument("--glasses-fraction", type=float, default=0.4)
    parser.add_argument("--static-dir", default="frontend/dist", help="console bundle to serve")
    parser.add_argument("--allow-wearer-reposition", action="store_true")
    parser.add_argument("--log-level", default="info",
                        choices=["debug", "info", "warning", "error"])
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=getattr(logging, args.log_level.upper()),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    from .server import RelayServer
    from .store import StoreDir

    store_dir = os.environ.get("ARCALL_STORE_DIR") or args.store_dir
    try:
        server = RelayServer(
            StoreDir(store_dir),
            glasses_fraction=args.glasses_fraction,
            allow_wearer_reposition=args.allow_wearer_reposition,
            static_dir=args.static_dir,
        )
    except ArcallError as exc:
        print(f"refusing to start: {exc}", file=sys.stderr)
        return 2
    try:
        asyncio.run(server.serve(args.listen_addr, args.ws_addr))
    except KeyboardInterrupt:
        pass
    return 0
