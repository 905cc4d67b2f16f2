"""Single-command pipeline: passive capture, border analysis, scan plan."""

from __future__ import annotations

import argparse
import fcntl
import json
import logging
import socket
import struct
import sys
import time
from ipaddress import IPv4Address
from pathlib import Path
from typing import Optional, Sequence

from .exceptions import InvalidArguments, ReconError
from .hints import HopcountTable, infer_internal_gateway
from .planner import InterfaceState, build_scan_plan
from .ranges import ClusteringPolicy, ClusteringVariant
from .report import RunReport
from .scanner import (
    DEFAULT_THRESHOLD,
    DEFAULT_TIMEOUT,
    CaptureConfig,
    CaptureMode,
    LiveInterface,
    TraceFile,
    run_passive_phase,
)
from .synth import ScenarioSpec, write_scenario

logger = logging.getLogger("passivescope")

SIOCGIFADDR = 0x8915
SIOCGIFNETMASK = 0x891B


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InvalidArguments(message)


def read_interface_state(name: str) -> InterfaceState:
    """Current IPv4 address and netmask of ``name``; unconfigured if it has none."""
    ifreq = struct.pack("256s", name[:15].encode())
    try:
        with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as sock:
            addr = fcntl.ioctl(sock.fileno(), SIOCGIFADDR, ifreq)[20:24]
            mask = fcntl.ioctl(sock.fileno(), SIOCGIFNETMASK, ifreq)[20:24]
    except OSError:
        return InterfaceState.unconfigured()
    prefix = bin(int.from_bytes(mask, "big")).count("1")
    return InterfaceState(True, IPv4Address(addr), prefix)


def _ttl_list(text: str) -> frozenset:
    try:
        values = frozenset(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of integers: {text!r}")
    if not values or any(not 0 <= v <= 255 for v in values):
        raise argparse.ArgumentTypeError("TTL values must lie in 0..255")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="passivescope",
        description="Passively sniff the local segment, infer network ranges and emit a scan plan.",
    )
    src = parser.add_mutually_exclusive_group()
    src.add_argument("--interface", metavar="NAME", help="capture live on this interface")
    src.add_argument("--trace", metavar="PATH", help="replay a pcap savefile (Ethernet)")
    parser.add_argument("--synth", metavar="SPEC",
                        help="synthesize a capture from a JSON scenario first (written to --trace, "
                             "or next to SPEC) and analyze it")
    parser.add_argument("--mode", choices=[m.value for m in CaptureMode], default="both")
    parser.add_argument("--ttl-accept", type=_ttl_list, default=frozenset({1, 64, 128}), metavar="LIST")
    parser.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT, metavar="SECONDS")
    parser.add_argument("--threshold", type=int, default=DEFAULT_THRESHOLD, metavar="N")
    parser.add_argument("--cluster", choices=[v.value for v in ClusteringVariant], default="max-size")
    parser.add_argument("--max-net-size", type=int, default=256, metavar="N")
    parser.add_argument("--prefix-len", type=int, metavar="N")
    parser.add_argument("--no-promisc", action="store_true", help="do not request promiscuous mode")
    parser.add_argument("--assume-config", metavar="CIDR",
                        help="treat the scanner interface as configured with this address/prefix")
    parser.add_argument("--out", metavar="PATH", help="scan plan JSON (stdout if omitted)")
    parser.add_argument("--report", metavar="PATH", help="text report (stderr if omitted)")
    parser.add_argument("--hopcounts", metavar="PATH", help="JSON map of address to hopcount")
    parser.add_argument("--deterministic", action="store_true", help="normalize timestamps and timings")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def _policy(args) -> ClusteringPolicy:
    variant = ClusteringVariant(args.cluster)
    if variant is ClusteringVariant.PREFIX and args.prefix_len is None:
        raise InvalidArguments("--cluster prefix requires --prefix-len")
    try:
        return ClusteringPolicy(variant, args.max_net_size, 24 if args.prefix_len is None else args.prefix_len)
    except ValueError as exc:
        raise InvalidArguments(str(exc)) from exc


def _interface_state(args) -> InterfaceState:
    if args.assume_config:
        try:
            return InterfaceState.from_cidr(args.assume_config)
        except ValueError as exc:
            raise InvalidArguments(f"--assume-config: {exc}") from exc
    if args.interface:
        return read_interface_state(args.interface)
    return InterfaceState.unconfigured()


def run(args: argparse.Namespace) -> int:
    if args.synth:
        if args.interface:
            raise InvalidArguments("--synth cannot be combined with --interface")
        spec = ScenarioSpec.load(args.synth)
        args.trace = args.trace or str(Path(args.synth).with_suffix(".pcap"))
        write_scenario(spec, args.trace)
        logger.info("synthesized %s", args.trace)
    if bool(args.interface) == bool(args.trace):
        raise InvalidArguments("exactly one of --interface or --trace is required")
    source = LiveInterface(args.interface) if args.interface else TraceFile(args.trace)
    try:
        config = CaptureConfig(
            source=source,
            mode=CaptureMode(args.mode),
            accepted_ttls=args.ttl_accept,
            duration_timeout=args.timeout,
            host_threshold=args.threshold,
            promiscuous=not args.no_promisc,
        )
    except ValueError as exc:
        raise InvalidArguments(str(exc)) from exc
    policy = _policy(args)
    iface = _interface_state(args)
    hopcounts = None
    if args.hopcounts:
        try:
            hopcounts = HopcountTable.load(args.hopcounts)
        except (OSError, ValueError) as exc:
            raise InvalidArguments(f"--hopcounts: {exc}") from exc

    t0 = time.perf_counter()
    observations = run_passive_phase(config)
    t1 = time.perf_counter()
    plan = build_scan_plan(observations, policy, iface)
    t2 = time.perf_counter()

    doc = plan.to_dict(deterministic=args.deterministic)
    report = RunReport(plan)
    if not args.deterministic:
        report.timings = {"passive phase": t1 - t0, "analysis": t2 - t1}
    if hopcounts is not None:
        internal = infer_internal_gateway(hopcounts)
        doc["internal_gateway_hint"] = str(internal) if internal else None
        report.internal_gateway = str(internal) if internal else None
        if internal is None:
            report.warnings.append("hopcount table yields no unambiguous internal gateway")

    plan_text = json.dumps(doc, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(plan_text, encoding="utf-8")
    else:
        sys.stdout.write(plan_text)
    if args.report:
        Path(args.report).write_text(report.render(), encoding="utf-8")
    else:
        sys.stderr.write(report.render())
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return run(args)
    except ReconError as exc:
        print(f"passivescope: {exc.stage}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
