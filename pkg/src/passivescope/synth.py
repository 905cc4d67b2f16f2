"""Deterministic synthetic captures with ground truth.

A scenario places hosts and a gateway in each subnet and replays ARP chatter
and IPv4 traffic on a logical clock. Subnets are either on the captured
segment or remote; traffic crossing a router is emitted a second time, as
forwarded by the router, with its TTL decremented by one. The returned
manifest records every host, every gateway and per-sender frame counts so
tests can derive the expected scanner output without decoding anything.
"""

from __future__ import annotations

import io
import json
import os
import random
import struct
from dataclasses import dataclass, field
from ipaddress import IPv4Address, IPv4Network
from typing import Optional

from .codec import ETHERTYPE_ARP, ETHERTYPE_IPV4, ArpOp, ArpSummary, IpSummary, RawFrame, parse_mac
from .exceptions import InvalidSpec
from .pcap import write_pcap

BROADCAST_MAC = "ff:ff:ff:ff:ff:ff"
ZERO_MAC = "00:00:00:00:00:00"
MIN_FRAME_LEN = 60
DEFAULT_START_US = 1_600_000_000 * 1_000_000
_INITIAL_TTLS = (64, 128, 255)


def mac_for(ip: IPv4Address) -> str:
    """Locally administered MAC derived from the address (stable across runs)."""
    return "02:00:" + ip.packed.hex(":")


def _checksum(header: bytes) -> int:
    total = sum(struct.unpack(f"!{len(header) // 2}H", header))
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return ~total & 0xFFFF


def _pad(frame: bytes) -> bytes:
    return frame + bytes(MIN_FRAME_LEN - len(frame)) if len(frame) < MIN_FRAME_LEN else frame


def encode_arp(summary: ArpSummary, dst_mac: Optional[str] = None, pad: bool = True) -> bytes:
    """Ethernet II frame carrying ``summary``; requests go to broadcast by default."""
    if dst_mac is None:
        dst_mac = BROADCAST_MAC if summary.operation is ArpOp.REQUEST else summary.target_mac
    frame = (
        parse_mac(dst_mac)
        + parse_mac(summary.sender_mac)
        + struct.pack("!H", ETHERTYPE_ARP)
        + struct.pack("!HHBBH", 1, ETHERTYPE_IPV4, 6, 4, int(summary.operation))
        + parse_mac(summary.sender_mac)
        + summary.sender_ip.packed
        + parse_mac(summary.target_mac)
        + summary.target_ip.packed
    )
    return _pad(frame) if pad else frame


def encode_ipv4(
    summary: IpSummary,
    src_mac: str,
    dst_mac: str,
    payload: bytes = bytes(8),
    protocol: int = 17,
    ident: int = 0,
) -> bytes:
    """Ethernet II frame with a 20-byte IPv4 header (valid checksum) and ``payload``."""
    header = struct.pack(
        "!BBHHHBBH4s4s",
        0x45, 0, 20 + len(payload), ident & 0xFFFF, 0,
        summary.ttl, protocol, 0,
        summary.source_ip.packed, summary.destination_ip.packed,
    )
    header = header[:10] + struct.pack("!H", _checksum(header)) + header[12:]
    frame = parse_mac(dst_mac) + parse_mac(src_mac) + struct.pack("!H", ETHERTYPE_IPV4) + header + payload
    return _pad(frame)


@dataclass
class SubnetSpec:
    cidr: str
    host_count: int
    gateway_address: Optional[str] = None
    os_mix: dict = field(default_factory=lambda: {64: 0.6, 128: 0.4})
    on_segment: bool = True
    gateway_ttl: int = 64

    @property
    def network(self) -> IPv4Network:
        return IPv4Network(self.cidr)

    @property
    def gateway(self) -> IPv4Address:
        if self.gateway_address is None:
            return self.network.network_address + 1
        return IPv4Address(self.gateway_address)


@dataclass
class ScenarioSpec:
    """Scenario parameters; the three rates are events per simulated second per
    subnet. ``arp_reply_rate`` adds unsolicited replies sent by each gateway."""

    seed: int
    subnets: list
    arp_reply_rate: float = 0.2
    arp_request_rate: float = 2.0
    ip_packet_rate: float = 10.0
    duration: float = 60.0
    cross_subnet_fraction: float = 0.2
    gateway_target_fraction: float = 0.8
    start_time: int = DEFAULT_START_US

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioSpec":
        try:
            subnets = [
                SubnetSpec(**{**s, "os_mix": {int(k): float(v) for k, v in s.get("os_mix", {64: 0.6, 128: 0.4}).items()}})
                for s in doc["subnets"]
            ]
            return cls(**{**doc, "subnets": subnets})
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidSpec(f"malformed scenario description: {exc}") from exc

    @classmethod
    def load(cls, path) -> "ScenarioSpec":
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidSpec(f"cannot read scenario {path}: {exc}") from exc
        return cls.from_dict(doc)

    def validate(self) -> None:
        if not self.subnets:
            raise InvalidSpec("a scenario needs at least one subnet")
        if not any(s.on_segment for s in self.subnets):
            raise InvalidSpec("at least one subnet must be on the captured segment")
        for rate in (self.arp_reply_rate, self.arp_request_rate, self.ip_packet_rate):
            if rate < 0:
                raise InvalidSpec("event rates must be non-negative")
        if self.duration <= 0:
            raise InvalidSpec("duration must be positive")
        for frac in (self.cross_subnet_fraction, self.gateway_target_fraction):
            if not 0 <= frac <= 1:
                raise InvalidSpec("fractions must lie in [0, 1]")
        nets = []
        for s in self.subnets:
            try:
                net, gw = s.network, s.gateway
            except ValueError as exc:
                raise InvalidSpec(str(exc)) from exc
            if net.prefixlen > 30:
                raise InvalidSpec(f"{net} is too small to hold hosts and a gateway")
            if gw not in net or gw in (net.network_address, net.broadcast_address):
                raise InvalidSpec(f"gateway {gw} is not a usable address of {net}")
            if not 0 <= s.host_count <= net.num_addresses - 3:
                raise InvalidSpec(f"{net} cannot hold {s.host_count} hosts besides its gateway")
            if not s.os_mix or any(t not in _INITIAL_TTLS or w < 0 for t, w in s.os_mix.items()):
                raise InvalidSpec("os_mix must weight initial TTLs drawn from 64, 128 and 255")
            if sum(s.os_mix.values()) <= 0:
                raise InvalidSpec("os_mix weights must not all be zero")
            if s.gateway_ttl not in _INITIAL_TTLS:
                raise InvalidSpec("gateway_ttl must be 64, 128 or 255")
            if any(net.overlaps(other) for other in nets):
                raise InvalidSpec(f"{net} overlaps another subnet")
            nets.append(net)


@dataclass
class _Subnet:
    spec: SubnetSpec
    gateway: IPv4Address
    hosts: list
    initial_ttl: dict


class _Recorder:
    def __init__(self):
        self.events = []
        self.senders = {}
        self.forwarded = 0

    def _sender(self, ip):
        return self.senders.setdefault(str(ip), {"arp_requests": 0, "arp_replies": 0, "ip_ttls": {}})

    def arp(self, t, summary: ArpSummary):
        self.events.append((t, len(self.events), encode_arp(summary)))
        key = "arp_requests" if summary.operation is ArpOp.REQUEST else "arp_replies"
        self._sender(summary.sender_ip)[key] += 1

    def ip(self, t, summary: IpSummary, src_mac, dst_mac, forwarded=False):
        frame = encode_ipv4(summary, src_mac, dst_mac, ident=len(self.events))
        self.events.append((t, len(self.events), frame))
        ttls = self._sender(summary.source_ip)["ip_ttls"]
        ttls[summary.ttl] = ttls.get(summary.ttl, 0) + 1
        self.forwarded += forwarded


def _poisson_times(rng: random.Random, rate: float, duration: float) -> list:
    times = []
    if rate <= 0:
        return times
    t = rng.expovariate(rate)
    while t < duration:
        times.append(t)
        t += rng.expovariate(rate)
    return times


def synthesize(spec: ScenarioSpec) -> tuple:
    """Return ``(pcap_bytes, manifest)``; identical specs give identical bytes."""
    spec.validate()
    rng = random.Random(spec.seed)
    subnets = []
    for s in spec.subnets:
        net, gw = s.network, s.gateway
        usable = [a for a in range(int(net.network_address) + 1, int(net.broadcast_address)) if a != int(gw)]
        hosts = sorted(IPv4Address(a) for a in rng.sample(usable, s.host_count))
        ttl_values = sorted(s.os_mix)
        weights = [s.os_mix[t] for t in ttl_values]
        initial = {h: rng.choices(ttl_values, weights)[0] for h in hosts}
        initial[gw] = s.gateway_ttl
        subnets.append(_Subnet(s, gw, hosts, initial))

    rec = _Recorder()
    start = spec.start_time
    local = [sn for sn in subnets if sn.spec.on_segment]

    def at(seconds: float) -> int:
        return start + int(seconds * 1_000_000)

    def latency() -> int:
        return rng.randint(50, 500)

    for sn in subnets:
        if not sn.hosts:
            continue
        others = [o for o in subnets if o is not sn and o.hosts]
        if sn.spec.on_segment:
            for t in _poisson_times(rng, spec.arp_request_rate, spec.duration):
                sender = rng.choice(sn.hosts)
                peers = [h for h in sn.hosts if h != sender]
                if rng.random() < spec.gateway_target_fraction or not peers:
                    target = sn.gateway
                else:
                    target = rng.choice(peers)
                rec.arp(at(t), ArpSummary(ArpOp.REQUEST, mac_for(sender), sender, ZERO_MAC, target))
                rec.arp(at(t) + latency(), ArpSummary(ArpOp.REPLY, mac_for(target), target, mac_for(sender), sender))
            for t in _poisson_times(rng, spec.arp_reply_rate, spec.duration):
                target = rng.choice(sn.hosts)
                rec.arp(at(t), ArpSummary(ArpOp.REPLY, mac_for(sn.gateway), sn.gateway, mac_for(target), target))
        for t in _poisson_times(rng, spec.ip_packet_rate, spec.duration):
            src = rng.choice(sn.hosts)
            ttl = sn.initial_ttl[src]
            cross = bool(others) and (rng.random() < spec.cross_subnet_fraction or not sn.spec.on_segment)
            if not cross:
                peers = [h for h in sn.hosts if h != src] or [sn.gateway]
                dst = rng.choice(peers)
                rec.ip(at(t), IpSummary(src, dst, ttl), mac_for(src), mac_for(dst))
                continue
            pool = [o for o in others if o.spec.on_segment] if not sn.spec.on_segment else others
            if not pool:
                continue
            dest_net = rng.choice(pool)
            dst = rng.choice(dest_net.hosts)
            if sn.spec.on_segment:
                rec.ip(at(t), IpSummary(src, dst, ttl), mac_for(src), mac_for(sn.gateway))
            if dest_net.spec.on_segment:
                # the receiving subnet's router puts the packet back on the wire one hop later
                rec.ip(at(t) + latency(), IpSummary(src, dst, ttl - 1), mac_for(dest_net.gateway), mac_for(dst),
                       forwarded=True)

    rec.events.sort(key=lambda e: (e[0], e[1]))
    buf = io.BytesIO()
    write_pcap(buf, (RawFrame(data, t) for t, _, data in rec.events))
    manifest = {
        "seed": spec.seed,
        "subnets": [
            {
                "cidr": str(sn.spec.network),
                "on_segment": sn.spec.on_segment,
                "gateway": str(sn.gateway),
                "hosts": [str(h) for h in sn.hosts],
                "initial_ttls": {str(h): sn.initial_ttl[h] for h in [sn.gateway, *sn.hosts]},
            }
            for sn in subnets
        ],
        "senders": {ip: rec.senders[ip] for ip in sorted(rec.senders, key=lambda a: int(IPv4Address(a)))},
        "emitted_frames": len(rec.events),
        "forwarded_frames": rec.forwarded,
    }
    assert local, "validated specs always have an on-segment subnet"
    return buf.getvalue(), manifest


def expected_detected(manifest: dict, accepted_ttls=frozenset({1, 64, 128})) -> set:
    """Addresses a scanner with the given TTL filter must detect (no threshold)."""
    found = set()
    for ip, counts in manifest["senders"].items():
        ip_hits = any(int(ttl) in accepted_ttls for ttl in counts["ip_ttls"])
        if counts["arp_requests"] or counts["arp_replies"] or ip_hits:
            found.add(IPv4Address(ip))
    return found


def manifest_path_for(pcap_path) -> str:
    return os.fspath(pcap_path) + ".manifest.json"


def write_scenario(spec: ScenarioSpec, pcap_path) -> dict:
    """Write the capture and its ``.manifest.json`` sidecar; return the manifest."""
    data, manifest = synthesize(spec)
    with open(pcap_path, "wb") as fh:
        fh.write(data)
    with open(manifest_path_for(pcap_path), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest
