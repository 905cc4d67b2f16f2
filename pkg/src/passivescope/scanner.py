"""Passive capture phase: filter decoded frames and accumulate per-host evidence.

The capture loop is the only writer of an :class:`ObservationSet`. Other
threads may call :meth:`PassiveScanner.snapshot` for a consistent copy, or
:meth:`PassiveScanner.stop` to end the phase early without losing what has
already been accumulated.
"""

from __future__ import annotations

import copy
import enum
import logging
import os
import socket
import struct
import threading
import time
from collections import Counter
from dataclasses import dataclass, field
from ipaddress import IPv4Address
from typing import Iterable, Iterator, Optional, Union

from .codec import IGNORED, ArpOp, ArpSummary, IpSummary, RawFrame, decode_frame
from .exceptions import SourceOpenFailure
from .pcap import iter_pcap

logger = logging.getLogger(__name__)

DEFAULT_ACCEPTED_TTLS = frozenset({1, 64, 128})
DEFAULT_TIMEOUT = 300.0
DEFAULT_THRESHOLD = 10

_BROADCAST = IPv4Address("255.255.255.255")
_UNSPECIFIED = IPv4Address("0.0.0.0")


class CaptureMode(enum.Enum):
    ARP_ONLY = "arp"
    IP_ONLY = "ip"
    BOTH = "both"


class TerminationReason(enum.Enum):
    TIMEOUT = "Timeout"
    THRESHOLD_REACHED = "ThresholdReached"
    SOURCE_EXHAUSTED = "SourceExhausted"
    STOPPED = "Stopped"


@dataclass(frozen=True)
class LiveInterface:
    name: str


@dataclass(frozen=True)
class TraceFile:
    path: str


@dataclass(frozen=True)
class CaptureConfig:
    source: Union[LiveInterface, TraceFile, None] = None
    mode: CaptureMode = CaptureMode.BOTH
    accepted_ttls: frozenset = DEFAULT_ACCEPTED_TTLS
    duration_timeout: float = DEFAULT_TIMEOUT
    host_threshold: int = DEFAULT_THRESHOLD
    promiscuous: bool = True

    def __post_init__(self):
        object.__setattr__(self, "accepted_ttls", frozenset(int(t) for t in self.accepted_ttls))
        if any(not 0 <= t <= 255 for t in self.accepted_ttls):
            raise ValueError("accepted TTLs must lie in 0..255")
        if self.mode is not CaptureMode.ARP_ONLY and not self.accepted_ttls:
            raise ValueError("accepted_ttls must be non-empty when IP packets are captured")
        if not self.duration_timeout > 0:
            raise ValueError("duration_timeout must be positive")
        if self.host_threshold < 1:
            raise ValueError("host_threshold must be at least 1")


def is_storable(ip: IPv4Address) -> bool:
    """Whether ``ip`` may be recorded as a host address."""
    return not (ip == _UNSPECIFIED or ip == _BROADCAST or ip.is_multicast)


@dataclass
class HostObservation:
    ip: IPv4Address
    macs: set = field(default_factory=set)
    arp_requests_sent: int = 0
    arp_replies_sent: int = 0
    arp_requests_targeting: int = 0
    ip_packets_sent: int = 0
    observed_ttls: Counter = field(default_factory=Counter)
    first_seen: Optional[int] = None
    last_seen: Optional[int] = None

    @property
    def packets_sent(self) -> int:
        return self.arp_requests_sent + self.arp_replies_sent + self.ip_packets_sent

    @property
    def detected(self) -> bool:
        return self.packets_sent >= 1

    def _touch(self, timestamp: int) -> None:
        if self.first_seen is None or timestamp < self.first_seen:
            self.first_seen = timestamp
        if self.last_seen is None or timestamp > self.last_seen:
            self.last_seen = timestamp

    def to_dict(self) -> dict:
        return {
            "macs": sorted(self.macs),
            "arp_requests_sent": self.arp_requests_sent,
            "arp_replies_sent": self.arp_replies_sent,
            "arp_requests_targeting": self.arp_requests_targeting,
            "ip_packets_sent": self.ip_packets_sent,
            "observed_ttls": {str(t): n for t, n in sorted(self.observed_ttls.items())},
            "first_seen": self.first_seen,
            "last_seen": self.last_seen,
        }


@dataclass
class ObservationSet:
    """Everything the passive phase learned.

    ``hosts`` holds detected hosts only (addresses seen as a sender).
    ``target_only_stats`` counts ARP requests aimed at addresses that have
    not (yet) sent anything themselves; the two key sets are disjoint.
    ``started_at``/``ended_at`` are wall-clock microseconds, while
    ``capture_start``/``capture_end`` are the first and last consumed
    frame timestamps.
    """

    hosts: dict = field(default_factory=dict)
    target_only_stats: Counter = field(default_factory=Counter)
    started_at: Optional[int] = None
    ended_at: Optional[int] = None
    capture_start: Optional[int] = None
    capture_end: Optional[int] = None
    termination_reason: Optional[TerminationReason] = None
    frames_seen: int = 0
    frames_admitted: int = 0

    @property
    def detected_count(self) -> int:
        return len(self.hosts)

    def detected_addresses(self) -> list:
        return sorted(self.hosts)

    def requests_targeting(self, ip: IPv4Address) -> int:
        if ip in self.hosts:
            return self.hosts[ip].arp_requests_targeting
        return self.target_only_stats.get(ip, 0)

    def _host(self, ip: IPv4Address) -> HostObservation:
        host = self.hosts.get(ip)
        if host is None:
            host = HostObservation(ip, arp_requests_targeting=self.target_only_stats.pop(ip, 0))
            self.hosts[ip] = host
        return host

    def replay_state(self) -> dict:
        """Fields that must be identical across replays of the same trace."""
        return {
            "hosts": {str(ip): self.hosts[ip].to_dict() for ip in sorted(self.hosts)},
            "target_only_stats": {str(ip): n for ip, n in sorted(self.target_only_stats.items())},
            "capture_start": self.capture_start,
            "capture_end": self.capture_end,
            "termination_reason": self.termination_reason.value if self.termination_reason else None,
            "frames_seen": self.frames_seen,
            "frames_admitted": self.frames_admitted,
        }


def admit(summary, config: CaptureConfig) -> bool:
    if isinstance(summary, ArpSummary):
        return config.mode is not CaptureMode.IP_ONLY
    if isinstance(summary, IpSummary):
        return config.mode is not CaptureMode.ARP_ONLY and summary.ttl in config.accepted_ttls
    return False


def observe(observations: ObservationSet, summary) -> ObservationSet:
    """Fold one admitted summary into ``observations`` (in place) and return it."""
    if isinstance(summary, ArpSummary):
        if is_storable(summary.sender_ip):
            host = observations._host(summary.sender_ip)
            if summary.operation is ArpOp.REQUEST:
                host.arp_requests_sent += 1
            else:
                host.arp_replies_sent += 1
            host.macs.add(summary.sender_mac)
            host._touch(summary.timestamp)
        if summary.operation is ArpOp.REQUEST and is_storable(summary.target_ip):
            target = observations.hosts.get(summary.target_ip)
            if target is not None:
                target.arp_requests_targeting += 1
            else:
                observations.target_only_stats[summary.target_ip] += 1
    elif isinstance(summary, IpSummary):
        if is_storable(summary.source_ip):
            host = observations._host(summary.source_ip)
            host.ip_packets_sent += 1
            host.observed_ttls[summary.ttl] += 1
            host._touch(summary.timestamp)
    return observations


class TraceFileSource:
    """Replays frames from a pcap savefile."""

    live = False

    def __init__(self, path):
        self.path = os.fspath(path)
        try:
            self._fh = open(self.path, "rb")
        except OSError as exc:
            raise SourceOpenFailure(f"cannot open trace file {self.path}: {exc.strerror or exc}") from exc

    def __iter__(self) -> Iterator[Optional[RawFrame]]:
        return iter_pcap(self._fh, self.path)

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class LiveInterfaceSource:
    """Captures from a Linux interface through an ``AF_PACKET`` socket.

    Iteration yields ``None`` whenever no frame arrived within ``poll_interval``
    seconds so the capture loop can evaluate its wall-clock timeout.
    """

    live = True
    ETH_P_ALL = 0x0003
    SOL_PACKET = 263
    PACKET_ADD_MEMBERSHIP = 1
    PACKET_MR_PROMISC = 1

    def __init__(self, name: str, promiscuous: bool = True, poll_interval: float = 0.2):
        self.name = name
        try:
            ifindex = socket.if_nametoindex(name)
            self._sock = socket.socket(socket.AF_PACKET, socket.SOCK_RAW, socket.htons(self.ETH_P_ALL))
        except (OSError, AttributeError) as exc:
            raise SourceOpenFailure(f"cannot open interface {name}: {exc}") from exc
        try:
            self._sock.bind((name, 0))
            if promiscuous:
                mreq = struct.pack("iHH8s", ifindex, self.PACKET_MR_PROMISC, 0, b"")
                self._sock.setsockopt(self.SOL_PACKET, self.PACKET_ADD_MEMBERSHIP, mreq)
            self._sock.settimeout(poll_interval)
        except OSError as exc:
            self._sock.close()
            raise SourceOpenFailure(f"cannot capture on interface {name}: {exc}") from exc

    def __iter__(self) -> Iterator[Optional[RawFrame]]:
        while True:
            try:
                data = self._sock.recv(65535)
            except socket.timeout:
                yield None
                continue
            except OSError:
                return
            yield RawFrame(data, time.time_ns() // 1000)

    def close(self) -> None:
        self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def open_source(config: CaptureConfig):
    if isinstance(config.source, TraceFile):
        return TraceFileSource(config.source.path)
    if isinstance(config.source, LiveInterface):
        return LiveInterfaceSource(config.source.name, promiscuous=config.promiscuous)
    raise SourceOpenFailure("no capture source configured")


def _now_us() -> int:
    return time.time_ns() // 1000


class PassiveScanner:
    """Runs the passive phase against a capture source.

    Termination happens on the first of: elapsed time reaching
    ``duration_timeout`` (capture-timestamp time for replayed traces,
    wall-clock time for live sources), the detected-host count reaching
    ``host_threshold`` (checked after every admitted packet), source
    exhaustion, or :meth:`stop`.
    """

    def __init__(self, config: CaptureConfig, clock=time.monotonic):
        self.config = config
        self.observations = ObservationSet()
        self._clock = clock
        self._lock = threading.Lock()
        self._stop = threading.Event()

    def stop(self) -> None:
        self._stop.set()

    def snapshot(self) -> ObservationSet:
        with self._lock:
            return copy.deepcopy(self.observations)

    def run(self, source: Optional[Iterable] = None) -> ObservationSet:
        if source is None:
            with open_source(self.config) as opened:
                return self.run(opened)
        config = self.config
        obs = self.observations
        live = getattr(source, "live", False)
        obs.started_at = _now_us()
        wall_start = self._clock()
        reason = TerminationReason.SOURCE_EXHAUSTED
        timeout_us = config.duration_timeout * 1_000_000
        for frame in source:
            if self._stop.is_set():
                reason = TerminationReason.STOPPED
                break
            if live:
                if self._clock() - wall_start >= config.duration_timeout:
                    reason = TerminationReason.TIMEOUT
                    break
            elif frame is not None and obs.capture_start is not None:
                if frame.timestamp - obs.capture_start >= timeout_us:
                    reason = TerminationReason.TIMEOUT
                    break
            if frame is None:
                continue
            summary = decode_frame(frame)
            with self._lock:
                obs.frames_seen += 1
                if obs.capture_start is None:
                    obs.capture_start = frame.timestamp
                obs.capture_end = frame.timestamp
                if summary is IGNORED or not admit(summary, config):
                    continue
                obs.frames_admitted += 1
                observe(obs, summary)
            if obs.detected_count >= config.host_threshold:
                reason = TerminationReason.THRESHOLD_REACHED
                break
        with self._lock:
            obs.termination_reason = reason
            obs.ended_at = _now_us()
        logger.info(
            "passive phase finished: %s, %d detected hosts from %d frames",
            reason.value, obs.detected_count, obs.frames_seen,
        )
        return obs


def run_passive_phase(config: CaptureConfig, source: Optional[Iterable] = None) -> ObservationSet:
    """Run the passive phase; ``source`` defaults to the one named in ``config``."""
    return PassiveScanner(config).run(source)
