"""Network border analysis: from observations to a scan plan.

The flow is: cluster detected hosts, order the ranges, check whether the
scanner's current interface configuration already fits one of them, then
either keep that configuration or propose a new one (own network, default
gateway, free address) and finalize the target CIDR blocks.
"""

from __future__ import annotations

import enum
import json
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from ipaddress import IPv4Address, IPv4Interface, IPv4Network, summarize_address_range
from typing import Iterable, Optional

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import NoFreeAddress, NoRangesDetermined
from .ranges import (
    ClusteringPolicy,
    ClusteringVariant,
    NetworkRange,
    as_address,
    cluster,
    order_ranges,
    segment_index,
)
from .scanner import ObservationSet


@dataclass(frozen=True)
class InterfaceState:
    configured: bool = False
    ip: Optional[IPv4Address] = None
    prefix_length: Optional[int] = None
    gateway: Optional[IPv4Address] = None

    def __post_init__(self):
        if self.configured:
            if self.ip is None or self.prefix_length is None:
                raise ValueError("a configured interface needs an address and a prefix length")
            object.__setattr__(self, "ip", as_address(self.ip))
            if not 0 <= self.prefix_length <= 32:
                raise ValueError("prefix_length must lie in 0..32")
        elif self.ip is not None or self.prefix_length is not None:
            raise ValueError("an unconfigured interface carries no address")
        if self.gateway is not None:
            object.__setattr__(self, "gateway", as_address(self.gateway))

    @classmethod
    def unconfigured(cls) -> "InterfaceState":
        return cls()

    @classmethod
    def from_cidr(cls, text: str, gateway=None) -> "InterfaceState":
        iface = IPv4Interface(text)
        return cls(True, iface.ip, iface.network.prefixlen, gateway)

    @property
    def network(self) -> Optional[IPv4Network]:
        if not self.configured:
            return None
        return IPv4Network(f"{self.ip}/{self.prefix_length}", strict=False)

    def to_dict(self) -> dict:
        return {
            "configured": self.configured,
            "ip": str(self.ip) if self.ip is not None else None,
            "prefix_length": self.prefix_length,
            "gateway": str(self.gateway) if self.gateway is not None else None,
        }


class GatewayProvenance(enum.Enum):
    ARP_REPLY_SENDER = "ArpReplySender"
    ARP_REQUEST_TARGET = "ArpRequestTarget"
    RANGE_FIRST_ADDRESS = "RangeFirstAddress"
    RANGE_LAST_ADDRESS = "RangeLastAddress"


@dataclass(frozen=True)
class ProposedConfig:
    ip: IPv4Address
    prefix_length: int
    gateway: IPv4Address
    gateway_provenance: GatewayProvenance

    def __post_init__(self):
        if self.ip == self.gateway:
            raise ValueError("proposed address collides with the gateway")


@dataclass
class ScanPlan:
    final_ranges: list
    own_network: IPv4Network
    reconfiguration: Optional[ProposedConfig]
    source_observations: ObservationSet
    preliminary_ranges: list = field(default_factory=list)
    interface: InterfaceState = field(default_factory=InterfaceState)
    warnings: list = field(default_factory=list)
    created_at: int = field(default_factory=lambda: time.time_ns() // 1000)

    @property
    def reconfiguration_required(self) -> bool:
        return self.reconfiguration is not None

    def target_for(self, ip) -> Optional[IPv4Network]:
        addr = as_address(ip)
        for block in self.final_ranges:
            if addr in block:
                return block
        return None

    def to_dict(self, deterministic: bool = False) -> dict:
        obs = self.source_observations
        created = 0 if deterministic else self.created_at
        cfg = self.reconfiguration
        reason = obs.termination_reason
        return {
            "final_ranges": [str(b) for b in self.final_ranges],
            "own_network": str(self.own_network),
            "proposed_ip": str(cfg.ip) if cfg else None,
            "proposed_prefix_length": cfg.prefix_length if cfg else None,
            "proposed_gateway": str(cfg.gateway) if cfg else None,
            "gateway_provenance": cfg.gateway_provenance.value if cfg else None,
            "reconfiguration_required": self.reconfiguration_required,
            "termination_reason": reason.value if reason else None,
            "detected_hosts": {str(ip): obs.hosts[ip].to_dict() for ip in sorted(obs.hosts)},
            "arp_target_only": {str(ip): n for ip, n in sorted(obs.target_only_stats.items())},
            "preliminary_ranges": [r.to_dict() for r in self.preliminary_ranges],
            "current_interface": self.interface.to_dict(),
            "warnings": list(self.warnings),
            "created_at": datetime.fromtimestamp(created / 1e6, timezone.utc).isoformat(),
        }

    def to_json(self, deterministic: bool = False) -> str:
        return json.dumps(self.to_dict(deterministic), indent=2) + "\n"


@dataclass(frozen=True)
class PlanDocument:
    """Reader-side view of a serialized plan; unknown fields are dropped."""

    final_ranges: tuple
    own_network: IPv4Network
    proposed_ip: Optional[IPv4Address]
    proposed_prefix_length: Optional[int]
    proposed_gateway: Optional[IPv4Address]
    gateway_provenance: Optional[GatewayProvenance]
    reconfiguration_required: bool
    termination_reason: Optional[str]
    detected_hosts: dict

    @classmethod
    def from_dict(cls, doc: dict) -> "PlanDocument":
        def addr(value):
            return IPv4Address(value) if value is not None else None

        provenance = doc.get("gateway_provenance")
        return cls(
            final_ranges=tuple(IPv4Network(b) for b in doc["final_ranges"]),
            own_network=IPv4Network(doc["own_network"]),
            proposed_ip=addr(doc.get("proposed_ip")),
            proposed_prefix_length=doc.get("proposed_prefix_length"),
            proposed_gateway=addr(doc.get("proposed_gateway")),
            gateway_provenance=GatewayProvenance(provenance) if provenance else None,
            reconfiguration_required=bool(doc["reconfiguration_required"]),
            termination_reason=doc.get("termination_reason"),
            detected_hosts=dict(doc.get("detected_hosts", {})),
        )

    @classmethod
    def from_json(cls, text: str) -> "PlanDocument":
        return cls.from_dict(json.loads(text))


def load_plan(path) -> PlanDocument:
    with open(path, encoding="utf-8") as fh:
        return PlanDocument.from_json(fh.read())


# -- CIDR helpers -----------------------------------------------------------

def is_class_pure(block: IPv4Network) -> bool:
    return segment_index(block.network_address) == segment_index(block.broadcast_address)


def smallest_covering_block(start: IPv4Address, end: IPv4Address) -> IPv4Network:
    lo, hi = int(start), int(end)
    prefix = 32 - (lo ^ hi).bit_length()
    mask = (0xFFFFFFFF << (32 - prefix)) & 0xFFFFFFFF
    return IPv4Network((lo & mask, prefix))


def snap_range(rng: NetworkRange) -> list:
    """Cover ``rng`` with the smallest CIDR block, or, when that block would
    straddle a class boundary, with the exact CIDR decomposition of the range."""
    block = smallest_covering_block(rng.start, rng.end)
    if is_class_pure(block):
        return [block]
    return list(summarize_address_range(rng.start, rng.end))


def merge_blocks(blocks: Iterable[IPv4Network]) -> list:
    """Drop blocks nested in another block. Adjacent blocks are kept apart."""
    merged: list = []
    for block in sorted(set(blocks), key=lambda b: (int(b.network_address), b.prefixlen)):
        if merged and block.subnet_of(merged[-1]):
            continue
        merged.append(block)
    return merged


def _usable_bounds(block: IPv4Network) -> tuple:
    if block.prefixlen >= 31:
        return block.network_address, block.broadcast_address
    return block.network_address + 1, block.broadcast_address - 1


# -- planning steps ---------------------------------------------------------

def fits_configuration(iface: InterfaceState, ranges: Iterable[NetworkRange]) -> Optional[NetworkRange]:
    if not iface.configured:
        return None
    for rng in ranges:
        if iface.ip in rng:
            return rng
    return None


def select_own_network(ordered: list) -> NetworkRange:
    if not ordered:
        raise NoRangesDetermined("no network ranges could be determined from the observations")
    return ordered[0]


def select_free_ip(rng: NetworkRange, finalized_cidr: IPv4Network, reserved: Iterable = ()) -> IPv4Address:
    """Pick an unused address for the scanner.

    Preference: the first gap between the first and last detected host, then
    the nearest eligible address below the first host, then the nearest one
    above the last host. Eligible means inside ``finalized_cidr``, not its
    network or broadcast address, not detected and not reserved.
    """
    detected = set(rng.detected_hosts)
    taken = detected | {as_address(r) for r in reserved}
    taken.add(finalized_cidr.network_address)
    taken.add(finalized_cidr.broadcast_address)
    lo, hi = int(finalized_cidr.network_address), int(finalized_cidr.broadcast_address)

    def eligible(value: int) -> bool:
        return lo <= value <= hi and IPv4Address(value) not in taken

    hosts = sorted(int(h) for h in detected)
    for left, right in zip(hosts, hosts[1:]):
        value = left + 1
        while value < right and not eligible(value):
            value += 1
        if value < right:
            return IPv4Address(value)
    # only a handful of addresses can be ineligible, so these walks are short
    value = int(rng.start) - 1
    while value >= lo and not eligible(value):
        value -= 1
    if value >= lo:
        return IPv4Address(value)
    value = int(rng.end) + 1
    while value <= hi and not eligible(value):
        value += 1
    if value <= hi:
        return IPv4Address(value)
    raise NoFreeAddress(f"no free address in {finalized_cidr} around {rng.start}-{rng.end}")


def _argmax_lowest(counts: dict) -> Optional[IPv4Address]:
    best = None
    for ip, n in counts.items():
        if n > 0 and (best is None or n > counts[best] or (n == counts[best] and ip < best)):
            best = ip
    return best


def determine_gateway(
    observations: ObservationSet,
    rng: NetworkRange,
    finalized_cidr: IPv4Network,
    exclude: Iterable = (),
) -> tuple:
    """Return ``(address, provenance)`` for the default-gateway candidate.

    Candidates are addresses inside ``finalized_cidr``. The most frequent ARP
    reply sender wins; failing that, the most frequent ARP request target;
    failing that, the block's first usable address (its last usable address
    if the first is excluded). Ties go to the lowest address.
    """
    excluded = {as_address(e) for e in exclude}

    def candidates(pairs):
        return {ip: n for ip, n in pairs if ip in finalized_cidr and ip not in excluded}

    replies = candidates((ip, h.arp_replies_sent) for ip, h in observations.hosts.items())
    best = _argmax_lowest(replies)
    if best is not None:
        return best, GatewayProvenance.ARP_REPLY_SENDER

    targets = candidates(
        [(ip, h.arp_requests_targeting) for ip, h in observations.hosts.items()]
        + list(observations.target_only_stats.items())
    )
    best = _argmax_lowest(targets)
    if best is not None:
        return best, GatewayProvenance.ARP_REQUEST_TARGET

    first, last = _usable_bounds(finalized_cidr)
    if first in excluded:
        return last, GatewayProvenance.RANGE_LAST_ADDRESS
    return first, GatewayProvenance.RANGE_FIRST_ADDRESS


def finalize_ranges(
    preliminary: Iterable[NetworkRange],
    iface: InterfaceState,
    fit: Optional[NetworkRange],
) -> list:
    blocks = []
    for rng in preliminary:
        if fit is not None and rng == fit:
            blocks.append(iface.network)
        else:
            blocks.extend(snap_range(rng))
    return merge_blocks(blocks)


def _block_containing(blocks: list, ip: IPv4Address) -> IPv4Network:
    for block in blocks:
        if ip in block:
            return block
    raise AssertionError(f"{ip} is not covered by any final block")


def build_scan_plan(
    observations: ObservationSet,
    policy: ClusteringPolicy = ClusteringPolicy(),
    iface: InterfaceState = InterfaceState(),
) -> ScanPlan:
    """Run the whole border analysis over ``observations``.

    When the current configuration does not fit, the own network's block may
    be widened one prefix bit at a time (never across a class boundary) until
    it holds a free address for the scanner.
    """
    addresses = observations.detected_addresses()
    if not addresses:
        raise NoRangesDetermined("the passive phase detected no hosts")
    preliminary = cluster(addresses, policy)
    ordered = order_ranges(preliminary)
    fit = fits_configuration(iface, preliminary)
    final = finalize_ranges(preliminary, iface, fit)
    warnings = []

    if fit is not None:
        own_block = _block_containing(final, iface.ip)
        return ScanPlan(final, own_block, None, observations, ordered, iface, warnings)

    own = select_own_network(ordered)
    own_block = _block_containing(final, own.start)
    while True:
        gateway, provenance = determine_gateway(observations, own, own_block)
        try:
            free_ip = select_free_ip(own, own_block, {gateway})
            break
        except NoFreeAddress:
            if own_block.prefixlen == 0 or not is_class_pure(own_block.supernet()):
                raise
            own_block = own_block.supernet()
            warnings.append(f"own network widened to {own_block} to find a free address")
    final = merge_blocks(final + [own_block])

    if provenance in (GatewayProvenance.RANGE_FIRST_ADDRESS, GatewayProvenance.RANGE_LAST_ADDRESS):
        warnings.append(f"no ARP statistics for {own_block}; gateway {gateway} is a conventional guess")
    proposed = ProposedConfig(free_ip, own_block.prefixlen, gateway, provenance)
    return ScanPlan(final, own_block, proposed, observations, ordered, iface, warnings)


class ScopePlanner(BaseEstimator):
    """Estimator facade over :func:`build_scan_plan`.

    ``fit`` consumes an :class:`ObservationSet` and stores the resulting
    ``plan_``; ``predict`` maps addresses to their final target block
    (``None`` when out of scope).
    """

    def __init__(self, variant="max-size", max_size=256, prefix_length=24, interface=None):
        self.variant = variant
        self.max_size = max_size
        self.prefix_length = prefix_length
        self.interface = interface

    def fit(self, X: ObservationSet, y=None):
        if not isinstance(X, ObservationSet):
            raise TypeError(f"expected an ObservationSet, got {type(X).__name__}")
        policy = ClusteringPolicy(ClusteringVariant(self.variant), self.max_size, self.prefix_length)
        iface = self.interface if self.interface is not None else InterfaceState()
        self.plan_ = build_scan_plan(X, policy, iface)
        self.final_ranges_ = self.plan_.final_ranges
        self.own_network_ = self.plan_.own_network
        return self

    def predict(self, X) -> list:
        check_is_fitted(self, "plan_")
        return [self.plan_.target_for(x) for x in X]
