"""Analytics that need no active probing: initial-TTL hints and
internal-gateway inference from externally measured hopcounts."""

from __future__ import annotations

import enum
import json
from collections import Counter
from dataclasses import dataclass
from ipaddress import IPv4Address
from typing import Mapping, Optional

from .ranges import as_address

INITIAL_TTLS = (64, 128, 255)


class OsFamily(enum.Enum):
    UNIX_LIKE = "UnixLike"
    WINDOWS = "Windows"
    NETWORK_DEVICE = "NetworkDevice"
    UNKNOWN = "Unknown"


_FAMILY_BY_INITIAL = {64: OsFamily.UNIX_LIKE, 128: OsFamily.WINDOWS, 255: OsFamily.NETWORK_DEVICE}


@dataclass(frozen=True)
class TtlHint:
    observed_ttl: int
    inferred_initial_ttl: Optional[int]
    inferred_distance_hops: Optional[int]
    os_family_hint: OsFamily


def ttl_hint(observed_ttl: int) -> TtlHint:
    """Guess the sender's initial TTL as the smallest common default at or
    above the observed value."""
    if 1 <= observed_ttl <= 255:
        for initial in INITIAL_TTLS:
            if observed_ttl <= initial:
                return TtlHint(observed_ttl, initial, initial - observed_ttl, _FAMILY_BY_INITIAL[initial])
    return TtlHint(observed_ttl, None, None, OsFamily.UNKNOWN)


def dominant_ttl_hint(observed_ttls: Mapping[int, int]) -> Optional[TtlHint]:
    """Hint for the most frequent TTL of a host (ties go to the lower TTL)."""
    if not observed_ttls:
        return None
    ttl = min(observed_ttls, key=lambda t: (-observed_ttls[t], t))
    return ttl_hint(ttl)


class HopcountTable(dict):
    """Mapping of address to hopcount as measured from one external vantage point."""

    def __init__(self, entries: Mapping = ()):
        super().__init__()
        for addr, hops in dict(entries).items():
            hops = int(hops)
            if hops < 1:
                raise ValueError(f"hopcount for {addr} must be at least 1, got {hops}")
            self[as_address(addr)] = hops

    @classmethod
    def from_json(cls, text: str) -> "HopcountTable":
        doc = json.loads(text)
        if not isinstance(doc, dict):
            raise ValueError("hopcount file must hold a JSON object mapping addresses to integers")
        return cls(doc)

    @classmethod
    def load(cls, path) -> "HopcountTable":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def infer_internal_gateway(table: Mapping[IPv4Address, int]) -> Optional[IPv4Address]:
    """Find the router interface that answers one hop closer than its network.

    A router's internal interface answers as a host, so seen from outside it
    sits one hop nearer than the hosts behind it. The typical hopcount is the
    modal one (the larger value on ties); exactly one address at that count
    minus one is reported, anything else is ambiguous and yields ``None``.
    """
    if not table:
        return None
    counts = Counter(table.values())
    modal = max(counts, key=lambda h: (counts[h], h))
    candidates = [addr for addr, hops in table.items() if hops == modal - 1]
    if len(candidates) == 1:
        return as_address(candidates[0])
    return None
