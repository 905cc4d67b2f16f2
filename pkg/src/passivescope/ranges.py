"""Preliminary network ranges from detected host addresses.

Addresses are partitioned by one of three clustering variants and never
grouped across a special-purpose boundary: private space (10/8, 172.16/12,
192.168/16) and dynamic link-local space (169.254/16) form their own
blocks, and a range's whole ``[start, end]`` interval stays inside one
block.
"""

from __future__ import annotations

import bisect
import enum
from dataclasses import dataclass
from ipaddress import IPv4Address, IPv4Network, ip_address
from typing import Iterable, Sequence

from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import EmptyInput


class AddressClass(enum.IntEnum):
    """Ordering of the members is the range-selection priority."""

    GLOBAL = 0
    PRIVATE = 1
    LINK_LOCAL = 2


PRIVATE_NETWORKS = tuple(IPv4Network(n) for n in ("10.0.0.0/8", "172.16.0.0/12", "192.168.0.0/16"))
LINK_LOCAL_NETWORK = IPv4Network("169.254.0.0/16")

# (first address, class) for every maximal single-class block of the IPv4 space
_SPECIAL = sorted(
    [(int(n.network_address), int(n.broadcast_address), AddressClass.PRIVATE) for n in PRIVATE_NETWORKS]
    + [(int(LINK_LOCAL_NETWORK.network_address), int(LINK_LOCAL_NETWORK.broadcast_address), AddressClass.LINK_LOCAL)]
)
_SEGMENT_STARTS: list = []
_SEGMENT_CLASSES: list = []
_cursor = 0
for _first, _last, _cls in _SPECIAL:
    if _first > _cursor:
        _SEGMENT_STARTS.append(_cursor)
        _SEGMENT_CLASSES.append(AddressClass.GLOBAL)
    _SEGMENT_STARTS.append(_first)
    _SEGMENT_CLASSES.append(_cls)
    _cursor = _last + 1
_SEGMENT_STARTS.append(_cursor)
_SEGMENT_CLASSES.append(AddressClass.GLOBAL)
del _first, _last, _cls, _cursor


def as_address(value) -> IPv4Address:
    """Coerce a string, integer or address object to :class:`IPv4Address`."""
    if isinstance(value, IPv4Address):
        return value
    addr = ip_address(value)
    if not isinstance(addr, IPv4Address):
        raise ValueError(f"{value!r} is not an IPv4 address")
    return addr


def check_addresses(addresses: Iterable) -> list:
    """Validate an address collection; return its distinct members sorted ascending."""
    if isinstance(addresses, (str, bytes)):
        raise TypeError("expected a collection of addresses, not a single string")
    return sorted({as_address(a) for a in addresses})


def segment_index(ip) -> int:
    """Index of the single-class block of the address space holding ``ip``."""
    return bisect.bisect_right(_SEGMENT_STARTS, int(ip)) - 1


def segment_bounds(ip) -> tuple:
    idx = segment_index(ip)
    last = _SEGMENT_STARTS[idx + 1] - 1 if idx + 1 < len(_SEGMENT_STARTS) else 0xFFFFFFFF
    return _SEGMENT_STARTS[idx], last


def classify_address(ip) -> AddressClass:
    return _SEGMENT_CLASSES[segment_index(as_address(ip))]


@dataclass(frozen=True)
class NetworkRange:
    start: IPv4Address
    end: IPv4Address
    detected_hosts: tuple
    address_class: AddressClass

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError("range start lies above its end")
        if segment_index(self.start) != segment_index(self.end):
            raise ValueError(f"range {self.start}-{self.end} crosses an address-class boundary")

    @classmethod
    def from_hosts(cls, hosts: Sequence) -> "NetworkRange":
        ordered = tuple(sorted(hosts))
        return cls(ordered[0], ordered[-1], ordered, classify_address(ordered[0]))

    @property
    def size(self) -> int:
        return int(self.end) - int(self.start) + 1

    @property
    def host_count(self) -> int:
        return len(self.detected_hosts)

    def __contains__(self, ip) -> bool:
        return self.start <= as_address(ip) <= self.end

    def to_dict(self) -> dict:
        return {
            "start": str(self.start),
            "end": str(self.end),
            "class": self.address_class.name.lower(),
            "hosts": [str(h) for h in self.detected_hosts],
        }


class ClusteringVariant(enum.Enum):
    MAX_SIZE = "max-size"
    PREFIX = "prefix"
    SINGLE = "single"


@dataclass(frozen=True)
class ClusteringPolicy:
    variant: ClusteringVariant = ClusteringVariant.MAX_SIZE
    max_size: int = 256
    prefix_length: int = 24

    def __post_init__(self):
        object.__setattr__(self, "variant", ClusteringVariant(self.variant))
        if self.max_size < 2:
            raise ValueError("max_size must be at least 2")
        if not 0 <= self.prefix_length <= 32:
            raise ValueError("prefix_length must lie in 0..32")

    @classmethod
    def max_network_size(cls, max_size: int = 256) -> "ClusteringPolicy":
        return cls(ClusteringVariant.MAX_SIZE, max_size=max_size)

    @classmethod
    def presumed_prefix(cls, prefix_length: int) -> "ClusteringPolicy":
        return cls(ClusteringVariant.PREFIX, prefix_length=prefix_length)

    @classmethod
    def single_network(cls) -> "ClusteringPolicy":
        return cls(ClusteringVariant.SINGLE)


def _starts_new_cluster(policy: ClusteringPolicy, first: int, addr: int) -> bool:
    if policy.variant is ClusteringVariant.MAX_SIZE:
        return addr - first + 1 > policy.max_size
    if policy.variant is ClusteringVariant.PREFIX:
        shift = 32 - policy.prefix_length
        return (addr >> shift) != (first >> shift)
    return False


def cluster(addresses: Iterable, policy: ClusteringPolicy = ClusteringPolicy()) -> list:
    """Partition ``addresses`` into preliminary ranges, sorted by start.

    The sorted addresses are scanned left to right; a new range begins when
    the next address lies in a different class block or, depending on the
    variant, would stretch the range beyond ``max_size`` addresses or
    leave the presumed prefix.
    """
    ordered = check_addresses(addresses)
    if not ordered:
        raise EmptyInput("cannot cluster an empty address set")
    groups = [[ordered[0]]]
    first, seg = int(ordered[0]), segment_index(ordered[0])
    for addr in ordered[1:]:
        value, addr_seg = int(addr), segment_index(addr)
        if addr_seg != seg or _starts_new_cluster(policy, first, value):
            groups.append([addr])
            first, seg = value, addr_seg
        else:
            groups[-1].append(addr)
    return [NetworkRange.from_hosts(g) for g in groups]


def range_sort_key(rng: NetworkRange) -> tuple:
    return (rng.address_class, -rng.host_count, int(rng.start))


def order_ranges(ranges: Iterable[NetworkRange]) -> list:
    """Order ranges by class (global, private, link-local), host count
    descending, then start address ascending."""
    return sorted(ranges, key=range_sort_key)


class RangeClusterer(ClusterMixin, BaseEstimator):
    """Estimator wrapper around :func:`cluster`.

    ``fit`` takes any collection of IPv4 addresses (strings, integers or
    ``IPv4Address``). After fitting, ``ranges_`` holds the ranges sorted by
    start, ``ordered_ranges_`` the same ranges in selection priority, and
    ``labels_`` the index into ``ranges_`` for each input address.
    ``predict`` maps new addresses to the containing range, or -1.

    >>> RangeClusterer(max_size=256).fit(["192.168.0.2", "192.168.1.17"]).n_ranges_
    2
    """

    def __init__(self, variant="max-size", max_size=256, prefix_length=24):
        self.variant = variant
        self.max_size = max_size
        self.prefix_length = prefix_length

    def _policy(self) -> ClusteringPolicy:
        return ClusteringPolicy(ClusteringVariant(self.variant), self.max_size, self.prefix_length)

    def fit(self, X, y=None):
        addresses = list(X)
        self.ranges_ = cluster(addresses, self._policy())
        self.ordered_ranges_ = order_ranges(self.ranges_)
        self.n_ranges_ = len(self.ranges_)
        self.labels_ = self.predict(addresses)
        return self

    def predict(self, X) -> list:
        check_is_fitted(self, "ranges_")
        starts = [int(r.start) for r in self.ranges_]
        labels = []
        for value in X:
            addr = as_address(value)
            idx = bisect.bisect_right(starts, int(addr)) - 1
            labels.append(idx if idx >= 0 and addr in self.ranges_[idx] else -1)
        return labels
