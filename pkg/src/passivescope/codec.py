"""Decoding of captured Ethernet II frames into ARP and IPv4 summaries.

Only the fields the analyzer needs are extracted. Decoding is total: any
octet sequence maps to an :class:`ArpSummary`, an :class:`IpSummary` or
:data:`IGNORED`, and no input raises.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from ipaddress import IPv4Address
from typing import Final, Union

ETH_HEADER_LEN: Final = 14
VLAN_TAG_LEN: Final = 4

ETHERTYPE_IPV4: Final = 0x0800
ETHERTYPE_ARP: Final = 0x0806
ETHERTYPE_VLAN: Final = 0x8100
ETHERTYPE_QINQ: Final = 0x88A8
ETHERTYPE_IPV6: Final = 0x86DD

ARP_PACKET_LEN: Final = 28
ARP_HTYPE_ETHERNET: Final = 1

_ARP = struct.Struct("!HHBBH6s4s6s4s")
_ETHERTYPE = struct.Struct("!H")


class ArpOp(enum.IntEnum):
    REQUEST = 1
    REPLY = 2


@dataclass(frozen=True)
class RawFrame:
    """A captured link-layer frame.

    ``data`` holds only the captured octets; ``original_length`` is the length
    on the wire, which may be larger when the capture was truncated.
    """

    data: bytes
    timestamp: int = 0
    original_length: int = -1

    def __post_init__(self):
        if self.original_length < 0:
            object.__setattr__(self, "original_length", len(self.data))
        if self.original_length < len(self.data):
            raise ValueError("original_length is smaller than the captured data")


@dataclass(frozen=True)
class ArpSummary:
    operation: ArpOp
    sender_mac: str
    sender_ip: IPv4Address
    target_mac: str
    target_ip: IPv4Address
    timestamp: int = 0


@dataclass(frozen=True)
class IpSummary:
    source_ip: IPv4Address
    destination_ip: IPv4Address
    ttl: int
    timestamp: int = 0


class _Ignored:
    __slots__ = ()

    def __repr__(self):
        return "IGNORED"

    def __bool__(self):
        return False

    def __reduce__(self):
        return "IGNORED"


#: Sentinel returned for frames that carry nothing of interest.
IGNORED: Final = _Ignored()

Summary = Union[ArpSummary, IpSummary]


def format_mac(raw: bytes) -> str:
    return raw.hex(":")


def parse_mac(text: str) -> bytes:
    raw = bytes.fromhex(text.replace(":", "").replace("-", ""))
    if len(raw) != 6:
        raise ValueError(f"not a MAC address: {text!r}")
    return raw


def _decode_arp(data: bytes, offset: int, timestamp: int):
    if len(data) - offset < ARP_PACKET_LEN:
        return IGNORED
    htype, ptype, hlen, plen, op, sha, spa, tha, tpa = _ARP.unpack_from(data, offset)
    if htype != ARP_HTYPE_ETHERNET or ptype != ETHERTYPE_IPV4 or hlen != 6 or plen != 4:
        return IGNORED
    if op != ArpOp.REQUEST and op != ArpOp.REPLY:
        return IGNORED
    return ArpSummary(
        operation=ArpOp(op),
        sender_mac=format_mac(sha),
        sender_ip=IPv4Address(spa),
        target_mac=format_mac(tha),
        target_ip=IPv4Address(tpa),
        timestamp=timestamp,
    )


def _decode_ipv4(data: bytes, offset: int, timestamp: int):
    if len(data) - offset < 20:
        return IGNORED
    first = data[offset]
    ihl = first & 0x0F
    if first >> 4 != 4 or ihl < 5 or len(data) - offset < ihl * 4:
        return IGNORED
    return IpSummary(
        source_ip=IPv4Address(data[offset + 12 : offset + 16]),
        destination_ip=IPv4Address(data[offset + 16 : offset + 20]),
        ttl=data[offset + 8],
        timestamp=timestamp,
    )


def decode_frame(frame: RawFrame) -> Union[ArpSummary, IpSummary, _Ignored]:
    """Decode one Ethernet II frame.

    A single 802.1Q tag is unwrapped; stacked tags, IPv6 and every other
    EtherType yield :data:`IGNORED`. The IPv4 header checksum is not checked.
    Every read is bounds-checked against ``len(frame.data)`` before it
    happens, so a struct error here would indicate a decoder bug.
    """
    data = frame.data
    if len(data) < ETH_HEADER_LEN:
        return IGNORED
    (ethertype,) = _ETHERTYPE.unpack_from(data, 12)
    offset = ETH_HEADER_LEN
    if ethertype == ETHERTYPE_VLAN:
        if len(data) < ETH_HEADER_LEN + VLAN_TAG_LEN:
            return IGNORED
        (ethertype,) = _ETHERTYPE.unpack_from(data, 16)
        offset += VLAN_TAG_LEN
        if ethertype in (ETHERTYPE_VLAN, ETHERTYPE_QINQ):
            return IGNORED
    if ethertype == ETHERTYPE_ARP:
        return _decode_arp(data, offset, frame.timestamp)
    if ethertype == ETHERTYPE_IPV4:
        return _decode_ipv4(data, offset, frame.timestamp)
    return IGNORED
