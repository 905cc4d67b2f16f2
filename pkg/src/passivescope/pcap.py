"""Minimal reader and writer for classic libpcap savefiles (Ethernet only)."""

from __future__ import annotations

import struct
from typing import BinaryIO, Iterable, Iterator

from .codec import RawFrame
from .exceptions import MalformedTraceFile

MAGIC_MICRO = 0xA1B2C3D4
MAGIC_NANO = 0xA1B23C4D
LINKTYPE_ETHERNET = 1

GLOBAL_HEADER_LEN = 24
RECORD_HEADER_LEN = 16
DEFAULT_SNAPLEN = 65535


def _detect_byte_order(magic: bytes) -> tuple[str, bool]:
    for order in ("<", ">"):
        (value,) = struct.unpack(order + "I", magic)
        if value == MAGIC_MICRO:
            return order, False
        if value == MAGIC_NANO:
            return order, True
    raise MalformedTraceFile(f"unknown pcap magic number 0x{magic.hex()}")


def iter_pcap(stream: BinaryIO, name: str = "<stream>") -> Iterator[RawFrame]:
    """Yield the frames of a pcap savefile with microsecond timestamps.

    Nanosecond-resolution files are truncated to microseconds. A file that
    ends inside a record, or that declares a non-Ethernet link type, raises
    :class:`MalformedTraceFile`.
    """
    header = stream.read(GLOBAL_HEADER_LEN)
    if len(header) < GLOBAL_HEADER_LEN:
        raise MalformedTraceFile(f"{name}: truncated global header ({len(header)} bytes)")
    order, nanos = _detect_byte_order(header[:4])
    _major, _minor, _zone, _sigfigs, _snaplen, linktype = struct.unpack(order + "HHiIII", header[4:])
    if linktype & 0x0FFFFFFF != LINKTYPE_ETHERNET:
        raise MalformedTraceFile(f"{name}: unsupported link type {linktype}, only Ethernet (1) is decoded")
    record = struct.Struct(order + "IIII")
    index = 0
    while True:
        head = stream.read(RECORD_HEADER_LEN)
        if not head:
            return
        if len(head) < RECORD_HEADER_LEN:
            raise MalformedTraceFile(f"{name}: record {index} has a truncated header")
        seconds, fraction, incl_len, orig_len = record.unpack(head)
        if nanos:
            fraction //= 1000
        if fraction >= 1_000_000:
            raise MalformedTraceFile(f"{name}: record {index} has an invalid sub-second timestamp")
        data = stream.read(incl_len)
        if len(data) < incl_len:
            raise MalformedTraceFile(
                f"{name}: record {index} declares {incl_len} bytes but only {len(data)} remain"
            )
        yield RawFrame(data, seconds * 1_000_000 + fraction, max(orig_len, incl_len))
        index += 1


def write_pcap(stream: BinaryIO, frames: Iterable[RawFrame], snaplen: int = DEFAULT_SNAPLEN) -> int:
    """Write ``frames`` as a little-endian microsecond pcap; return the frame count."""
    stream.write(struct.pack("<IHHiIII", MAGIC_MICRO, 2, 4, 0, 0, snaplen, LINKTYPE_ETHERNET))
    count = 0
    for frame in frames:
        data = frame.data[:snaplen]
        seconds, micros = divmod(frame.timestamp, 1_000_000)
        stream.write(struct.pack("<IIII", seconds, micros, len(data), frame.original_length))
        stream.write(data)
        count += 1
    return count
