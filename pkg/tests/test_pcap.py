import io
import struct

import dpkt
import pytest

from passivescope.codec import RawFrame
from passivescope.exceptions import MalformedTraceFile
from passivescope.pcap import MAGIC_NANO, iter_pcap, write_pcap

FRAMES = [RawFrame(b"\x01" * 60, 1_500_000_000_123_456), RawFrame(b"\x02" * 42, 1_500_000_001_000_001, 100)]


def _pcap(order, magic, records, linktype=1):
    out = struct.pack(order + "IHHiIII", magic, 2, 4, 0, 0, 65535, linktype)
    for sec, frac, data in records:
        out += struct.pack(order + "IIII", sec, frac, len(data), len(data)) + data
    return out


def test_write_then_read_round_trip():
    buf = io.BytesIO()
    assert write_pcap(buf, FRAMES) == 2
    buf.seek(0)
    assert list(iter_pcap(buf)) == FRAMES


def test_written_file_is_readable_by_dpkt():
    buf = io.BytesIO()
    write_pcap(buf, FRAMES)
    buf.seek(0)
    records = list(dpkt.pcap.Reader(buf))
    assert [bytes(data) for _, data in records] == [f.data for f in FRAMES]
    assert records[0][0] == pytest.approx(1_500_000_000.123456)


def test_big_endian_files():
    raw = _pcap(">", 0xA1B2C3D4, [(10, 5, b"x" * 20)])
    (frame,) = iter_pcap(io.BytesIO(raw))
    assert frame.timestamp == 10_000_005
    assert frame.data == b"x" * 20


def test_nanosecond_timestamps_are_truncated():
    raw = _pcap("<", MAGIC_NANO, [(3, 999_999_999, b"y" * 14)])
    (frame,) = iter_pcap(io.BytesIO(raw))
    assert frame.timestamp == 3_999_999


def test_empty_capture_has_no_frames():
    assert list(iter_pcap(io.BytesIO(_pcap("<", 0xA1B2C3D4, [])))) == []


@pytest.mark.parametrize("raw", [
    b"",
    b"\x00" * 24,
    _pcap("<", 0xA1B2C3D4, [], linktype=113),
    _pcap("<", 0xA1B2C3D4, [(1, 0, b"z" * 30)])[:-5],
    _pcap("<", 0xA1B2C3D4, [(1, 0, b"z" * 30)]) + b"\x00" * 7,
    _pcap("<", 0xA1B2C3D4, [(1, 2_000_000, b"z")]),
])
def test_malformed_files(raw):
    with pytest.raises(MalformedTraceFile):
        list(iter_pcap(io.BytesIO(raw)))
