import socket
import struct
from ipaddress import IPv4Address

import dpkt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from passivescope.codec import IGNORED, ArpOp, ArpSummary, IpSummary, RawFrame, decode_frame
from passivescope.synth import encode_arp, encode_ipv4

# built by hand from the ARP and IPv4 wire layouts, confirmed with dpkt below
ARP_REQUEST_42 = bytes.fromhex(
    "ffffffffffffaabbccddee0108060001080006040001aabbccddee010a0000050000000000000a000001"
)
IPV4_TTL64 = bytes.fromhex(
    "ffffffffffff02000000000708004500001c0001000040110000c0a80007c0a800ff0000000000000000"
)


def test_reference_dissector_agrees_on_arp_example():
    arp = dpkt.ethernet.Ethernet(ARP_REQUEST_42).data
    assert isinstance(arp, dpkt.arp.ARP)
    assert (arp.op, socket.inet_ntoa(arp.spa), socket.inet_ntoa(arp.tpa)) == (1, "10.0.0.5", "10.0.0.1")


def test_arp_request_example():
    out = decode_frame(RawFrame(ARP_REQUEST_42, 17))
    assert out == ArpSummary(
        ArpOp.REQUEST, "aa:bb:cc:dd:ee:01", IPv4Address("10.0.0.5"),
        "00:00:00:00:00:00", IPv4Address("10.0.0.1"), 17,
    )


def test_reference_dissector_agrees_on_ipv4_example():
    ip = dpkt.ethernet.Ethernet(IPV4_TTL64).data
    assert isinstance(ip, dpkt.ip.IP)
    assert (ip.ttl, socket.inet_ntoa(ip.src)) == (64, "192.168.0.7")


def test_ipv4_example():
    out = decode_frame(RawFrame(IPV4_TTL64))
    assert isinstance(out, IpSummary)
    assert out.ttl == 64
    assert out.source_ip == IPv4Address("192.168.0.7")
    assert out.destination_ip == IPv4Address("192.168.0.255")


def test_short_frame_is_ignored():
    assert decode_frame(RawFrame(bytes(13))) is IGNORED
    assert decode_frame(RawFrame(b"")) is IGNORED


def _with_ethertype(frame, ethertype):
    return frame[:12] + struct.pack("!H", ethertype) + frame[14:]


def test_single_vlan_tag_is_unwrapped():
    tagged = ARP_REQUEST_42[:12] + bytes.fromhex("81000064") + ARP_REQUEST_42[12:]
    assert decode_frame(RawFrame(tagged)) == decode_frame(RawFrame(ARP_REQUEST_42))


def test_stacked_vlan_tags_are_ignored():
    tagged = IPV4_TTL64[:12] + bytes.fromhex("8100006481000065") + IPV4_TTL64[12:]
    assert decode_frame(RawFrame(tagged)) is IGNORED


def test_ipv6_is_ignored():
    assert decode_frame(RawFrame(_with_ethertype(IPV4_TTL64, 0x86DD))) is IGNORED


@pytest.mark.parametrize("offset, value", [
    (14, 0x0006),   # hardware type
    (16, 0x86DD),   # protocol type
    (20, 0x0003),   # opcode (RARP request)
])
def test_arp_header_fields_must_match(offset, value):
    frame = ARP_REQUEST_42[:offset] + struct.pack("!H", value) + ARP_REQUEST_42[offset + 2:]
    assert decode_frame(RawFrame(frame)) is IGNORED


def test_truncated_arp_is_ignored():
    assert decode_frame(RawFrame(ARP_REQUEST_42[:41])) is IGNORED


@pytest.mark.parametrize("first_byte", [0x65, 0x44, 0x35])
def test_bad_ipv4_version_or_ihl_is_ignored(first_byte):
    frame = IPV4_TTL64[:14] + bytes([first_byte]) + IPV4_TTL64[15:]
    assert decode_frame(RawFrame(frame)) is IGNORED


def test_ihl_longer_than_captured_bytes_is_ignored():
    # IHL 15 asks for 60 header bytes; only 28 are captured
    frame = IPV4_TTL64[:14] + b"\x4f" + IPV4_TTL64[15:]
    assert decode_frame(RawFrame(frame)) is IGNORED


def test_bad_checksum_still_decodes():
    frame = IPV4_TTL64[:24] + b"\xde\xad" + IPV4_TTL64[26:]
    assert decode_frame(RawFrame(frame)).ttl == 64


def test_special_addresses_are_kept_verbatim():
    summary = IpSummary(IPv4Address("0.0.0.0"), IPv4Address("255.255.255.255"), 128)
    frame = encode_ipv4(summary, "02:00:00:00:00:01", "ff:ff:ff:ff:ff:ff")
    assert decode_frame(RawFrame(frame)) == summary


def test_truncated_capture_metadata():
    frame = RawFrame(IPV4_TTL64[:34], original_length=60)
    assert decode_frame(frame).ttl == 64
    with pytest.raises(ValueError):
        RawFrame(IPV4_TTL64, original_length=10)


addresses = st.integers(0, 2**32 - 1).map(IPv4Address)
macs = st.binary(min_size=6, max_size=6).map(lambda b: b.hex(":"))


@given(st.sampled_from(list(ArpOp)), macs, addresses, macs, addresses, st.integers(0, 2**40))
def test_arp_round_trip(op, smac, sip, tmac, tip, ts):
    summary = ArpSummary(op, smac, sip, tmac, tip, ts)
    assert decode_frame(RawFrame(encode_arp(summary), ts)) == summary


@given(addresses, addresses, st.integers(0, 255), st.integers(0, 2**40))
def test_ipv4_round_trip(src, dst, ttl, ts):
    summary = IpSummary(src, dst, ttl, ts)
    frame = encode_ipv4(summary, "02:00:00:00:00:01", "02:00:00:00:00:02")
    assert decode_frame(RawFrame(frame, ts)) == summary


@settings(max_examples=500)
@given(st.binary(max_size=2000))
def test_totality(data):
    out = decode_frame(RawFrame(data))
    assert out is IGNORED or isinstance(out, (ArpSummary, IpSummary))


@settings(max_examples=300)
@given(st.sampled_from([ARP_REQUEST_42, IPV4_TTL64]), st.binary(max_size=64))
def test_trailing_bytes_do_not_change_result(frame, tail):
    assert decode_frame(RawFrame(frame + tail)) == decode_frame(RawFrame(frame))


@settings(max_examples=300)
@given(st.sampled_from([ARP_REQUEST_42, IPV4_TTL64]), st.data())
def test_prefixes_never_read_past_the_end(frame, data):
    cut = data.draw(st.integers(0, len(frame)))
    out = decode_frame(RawFrame(frame[:cut]))
    needed = 42 if frame is ARP_REQUEST_42 else 34
    assert (out is IGNORED) == (cut < needed)
