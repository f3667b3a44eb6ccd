"""Classic libpcap parsing and tshark-style per-packet feature export.

Input is the classic capture format: a 24-byte global header (magic,
version, thiszone, sigfigs, snaplen, link type) followed by 16-byte
record headers (ts_sec, ts_frac, incl_len, orig_len) and raw frame
bytes.  Both byte orders and both timestamp resolutions are accepted;
the link type must be Ethernet (1) for field extraction.

Output is a 20-column CSV with one row per extracted packet:

* the header row carries the dotted field names below, unquoted;
* every data value is double-quoted; absent values are empty quotes;
* `ip.flags` is the raw flags/fragment high byte as hex text ("0x40");
* `tcp.flags` is the 12-bit flag field as hex text ("0x0018");
* `tcp.window_size` repeats the raw window value and
  `tcp.window_size_scalefactor` is "-1" (scale unknown without stream
  state), matching field-export behaviour on mid-stream captures;
* the four stream-dependent analytics (`tcp.time_relative`,
  `tcp.time_delta`, `tcp.analysis.*`) are always emitted absent: every
  downstream consumer drops them as null-heavy columns, so recomputing
  a stream tracker buys nothing.

IPv6 frames, VLAN-tagged frames and non-Ethernet captures are skipped
with counted warnings rather than failing a bulk conversion.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Iterator, Optional

from .errors import CaptureFormatError, TruncatedCaptureError

CSV_FIELDS = (
    "frame.len",
    "frame.protocols",
    "ip.len",
    "ip.flags",
    "ip.ttl",
    "ip.proto",
    "ip.src",
    "ip.dst",
    "tcp.srcport",
    "tcp.dstport",
    "tcp.len",
    "tcp.hdr_len",
    "tcp.flags",
    "tcp.window_size_value",
    "tcp.window_size",
    "tcp.window_size_scalefactor",
    "tcp.time_relative",
    "tcp.time_delta",
    "tcp.analysis.bytes_in_flight",
    "tcp.analysis.push_bytes_sent",
)

GLOBAL_HEADER_LEN = 24
RECORD_HEADER_LEN = 16

# magic -> (byte order, timestamp unit)
_MAGICS = {
    0xA1B2C3D4: (">", "micro"),
    0xD4C3B2A1: ("<", "micro"),
    0xA1B23C4D: (">", "nano"),
    0x4D3CB2A1: ("<", "nano"),
}

LINKTYPE_ETHERNET = 1

ETHERTYPE_IPV4 = 0x0800
ETHERTYPE_ARP = 0x0806
ETHERTYPE_VLAN = 0x8100
ETHERTYPE_IPV6 = 0x86DD

IP_PROTO_TCP = 6
IP_PROTO_UDP = 17


@dataclass(frozen=True)
class CaptureHeader:
    magic: int
    byte_order: str  # "big" | "little"
    timestamp_unit: str  # "micro" | "nano"
    link_type: int
    snaplen: int


@dataclass(frozen=True)
class RawPacketView:
    """One capture record: captured bytes plus the on-wire length."""

    captured_len: int
    original_len: int
    payload: bytes


@dataclass
class ExtractedFields:
    """The 20 retained per-packet fields; None marks an absent value."""

    frame_len: int
    frame_protocols: str
    ip_len: Optional[int] = None
    ip_flags: Optional[str] = None
    ip_ttl: Optional[int] = None
    ip_proto: Optional[int] = None
    ip_src: Optional[str] = None
    ip_dst: Optional[str] = None
    tcp_srcport: Optional[int] = None
    tcp_dstport: Optional[int] = None
    tcp_len: Optional[int] = None
    tcp_hdr_len: Optional[int] = None
    tcp_flags: Optional[str] = None
    tcp_window_size_value: Optional[int] = None
    tcp_window_size: Optional[int] = None
    tcp_window_size_scalefactor: Optional[int] = None
    tcp_time_relative: Optional[float] = None
    tcp_time_delta: Optional[float] = None
    tcp_analysis_bytes_in_flight: Optional[int] = None
    tcp_analysis_push_bytes_sent: Optional[int] = None

    def as_row(self) -> list:
        return [
            self.frame_len,
            self.frame_protocols,
            self.ip_len,
            self.ip_flags,
            self.ip_ttl,
            self.ip_proto,
            self.ip_src,
            self.ip_dst,
            self.tcp_srcport,
            self.tcp_dstport,
            self.tcp_len,
            self.tcp_hdr_len,
            self.tcp_flags,
            self.tcp_window_size_value,
            self.tcp_window_size,
            self.tcp_window_size_scalefactor,
            self.tcp_time_relative,
            self.tcp_time_delta,
            self.tcp_analysis_bytes_in_flight,
            self.tcp_analysis_push_bytes_sent,
        ]


@dataclass
class SkipCounts:
    """Packets passed over during a conversion, by reason."""

    ipv6: int = 0
    vlan: int = 0
    other: int = 0

    def total(self) -> int:
        return self.ipv6 + self.vlan + self.other


def _read_exact(stream: BinaryIO, size: int) -> bytes:
    """Read exactly `size` bytes, tolerating short reads from the source."""
    chunks = []
    remaining = size
    while remaining > 0:
        chunk = stream.read(remaining)
        if not chunk:
            break
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def open_capture(source):
    """Parse the global header and return (CaptureHeader, packet iterator).

    `source` is a path or a readable binary stream.  The iterator yields
    one RawPacketView per record and raises TruncatedCaptureError naming
    the record index if the file ends mid-record.
    """
    stream = open(source, "rb") if not hasattr(source, "read") else source
    header_bytes = _read_exact(stream, GLOBAL_HEADER_LEN)
    if len(header_bytes) < GLOBAL_HEADER_LEN:
        raise CaptureFormatError("file shorter than the 24-byte capture header")
    magic = struct.unpack(">I", header_bytes[:4])[0]
    if magic not in _MAGICS:
        raise CaptureFormatError(f"unknown capture magic 0x{magic:08x}")
    order, ts_unit = _MAGICS[magic]
    _vmaj, _vmin, _zone, _sigfigs, snaplen, link_type = struct.unpack(
        order + "HHiIII", header_bytes[4:]
    )
    header = CaptureHeader(
        magic=magic,
        byte_order="big" if order == ">" else "little",
        timestamp_unit=ts_unit,
        link_type=link_type,
        snaplen=snaplen,
    )

    def packets() -> Iterator[RawPacketView]:
        index = 0
        while True:
            rec = _read_exact(stream, RECORD_HEADER_LEN)
            if len(rec) == 0:
                return
            if len(rec) < RECORD_HEADER_LEN:
                raise TruncatedCaptureError(
                    f"record header of packet {index} is truncated"
                )
            _ts_sec, _ts_frac, incl_len, orig_len = struct.unpack(order + "IIII", rec)
            payload = _read_exact(stream, incl_len)
            if len(payload) < incl_len:
                raise TruncatedCaptureError(
                    f"packet {index}: expected {incl_len} bytes, file holds {len(payload)}"
                )
            yield RawPacketView(incl_len, orig_len, payload)
            index += 1

    return header, packets()


def extract(packet: RawPacketView):
    """Extract the retained fields from one Ethernet frame.

    Returns ExtractedFields, or None as a skip marker for frames the
    pipeline does not model (IPv6, VLAN-tagged, runt frames).  Raises
    TruncatedCaptureError when a protocol header is shorter than its own
    declared length.
    """
    data = packet.payload
    if len(data) < 14:
        return None
    ethertype = struct.unpack(">H", data[12:14])[0]
    rec = ExtractedFields(frame_len=packet.original_len, frame_protocols="eth:ethertype:data")

    if ethertype in (ETHERTYPE_IPV6, ETHERTYPE_VLAN):
        return None
    if ethertype == ETHERTYPE_ARP:
        rec.frame_protocols = "eth:ethertype:arp"
        return rec
    if ethertype != ETHERTYPE_IPV4:
        return rec  # unknown payload: frame-level fields only

    ip = data[14:]
    if len(ip) < 20:
        raise TruncatedCaptureError("IPv4 header shorter than 20 bytes")
    ihl = (ip[0] & 0x0F) * 4
    if ihl < 20:
        raise TruncatedCaptureError(f"IPv4 IHL declares {ihl} bytes")
    if len(ip) < ihl:
        raise TruncatedCaptureError(
            f"IPv4 header declares {ihl} bytes, {len(ip)} captured"
        )
    total_len = struct.unpack(">H", ip[2:4])[0]
    rec.frame_protocols = "eth:ethertype:ip"
    rec.ip_len = total_len
    rec.ip_flags = f"0x{ip[6]:02x}"
    rec.ip_ttl = ip[8]
    rec.ip_proto = ip[9]
    rec.ip_src = ".".join(str(b) for b in ip[12:16])
    rec.ip_dst = ".".join(str(b) for b in ip[16:20])

    if rec.ip_proto == IP_PROTO_UDP:
        rec.frame_protocols = "eth:ethertype:ip:udp"
        return rec
    if rec.ip_proto != IP_PROTO_TCP:
        return rec

    tcp = ip[ihl:]
    if len(tcp) < 20:
        raise TruncatedCaptureError(
            f"TCP header needs 20 bytes, {len(tcp)} captured"
        )
    hdr_len = ((tcp[12] & 0xF0) >> 4) * 4
    if hdr_len < 20:
        raise TruncatedCaptureError(f"TCP data offset declares {hdr_len} bytes")
    if len(tcp) < hdr_len:
        raise TruncatedCaptureError(
            f"TCP header declares {hdr_len} bytes, {len(tcp)} captured"
        )
    rec.frame_protocols = "eth:ethertype:ip:tcp"
    rec.tcp_srcport, rec.tcp_dstport = struct.unpack(">HH", tcp[0:4])
    flags = ((tcp[12] & 0x0F) << 8) | tcp[13]
    window = struct.unpack(">H", tcp[14:16])[0]
    rec.tcp_len = total_len - ihl - hdr_len
    rec.tcp_hdr_len = hdr_len
    rec.tcp_flags = f"0x{flags:04x}"
    rec.tcp_window_size_value = window
    rec.tcp_window_size = window
    rec.tcp_window_size_scalefactor = -1
    return rec


def convert(source):
    """Extract every packet of a capture: (ExtractedFields list, SkipCounts).

    Raises CaptureFormatError for non-Ethernet captures so callers can
    skip the whole file with a warning.
    """
    header, packets = open_capture(source)
    if header.link_type != LINKTYPE_ETHERNET:
        raise CaptureFormatError(
            f"link type {header.link_type} is not Ethernet; capture skipped"
        )
    rows: list[ExtractedFields] = []
    skips = SkipCounts()
    for packet in packets:
        data = packet.payload
        ethertype = struct.unpack(">H", data[12:14])[0] if len(data) >= 14 else None
        rec = extract(packet)
        if rec is None:
            if ethertype == ETHERTYPE_IPV6:
                skips.ipv6 += 1
            elif ethertype == ETHERTYPE_VLAN:
                skips.vlan += 1
            else:
                skips.other += 1
            continue
        rows.append(rec)
    return rows, skips


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_csv(records, path) -> None:
    """Write records in the documented 20-column layout.

    The header row is unquoted; every value is double-quoted, absent
    values as empty quoted strings.  Values never contain quotes or
    separators by construction.
    """
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(CSV_FIELDS) + "\n")
            for rec in records:
                row = rec.as_row()
                fh.write(",".join(f'"{format_value(v)}"' for v in row) + "\n")
    except OSError as exc:
        raise CaptureFormatError(f"cannot write {path}: {exc}") from exc
