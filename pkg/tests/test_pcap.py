import io
import struct
from pathlib import Path

import pytest

from fedids import dataset as ds
from fedids import pcap
from fedids.errors import CaptureFormatError, TruncatedCaptureError

import packetcraft as craft

DATA_DIR = Path(__file__).parent / "data"


class DribbleReader(io.RawIOBase):
    """Returns at most `chunk` bytes per read to exercise short-read handling."""

    def __init__(self, data: bytes, chunk: int):
        self.data = data
        self.pos = 0
        self.chunk = chunk

    def read(self, size=-1):
        if self.pos >= len(self.data):
            return b""
        take = min(self.chunk, size if size >= 0 else self.chunk)
        out = self.data[self.pos : self.pos + take]
        self.pos += len(out)
        return out


class TestHeader:
    @pytest.mark.parametrize(
        "order,magic,expect_order,expect_unit",
        [
            (">", craft.MAGIC_MICRO, "big", "micro"),
            ("<", craft.MAGIC_MICRO, "little", "micro"),
            (">", craft.MAGIC_NANO, "big", "nano"),
            ("<", craft.MAGIC_NANO, "little", "nano"),
        ],
    )
    def test_magic_variants(self, order, magic, expect_order, expect_unit):
        data = craft.global_header(order, magic=magic)
        header, packets = pcap.open_capture(io.BytesIO(data))
        assert header.byte_order == expect_order
        assert header.timestamp_unit == expect_unit
        assert header.link_type == 1
        assert list(packets) == []

    def test_unknown_magic_rejected(self):
        data = struct.pack(">I", 0xDEADBEEF) + bytes(20)
        with pytest.raises(CaptureFormatError):
            pcap.open_capture(io.BytesIO(data))

    def test_short_file_rejected(self):
        with pytest.raises(CaptureFormatError):
            pcap.open_capture(io.BytesIO(b"\xa1\xb2"))

    def test_truncated_record_names_packet_index(self):
        good = craft.record("<", craft.golden_packets()[0])
        bad = struct.pack("<IIII", 0, 0, 100, 100) + b"short"
        data = craft.global_header("<") + good + bad
        _, packets = pcap.open_capture(io.BytesIO(data))
        with pytest.raises(TruncatedCaptureError, match="packet 1"):
            list(packets)

    def test_truncated_record_header(self):
        data = craft.global_header("<") + b"\x00" * 7
        _, packets = pcap.open_capture(io.BytesIO(data))
        with pytest.raises(TruncatedCaptureError, match="packet 0"):
            list(packets)

    @pytest.mark.parametrize("chunk", [1, 3, 7, 1024])
    def test_chunked_reads_are_equivalent(self, chunk):
        data = craft.pcap_bytes(craft.golden_packets())
        _, packets = pcap.open_capture(DribbleReader(data, chunk))
        dribbled = list(packets)
        _, packets = pcap.open_capture(io.BytesIO(data))
        whole = list(packets)
        assert dribbled == whole


class TestExtract:
    def convert_single(self, frame: bytes):
        data = craft.pcap_bytes([frame])
        rows, skips = pcap.convert(io.BytesIO(data))
        return rows, skips

    def test_hand_built_tcp_packet(self):
        rows, _ = self.convert_single(craft.golden_packets()[0])
        rec = rows[0]
        assert rec.frame_len == 54
        assert rec.frame_protocols == "eth:ethertype:ip:tcp"
        assert rec.ip_ttl == 64
        assert rec.ip_proto == 6
        assert rec.tcp_srcport == 23
        assert rec.tcp_dstport == 49152
        assert rec.ip_len == 40
        assert rec.tcp_len == 0

    def test_arp_has_frame_fields_only(self):
        rows, _ = self.convert_single(craft.arp_packet())
        rec = rows[0]
        assert rec.frame_protocols == "eth:ethertype:arp"
        assert rec.ip_len is None and rec.tcp_srcport is None

    def test_udp_has_ip_but_no_tcp(self):
        rows, _ = self.convert_single(craft.golden_packets()[1])
        rec = rows[0]
        assert rec.frame_protocols == "eth:ethertype:ip:udp"
        assert rec.ip_proto == 17
        assert rec.tcp_srcport is None

    def test_ipv6_skipped_with_count(self):
        rows, skips = self.convert_single(craft.ipv6_packet())
        assert rows == []
        assert skips.ipv6 == 1

    def test_vlan_skipped_with_count(self):
        frame = craft.ethernet(0x8100, bytes(20))
        rows, skips = self.convert_single(frame)
        assert rows == []
        assert skips.vlan == 1

    def test_ip_options_honoured(self):
        rows, _ = self.convert_single(craft.golden_packets()[5])
        rec = rows[0]
        assert rec.ip_len == 58
        assert rec.tcp_hdr_len == 24
        assert rec.tcp_len == 10

    def test_truncated_tcp_header(self):
        data = craft.truncated_tcp_capture()
        with pytest.raises(TruncatedCaptureError):
            pcap.convert(io.BytesIO(data))

    def test_non_ethernet_link_rejected(self):
        data = craft.global_header("<", link_type=101)  # raw IP
        with pytest.raises(CaptureFormatError, match="link type"):
            pcap.convert(io.BytesIO(data))


class TestEmitCsv:
    def test_zero_records_header_only(self, tmp_path):
        path = tmp_path / "empty.csv"
        pcap.emit_csv([], path)
        assert path.read_text() == ",".join(pcap.CSV_FIELDS) + "\n"

    def test_every_row_has_twenty_columns(self, tmp_path):
        data = craft.pcap_bytes(craft.golden_packets())
        rows, _ = pcap.convert(io.BytesIO(data))
        path = tmp_path / "out.csv"
        pcap.emit_csv(rows, path)
        lines = path.read_text().splitlines()
        for line in lines:
            assert line.count(",") == 19

    def test_round_trip_through_loader(self, tmp_path):
        data = craft.pcap_bytes(craft.golden_packets())
        rows, _ = pcap.convert(io.BytesIO(data))
        path = tmp_path / "mirai_mal_CC_lock.csv"
        pcap.emit_csv(rows, path)
        records = ds.load_csv(path, (1, "mirai", "cc", "lock"))
        assert len(records) == len(rows)
        for rec, row in zip(records, rows):
            for name in (
                "frame_len",
                "ip_len",
                "ip_flags",
                "ip_ttl",
                "ip_proto",
                "ip_src",
                "ip_dst",
                "tcp_srcport",
                "tcp_dstport",
                "tcp_len",
                "tcp_hdr_len",
                "tcp_flags",
            ):
                assert getattr(rec, name) == getattr(row, name)


class TestGoldenFixtures:
    def test_fixture_files_match_builders(self):
        assert (DATA_DIR / "golden.pcap").read_bytes() == craft.pcap_bytes(
            craft.golden_packets(), order="<"
        )
        assert (DATA_DIR / "golden_swapped.pcap").read_bytes() == craft.pcap_bytes(
            craft.golden_packets(), order=">"
        )
        assert (DATA_DIR / "truncated.pcap").read_bytes() == craft.truncated_tcp_capture()
        assert (DATA_DIR / "golden_expected.csv").read_text() == craft.GOLDEN_CSV

    def test_golden_capture_matches_fixture(self, tmp_path):
        rows, skips = pcap.convert(DATA_DIR / "golden.pcap")
        out = tmp_path / "golden.csv"
        pcap.emit_csv(rows, out)
        assert out.read_bytes() == (DATA_DIR / "golden_expected.csv").read_bytes()
        assert skips.ipv6 == 1

    def test_swapped_capture_identical(self, tmp_path):
        rows, _ = pcap.convert(DATA_DIR / "golden_swapped.pcap")
        out = tmp_path / "swapped.csv"
        pcap.emit_csv(rows, out)
        assert out.read_bytes() == (DATA_DIR / "golden_expected.csv").read_bytes()
