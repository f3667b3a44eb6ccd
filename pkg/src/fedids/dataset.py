"""Dataset assembly: CSV loading, file-name label derivation, sampling, null handling.

Capture exports follow the SOURCE_TRAFFIC[_PHASE]_DEVICE.csv naming
convention (for example ``mirai_mal_CC_lock.csv``), from which four
labels are derived: a binary malware flag, the malware family, the
botnet phase and the device.  Records are sampled per (traffic, device)
group into one working set, then the ten chroniclly-null tcp_* columns
are removed and any row still carrying an absent value is dropped,
leaving six numeric predictor columns.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import CsvSchemaError, FileNamingError, InputError
from .pcap import CSV_FIELDS, format_value
from .rng import RngStream

# The six numeric predictors, in training order.
PREDICTOR_COLUMNS = (
    "frame_len",
    "ip_len",
    "ip_ttl",
    "ip_proto",
    "tcp_srcport",
    "tcp_dstport",
)

# tcp_* columns that are null whenever the packet is not a mid-stream
# TCP segment; they are dropped wholesale before training.
NULL_PRONE_COLUMNS = (
    "tcp_len",
    "tcp_hdr_len",
    "tcp_flags",
    "tcp_window_size_value",
    "tcp_window_size",
    "tcp_window_size_scalefactor",
    "tcp_time_relative",
    "tcp_time_delta",
    "tcp_analysis_bytes_in_flight",
    "tcp_analysis_push_bytes_sent",
)

# Columns that must be present for a row to survive the null drop.
_REQUIRED_AFTER_DROP = (
    "frame_len",
    "frame_protocol_last",
    "ip_len",
    "ip_flags",
    "ip_ttl",
    "ip_proto",
    "ip_src",
    "ip_dst",
    "tcp_srcport",
    "tcp_dstport",
)

LABEL_COLUMNS = ("is_malware", "malware_type", "phase", "device")

_UNDERSCORE_FIELDS = tuple(name.replace(".", "_") for name in CSV_FIELDS)

_INT_FIELDS = {
    "frame_len",
    "ip_len",
    "ip_ttl",
    "ip_proto",
    "tcp_srcport",
    "tcp_dstport",
    "tcp_len",
    "tcp_hdr_len",
    "tcp_window_size_value",
    "tcp_window_size",
    "tcp_window_size_scalefactor",
    "tcp_analysis_bytes_in_flight",
    "tcp_analysis_push_bytes_sent",
}
_FLOAT_FIELDS = {"tcp_time_relative", "tcp_time_delta"}


@dataclass
class PacketRecord:
    """One packet's extracted fields plus the labels derived from its file name."""

    frame_len: int
    frame_protocols: str
    frame_protocol_last: str
    ip_len: Optional[int]
    ip_flags: Optional[str]
    ip_ttl: Optional[int]
    ip_proto: Optional[int]
    ip_src: Optional[str]
    ip_dst: Optional[str]
    tcp_srcport: Optional[int]
    tcp_dstport: Optional[int]
    tcp_len: Optional[int]
    tcp_hdr_len: Optional[int]
    tcp_flags: Optional[str]
    tcp_window_size_value: Optional[int]
    tcp_window_size: Optional[int]
    tcp_window_size_scalefactor: Optional[int]
    tcp_time_relative: Optional[float]
    tcp_time_delta: Optional[float]
    tcp_analysis_bytes_in_flight: Optional[int]
    tcp_analysis_push_bytes_sent: Optional[int]
    is_malware: int
    malware_type: str
    phase: str
    device: str


@dataclass
class AuxLabels:
    """Carried-along labels that are never classified."""

    malware_type: np.ndarray
    phase: np.ndarray
    device: np.ndarray

    def take(self, indices) -> "AuxLabels":
        return AuxLabels(
            self.malware_type[indices], self.phase[indices], self.device[indices]
        )


@dataclass
class Dataset:
    """Feature matrix plus label vector(s); the unit flowing through preprocessing."""

    feature_names: list[str]
    features: np.ndarray  # (n, f) float64, no absent values
    labels: np.ndarray  # (n,) ints in {0, 1}
    aux: Optional[AuxLabels] = None

    def __len__(self) -> int:
        return self.features.shape[0]

    def take(self, indices) -> "Dataset":
        idx = np.asarray(indices)
        return Dataset(
            list(self.feature_names),
            self.features[idx],
            self.labels[idx],
            self.aux.take(idx) if self.aux is not None else None,
        )


def derive_labels(file_name: str) -> tuple[int, str, str, str]:
    """(is_malware, malware_type, phase, device) from a MedBIoT-style file name.

    The traffic token decides the malware flag; torii malicious captures
    carry no phase token and map to "spread"; legitimate captures are
    phase "leg".  The device is the final token minus its extension.
    """
    name = Path(file_name).name
    tokens = name.split("_")
    if len(tokens) < 3:
        raise FileNamingError(
            f"{name!r}: expected SOURCE_TRAFFIC[_PHASE]_DEVICE.csv naming"
        )
    source, traffic = tokens[0], tokens[1]
    is_malware = 1 if traffic == "mal" else 0
    device = tokens[-1].rsplit(".", 1)[0]
    if is_malware:
        if source == "torii":
            phase = "spread"
        elif tokens[2] == "spread":
            phase = "spread"
        elif tokens[2] == "CC":
            phase = "cc"
        else:
            raise FileNamingError(f"{name!r}: unknown phase token {tokens[2]!r}")
    else:
        phase = "leg"
    return is_malware, source, phase, device


def _parse_field(name: str, text: str, row_num: int):
    if text == "":
        return None
    try:
        if name in _INT_FIELDS:
            return int(text)
        if name in _FLOAT_FIELDS:
            return float(text)
    except ValueError as exc:
        raise CsvSchemaError(f"row {row_num}: bad value {text!r} for {name}") from exc
    return text


def _record_from_fields(values: dict, labels: tuple[int, str, str, str]) -> PacketRecord:
    protocols = values["frame_protocols"]
    return PacketRecord(
        frame_protocol_last=protocols.split(":")[-1] if protocols else "",
        is_malware=labels[0],
        malware_type=labels[1],
        phase=labels[2],
        device=labels[3],
        **values,
    )


def load_csv(path, labels: tuple[int, str, str, str]) -> list[PacketRecord]:
    """Load one 20-column capture export, attaching the given labels to every row.

    Quotes are stripped by the reader, so the protocol chain keeps clean
    tokens and `frame_protocol_last` is simply its final ":"-separated
    element.
    """
    records = []
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(CSV_FIELDS):
            raise CsvSchemaError(f"{path}: header does not match the 20 capture fields")
        for row_num, row in enumerate(reader, start=2):
            if len(row) != len(CSV_FIELDS):
                raise CsvSchemaError(
                    f"{path}: row {row_num} has {len(row)} fields, expected {len(CSV_FIELDS)}"
                )
            values = {
                name: _parse_field(name, text, row_num)
                for name, text in zip(_UNDERSCORE_FIELDS, row)
            }
            if values["frame_len"] is None or values["frame_protocols"] is None:
                raise CsvSchemaError(f"{path}: row {row_num} is missing frame fields")
            records.append(_record_from_fields(values, labels))
    return records


def load_group_csv(path) -> list[PacketRecord]:
    """Load a capture export whose labels come from its own file name."""
    return load_csv(path, derive_labels(Path(path).name))


def assemble(
    groups: Sequence[tuple[str, list[PacketRecord]]],
    rows_per_group: int,
    rng: RngStream,
) -> list[PacketRecord]:
    """Sample `rows_per_group` rows without replacement from each group.

    Sampled rows keep their original within-group order; groups are
    concatenated in the order given.
    """
    gen = rng.generator()
    out: list[PacketRecord] = []
    for name, records in groups:
        if len(records) < rows_per_group:
            raise InputError(
                f"group {name!r} has {len(records)} rows, need {rows_per_group}"
            )
        idx = np.sort(gen.choice(len(records), size=rows_per_group, replace=False))
        out.extend(records[i] for i in idx)
    return out


def drop_nulls(records: Sequence[PacketRecord]) -> Dataset:
    """Drop the ten null-prone tcp_* columns, then every row still holding
    an absent value; the survivors become the six-predictor feature matrix."""
    kept = [
        r
        for r in records
        if all(getattr(r, col) is not None for col in _REQUIRED_AFTER_DROP)
    ]
    features = np.array(
        [[float(getattr(r, col)) for col in PREDICTOR_COLUMNS] for r in kept],
        dtype=np.float64,
    ).reshape(len(kept), len(PREDICTOR_COLUMNS))
    labels = np.array([r.is_malware for r in kept], dtype=np.int64)
    aux = AuxLabels(
        malware_type=np.array([r.malware_type for r in kept], dtype=object),
        phase=np.array([r.phase for r in kept], dtype=object),
        device=np.array([r.device for r in kept], dtype=object),
    )
    return Dataset(list(PREDICTOR_COLUMNS), features, labels, aux)


def write_assembled_csv(records: Sequence[PacketRecord], path) -> None:
    """Persist an assembled record list: the 20 capture columns plus the
    four label columns, quoted the same way as capture exports."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(CSV_FIELDS + LABEL_COLUMNS) + "\n")
        for rec in records:
            row = [getattr(rec, name) for name in _UNDERSCORE_FIELDS]
            row += [rec.is_malware, rec.malware_type, rec.phase, rec.device]
            fh.write(",".join(f'"{format_value(v)}"' for v in row) + "\n")


def load_assembled_csv(path) -> list[PacketRecord]:
    """Read back a file produced by `write_assembled_csv`."""
    expected = list(CSV_FIELDS + LABEL_COLUMNS)
    records = []
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != expected:
            raise CsvSchemaError(f"{path}: header does not match an assembled dataset")
        for row_num, row in enumerate(reader, start=2):
            if len(row) != len(expected):
                raise CsvSchemaError(
                    f"{path}: row {row_num} has {len(row)} fields, expected {len(expected)}"
                )
            values = {
                name: _parse_field(name, text, row_num)
                for name, text in zip(_UNDERSCORE_FIELDS, row[: len(CSV_FIELDS)])
            }
            mal_text, mtype, phase, device = row[len(CSV_FIELDS) :]
            try:
                is_malware = int(mal_text)
            except ValueError as exc:
                raise CsvSchemaError(f"{path}: row {row_num}: bad is_malware") from exc
            records.append(
                _record_from_fields(values, (is_malware, mtype, phase, device))
            )
    return records
