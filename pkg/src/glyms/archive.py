"""Append-only annotation archive.

Record layout (one record = one ``A`` line plus one ``p`` line per annotated
peak)::

    A <scan_id> <candidate_id> <ion_config_signature> <score_c> <score_i> <n_peak_annotations>
    p <peak_index> <fragment_signature> <theoretical_mz> <delta>

Scores of MS1 records are unset and written as ``-``.  The writer never
rereads written data; an index file (``<path>.idx``) maps scan ids to byte
offsets so records can be fetched per scan without loading the archive.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import IO, Iterable, Iterator


class ArchiveError(ValueError):
    pass


@dataclass(frozen=True)
class PeakAnnotation:
    peak_index: int
    fragment_signature: str
    ion_config_signature: str
    theoretical_mz: float
    delta: float  # observed - theoretical


@dataclass(frozen=True)
class AnnotationRecord:
    scan_id: int
    candidate_id: str  # glycan id at MS2, parent fragment signature deeper
    ion_config_signature: str
    ms_level: int
    score_c: float | None
    score_i: float | None
    peak_annotations: tuple[PeakAnnotation, ...]
    flags: tuple[str, ...] = ()

    @property
    def glycan_id(self) -> str:
        """Originating database glycan (prefix of nested candidate ids)."""
        return self.candidate_id.split("|", 1)[0]


def _fmt_score(value: float | None) -> str:
    return "-" if value is None else repr(value)


def _parse_score(text: str) -> float | None:
    return None if text == "-" else float(text)


def format_record(record: AnnotationRecord) -> str:
    lines = [
        f"A {record.scan_id} {record.candidate_id} {record.ion_config_signature} "
        f"{_fmt_score(record.score_c)} {_fmt_score(record.score_i)} "
        f"{len(record.peak_annotations)}"
    ]
    for pa in record.peak_annotations:
        lines.append(
            f"p {pa.peak_index} {pa.fragment_signature} {pa.theoretical_mz!r} {pa.delta!r}"
        )
    return "\n".join(lines) + "\n"


class ArchiveWriter:
    """Streaming writer; one record in memory at a time.

    ``max_resident_records`` instruments the streaming bound: it is the
    largest number of records ever held between :meth:`begin_record` and the
    completed write.
    """

    def __init__(self, stream: IO[str], index_stream: IO[str] | None = None, ms_level_by_scan=None):
        self._stream = stream
        self._index = index_stream
        self._offset = 0
        self._resident = 0
        self.max_resident_records = 0
        self.records_written = 0

    def write(self, record: AnnotationRecord) -> None:
        self._resident += 1
        self.max_resident_records = max(self.max_resident_records, self._resident)
        text = format_record(record)
        if self._index is not None:
            self._index.write(f"{record.scan_id} {self._offset} {len(record.peak_annotations)}\n")
        self._stream.write(text)
        self._offset += len(text.encode("utf-8"))
        self._resident -= 1
        self.records_written += 1


def write_archive(records: Iterable[AnnotationRecord], stream: IO[str]) -> None:
    writer = ArchiveWriter(stream)
    for record in records:
        writer.write(record)


def read_archive(stream: IO[str] | Iterable[str], ms_levels: dict[int, int] | None = None) -> list[AnnotationRecord]:
    """Read all records; ``ms_levels`` (scan id -> level) restores ms_level."""
    return list(iter_archive(stream, ms_levels))


def iter_archive(stream, ms_levels: dict[int, int] | None = None) -> Iterator[AnnotationRecord]:
    header = None
    peaks: list[PeakAnnotation] = []
    expected = 0
    lineno = 0

    def finish():
        scan_id, cand, cfg, sc, si, n = header
        if len(peaks) != n:
            raise ArchiveError(
                f"record for scan {scan_id}: expected {n} peak lines, got {len(peaks)}"
            )
        level = (ms_levels or {}).get(scan_id, 2 if sc is not None else 1)
        return AnnotationRecord(scan_id, cand, cfg, level, sc, si, tuple(peaks))

    for lineno, raw in enumerate(stream, 1):
        line = raw.rstrip("\n")
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split(" ")
        if fields[0] == "A":
            if header is not None:
                yield finish()
            if len(fields) != 7:
                raise ArchiveError(f"line {lineno}: malformed record line")
            header = (
                int(fields[1]),
                fields[2],
                fields[3],
                _parse_score(fields[4]),
                _parse_score(fields[5]),
                int(fields[6]),
            )
            peaks = []
            expected = header[5]
        elif fields[0] == "p":
            if header is None or len(fields) != 5:
                raise ArchiveError(f"line {lineno}: malformed peak line")
            # the per-peak ion configuration is not part of the file format
            peaks.append(
                PeakAnnotation(int(fields[1]), fields[2], "", float(fields[3]), float(fields[4]))
            )
        else:
            raise ArchiveError(f"line {lineno}: unknown line type {fields[0]!r}")
    if header is not None:
        yield finish()


def read_index(stream) -> dict[int, list[tuple[int, int]]]:
    index: dict[int, list[tuple[int, int]]] = {}
    for raw in stream:
        if not raw.strip():
            continue
        scan_id, offset, n = raw.split()
        index.setdefault(int(scan_id), []).append((int(offset), int(n)))
    return index
