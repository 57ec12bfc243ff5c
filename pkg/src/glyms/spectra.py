"""MSn scan hierarchies: canonical line format and an mzXML-subset reader.

Canonical format (diffable, one scan per two lines)::

    S <scan_id> <ms_level> [<parent_scan_id>] [<precursor_mz>] [<precursor_charge>|?]
    P <mz>:<intensity> <mz>:<intensity> ...

'#' starts a comment.  MS1 scans carry only id and level.  An unknown
precursor charge is written as '?' and kept as None -- never defaulted to 1;
the engine enumerates charge states instead.
"""

from __future__ import annotations

import base64
import struct
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import IO, Iterable, Iterator


class SpectraFormatError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Peak:
    mz: float
    intensity: float

    def __post_init__(self):
        if self.mz <= 0:
            raise SpectraFormatError(f"non-positive m/z {self.mz}")
        if self.intensity < 0:
            raise SpectraFormatError(f"negative intensity {self.intensity}")


@dataclass(frozen=True)
class Scan:
    scan_id: int
    ms_level: int
    precursor_mz: float | None = None
    precursor_charge: int | None = None
    parent_scan_id: int | None = None
    peaks: tuple[Peak, ...] = ()

    def __post_init__(self):
        if self.ms_level < 1:
            raise SpectraFormatError(f"scan {self.scan_id}: ms_level < 1")
        if (self.ms_level == 1) != (self.precursor_mz is None):
            raise SpectraFormatError(
                f"scan {self.scan_id}: precursor_mz present iff ms_level >= 2"
            )

    @property
    def total_intensity(self) -> float:
        return sum(p.intensity for p in self.peaks)


@dataclass(frozen=True)
class ScanTree:
    """Forest of scans rooted at MS1; children indexed by parent id."""

    scans: dict[int, Scan]
    children: dict[int, tuple[int, ...]]
    roots: tuple[int, ...]
    max_ms_level: int

    def __iter__(self) -> Iterator[Scan]:
        return iter(self.scans.values())

    def children_of(self, scan_id: int) -> tuple[Scan, ...]:
        return tuple(self.scans[c] for c in self.children.get(scan_id, ()))


def link_precursors(scans: Iterable[Scan]) -> ScanTree:
    """Validate parent links and build the forest."""
    by_id: dict[int, Scan] = {}
    for scan in scans:
        if scan.scan_id in by_id:
            raise SpectraFormatError(f"duplicate scan id {scan.scan_id}")
        by_id[scan.scan_id] = scan
    children: dict[int, list[int]] = {}
    roots = []
    for scan in by_id.values():
        if scan.ms_level == 1:
            if scan.parent_scan_id is not None:
                raise SpectraFormatError(f"MS1 scan {scan.scan_id} has a parent")
            roots.append(scan.scan_id)
            continue
        pid = scan.parent_scan_id
        if pid is None:
            raise SpectraFormatError(f"orphan MS{scan.ms_level} scan {scan.scan_id}")
        if pid == scan.scan_id:
            raise SpectraFormatError(f"scan {scan.scan_id} references itself")
        parent = by_id.get(pid)
        if parent is None:
            raise SpectraFormatError(
                f"scan {scan.scan_id} references missing parent {pid}"
            )
        if parent.ms_level != scan.ms_level - 1:
            raise SpectraFormatError(
                f"scan {scan.scan_id} (MS{scan.ms_level}) under "
                f"MS{parent.ms_level} scan {pid}"
            )
        children.setdefault(pid, []).append(scan.scan_id)
    # level mismatch already excludes cycles (levels strictly increase down a chain)
    max_level = max((s.ms_level for s in by_id.values()), default=0)
    return ScanTree(
        scans=dict(sorted(by_id.items())),
        children={k: tuple(sorted(v)) for k, v in children.items()},
        roots=tuple(sorted(roots)),
        max_ms_level=max_level,
    )


# ---------------------------------------------------------------------------
# Canonical format


def _sorted_peaks(peaks: Iterable[Peak]) -> tuple[Peak, ...]:
    return tuple(sorted(peaks, key=lambda p: (p.mz, p.intensity)))


def read_canonical(stream: IO[str] | Iterable[str]) -> ScanTree:
    scans: list[Scan] = []
    header: tuple | None = None
    for lineno, raw in enumerate(stream, 1):
        line = raw.rstrip("\n")
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        kind, _, rest = stripped.partition(" ")
        if kind == "S":
            if header is not None:
                raise SpectraFormatError(f"line {lineno}: scan header without peak line")
            header = _parse_header(rest, lineno)
        elif kind == "P":
            if header is None:
                raise SpectraFormatError(f"line {lineno}: peak line without scan header")
            peaks = _parse_peaks(rest, lineno)
            scan_id, level, parent, pre_mz, pre_z = header
            scans.append(
                Scan(scan_id, level, pre_mz, pre_z, parent, _sorted_peaks(peaks))
            )
            header = None
        else:
            raise SpectraFormatError(f"line {lineno}: unknown record type {kind!r}")
    if header is not None:
        raise SpectraFormatError("truncated input: scan header without peak line")
    return link_precursors(scans)


def _parse_header(rest: str, lineno: int):
    fields = rest.split()
    try:
        scan_id = int(fields[0])
        level = int(fields[1])
        if level == 1:
            if len(fields) != 2:
                raise ValueError("MS1 header takes exactly id and level")
            return scan_id, 1, None, None, None
        if len(fields) != 5:
            raise ValueError("MSn header takes id level parent precursor_mz charge")
        parent = int(fields[2])
        pre_mz = float(fields[3])
        pre_z = None if fields[4] == "?" else int(fields[4])
        return scan_id, level, parent, pre_mz, pre_z
    except (ValueError, IndexError) as exc:
        raise SpectraFormatError(f"line {lineno}: malformed scan header: {exc}") from None


def _parse_peaks(rest: str, lineno: int) -> list[Peak]:
    peaks = []
    for token in rest.split():
        mz_s, sep, int_s = token.partition(":")
        if not sep:
            raise SpectraFormatError(f"line {lineno}: malformed peak {token!r}")
        try:
            peaks.append(Peak(float(mz_s), float(int_s)))
        except ValueError as exc:
            raise SpectraFormatError(f"line {lineno}: malformed peak {token!r}") from None
    return peaks


def write_canonical(tree: ScanTree, stream: IO[str]) -> None:
    for scan_id in sorted(tree.scans):
        scan = tree.scans[scan_id]
        if scan.ms_level == 1:
            stream.write(f"S {scan.scan_id} 1\n")
        else:
            charge = "?" if scan.precursor_charge is None else str(scan.precursor_charge)
            stream.write(
                f"S {scan.scan_id} {scan.ms_level} {scan.parent_scan_id} "
                f"{scan.precursor_mz!r} {charge}\n"
            )
        body = " ".join(f"{p.mz!r}:{p.intensity!r}" for p in scan.peaks)
        stream.write(f"P {body}\n" if body else "P\n")


# ---------------------------------------------------------------------------
# mzXML subset


def _strip_ns(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def decode_peaks(payload: str, precision: int, byte_order: str = "network") -> list[Peak]:
    """Decode base64 big-endian (mz, intensity) pairs, 32- or 64-bit floats."""
    if byte_order not in ("network", "big"):
        raise SpectraFormatError(f"unsupported byte order {byte_order!r}")
    if precision not in (32, 64):
        raise SpectraFormatError(f"unsupported precision {precision}")
    try:
        data = base64.b64decode(payload.encode("ascii"), validate=True)
    except Exception as exc:
        raise SpectraFormatError(f"bad base64 peak payload: {exc}") from None
    width = precision // 8
    if len(data) % (2 * width):
        raise SpectraFormatError("truncated base64 peak payload")
    count = len(data) // width
    values = struct.unpack(f">{count}{'f' if precision == 32 else 'd'}", data)
    return [Peak(values[i], values[i + 1]) for i in range(0, count, 2)]


def encode_peaks(peaks: Iterable[Peak], precision: int = 64) -> str:
    flat: list[float] = []
    for p in peaks:
        flat += [p.mz, p.intensity]
    data = struct.pack(f">{len(flat)}{'f' if precision == 32 else 'd'}", *flat)
    return base64.b64encode(data).decode("ascii")


def read_mzxml_subset(stream: IO) -> ScanTree:
    """Read nested `scan` elements with num/msLevel/precursorMz/peaks.

    Only the documented subset is interpreted; other elements are counted and
    ignored (see ``ScanTree`` docs).  Parent links come from scan nesting.
    """
    try:
        root = ET.parse(stream).getroot()
    except ET.ParseError as exc:
        raise SpectraFormatError(f"malformed XML: {exc}") from None
    scans: list[Scan] = []

    def visit(elem, parent_id: int | None):
        if _strip_ns(elem.tag) != "scan":
            for child in elem:
                visit(child, parent_id)
            return
        try:
            scan_id = int(elem.attrib["num"])
            level = int(elem.attrib["msLevel"])
        except (KeyError, ValueError) as exc:
            raise SpectraFormatError(f"scan element missing num/msLevel: {exc}") from None
        pre_mz = None
        pre_z = None
        peaks: list[Peak] = []
        for child in elem:
            tag = _strip_ns(child.tag)
            if tag == "precursorMz":
                pre_mz = float(child.text.strip())
                if "precursorCharge" in child.attrib:
                    pre_z = int(child.attrib["precursorCharge"])
            elif tag == "peaks":
                precision = int(child.attrib.get("precision", "32"))
                byte_order = child.attrib.get("byteOrder", "network")
                peaks = decode_peaks(child.text or "", precision, byte_order)
        scans.append(
            Scan(
                scan_id,
                level,
                pre_mz,
                pre_z,
                parent_id if level > 1 else None,
                _sorted_peaks(peaks),
            )
        )
        for child in elem:
            visit(child, scan_id)

    visit(root, None)
    return link_precursors(scans)
