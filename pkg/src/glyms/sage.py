"""Trainable layered co-occurrence graph for annotation selection.

Level 0 nodes are approved glycan annotations (glycan id plus a precursor m/z
bucket); level i nodes are fragment signatures approved at MS level i+1.
Node and edge frequencies count approvals; the conditional probability of a
parent given a child is edge frequency over the child's total incoming edge
frequency, with configurable smoothing when no edge exists.  A scan's score
for a glycan is the product of conditionals over its observed features,
deeper features conditioning on their observed parent feature (maximum over
ambiguous parents).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import IO, Iterable, Mapping, Sequence

from .archive import AnnotationRecord


class ModelError(ValueError):
    pass


ROOT_BUCKET_SEP = "@"


@dataclass(frozen=True)
class SmoothingConfig:
    """Absent-edge handling: fixed floor by default, m-estimate behind config."""

    fixed_floor: float | None = 0.1
    m: float = 1.0
    prior: float = 0.1

    def __post_init__(self):
        if self.fixed_floor is not None and not (0 < self.fixed_floor < 1):
            raise ModelError("fixed_floor must be in (0,1)")
        if self.m < 0 or not (0 < self.prior <= 1):
            raise ModelError("need m >= 0 and prior in (0,1]")

    def absent(self, child_total: int) -> float:
        if self.fixed_floor is not None:
            return self.fixed_floor
        return (self.m * self.prior) / (child_total + self.m)

    def present(self, edge_freq: int, child_total: int) -> float:
        if self.fixed_floor is not None:
            return edge_freq / child_total
        return (edge_freq + self.m * self.prior) / (child_total + self.m)


@dataclass(frozen=True)
class Feature:
    """One observed fragment signature with its observed parent signatures.

    Level-1 features condition directly on the root; parents apply from
    level 2 down.
    """

    level: int
    signature: str
    parents: tuple[str, ...] = ()


@dataclass(frozen=True)
class Selection:
    """One human decision about an annotation record."""

    scan_id: int
    candidate_id: str
    ion_config_signature: str
    approved: bool
    reviewer: str = "-"
    timestamp: str = "-"

    @property
    def key(self) -> tuple[int, str, str]:
        return (self.scan_id, self.candidate_id, self.ion_config_signature)


class SageGraph:
    """Layered frequency graph; single-writer training, lock-free reads."""

    def __init__(self, bucket_width: float = 1.0):
        if bucket_width <= 0:
            raise ModelError("bucket_width must be positive")
        self.bucket_width = bucket_width
        self.node_freq: dict[tuple[int, str], int] = {}
        self.edge_freq: dict[tuple[int, str, str], int] = {}  # (parent level, parent, child)
        self.child_total: dict[tuple[int, str], int] = {}  # level, label -> sum incoming
        self._roots_by_bucket: dict[int, set[str]] = {}

    # -- structure --

    @property
    def max_level(self) -> int:
        return max((lv for lv, _ in self.node_freq), default=-1) + 1

    def node_count(self) -> int:
        return len(self.node_freq)

    def edge_count(self) -> int:
        return len(self.edge_freq)

    def bucket(self, mz_value: float) -> int:
        return int(mz_value // self.bucket_width)

    def root_label(self, glycan_id: str, precursor_mz: float) -> str:
        return f"{glycan_id}{ROOT_BUCKET_SEP}{self.bucket(precursor_mz)}"

    @staticmethod
    def split_root_label(label: str) -> tuple[str, int]:
        glycan_id, _, bucket = label.rpartition(ROOT_BUCKET_SEP)
        return glycan_id, int(bucket)

    def _bump_node(self, level: int, label: str, by: int = 1) -> None:
        self.node_freq[(level, label)] = self.node_freq.get((level, label), 0) + by
        if level == 0:
            _, bucket = self.split_root_label(label)
            self._roots_by_bucket.setdefault(bucket, set()).add(label)

    def _bump_edge(self, level: int, parent: str, child: str, by: int = 1) -> None:
        key = (level, parent, child)
        self.edge_freq[key] = self.edge_freq.get(key, 0) + by
        ck = (level + 1, child)
        self.child_total[ck] = self.child_total.get(ck, 0) + by

    # -- training --

    def train(
        self,
        approved_records: Iterable[AnnotationRecord],
        precursor_mz_by_scan: Mapping[int, float],
    ) -> None:
        """Incremental frequency counting over approved records.

        For each record: find-or-create the precursor node (its glycan plus
        m/z bucket at level 0, the parent fragment signature deeper) and
        increment it; each distinct annotated fragment signature increments
        its child node and the connecting edge once per record.
        """
        for record in sorted(
            approved_records, key=lambda r: (r.scan_id, r.candidate_id, r.ion_config_signature)
        ):
            if record.ms_level < 2:
                continue
            plevel = record.ms_level - 2
            if plevel == 0:
                pre_mz = precursor_mz_by_scan.get(record.scan_id)
                if pre_mz is None:
                    raise ModelError(
                        f"no precursor m/z known for scan {record.scan_id}"
                    )
                plabel = self.root_label(record.candidate_id, pre_mz)
            else:
                plabel = record.candidate_id
            self._bump_node(plevel, plabel)
            for signature in sorted({a.fragment_signature for a in record.peak_annotations}):
                self._bump_node(plevel + 1, signature)
                self._bump_edge(plevel, plabel, signature)

    # -- scoring --

    def conditional(
        self, parent_level: int, parent: str, child: str, smoothing: SmoothingConfig
    ) -> float:
        """P(parent | child) as edge frequency over the child's incoming total."""
        total = self.child_total.get((parent_level + 1, child))
        if total is None:
            raise ModelError(f"unknown child node {child!r} at level {parent_level + 1}")
        freq = self.edge_freq.get((parent_level, parent, child))
        if freq is None:
            return smoothing.absent(total)
        return smoothing.present(freq, total)

    def score(
        self,
        root_label: str,
        features: Sequence[Feature],
        smoothing: SmoothingConfig | None = None,
    ) -> float:
        """Product of feature conditionals for one level-0 root.

        Features unknown to the graph, or whose observed parents carry no
        edge, contribute the smoothed floor.
        """
        smoothing = smoothing or SmoothingConfig()
        if not features:
            raise ModelError("feature set is empty")
        prob = 1.0
        for feature in features:
            if feature.level < 1:
                raise ModelError("features live at level >= 1")
            if (feature.level, feature.signature) not in self.node_freq:
                prob *= smoothing.absent(0)
                continue
            if feature.level == 1:
                prob *= self.conditional(0, root_label, feature.signature, smoothing)
            else:
                parents = [
                    p
                    for p in feature.parents
                    if (feature.level - 1, p, feature.signature) in self.edge_freq
                ]
                if parents:
                    prob *= max(
                        self.conditional(feature.level - 1, p, feature.signature, smoothing)
                        for p in parents
                    )
                else:
                    total = self.child_total.get((feature.level, feature.signature), 0)
                    prob *= smoothing.absent(total)
        return prob

    def candidate_roots(self, precursor_mz: float, tolerance_da: float) -> list[str]:
        """Root labels whose m/z bucket overlaps [mz - tol, mz + tol]."""
        lo = self.bucket(precursor_mz - tolerance_da)
        hi = self.bucket(precursor_mz + tolerance_da)
        labels: set[str] = set()
        for b in range(lo, hi + 1):
            labels.update(self._roots_by_bucket.get(b, ()))
        return sorted(labels)

    def classify(
        self,
        precursor_mz: float,
        features: Sequence[Feature],
        tolerance_da: float,
        k: int | None = None,
        smoothing: SmoothingConfig | None = None,
    ) -> list[tuple[str, float]]:
        """Ranked (glycan id, probability) for roots near the precursor m/z."""
        best: dict[str, float] = {}
        for label in self.candidate_roots(precursor_mz, tolerance_da):
            glycan_id, _ = self.split_root_label(label)
            p = self.score(label, features, smoothing)
            if glycan_id not in best or p > best[glycan_id]:
                best[glycan_id] = p
        ranked = sorted(best.items(), key=lambda kv: (-kv[1], kv[0]))
        return ranked[:k] if k is not None else ranked

    # -- persistence --

    def dumps(self) -> str:
        body_lines = []
        for (level, label), freq in sorted(self.node_freq.items()):
            body_lines.append(f"N {level} {label} {freq}")
        for (level, parent, child), freq in sorted(self.edge_freq.items()):
            body_lines.append(f"E {level} {parent} {child} {freq}")
        body_lines.append(f"W {self.bucket_width!r}")
        body = "\n".join(body_lines) + "\n" if body_lines else ""
        checksum = hashlib.sha256(body.encode("utf-8")).hexdigest()
        header = f"SAGE v1 levels={self.max_level} checksum={checksum}\n"
        return header + body

    def save(self, stream: IO[str]) -> None:
        stream.write(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "SageGraph":
        header, _, body = text.partition("\n")
        fields = header.split()
        if len(fields) != 4 or fields[0] != "SAGE" or fields[1] != "v1":
            raise ModelError(f"unsupported model header {header!r}")
        expected = fields[3].removeprefix("checksum=")
        actual = hashlib.sha256(body.encode("utf-8")).hexdigest()
        if actual != expected:
            raise ModelError("model checksum mismatch")
        graph = cls()
        for lineno, line in enumerate(body.splitlines(), 2):
            parts = line.split(" ")
            try:
                if parts[0] == "N" and len(parts) == 4:
                    graph._bump_node(int(parts[1]), parts[2], int(parts[3]))
                elif parts[0] == "E" and len(parts) == 5:
                    graph._bump_edge(int(parts[1]), parts[2], parts[3], int(parts[4]))
                elif parts[0] == "W" and len(parts) == 2:
                    graph.bucket_width = float(parts[1])
                else:
                    raise ValueError("unknown line type")
            except ValueError as exc:
                raise ModelError(f"model line {lineno}: {exc}") from None
        return graph

    @classmethod
    def load(cls, stream: IO[str]) -> "SageGraph":
        return cls.loads(stream.read())

    def stats(self) -> dict:
        return {
            "levels": self.max_level,
            "nodes": self.node_count(),
            "edges": self.edge_count(),
            "nodes_per_level": {
                str(level): sum(1 for lv, _ in self.node_freq if lv == level)
                for level in range(self.max_level)
            },
            "bucket_width": self.bucket_width,
        }

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SageGraph)
            and self.bucket_width == other.bucket_width
            and self.node_freq == other.node_freq
            and self.edge_freq == other.edge_freq
        )


# ---------------------------------------------------------------------------
# Feature extraction and post-filtering


def extract_features(
    records: Sequence[AnnotationRecord],
    children_records: Mapping[str, Sequence[AnnotationRecord]] | None = None,
) -> list[Feature]:
    """Per-scan feature set from engine records.

    Level-1 features are the distinct fragment signatures among the scan's
    MS2 records; deeper features come from descendant-scan records keyed by
    their candidate (parent fragment) signature.
    """
    features: dict[tuple[int, str], set[str]] = {}
    for record in records:
        for ann in record.peak_annotations:
            features.setdefault((record.ms_level - 1, ann.fragment_signature), set())
            if record.ms_level >= 3:
                features[(record.ms_level - 1, ann.fragment_signature)].add(record.candidate_id)
    return [
        Feature(level, signature, tuple(sorted(parents)))
        for (level, signature), parents in sorted(features.items())
    ]


@dataclass(frozen=True)
class FilterPolicy:
    top_k: int | None = None
    min_probability: float | None = None

    def __post_init__(self):
        if (self.top_k is None) == (self.min_probability is None):
            raise ModelError("set exactly one of top_k / min_probability")

    def surviving(self, ranked: Sequence[tuple[str, float]]) -> set[str]:
        if self.top_k is not None:
            return {g for g, _ in ranked[: self.top_k]}
        return {g for g, p in ranked if p >= self.min_probability}


def post_filter(
    graph: SageGraph,
    records: Sequence[AnnotationRecord],
    scan_tree,
    tolerance_da: float,
    policy: FilterPolicy,
    smoothing: SmoothingConfig | None = None,
) -> list[AnnotationRecord]:
    """Drop records whose glycan the model would reject for the scan.

    The policy is evaluated per MS2 scan over the union of the scan's (and
    its descendants') features; glycans never seen in training are scored
    with smoothed floors, not dropped outright.  Surviving records keep
    their original order and content.  MS1 records pass through.
    """
    smoothing = smoothing or SmoothingConfig()
    by_scan: dict[int, list[AnnotationRecord]] = {}
    for record in records:
        by_scan.setdefault(record.scan_id, []).append(record)

    def descendants(scan_id: int) -> list[int]:
        out = [scan_id]
        for child in scan_tree.children.get(scan_id, ()):
            out.extend(descendants(child))
        return out

    surviving_by_scan: dict[int, set[str]] = {}
    for scan_id, scan in scan_tree.scans.items():
        if scan.ms_level != 2 or scan_id not in by_scan:
            continue
        group = [r for sid in descendants(scan_id) for r in by_scan.get(sid, [])]
        features = extract_features(group)
        if not features:
            # nothing observed to judge by; keep everything
            surviving_by_scan[scan_id] = {r.glycan_id for r in group}
            continue
        ranked = dict(
            graph.classify(scan.precursor_mz, features, tolerance_da, smoothing=smoothing)
        )
        floor = 1.0
        for feature in features:
            floor *= smoothing.absent(0)
        for record in group:
            ranked.setdefault(record.glycan_id, floor if features else 0.0)
        ordered = sorted(ranked.items(), key=lambda kv: (-kv[1], kv[0]))
        surviving_by_scan[scan_id] = policy.surviving(ordered)

    ms2_ancestor: dict[int, int | None] = {}

    def ancestor_ms2(scan_id: int) -> int | None:
        if scan_id in ms2_ancestor:
            return ms2_ancestor[scan_id]
        scan = scan_tree.scans[scan_id]
        if scan.ms_level == 2:
            result = scan_id
        elif scan.parent_scan_id is None:
            result = None
        else:
            result = ancestor_ms2(scan.parent_scan_id)
        ms2_ancestor[scan_id] = result
        return result

    kept = []
    for record in records:
        if record.ms_level <= 1:
            kept.append(record)
            continue
        anchor = ancestor_ms2(record.scan_id)
        surviving = surviving_by_scan.get(anchor, set())
        if record.glycan_id in surviving:
            kept.append(record)
    return kept


def parse_selections(lines: Iterable[str]) -> list[Selection]:
    """Read `SEL <scan> <candidate> <config> <0|1> <reviewer> <timestamp>` lines."""
    out = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(" ")
        if len(parts) != 7 or parts[0] != "SEL":
            raise ModelError(f"selections line {lineno}: malformed")
        out.append(
            Selection(int(parts[1]), parts[2], parts[3], parts[4] == "1", parts[5], parts[6])
        )
    return out


def format_selection(sel: Selection) -> str:
    return (
        f"SEL {sel.scan_id} {sel.candidate_id} {sel.ion_config_signature} "
        f"{1 if sel.approved else 0} {sel.reviewer} {sel.timestamp}\n"
    )


def current_decisions(selections: Sequence[Selection]) -> dict[tuple, Selection]:
    """Append-only log semantics: the latest decision per key wins."""
    out: dict[tuple, Selection] = {}
    for sel in selections:
        out[sel.key] = sel
    return out
