"""Desk-scale evaluation: synthetic data, cross-validation, accuracy/coverage.

Annotation identity for metric purposes is (scan_id, glycan_id); ion
configurations are ignored.  Timings are reported, never asserted.
"""

from __future__ import annotations

import io
import random
import time
from dataclasses import dataclass
from typing import Iterable, Sequence

from .archive import AnnotationRecord, ArchiveWriter
from .engine import AnnotationEngine, RunSettings
from .fragments import enumerate_fragments, Candidate
from .glycans import DerivatizationState, GlycanRecord, NATIVE, neutral_mass
from .ions import mz
from .sage import Feature, SageGraph, SmoothingConfig, extract_features
from .spectra import Peak, Scan, ScanTree, link_precursors

AnnotationKey = tuple[int, str]  # (scan_id, glycan_id)


@dataclass(frozen=True)
class EvaluationReport:
    accuracy: float | None  # None when nothing was predicted
    coverage: float
    fold_count: int = 1
    per_fold: tuple[tuple[float | None, float], ...] = ()
    train_ms: float = 0.0
    annotate_ms: float = 0.0
    predicted_count: int = 0
    approved_count: int = 0


def evaluate(predicted: Iterable[AnnotationKey], approved: Iterable[AnnotationKey]) -> EvaluationReport:
    predicted = set(predicted)
    approved = set(approved)
    hits = len(predicted & approved)
    accuracy = hits / len(predicted) if predicted else None
    coverage = hits / len(approved) if approved else 0.0
    return EvaluationReport(
        accuracy=accuracy,
        coverage=coverage,
        predicted_count=len(predicted),
        approved_count=len(approved),
    )


@dataclass(frozen=True)
class SyntheticDataset:
    name: str
    tree: ScanTree
    approved: frozenset[AnnotationKey]


def generate_synthetic(
    seed: int,
    n_datasets: int,
    database: Sequence[GlycanRecord],
    noise: float = 0.0,
    settings: RunSettings | None = None,
    scans_per_dataset: int = 20,
) -> list[SyntheticDataset]:
    """Datasets of MS2 scans built from theoretical fragment peaks.

    Deterministic under the seed.  Each scan is generated from one known
    glycan: its fragment m/z values (singly charged, first carrier) become
    peaks, plus ``noise`` spurious peaks per real peak; the generating
    (scan, glycan) pairs form the approved set.
    """
    if not database:
        raise ValueError("empty glycan database")
    settings = settings or RunSettings(derivatization="native")
    rng = random.Random(seed)
    deriv = (
        NATIVE
        if settings.derivatization == "native"
        else DerivatizationState("permethylated", 0)
    )
    config = [
        c
        for c in AnnotationEngine(settings).precursor_configs()
        if abs(c.charge) == 1 and not c.exchanges and not c.losses
    ][0]
    datasets = []
    for d in range(n_datasets):
        scans = [Scan(1, 1)]
        approved = set()
        scan_id = 2
        for _ in range(scans_per_dataset):
            rec = rng.choice(list(database))
            m = neutral_mass(rec.structure, deriv)
            fragments = enumerate_fragments(
                Candidate.from_glycan(rec.structure), deriv, settings.fragmentation, 2
            )
            peaks = [
                Peak(mz(f.neutral_mass, config), rng.uniform(50.0, 150.0))
                for f in fragments
            ]
            n_noise = int(round(noise * len(peaks)))
            for _ in range(n_noise):
                peaks.append(Peak(rng.uniform(120.0, 2500.0), rng.uniform(1.0, 50.0)))
            scans.append(
                Scan(
                    scan_id,
                    2,
                    precursor_mz=mz(m, config),
                    precursor_charge=None,
                    parent_scan_id=1,
                    peaks=tuple(sorted(set(peaks))),
                )
            )
            approved.add((scan_id, rec.structure.id))
            scan_id += 1
        datasets.append(
            SyntheticDataset(f"synthetic-{seed}-{d}", link_precursors(scans), frozenset(approved))
        )
    return datasets


def annotate_dataset(
    dataset: SyntheticDataset, database: Sequence[GlycanRecord], settings: RunSettings
) -> list[AnnotationRecord]:
    engine = AnnotationEngine(settings)
    records: list[AnnotationRecord] = []

    class Collector(ArchiveWriter):
        def write(self, record):
            records.append(record)
            super().write(record)

    engine.annotate_run(dataset.tree, database, Collector(io.StringIO()))
    return records


def features_by_scan(
    records: Sequence[AnnotationRecord], tree: ScanTree
) -> dict[int, list[Feature]]:
    """MS2 scan id -> feature set over the scan and its descendants."""
    by_scan: dict[int, list[AnnotationRecord]] = {}
    for record in records:
        by_scan.setdefault(record.scan_id, []).append(record)

    def collect(scan_id: int) -> list[AnnotationRecord]:
        out = list(by_scan.get(scan_id, []))
        for child in tree.children.get(scan_id, ()):
            out.extend(collect(child))
        return out

    out: dict[int, list[Feature]] = {}
    for scan_id, scan in tree.scans.items():
        if scan.ms_level == 2:
            group = collect(scan_id)
            if group:
                out[scan_id] = extract_features(group)
    return out


def leave_one_out(
    datasets: Sequence[SyntheticDataset],
    database: Sequence[GlycanRecord],
    settings: RunSettings | None = None,
    k: int = 1,
    smoothing: SmoothingConfig | None = None,
    bucket_width: float | None = None,
    warn=None,
) -> EvaluationReport:
    """Train on all-but-one dataset, classify the held-out one, average.

    Approved annotations of the training folds (engine records matching the
    ground truth) feed the graph; the held-out dataset is annotated by the
    engine de novo, its per-scan features classified, and the top-k glycans
    compared against its approved set.
    """
    if len(datasets) < 2:
        raise ValueError("leave-one-out needs at least 2 datasets")
    settings = settings or RunSettings(derivatization="native")
    warn = warn or (lambda msg: None)
    t0 = time.perf_counter()
    annotated = [annotate_dataset(ds, database, settings) for ds in datasets]
    annotate_ms = (time.perf_counter() - t0) * 1000.0

    tol_da = settings.ms1_tolerance.value if settings.ms1_tolerance.unit == "Da" else 0.5
    width = bucket_width if bucket_width is not None else tol_da

    per_fold = []
    train_ms = 0.0
    for held in range(len(datasets)):
        if not datasets[held].approved:
            warn(f"fold {held}: empty approved set, skipped")
            continue
        t0 = time.perf_counter()
        graph = SageGraph(bucket_width=width)
        for i, ds in enumerate(datasets):
            if i == held:
                continue
            approved_records = [
                r for r in annotated[i] if (r.scan_id, r.glycan_id) in ds.approved
            ]
            precursor_mz = {
                s.scan_id: s.precursor_mz
                for s in ds.tree.scans.values()
                if s.precursor_mz is not None
            }
            graph.train(approved_records, precursor_mz)
        train_ms += (time.perf_counter() - t0) * 1000.0

        held_ds = datasets[held]
        predicted: set[AnnotationKey] = set()
        for scan_id, features in features_by_scan(annotated[held], held_ds.tree).items():
            scan = held_ds.tree.scans[scan_id]
            ranked = graph.classify(scan.precursor_mz, features, tol_da, k=k, smoothing=smoothing)
            predicted.update((scan_id, glycan) for glycan, _ in ranked)
        report = evaluate(predicted, held_ds.approved)
        per_fold.append((report.accuracy, report.coverage))

    if not per_fold:
        return EvaluationReport(None, 0.0, 0)
    accuracies = [a for a, _ in per_fold if a is not None]
    mean_accuracy = sum(accuracies) / len(accuracies) if accuracies else None
    mean_coverage = sum(c for _, c in per_fold) / len(per_fold)
    return EvaluationReport(
        accuracy=mean_accuracy,
        coverage=mean_coverage,
        fold_count=len(per_fold),
        per_fold=tuple(per_fold),
        train_ms=train_ms,
        annotate_ms=annotate_ms,
        predicted_count=sum(1 for _ in per_fold),
        approved_count=sum(len(ds.approved) for ds in datasets),
    )


class BaselineClassifier:
    """Independence-assumption classifier over (glycan, feature) counts.

    Add-one smoothing; same classify interface as the graph model.  Exists
    as an in-repo comparison point for the probabilistic graph.
    """

    def __init__(self):
        self.class_counts: dict[str, int] = {}
        self.pair_counts: dict[tuple[str, str], int] = {}
        self.vocabulary: set[str] = set()

    def train(self, labeled: Iterable[tuple[str, Iterable[str]]]) -> None:
        for glycan, features in labeled:
            self.class_counts[glycan] = self.class_counts.get(glycan, 0) + 1
            for f in set(features):
                self.pair_counts[(glycan, f)] = self.pair_counts.get((glycan, f), 0) + 1
                self.vocabulary.add(f)

    def classify(self, features: Iterable[str], k: int | None = None) -> list[tuple[str, float]]:
        features = set(features)
        total = sum(self.class_counts.values())
        v = len(self.vocabulary) or 1
        scored = []
        for glycan, count in self.class_counts.items():
            p = count / total
            for f in features:
                p *= (self.pair_counts.get((glycan, f), 0) + 1) / (count + v)
            scored.append((glycan, p))
        scored.sort(key=lambda kv: (-kv[1], kv[0]))
        return scored[:k] if k is not None else scored


def report_text(report: EvaluationReport) -> str:
    lines = [
        f"folds     {report.fold_count}",
        f"accuracy  {'-' if report.accuracy is None else f'{report.accuracy:.4f}'}",
        f"coverage  {report.coverage:.4f}",
        f"train_ms  {report.train_ms:.1f}",
        f"annotate_ms {report.annotate_ms:.1f}",
    ]
    for i, (a, c) in enumerate(report.per_fold):
        lines.append(f"fold {i}: accuracy={'-' if a is None else f'{a:.4f}'} coverage={c:.4f}")
    return "\n".join(lines) + "\n"


def report_csv(report: EvaluationReport) -> str:
    lines = ["fold,accuracy,coverage"]
    for i, (a, c) in enumerate(report.per_fold):
        lines.append(f"{i},{'' if a is None else repr(a)},{c!r}")
    lines.append(
        f"mean,{'' if report.accuracy is None else repr(report.accuracy)},{report.coverage!r}"
    )
    return "\n".join(lines) + "\n"
