"""Curation HTTP service backing the review UI.

Read-mostly, local-first, single analyst: binds to loopback by default, no
authentication.  Decisions are appended to the selections file and fsynced
before the response is acknowledged; writes serialize through one lock.
The UI receives only server-computed numbers (scores, probabilities).
"""

from __future__ import annotations

import os
import threading
import time
from typing import Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .archive import format_record, read_archive
from .engine import RunSettings, parse_run_settings
from .sage import (
    FilterPolicy,
    SageGraph,
    Selection,
    current_decisions,
    extract_features,
    format_selection,
    parse_selections,
    post_filter,
)
from .spectra import read_canonical, read_mzxml_subset

PAGE_SIZE = 500


class DecisionIn(BaseModel):
    scan_id: int
    glycan_id: str
    config: str
    approved: bool
    reviewer: str = "-"


class TrainIn(BaseModel):
    model_out: Optional[str] = None


class FilterIn(BaseModel):
    top_k: Optional[int] = None
    min_probability: Optional[float] = None
    out: Optional[str] = None
    tolerance: float = 0.5


def _load_spectra(path: str):
    if path.endswith((".mzxml", ".mzXML", ".xml")):
        with open(path, "rb") as fh:
            return read_mzxml_subset(fh)
    with open(path, encoding="utf-8") as fh:
        return read_canonical(fh)


def create_app(
    spectra_path: str,
    archive_path: str,
    selections_path: str,
    model_path: str | None = None,
    db_path: str | None = None,
    settings_path: str | None = None,
) -> FastAPI:
    tree = _load_spectra(spectra_path)
    ms_levels = {s.scan_id: s.ms_level for s in tree}
    with open(archive_path, encoding="utf-8") as fh:
        records = read_archive(fh, ms_levels)
    records_by_scan: dict[int, list] = {}
    for record in records:
        records_by_scan.setdefault(record.scan_id, []).append(record)

    if settings_path:
        with open(settings_path, encoding="utf-8") as fh:
            settings = parse_run_settings(fh)
    else:
        settings = RunSettings()
    tol_da = settings.ms1_tolerance.value if settings.ms1_tolerance.unit == "Da" else 0.5

    state = {
        "graph": None,
        "model_path": model_path,
    }
    if model_path and os.path.exists(model_path):
        with open(model_path, encoding="utf-8") as fh:
            state["graph"] = SageGraph.load(fh)

    write_lock = threading.Lock()
    app = FastAPI(title="glyms curation service")

    def selections() -> list[Selection]:
        if not os.path.exists(selections_path):
            return []
        with open(selections_path, encoding="utf-8") as fh:
            return parse_selections(fh)

    def probabilities_for(scan_id: int) -> dict[str, float]:
        graph = state["graph"]
        scan = tree.scans.get(scan_id)
        if graph is None or scan is None or scan.ms_level != 2 or scan.precursor_mz is None:
            return {}
        group = list(records_by_scan.get(scan_id, []))
        for child in tree.children.get(scan_id, ()):
            group.extend(records_by_scan.get(child, []))
        features = extract_features(group)
        if not features:
            return {}
        return dict(graph.classify(scan.precursor_mz, features, tol_da))

    @app.get("/scans")
    def list_scans():
        out = []
        for scan_id, scan in tree.scans.items():
            out.append(
                {
                    "scan_id": scan_id,
                    "ms_level": scan.ms_level,
                    "precursor_mz": scan.precursor_mz,
                    "precursor_charge": scan.precursor_charge,
                    "parent_scan_id": scan.parent_scan_id,
                    "peak_count": len(scan.peaks),
                    "annotation_count": len(records_by_scan.get(scan_id, [])),
                }
            )
        return {"scans": out}

    @app.get("/scans/{scan_id}")
    def get_scan(scan_id: int, page: int = 0):
        scan = tree.scans.get(scan_id)
        if scan is None:
            raise HTTPException(404, f"unknown scan {scan_id}")
        top = max((p.intensity for p in scan.peaks), default=0.0) or 1.0
        start = page * PAGE_SIZE
        peaks = [
            {"mz": p.mz, "intensity": p.intensity, "relative": p.intensity / top}
            for p in scan.peaks[start : start + PAGE_SIZE]
        ]
        probs = probabilities_for(scan_id)
        decisions = current_decisions(selections())
        annotations = []
        for record in records_by_scan.get(scan_id, []):
            key = (record.scan_id, record.candidate_id, record.ion_config_signature)
            decision = decisions.get(key)
            annotations.append(
                {
                    "glycan_id": record.candidate_id,
                    "config": record.ion_config_signature,
                    "score_c": record.score_c,
                    "score_i": record.score_i,
                    "probability": probs.get(record.glycan_id),
                    "peak_annotations": [
                        {
                            "peak_index": a.peak_index,
                            "fragment": a.fragment_signature,
                            "theoretical_mz": a.theoretical_mz,
                            "delta": a.delta,
                        }
                        for a in record.peak_annotations
                    ],
                    "decision": None if decision is None else decision.approved,
                }
            )
        return {
            "scan_id": scan_id,
            "ms_level": scan.ms_level,
            "precursor_mz": scan.precursor_mz,
            "peak_count": len(scan.peaks),
            "page": page,
            "page_size": PAGE_SIZE,
            "peaks": peaks,
            "annotations": annotations,
        }

    @app.get("/selections")
    def get_selections():
        decisions = current_decisions(selections())
        return {
            "selections": [
                {
                    "scan_id": sel.scan_id,
                    "glycan_id": sel.candidate_id,
                    "config": sel.ion_config_signature,
                    "approved": sel.approved,
                    "reviewer": sel.reviewer,
                    "timestamp": sel.timestamp,
                }
                for sel in sorted(decisions.values(), key=lambda s: s.key)
            ]
        }

    @app.post("/decisions")
    def post_decision(body: DecisionIn):
        if body.scan_id not in tree.scans:
            raise HTTPException(404, f"unknown scan {body.scan_id}")
        known = any(
            r.candidate_id == body.glycan_id and r.ion_config_signature == body.config
            for r in records_by_scan.get(body.scan_id, [])
        )
        if not known:
            raise HTTPException(
                409, f"no annotation ({body.scan_id}, {body.glycan_id}, {body.config})"
            )
        sel = Selection(
            body.scan_id,
            body.glycan_id,
            body.config,
            body.approved,
            body.reviewer,
            time.strftime("%Y-%m-%dT%H:%M:%S"),
        )
        with write_lock:
            with open(selections_path, "a", encoding="utf-8") as fh:
                fh.write(format_selection(sel))
                fh.flush()
                os.fsync(fh.fileno())
        return {"ok": True, "timestamp": sel.timestamp}

    @app.post("/train")
    def train(body: TrainIn):
        decisions = current_decisions(selections())
        approved_keys = {k for k, sel in decisions.items() if sel.approved}
        approved = [
            r
            for r in records
            if (r.scan_id, r.candidate_id, r.ion_config_signature) in approved_keys
        ]
        precursor_mz = {
            s.scan_id: s.precursor_mz for s in tree if s.precursor_mz is not None
        }
        with write_lock:
            graph = state["graph"] or SageGraph(bucket_width=tol_da)
            graph.train(approved, precursor_mz)
            state["graph"] = graph
            out = body.model_out or state["model_path"]
            if out:
                with open(out, "w", encoding="utf-8") as fh:
                    graph.save(fh)
                    fh.flush()
                    os.fsync(fh.fileno())
        return {"trained_records": len(approved), **graph.stats()}

    @app.get("/model/stats")
    def model_stats():
        graph = state["graph"]
        if graph is None:
            return {"trained": False, "nodes": 0, "edges": 0, "levels": 0}
        return {"trained": True, **graph.stats()}

    @app.post("/filter")
    def filter_archive(body: FilterIn):
        graph = state["graph"]
        if graph is None:
            raise HTTPException(400, "no trained model")
        try:
            policy = FilterPolicy(top_k=body.top_k, min_probability=body.min_probability)
        except ValueError as exc:
            raise HTTPException(400, str(exc))
        kept = post_filter(graph, records, tree, body.tolerance, policy)
        out = body.out or archive_path + ".filtered"
        with write_lock:
            with open(out, "w", encoding="utf-8") as fh:
                for record in kept:
                    fh.write(format_record(record))
                fh.flush()
                os.fsync(fh.fileno())
        return {"kept": len(kept), "total": len(records), "out": out}

    return app
