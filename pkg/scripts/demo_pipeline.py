#!/usr/bin/env python3
"""End-to-end demo: synthesize a run, annotate it, train, filter.

Writes all intermediate files into a workspace directory so each stage can be
inspected (or fed to `glyms serve` / the review UI afterwards).

Usage:
    python scripts/demo_pipeline.py [--workspace DIR] [--seed N] [--noise F]
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from glyms.archive import ArchiveWriter, format_record, read_archive
from glyms.engine import AnnotationEngine, RunSettings, format_run_settings
from glyms.evaluation import generate_synthetic
from glyms.fragments import FragmentationSettings, LevelSettings
from glyms.glycans import GlycanRecord, parse_structure, write_database
from glyms.ions import ChargeCarrier, MzTolerance
from glyms.sage import FilterPolicy, SageGraph, Selection, format_selection, post_filter
from glyms.spectra import read_canonical, write_canonical

DEMO_GLYCANS = [
    ("G1", "Hex(1-4)Hex(1-4)Hex", "demo"),
    ("G2", "HexNAc(1-2)Hex(1-4)Hex", "demo"),
    ("G3", "dHex(1-3)[HexNAc(1-2)]Hex", "demo"),
    ("G4", "NeuAc(1-3)Hex(1-4)HexNAc", "demo"),
    ("G5", "Hex(1-3)[Hex(1-6)]Hex(1-4)HexNAc(1-4)HexNAc", "demo"),
]

SETTINGS = RunSettings(
    ms1_tolerance=MzTolerance(0.05, "Da"),
    msn_tolerance=MzTolerance(0.05, "Da"),
    max_charge=1,
    carriers=(ChargeCarrier("H+", 1.00728, 1),),
    exchanges=(),
    losses=(),
    derivatization="native",
    fragmentation=FragmentationSettings(default=LevelSettings(max_cleavages=1)),
    annotate_ms1=False,
)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workspace", default="demo_workspace")
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--noise", type=float, default=0.3)
    parser.add_argument("--scans", type=int, default=12)
    args = parser.parse_args()

    os.makedirs(args.workspace, exist_ok=True)
    path = lambda name: os.path.join(args.workspace, name)

    database = [
        GlycanRecord(parse_structure(enc, gid), cls) for gid, enc, cls in DEMO_GLYCANS
    ]
    with open(path("glycans.tsv"), "w") as fh:
        fh.write(write_database(database))
    with open(path("run.cfg"), "w") as fh:
        fh.write(format_run_settings(SETTINGS))

    (dataset,) = generate_synthetic(
        args.seed, 1, database, args.noise, SETTINGS, args.scans
    )
    with open(path("run.scn"), "w") as fh:
        write_canonical(dataset.tree, fh)
    print(f"generated {args.scans} MS2 scans ({len(dataset.approved)} ground-truth pairs)")

    engine = AnnotationEngine(SETTINGS, diagnostics=lambda m: print(f"  [engine] {m}"))
    with open(path("run.ann"), "w") as out, open(path("run.ann.idx"), "w") as idx:
        writer = ArchiveWriter(out, idx)
        engine.annotate_run(dataset.tree, database, writer)
    print(f"annotated: {writer.records_written} records -> {path('run.ann')}")

    tree = read_canonical(open(path("run.scn")))
    levels = {s.scan_id: s.ms_level for s in tree}
    records = read_archive(open(path("run.ann")), levels)

    # simulate the reviewer: approve exactly the generating glycans
    with open(path("run.sel"), "w") as fh:
        approved = []
        for r in records:
            ok = (r.scan_id, r.glycan_id) in dataset.approved
            fh.write(
                format_selection(
                    Selection(r.scan_id, r.candidate_id, r.ion_config_signature, ok, "demo", "-")
                )
            )
            if ok:
                approved.append(r)
    print(f"reviewed: {len(approved)} of {len(records)} records approved")

    graph = SageGraph(bucket_width=SETTINGS.ms1_tolerance.value)
    graph.train(
        approved, {s.scan_id: s.precursor_mz for s in tree if s.precursor_mz is not None}
    )
    with open(path("model.sage"), "w") as fh:
        graph.save(fh)
    print(f"trained: {graph.node_count()} nodes, {graph.edge_count()} edges -> {path('model.sage')}")

    kept = post_filter(
        graph, records, tree, SETTINGS.ms1_tolerance.value, FilterPolicy(top_k=1)
    )
    with open(path("run.filtered.ann"), "w") as fh:
        for record in kept:
            fh.write(format_record(record))
    print(f"filtered: kept {len(kept)} of {len(records)} records")

    hits = sum(1 for r in kept if (r.scan_id, r.glycan_id) in dataset.approved)
    print(f"of the kept records, {hits} match the ground truth")
    print(f"\nworkspace ready in {args.workspace}/ -- serve it with:")
    print(
        f"  glyms serve --spectra {path('run.scn')} --archive {path('run.ann')} "
        f"--selections {path('run.sel')} --model {path('model.sage')} "
        f"--settings {path('run.cfg')}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
