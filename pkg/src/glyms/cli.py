"""Command-line entry points.

Every subcommand is a thin composition of module operations: annotate,
train, classify, filter, evaluate, generate, serve.  Diagnostics go to
stderr; data goes to files or stdout.  Exit codes: 0 success, 1 input
error, 2 internal error.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import __version__
from .archive import ArchiveWriter, read_archive
from .elements import ConfigError
from .engine import AnnotationEngine, RunSettings, parse_run_settings
from .evaluation import (
    generate_synthetic,
    leave_one_out,
    report_csv,
    report_text,
)
from .glycans import DatabaseError, read_database
from .sage import (
    FilterPolicy,
    ModelError,
    SageGraph,
    SmoothingConfig,
    current_decisions,
    parse_selections,
    post_filter,
)
from .spectra import (
    SpectraFormatError,
    read_canonical,
    read_mzxml_subset,
    write_canonical,
)

INPUT_ERRORS = (
    ConfigError,
    DatabaseError,
    ModelError,
    SpectraFormatError,
    FileNotFoundError,
    ValueError,
)


def default_config_dir() -> str:
    return os.environ.get("GLYC_HOME", os.path.expanduser("~/.glyms"))


def _load_spectra(path: str):
    if path.endswith((".mzxml", ".mzXML", ".xml")):
        with open(path, "rb") as fh:
            return read_mzxml_subset(fh)
    with open(path, encoding="utf-8") as fh:
        return read_canonical(fh)


def _load_settings(path: str | None) -> RunSettings:
    if path is None:
        return RunSettings()
    with open(path, encoding="utf-8") as fh:
        return parse_run_settings(fh)


def _load_model(path: str) -> SageGraph:
    with open(path, encoding="utf-8") as fh:
        return SageGraph.load(fh)


def _tol_da(settings: RunSettings) -> float:
    tol = settings.ms1_tolerance
    return tol.value if tol.unit == "Da" else 0.5


def cmd_annotate(args) -> int:
    tree = _load_spectra(args.spectra)
    with open(args.db, encoding="utf-8") as fh:
        database = read_database(
            fh, on_error=lambda n, m: print(f"db record {n}: {m}", file=sys.stderr)
        )
    settings = _load_settings(args.settings)
    engine = AnnotationEngine(
        settings, diagnostics=lambda msg: print(msg, file=sys.stderr)
    )
    with open(args.out, "w", encoding="utf-8") as out, open(
        args.out + ".idx", "w", encoding="utf-8"
    ) as idx:
        writer = ArchiveWriter(out, idx)
        engine.annotate_run(tree, database, writer)
    print(f"{writer.records_written} records -> {args.out}", file=sys.stderr)
    return 0


def cmd_train(args) -> int:
    tree = _load_spectra(args.spectra)
    with open(args.archive, encoding="utf-8") as fh:
        records = read_archive(fh, {s.scan_id: s.ms_level for s in tree})
    with open(args.selections, encoding="utf-8") as fh:
        decisions = current_decisions(parse_selections(fh))
    approved_keys = {k for k, sel in decisions.items() if sel.approved}
    approved = [
        r
        for r in records
        if (r.scan_id, r.candidate_id, r.ion_config_signature) in approved_keys
    ]
    if args.model_in:
        graph = _load_model(args.model_in)
    else:
        settings = _load_settings(args.settings)
        graph = SageGraph(bucket_width=_tol_da(settings))
    precursor_mz = {
        s.scan_id: s.precursor_mz for s in tree if s.precursor_mz is not None
    }
    graph.train(approved, precursor_mz)
    with open(args.model_out, "w", encoding="utf-8") as fh:
        graph.save(fh)
    print(
        f"trained on {len(approved)} approved records; "
        f"{graph.node_count()} nodes, {graph.edge_count()} edges -> {args.model_out}",
        file=sys.stderr,
    )
    return 0


def _smoothing(args) -> SmoothingConfig:
    if getattr(args, "m_estimate", None):
        return SmoothingConfig(fixed_floor=None, m=args.m_estimate, prior=args.prior)
    return SmoothingConfig(fixed_floor=args.floor)


def cmd_classify(args) -> int:
    graph = _load_model(args.model)
    tree = _load_spectra(args.spectra)
    from .evaluation import annotate_dataset, features_by_scan, SyntheticDataset

    with open(args.db, encoding="utf-8") as fh:
        database = read_database(fh)
    settings = _load_settings(args.settings)
    dataset = SyntheticDataset("input", tree, frozenset())
    records = annotate_dataset(dataset, database, settings)
    smoothing = _smoothing(args)
    for scan_id, features in sorted(features_by_scan(records, tree).items()):
        scan = tree.scans[scan_id]
        ranked = graph.classify(
            scan.precursor_mz, features, _tol_da(settings), k=args.top_k, smoothing=smoothing
        )
        for glycan, prob in ranked:
            print(f"{scan_id}\t{glycan}\t{prob!r}")
    return 0


def cmd_filter(args) -> int:
    graph = _load_model(args.model)
    tree = _load_spectra(args.spectra)
    with open(args.archive, encoding="utf-8") as fh:
        records = read_archive(fh, {s.scan_id: s.ms_level for s in tree})
    policy = FilterPolicy(top_k=args.top_k, min_probability=args.min_probability)
    kept = post_filter(graph, records, tree, args.tolerance, policy, _smoothing(args))
    from .archive import format_record

    with open(args.out, "w", encoding="utf-8") as out:
        for record in kept:
            out.write(format_record(record))
    print(f"kept {len(kept)} of {len(records)} records -> {args.out}", file=sys.stderr)
    return 0


def cmd_evaluate(args) -> int:
    with open(args.db, encoding="utf-8") as fh:
        database = read_database(fh)
    settings = _load_settings(args.settings)
    datasets = generate_synthetic(
        args.seed, args.folds, database, args.noise, settings, args.scans
    )
    report = leave_one_out(
        datasets,
        database,
        settings,
        k=args.top_k,
        warn=lambda msg: print(msg, file=sys.stderr),
    )
    sys.stdout.write(report_text(report))
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(report_csv(report))
    return 0


def cmd_generate(args) -> int:
    with open(args.db, encoding="utf-8") as fh:
        database = read_database(fh)
    settings = _load_settings(args.settings)
    datasets = generate_synthetic(
        args.seed, args.n_datasets, database, args.noise, settings, args.scans
    )
    from .sage import Selection, format_selection

    for i, ds in enumerate(datasets):
        spectra_path = os.path.join(args.out_dir, f"dataset{i}.scn")
        truth_path = os.path.join(args.out_dir, f"dataset{i}.sel")
        os.makedirs(args.out_dir, exist_ok=True)
        with open(spectra_path, "w", encoding="utf-8") as fh:
            write_canonical(ds.tree, fh)
        with open(truth_path, "w", encoding="utf-8") as fh:
            for scan_id, glycan in sorted(ds.approved):
                fh.write(format_selection(Selection(scan_id, glycan, "*", True, "synthetic", "0")))
        print(f"wrote {spectra_path} and {truth_path}", file=sys.stderr)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.spectra, args.archive, args.selections, args.model, args.db, args.settings)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="glyms", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("annotate", help="annotate an MSn run against a glycan database")
    p.add_argument("--spectra", required=True)
    p.add_argument("--db", required=True)
    p.add_argument("--settings")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("train", help="train the selection model from approved annotations")
    p.add_argument("--selections", required=True)
    p.add_argument("--archive", required=True)
    p.add_argument("--spectra", required=True)
    p.add_argument("--model-in")
    p.add_argument("--model-out", required=True)
    p.add_argument("--settings")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", help="de novo annotation with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--spectra", required=True)
    p.add_argument("--db", required=True)
    p.add_argument("--settings")
    p.add_argument("--top-k", type=int, default=None, dest="top_k")
    p.add_argument("--floor", type=float, default=0.1)
    p.add_argument("--m-estimate", type=float, default=None, dest="m_estimate")
    p.add_argument("--prior", type=float, default=0.1)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("filter", help="post-filter an archive with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--archive", required=True)
    p.add_argument("--spectra", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--top-k", type=int, default=None, dest="top_k")
    p.add_argument("--min-probability", type=float, default=None, dest="min_probability")
    p.add_argument("--tolerance", type=float, default=0.5)
    p.add_argument("--floor", type=float, default=0.1)
    p.add_argument("--m-estimate", type=float, default=None, dest="m_estimate")
    p.add_argument("--prior", type=float, default=0.1)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("evaluate", help="leave-one-out evaluation on synthetic data")
    p.add_argument("--db", required=True)
    p.add_argument("--settings")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--scans", type=int, default=20)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--top-k", type=int, default=1, dest="top_k")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("generate", help="write synthetic spectra with ground truth")
    p.add_argument("--db", required=True)
    p.add_argument("--settings")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--n-datasets", type=int, default=1)
    p.add_argument("--scans", type=int, default=20)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--noise", type=float, default=0.0)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("serve", help="run the curation HTTP service")
    p.add_argument("--spectra", required=True)
    p.add_argument("--archive", required=True)
    p.add_argument("--selections", required=True)
    p.add_argument("--model")
    p.add_argument("--db")
    p.add_argument("--settings")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8640)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # internal failure
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
