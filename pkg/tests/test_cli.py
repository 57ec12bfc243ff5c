import os

import pytest

from glyms.cli import main
from glyms.archive import read_archive
from glyms.engine import RunSettings, format_run_settings
from glyms.evaluation import generate_synthetic
from glyms.fragments import FragmentationSettings, LevelSettings
from glyms.glycans import write_database
from glyms.ions import ChargeCarrier, MzTolerance
from glyms.sage import SageGraph, Selection, format_selection
from glyms.spectra import read_canonical, write_canonical

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


@pytest.fixture
def workspace(tmp_path, small_db):
    db_path = tmp_path / "glycans.tsv"
    db_path.write_text(write_database(small_db))
    settings_path = tmp_path / "run.cfg"
    settings_path.write_text(format_run_settings(SETTINGS))
    (ds,) = generate_synthetic(5, 1, small_db, 0.0, SETTINGS, 6)
    spectra_path = tmp_path / "run.scn"
    with open(spectra_path, "w") as fh:
        write_canonical(ds.tree, fh)
    return {
        "dir": tmp_path,
        "db": str(db_path),
        "settings": str(settings_path),
        "spectra": str(spectra_path),
        "dataset": ds,
    }


def test_full_pipeline(workspace, capsys):
    w = workspace
    archive = str(w["dir"] / "run.ann")
    assert (
        main(
            [
                "annotate",
                "--spectra", w["spectra"],
                "--db", w["db"],
                "--settings", w["settings"],
                "--out", archive,
            ]
        )
        == 0
    )
    assert os.path.exists(archive) and os.path.exists(archive + ".idx")
    tree = read_canonical(open(w["spectra"]))
    records = read_archive(open(archive), {s.scan_id: s.ms_level for s in tree})
    assert records

    # approve the ground truth annotations
    selections = str(w["dir"] / "run.sel")
    with open(selections, "w") as fh:
        for r in records:
            approved = (r.scan_id, r.glycan_id) in w["dataset"].approved
            fh.write(
                format_selection(
                    Selection(r.scan_id, r.candidate_id, r.ion_config_signature, approved)
                )
            )

    model = str(w["dir"] / "model.sage")
    assert (
        main(
            [
                "train",
                "--selections", selections,
                "--archive", archive,
                "--spectra", w["spectra"],
                "--settings", w["settings"],
                "--model-out", model,
            ]
        )
        == 0
    )
    graph = SageGraph.load(open(model))
    assert graph.node_count() > 0 and graph.edge_count() > 0

    capsys.readouterr()
    assert (
        main(
            [
                "classify",
                "--model", model,
                "--spectra", w["spectra"],
                "--db", w["db"],
                "--settings", w["settings"],
                "--top-k", "1",
            ]
        )
        == 0
    )
    out = capsys.readouterr().out
    predictions = {
        (int(line.split("\t")[0]), line.split("\t")[1]) for line in out.splitlines()
    }
    assert predictions
    # trained on its own approvals, the model reproduces the ground truth
    assert predictions == set(w["dataset"].approved)

    filtered = str(w["dir"] / "run.filtered.ann")
    assert (
        main(
            [
                "filter",
                "--model", model,
                "--archive", archive,
                "--spectra", w["spectra"],
                "--out", filtered,
                "--top-k", "1",
                "--tolerance", "0.05",
            ]
        )
        == 0
    )
    kept = read_archive(open(filtered), {s.scan_id: s.ms_level for s in tree})
    assert 0 < len(kept) <= len(records)


def test_evaluate_command(workspace, capsys):
    w = workspace
    csv = str(w["dir"] / "report.csv")
    code = main(
        [
            "evaluate",
            "--db", w["db"],
            "--settings", w["settings"],
            "--folds", "3",
            "--scans", "5",
            "--seed", "2",
            "--csv", csv,
        ]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "accuracy" in out and "coverage" in out
    assert open(csv).readline().strip() == "fold,accuracy,coverage"


def test_generate_command(workspace):
    w = workspace
    out_dir = str(w["dir"] / "generated")
    code = main(
        [
            "generate",
            "--db", w["db"],
            "--settings", w["settings"],
            "--out-dir", out_dir,
            "--n-datasets", "2",
            "--scans", "4",
            "--seed", "9",
        ]
    )
    assert code == 0
    assert sorted(os.listdir(out_dir)) == [
        "dataset0.scn", "dataset0.sel", "dataset1.scn", "dataset1.sel",
    ]
    tree = read_canonical(open(os.path.join(out_dir, "dataset0.scn")))
    assert sum(1 for s in tree if s.ms_level == 2) == 4


def test_exit_code_input_error(workspace, capsys):
    code = main(
        [
            "annotate",
            "--spectra", "/nonexistent.scn",
            "--db", workspace["db"],
            "--out", str(workspace["dir"] / "x.ann"),
        ]
    )
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_exit_code_malformed_input(workspace, capsys):
    bad = workspace["dir"] / "bad.scn"
    bad.write_text("S 1 1\n")  # truncated
    code = main(
        [
            "annotate",
            "--spectra", str(bad),
            "--db", workspace["db"],
            "--out", str(workspace["dir"] / "x.ann"),
        ]
    )
    assert code == 1


def test_exit_code_bad_usage(capsys):
    assert main(["annotate"]) == 1  # missing required arguments
    assert main(["no-such-command"]) == 1


def test_version_flag(capsys):
    assert main(["--version"]) == 0
