import io

import pytest

from glyms.engine import RunSettings
from glyms.evaluation import (
    BaselineClassifier,
    annotate_dataset,
    evaluate,
    features_by_scan,
    generate_synthetic,
    leave_one_out,
    report_csv,
    report_text,
)
from glyms.fragments import FragmentationSettings, LevelSettings
from glyms.ions import ChargeCarrier, MzTolerance
from glyms.spectra import write_canonical

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


def test_evaluate_set_arithmetic():
    predicted = [(2, "G1"), (3, "G2"), (4, "G9")]
    approved = [(2, "G1"), (3, "G2"), (5, "G3"), (6, "G4")]
    report = evaluate(predicted, approved)
    assert report.accuracy == pytest.approx(2 / 3, abs=1e-12)
    assert report.coverage == pytest.approx(2 / 4, abs=1e-12)
    assert report.predicted_count == 3 and report.approved_count == 4


def test_evaluate_empty_prediction_has_no_accuracy():
    report = evaluate([], [(2, "G1")])
    assert report.accuracy is None
    assert report.coverage == 0.0


def test_generate_synthetic_deterministic(small_db):
    a = generate_synthetic(7, 2, small_db, 0.5, SETTINGS, 6)
    b = generate_synthetic(7, 2, small_db, 0.5, SETTINGS, 6)
    outs = []
    for datasets in (a, b):
        buf = io.StringIO()
        for ds in datasets:
            write_canonical(ds.tree, buf)
        outs.append(buf.getvalue())
    assert outs[0] == outs[1]
    assert [ds.approved for ds in a] == [ds.approved for ds in b]
    # a different seed changes the data
    c = generate_synthetic(8, 2, small_db, 0.5, SETTINGS, 6)
    buf = io.StringIO()
    for ds in c:
        write_canonical(ds.tree, buf)
    assert buf.getvalue() != outs[0]


def test_generate_synthetic_shape(small_db):
    (ds,) = generate_synthetic(1, 1, small_db, 0.0, SETTINGS, 5)
    assert len(ds.approved) <= 5  # one key per scan (glycans may repeat)
    ms2 = [s for s in ds.tree if s.ms_level == 2]
    assert len(ms2) == 5
    for scan in ms2:
        assert scan.precursor_charge is None
        assert scan.peaks


def test_generate_rejects_empty_database():
    with pytest.raises(ValueError):
        generate_synthetic(1, 1, [], 0.0, SETTINGS)


def test_noise_free_completeness(small_db):
    """Every ground-truth annotation is rediscovered by the engine at noise 0."""
    (ds,) = generate_synthetic(3, 1, small_db, 0.0, SETTINGS, 8)
    records = annotate_dataset(ds, small_db, SETTINGS)
    found = {(r.scan_id, r.glycan_id) for r in records if r.ms_level >= 2}
    assert ds.approved <= found


def test_features_by_scan(small_db):
    (ds,) = generate_synthetic(3, 1, small_db, 0.0, SETTINGS, 4)
    records = annotate_dataset(ds, small_db, SETTINGS)
    features = features_by_scan(records, ds.tree)
    ms2_ids = {s.scan_id for s in ds.tree if s.ms_level == 2}
    assert set(features) <= ms2_ids
    for feats in features.values():
        assert feats
        assert all(f.level >= 1 for f in feats)


def test_leave_one_out_self_consistency(small_db):
    datasets = generate_synthetic(11, 4, small_db, 0.0, SETTINGS, 8)
    report = leave_one_out(datasets, small_db, SETTINGS, k=1)
    assert report.fold_count == 4
    assert report.accuracy is not None and report.accuracy >= 0.99
    assert report.coverage >= 0.99
    assert report.annotate_ms > 0 and report.train_ms > 0


def test_leave_one_out_needs_two_folds(small_db):
    datasets = generate_synthetic(1, 1, small_db, 0.0, SETTINGS, 3)
    with pytest.raises(ValueError):
        leave_one_out(datasets, small_db, SETTINGS)


def test_baseline_classifier_counts():
    clf = BaselineClassifier()
    clf.train(
        [
            ("G1", ["F1", "F3"]),
            ("G1", ["F1"]),
            ("G2", ["F3"]),
        ]
    )
    ranked = clf.classify(["F1", "F3"])
    assert [g for g, _ in ranked] == ["G1", "G2"]
    # oracle: P(G1) = 2/3 * (2+1)/(2+2) * (1+1)/(2+2)
    assert ranked[0][1] == pytest.approx((2 / 3) * (3 / 4) * (2 / 4), abs=1e-12)
    assert ranked[1][1] == pytest.approx((1 / 3) * (1 / 3) * (2 / 3), abs=1e-12)
    assert clf.classify(["F1", "F3"], k=1) == ranked[:1]


def test_baseline_agrees_with_graph_on_easy_data(small_db):
    datasets = generate_synthetic(21, 3, small_db, 0.0, SETTINGS, 8)
    annotated = [annotate_dataset(ds, small_db, SETTINGS) for ds in datasets]
    clf = BaselineClassifier()
    for ds, records in zip(datasets[:-1], annotated[:-1]):
        for scan_id, feats in features_by_scan(records, ds.tree).items():
            truth = [g for s, g in ds.approved if s == scan_id]
            if truth:
                clf.train([(truth[0], [f.signature for f in feats])])
    held, held_records = datasets[-1], annotated[-1]
    hits = total = 0
    for scan_id, feats in features_by_scan(held_records, held.tree).items():
        ranked = clf.classify([f.signature for f in feats], k=1)
        truth = {g for s, g in held.approved if s == scan_id}
        if ranked and truth:
            total += 1
            hits += ranked[0][0] in truth
    assert total > 0
    assert hits / total >= 0.75


def test_report_rendering():
    from glyms.evaluation import EvaluationReport

    report = EvaluationReport(0.9, 0.8, 2, ((1.0, 0.75), (None, 0.85)), 1.0, 2.0)
    text = report_text(report)
    assert "accuracy  0.9000" in text
    assert "fold 1: accuracy=- coverage=0.8500" in text
    csv = report_csv(report)
    assert csv.splitlines()[0] == "fold,accuracy,coverage"
    assert csv.splitlines()[2] == "1,,0.85"
