import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from aerswatch import (
    Quarter,
    SubjectReport,
    build_counts,
    corpus_summary,
    export_snapshot,
    import_snapshot,
    load_quarter,
    merge_stores,
    slice_store,
    subject_weight,
)
from aerswatch.model import (
    BUILD_VERSION,
    CountStore,
    QuarterRangeError,
    SnapshotError,
    StoreMeta,
    VersionMismatchError,
    subject_weight_multiplicative,
)
from aerswatch.synth import oracle_counts
from conftest import write_two_subject_quarter

Q1 = Quarter(2004, 1)
Q2 = Quarter(2004, 2)


def report(isr, names, indications=0, reactions=0, quarter=Q1):
    return SubjectReport(
        isr=str(isr), quarter=quarter, drug_names=tuple(names),
        indication_count=indications, reaction_count=reactions,
    )


# --------------------------------------------------------------------------
# subject_weight


def test_weight_adds_indications_and_reactions():
    assert subject_weight(4, 2) == 6
    assert subject_weight(1, 1) == 2


def test_weight_floors_at_one():
    assert subject_weight(0, 0) == 1


def test_weight_rejects_negatives():
    with pytest.raises(ValueError):
        subject_weight(-1, 0)


def test_multiplicative_variant():
    # The chained-join row count: 4 indications x 2 reactions = 8 per drug.
    assert subject_weight_multiplicative(4, 2) == 8
    assert subject_weight_multiplicative(0, 0) == 1
    assert subject_weight_multiplicative(0, 5) == 5


# --------------------------------------------------------------------------
# build_counts


def test_polypharmacy_subject_yields_sixty_events():
    r = report(1, [f"D{i}" for i in range(10)], indications=4, reactions=2)
    store = build_counts([[r]])
    assert store.total_events == 60
    assert store.subjects_per_quarter == {Q1: 1}


def test_two_subject_example_counts(tmp_path, schema_config):
    files = write_two_subject_quarter(tmp_path, Q1)
    reports, _ = load_quarter(files, Q1, schema_config)
    store = build_counts([reports])
    oracle = oracle_counts(tmp_path)
    assert store == oracle
    assert store.counts["X"] == {Q1: 4}
    assert store.counts["Y"] == {Q1: 3}
    assert store.subjects_per_quarter == {Q1: 2}
    assert store.total_events == 7
    assert store.events_per_quarter(Q1) == 7
    assert store.events_by_quarter() == {Q1: 7}


def test_empty_batches_build_empty_store():
    store = build_counts([])
    assert store.counts == {}
    assert store.quarters == []
    assert store.total_events == 0


def test_multiplicative_flag_changes_weights():
    r = report(1, ["A"], indications=4, reactions=2)
    assert build_counts([[r]]).counts["A"][Q1] == 6
    assert build_counts([[r]], multiplicative=True).counts["A"][Q1] == 8


def test_quarter_outside_declared_range_is_fatal():
    r = report(1, ["A"], quarter=Q2)
    with pytest.raises(QuarterRangeError):
        build_counts([[r]], quarters=[Q1])


def test_declared_quarters_pad_subject_totals():
    store = build_counts([[report(1, ["A"])]], quarters=[Q1, Q2])
    assert store.quarters == [Q1, Q2]
    assert store.subjects_per_quarter == {Q1: 1, Q2: 0}


def test_event_conservation_against_direct_formula():
    rng = random.Random(5)
    reports = [
        report(
            i,
            [f"D{rng.randrange(6)}" for _ in range(rng.randint(0, 5))],
            indications=rng.randint(0, 4),
            reactions=rng.randint(0, 2),
            quarter=Q1 if rng.random() < 0.5 else Q2,
        )
        for i in range(200)
    ]
    store = build_counts([reports])
    expected = sum(
        len(r.drug_names) * max(1, r.indication_count + r.reaction_count)
        for r in reports
    )
    assert store.total_events == expected


def test_partition_invariance_over_random_splits():
    rng = random.Random(99)
    reports = [
        report(i, [f"D{rng.randrange(8)}" for _ in range(rng.randint(1, 6))],
               rng.randint(0, 4), rng.randint(0, 2),
               quarter=Q1 if i % 2 else Q2)
        for i in range(120)
    ]
    reference = build_counts([reports])
    for seed in range(10):
        split_rng = random.Random(seed)
        shuffled = reports[:]
        split_rng.shuffle(shuffled)
        batches, batch = [], []
        for r in shuffled:
            batch.append(r)
            if split_rng.random() < 0.2:
                batches.append(batch)
                batch = []
        batches.append(batch)
        assert build_counts(batches) == reference


# --------------------------------------------------------------------------
# merge


reports_strategy = st.lists(
    st.builds(
        report,
        isr=st.integers(1, 500),
        names=st.lists(st.sampled_from(["A", "B", "C", "DRUG X"]), max_size=4),
        indications=st.integers(0, 4),
        reactions=st.integers(0, 2),
        quarter=st.sampled_from([Q1, Q2, Quarter(2005, 1)]),
    ),
    max_size=25,
)


def test_merge_with_empty_is_identity():
    store = build_counts([[report(1, ["A", "B"], 1, 1)]])
    empty = build_counts([])
    assert merge_stores(store, empty) == store
    assert merge_stores(empty, store) == store


@settings(max_examples=50)
@given(reports_strategy, reports_strategy)
def test_merge_commutes(reports_a, reports_b):
    a, b = build_counts([reports_a]), build_counts([reports_b])
    assert merge_stores(a, b) == merge_stores(b, a)


@settings(max_examples=25)
@given(reports_strategy, reports_strategy, reports_strategy)
def test_merge_associates(ra, rb, rc):
    a, b, c = (build_counts([r]) for r in (ra, rb, rc))
    left = merge_stores(merge_stores(a, b), c)
    right = merge_stores(a, merge_stores(b, c))
    assert left == right


def test_merge_rejects_version_mismatch():
    a = build_counts([[report(1, ["A"])]])
    b = CountStore(counts={}, subjects_per_quarter={}, quarters=[],
                   meta=StoreMeta(version="0-something-else"))
    with pytest.raises(VersionMismatchError):
        merge_stores(a, b)


def test_merge_of_per_quarter_builds_equals_one_pass():
    rng = random.Random(3)
    q_list = [Quarter(2004, i) for i in (1, 2, 3, 4)]
    reports = [
        report(i, [f"D{rng.randrange(5)}" for _ in range(rng.randint(1, 4))],
               rng.randint(0, 4), rng.randint(0, 2), quarter=rng.choice(q_list))
        for i in range(150)
    ]
    one_pass = build_counts([reports], quarters=q_list)
    merged = None
    for q in q_list:
        partial = build_counts([[r for r in reports if r.quarter == q]], quarters=[q])
        merged = partial if merged is None else merge_stores(merged, partial)
    assert merged == one_pass


# --------------------------------------------------------------------------
# snapshots


def small_store():
    return build_counts([[
        report(1, ["X", "Y"], 1, 2),
        report(2, ["X"], 0, 1),
        report(3, ["B,Q\"Z\"", "X"], 0, 0, quarter=Q2),
    ]])


def test_snapshot_round_trip_exact(tmp_path):
    store = small_store()
    path = export_snapshot(store, tmp_path / "counts.csv")
    assert import_snapshot(path) == store


def test_snapshot_bytes_deterministic(tmp_path):
    store = small_store()
    export_snapshot(store, tmp_path / "a.csv")
    export_snapshot(store, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.meta.json").read_bytes() == (tmp_path / "b.meta.json").read_bytes()


def test_snapshot_rows_are_sorted(tmp_path):
    path = export_snapshot(small_store(), tmp_path / "counts.csv")
    lines = path.read_text().splitlines()[1:]
    names = [line.split(",")[0] for line in lines]
    assert names == sorted(names)


def test_empty_store_snapshot_has_header_only(tmp_path):
    path = export_snapshot(build_counts([]), tmp_path / "counts.csv")
    assert path.read_text() == "drug_name,year,quarter,count\n"
    assert import_snapshot(path) == build_counts([])


def test_snapshot_meta_carries_version_and_checksums(tmp_path):
    store = build_counts([[report(1, ["A"])]], checksums={"DRUG04Q1.TXT": "sha256:00"})
    path = export_snapshot(store, tmp_path / "counts.csv")
    again = import_snapshot(path)
    assert again.meta.version == BUILD_VERSION
    assert again.meta.checksums == {"DRUG04Q1.TXT": "sha256:00"}


@pytest.mark.parametrize(
    "mangle, message",
    [
        (lambda lines: ["bogus,header"] + lines[1:], "bad header"),
        (lambda lines: lines + ["A,2004,1,notanumber"], "non-numeric"),
        (lambda lines: [lines[0]] + lines[1:][::-1], "not sorted"),
        (lambda lines: lines + ["A,2004,1,0"], "count must be >= 1"),
        (lambda lines: lines + ["A,2099,1,5"], "not in declared quarters"),
    ],
)
def test_malformed_snapshots_are_fatal(tmp_path, mangle, message):
    path = export_snapshot(small_store(), tmp_path / "counts.csv")
    lines = path.read_text().splitlines()
    path.write_text("\n".join(mangle(lines)) + "\n")
    with pytest.raises(SnapshotError) as err:
        import_snapshot(path)
    assert message in str(err.value)


def test_missing_snapshot_or_meta_is_fatal(tmp_path):
    with pytest.raises(SnapshotError):
        import_snapshot(tmp_path / "nope.csv")
    path = export_snapshot(small_store(), tmp_path / "counts.csv")
    (tmp_path / "counts.meta.json").unlink()
    with pytest.raises(SnapshotError):
        import_snapshot(path)


def test_snapshot_total_mismatch_is_fatal(tmp_path):
    path = export_snapshot(small_store(), tmp_path / "counts.csv")
    meta_path = tmp_path / "counts.meta.json"
    doc = json.loads(meta_path.read_text())
    doc["total_events"] += 1
    meta_path.write_text(json.dumps(doc))
    with pytest.raises(SnapshotError):
        import_snapshot(path)


# --------------------------------------------------------------------------
# store identities


def test_mean_identity_between_store_and_summary():
    store = small_store()
    summary = corpus_summary(store)
    assert summary.mean == pytest.approx(store.total_events / store.n_drugs, rel=1e-12)


def test_mean_identity_at_study_scale():
    # total events over drug names at the real corpus scale
    assert 432_541_994 / 344_452 == pytest.approx(1255.739534, abs=1e-5)


def test_slice_store_restricts_quarters():
    store = small_store()
    sliced = slice_store(store, first=Q2, last=Q2)
    assert sliced.quarters == [Q2]
    assert set(sliced.counts) == {'B,Q"Z"', "X"}
    assert sliced.subjects_per_quarter == {Q2: 1}
