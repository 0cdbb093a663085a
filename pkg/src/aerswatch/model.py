"""The relational count model: drug-name reference counts per quarter.

Every drug mention a subject reports is inflated by the subject's
indication and reaction tallies, so one subject on ten drugs with four
indications and two reactions contributes sixty references. Counts are
stored sparsely (absent means zero) alongside per-quarter subject totals.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .ingest import SubjectReport
from .quarters import Quarter

BUILD_VERSION = "1"

_SNAPSHOT_HEADER = ["drug_name", "year", "quarter", "count"]


class ModelError(Exception):
    """Fatal count-model failure."""


class VersionMismatchError(ModelError):
    """Stores built with different build versions cannot be merged."""


class QuarterRangeError(ModelError):
    """A subject's quarter falls outside the store's declared range."""


class SnapshotError(ModelError):
    """A snapshot file is malformed."""


@dataclass(frozen=True, slots=True)
class StoreMeta:
    version: str = BUILD_VERSION
    checksums: Mapping[str, str] = field(default_factory=dict)


@dataclass(slots=True)
class CountStore:
    """Sparse drug-name counts by quarter plus per-quarter subject totals.

    Immutable by convention once built; safe to share across threads.
    """

    counts: dict[str, dict[Quarter, int]]
    subjects_per_quarter: dict[Quarter, int]
    quarters: list[Quarter]
    meta: StoreMeta = field(default_factory=StoreMeta)

    @property
    def n_drugs(self) -> int:
        return len(self.counts)

    @property
    def total_events(self) -> int:
        return sum(c for series in self.counts.values() for c in series.values())

    @property
    def total_subjects(self) -> int:
        return sum(self.subjects_per_quarter.values())

    def events_by_quarter(self) -> dict[Quarter, int]:
        out = {q: 0 for q in self.quarters}
        for series in self.counts.values():
            for q, c in series.items():
                out[q] += c
        return out

    def events_per_quarter(self, quarter: Quarter) -> int:
        return sum(series.get(quarter, 0) for series in self.counts.values())

    def drug_total(self, name: str) -> int:
        return sum(self.counts.get(name, {}).values())

    def series(self, name: str) -> dict[Quarter, int]:
        return dict(self.counts.get(name, {}))


def subject_weight(indication_count: int, reaction_count: int) -> int:
    """Reference weight of each drug mention: indications + reactions, floor 1."""
    if indication_count < 0 or reaction_count < 0:
        raise ValueError("indication and reaction counts must be non-negative")
    return max(1, indication_count + reaction_count)


def subject_weight_multiplicative(indication_count: int, reaction_count: int) -> int:
    """Row count a literal chained left join would produce; sensitivity variant."""
    if indication_count < 0 or reaction_count < 0:
        raise ValueError("indication and reaction counts must be non-negative")
    return max(1, indication_count) * max(1, reaction_count)


def build_counts(
    batches: Iterable[Sequence[SubjectReport]],
    quarters: Sequence[Quarter] | None = None,
    multiplicative: bool = False,
    checksums: Mapping[str, str] | None = None,
) -> CountStore:
    """Accumulate SubjectReport batches into a count store.

    The result is independent of how subjects are split across batches and
    of batch order. `quarters` declares the covered range (defaults to the
    quarters actually seen); a report outside it is fatal. Accumulators are
    Python ints, so counts cannot overflow. `multiplicative` switches the
    mention weight to the chained-join variant for sensitivity analysis.
    """
    weight = subject_weight_multiplicative if multiplicative else subject_weight
    declared = set(quarters) if quarters is not None else None

    counts: dict[str, dict[Quarter, int]] = {}
    subjects: dict[Quarter, int] = {}
    for batch in batches:
        for report in batch:
            q = report.quarter
            if declared is not None and q not in declared:
                raise QuarterRangeError(
                    f"subject {report.isr} in {q} is outside the declared range"
                )
            subjects[q] = subjects.get(q, 0) + 1
            w = weight(report.indication_count, report.reaction_count)
            for name in report.drug_names:
                series = counts.get(name)
                if series is None:
                    counts[name] = {q: w}
                else:
                    series[q] = series.get(q, 0) + w

    covered = sorted(declared) if declared is not None else sorted(subjects)
    return CountStore(
        counts=counts,
        subjects_per_quarter={q: subjects.get(q, 0) for q in covered},
        quarters=covered,
        meta=StoreMeta(version=BUILD_VERSION, checksums=dict(checksums or {})),
    )


def merge_stores(a: CountStore, b: CountStore) -> CountStore:
    """Pointwise sum of two stores; quarter coverage is the sorted union."""
    if a.meta.version != b.meta.version:
        raise VersionMismatchError(
            f"cannot merge stores built with versions "
            f"{a.meta.version!r} and {b.meta.version!r}"
        )
    counts: dict[str, dict[Quarter, int]] = {
        name: dict(series) for name, series in a.counts.items()
    }
    for name, series in b.counts.items():
        target = counts.setdefault(name, {})
        for q, c in series.items():
            target[q] = target.get(q, 0) + c

    quarters = sorted(set(a.quarters) | set(b.quarters))
    subjects = {
        q: a.subjects_per_quarter.get(q, 0) + b.subjects_per_quarter.get(q, 0)
        for q in quarters
    }
    checksums = dict(a.meta.checksums)
    for key, value in b.meta.checksums.items():
        if key in checksums and checksums[key] != value:
            raise ModelError(f"conflicting source checksums for {key!r}")
        checksums[key] = value
    return CountStore(
        counts=counts,
        subjects_per_quarter=subjects,
        quarters=quarters,
        meta=StoreMeta(version=a.meta.version, checksums=checksums),
    )


def slice_store(
    store: CountStore, first: Quarter | None = None, last: Quarter | None = None
) -> CountStore:
    """Restrict a store to an inclusive quarter range."""
    keep = [
        q for q in store.quarters
        if (first is None or first <= q) and (last is None or q <= last)
    ]
    keep_set = set(keep)
    counts = {}
    for name, series in store.counts.items():
        kept = {q: c for q, c in series.items() if q in keep_set}
        if kept:
            counts[name] = kept
    return CountStore(
        counts=counts,
        subjects_per_quarter={q: store.subjects_per_quarter.get(q, 0) for q in keep},
        quarters=keep,
        meta=store.meta,
    )


# --------------------------------------------------------------------------
# Snapshots


def snapshot_meta_path(snapshot: Path) -> Path:
    return Path(snapshot).with_suffix(".meta.json")


def export_snapshot(store: CountStore, dest: Path) -> Path:
    """Write a store as a deterministic CSV snapshot plus a JSON meta file.

    Rows are sorted by drug-name bytes, then chronologically; two exports
    of the same store are byte-identical.
    """
    dest = Path(dest)
    with open(dest, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(_SNAPSHOT_HEADER)
        for name in sorted(store.counts):
            series = store.counts[name]
            for q in sorted(series):
                writer.writerow([name, q.year, q.q, series[q]])
    meta = {
        "build_version": store.meta.version,
        "quarters": [str(q) for q in store.quarters],
        "subjects_per_quarter": {str(q): n for q, n in sorted(store.subjects_per_quarter.items())},
        "total_events": store.total_events,
        "source_checksums": dict(sorted(store.meta.checksums.items())),
    }
    with open(snapshot_meta_path(dest), "w", encoding="utf-8", newline="") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")
    return dest


def import_snapshot(src: Path) -> CountStore:
    """Read a snapshot back; the inverse of export_snapshot, with validation."""
    src = Path(src)
    meta_path = snapshot_meta_path(src)
    if not src.is_file():
        raise SnapshotError(f"snapshot not found: {src}")
    if not meta_path.is_file():
        raise SnapshotError(f"snapshot meta file not found: {meta_path}")

    try:
        meta = json.loads(meta_path.read_text("utf-8"))
        version = meta["build_version"]
        quarters = [Quarter.parse(s) for s in meta["quarters"]]
        subjects = {Quarter.parse(k): int(v) for k, v in meta["subjects_per_quarter"].items()}
        declared_total = int(meta["total_events"])
        checksums = dict(meta.get("source_checksums", {}))
    except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
        raise SnapshotError(f"{meta_path}: malformed snapshot meta ({exc})") from exc

    quarter_set = set(quarters)
    counts: dict[str, dict[Quarter, int]] = {}
    total = 0
    prev_key: tuple[str, int, int] | None = None
    with open(src, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != _SNAPSHOT_HEADER:
            raise SnapshotError(f"{src}:1: bad header {header!r}")
        for row in reader:
            line = reader.line_num
            if len(row) != 4:
                raise SnapshotError(f"{src}:{line}: expected 4 columns, got {len(row)}")
            name, year_s, q_s, count_s = row
            if not (year_s.isdigit() and q_s.isdigit() and count_s.isdigit()):
                raise SnapshotError(f"{src}:{line}: non-numeric year/quarter/count")
            try:
                quarter = Quarter(int(year_s), int(q_s))
            except ValueError as exc:
                raise SnapshotError(f"{src}:{line}: {exc}") from exc
            count = int(count_s)
            if count < 1:
                raise SnapshotError(f"{src}:{line}: count must be >= 1, got {count}")
            if quarter not in quarter_set:
                raise SnapshotError(f"{src}:{line}: {quarter} not in declared quarters")
            key = (name, quarter.year, quarter.q)
            if prev_key is not None and key <= prev_key:
                raise SnapshotError(f"{src}:{line}: rows not sorted ({key} after {prev_key})")
            prev_key = key
            counts.setdefault(name, {})[quarter] = count
            total += count
    if total != declared_total:
        raise SnapshotError(
            f"{src}: total events {total} do not match meta total {declared_total}"
        )
    return CountStore(
        counts=counts,
        subjects_per_quarter={q: subjects.get(q, 0) for q in sorted(quarters)},
        quarters=sorted(quarters),
        meta=StoreMeta(version=version, checksums=checksums),
    )
