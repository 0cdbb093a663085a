"""Tolerant stream parsing of legacy AERS quarterly ASCII tables.

The quarterly extracts are `$`-delimited text files (DEMO/DRUG/INDI/REAC),
one header line, LF or CRLF endings. Parsing never aborts on malformed
rows: every data line either becomes a row or lands in the reject log with
a reason code. Column layouts vary across release eras, so they are
resolved from a versioned schema config (a default covering the
2004Q1-2012Q2 layout ships with the package).
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator, Mapping, NamedTuple

from .quarters import Quarter, expand_two_digit_year

logger = logging.getLogger(__name__)

TABLE_KINDS = ("DEMO", "DRUG", "INDI", "REAC")

# Reject reason codes.
FIELD_COUNT = "FIELD_COUNT"
EMPTY_ISR = "EMPTY_ISR"
NON_NUMERIC_ISR = "NON_NUMERIC_ISR"
ENCODING = "ENCODING"

# Sentinel for drug names that normalize to nothing. A real name spelled
# exactly "(EMPTY)" would collide with the marker; accepted trade-off so the
# marker survives re-normalization (see normalize_drug_name).
EMPTY_NAME = "(EMPTY)"

# Fraction of data rows with an empty ISR column beyond which the schema is
# considered wrong for the file.
_EMPTY_ISR_FATAL_FRACTION = 0.5

_ASCII_UPPER = str.maketrans(
    "abcdefghijklmnopqrstuvwxyz", "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
)

_FILENAME_RE = re.compile(r"^(DEMO|DRUG|INDI|REAC)(\d{2})Q([1-4])\.TXT$", re.IGNORECASE)


class IngestError(Exception):
    """Fatal ingest failure (as opposed to per-row rejects)."""


class SchemaConfigError(IngestError):
    """The schema configuration is malformed or does not cover a quarter."""


class MissingTableError(IngestError):
    """A required input table is absent."""


class SchemaMismatchError(IngestError):
    """The resolved schema clearly does not fit the file contents."""


@dataclass(frozen=True, slots=True)
class TableSchema:
    """Column layout for one table kind in one release era."""

    kind: str
    n_fields: int
    isr_col: int
    payload_col: int | None = None
    seq_col: int | None = None
    delimiter: str = "$"
    has_header: bool = True

    def __post_init__(self) -> None:
        if self.kind not in TABLE_KINDS:
            raise SchemaConfigError(f"unknown table kind {self.kind!r}")
        if len(self.delimiter) != 1:
            raise SchemaConfigError(f"delimiter must be one character, got {self.delimiter!r}")
        cols = [c for c in (self.isr_col, self.payload_col, self.seq_col) if c is not None]
        if any(c < 0 for c in cols):
            raise SchemaConfigError(f"{self.kind}: negative column index in {cols}")
        if len(set(cols)) != len(cols):
            raise SchemaConfigError(f"{self.kind}: column indexes must be distinct, got {cols}")
        if self.n_fields < 1 or any(c >= self.n_fields for c in cols):
            raise SchemaConfigError(
                f"{self.kind}: column index out of range for {self.n_fields} fields"
            )


class RawRow(NamedTuple):
    line_number: int
    fields: tuple[str, ...]


class RejectEntry(NamedTuple):
    file: str
    line: int
    reason: str


@dataclass(slots=True)
class RejectLog:
    """Discarded input lines, one entry per line, with a reason code."""

    entries: list[RejectEntry] = field(default_factory=list)

    def add(self, file: str, line: int, reason: str) -> None:
        self.entries.append(RejectEntry(file, line, reason))

    def extend(self, other: "RejectLog") -> None:
        self.entries.extend(other.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def count(self, reason: str) -> int:
        return sum(1 for e in self.entries if e.reason == reason)

    def write_csv(self, dest: Path) -> None:
        with open(dest, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["file", "line", "reason"])
            writer.writerows(self.entries)


@dataclass(frozen=True, slots=True)
class SubjectReport:
    """One ISR: its drug mentions plus indication and reaction tallies.

    `drug_names` preserves duplicates (every DRUG row is a mention);
    `distinct_drug_names` is the deduplicated view.
    """

    isr: str
    quarter: Quarter
    drug_names: tuple[str, ...]
    indication_count: int
    reaction_count: int

    @property
    def distinct_drug_names(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.drug_names)))


def normalize_drug_name(raw: str) -> str:
    """Canonical form of a reported drug name.

    Trims, collapses whitespace runs to single spaces and uppercases ASCII
    letters only. Distinct spellings stay distinct: "ASPIRIN." is a
    different name from "ASPIRIN". Blank input maps to EMPTY_NAME.
    """
    name = " ".join(raw.split()).translate(_ASCII_UPPER)
    return name if name else EMPTY_NAME


# --------------------------------------------------------------------------
# Schema configuration


@dataclass(frozen=True, slots=True)
class _Era:
    first: Quarter
    last: Quarter | None  # None = open-ended
    schema: TableSchema

    def covers(self, quarter: Quarter) -> bool:
        return self.first <= quarter and (self.last is None or quarter <= self.last)


@dataclass(frozen=True, slots=True)
class SchemaConfig:
    """Versioned (table kind, quarter era) -> column layout mapping."""

    version: int
    eras: Mapping[str, tuple[_Era, ...]]

    def resolve(self, kind: str, quarter: Quarter) -> TableSchema:
        if kind not in self.eras:
            raise SchemaConfigError(f"no schema entries for table kind {kind!r}")
        for era in self.eras[kind]:
            if era.covers(quarter):
                return era.schema
        raise SchemaConfigError(
            f"no {kind} schema covers {quarter}; supply a schema config "
            f"(AERS_SCHEMA) for this quarter range"
        )


_PAYLOAD_KEY = {"DEMO": None, "DRUG": "drugname", "INDI": "term", "REAC": "term"}
_SEQ_KINDS = ("DRUG", "INDI")


def _era_from_json(kind: str, entry: dict, delimiter: str, has_header: bool) -> _Era:
    try:
        first = Quarter.parse(entry["from"])
        last = Quarter.parse(entry["to"]) if entry.get("to") else None
        payload_key = _PAYLOAD_KEY[kind]
        schema = TableSchema(
            kind=kind,
            n_fields=int(entry["fields"]),
            isr_col=int(entry["isr"]),
            payload_col=int(entry[payload_key]) if payload_key else None,
            seq_col=int(entry["drug_seq"]) if kind in _SEQ_KINDS and "drug_seq" in entry else None,
            delimiter=entry.get("delimiter", delimiter),
            has_header=bool(entry.get("has_header", has_header)),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise SchemaConfigError(f"bad schema era for {kind}: {entry!r} ({exc})") from exc
    if last is not None and last < first:
        raise SchemaConfigError(f"{kind} era range reversed: {first}..{last}")
    return _Era(first, last, schema)


def _config_from_json(doc: dict, source: str) -> SchemaConfig:
    try:
        version = int(doc["config_version"])
        delimiter = doc.get("delimiter", "$")
        has_header = bool(doc.get("has_header", True))
        tables = doc["tables"]
    except (KeyError, TypeError) as exc:
        raise SchemaConfigError(f"{source}: malformed schema config ({exc})") from exc
    eras: dict[str, tuple[_Era, ...]] = {}
    for kind in TABLE_KINDS:
        entries = tables.get(kind, [])
        eras[kind] = tuple(_era_from_json(kind, e, delimiter, has_header) for e in entries)
    return SchemaConfig(version=version, eras=eras)


def load_schema_config(path: str | Path | None = None) -> SchemaConfig:
    """Load a schema config file; the shipped default when `path` is None."""
    if path is None:
        text = resources.files(__package__).joinpath("schema_default.json").read_text("utf-8")
        source = "<default>"
    else:
        p = Path(path)
        if not p.is_file():
            raise SchemaConfigError(f"schema config not found: {p}")
        text = p.read_text("utf-8")
        source = str(p)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaConfigError(f"{source}: invalid JSON ({exc})") from exc
    return _config_from_json(doc, source)


# --------------------------------------------------------------------------
# Row-level parsing


def parse_table(
    stream: BinaryIO, schema: TableSchema, file_id: str = "<stream>"
) -> tuple[Iterator[RawRow], RejectLog]:
    """Stream rows out of one table file, logging bad lines instead of failing.

    Returns a lazy row iterator plus its reject log; the log is complete
    once the iterator is exhausted. I/O errors on the stream propagate
    (fatal), unlike per-row rejects. Input is treated as 8-bit
    ASCII-compatible text: non-ASCII bytes are replaced in payload fields
    and reject the row when they land in the ISR column.
    """
    rejects = RejectLog()

    def rows() -> Iterator[RawRow]:
        delim = schema.delimiter.encode("ascii")
        isr_col = schema.isr_col
        n_fields = schema.n_fields
        skip_header = schema.has_header
        lineno = 0
        for raw_line in stream:
            lineno += 1
            if skip_header:
                skip_header = False
                continue
            parts = raw_line.rstrip(b"\r\n").split(delim)
            if len(parts) != n_fields:
                rejects.add(file_id, lineno, FIELD_COUNT)
                continue
            isr = parts[isr_col].strip()
            if not isr:
                rejects.add(file_id, lineno, EMPTY_ISR)
                continue
            if not isr.isascii():
                rejects.add(file_id, lineno, ENCODING)
                continue
            if not isr.isdigit():
                rejects.add(file_id, lineno, NON_NUMERIC_ISR)
                continue
            yield RawRow(lineno, tuple(p.decode("ascii", "replace") for p in parts))

    return rows(), rejects


# --------------------------------------------------------------------------
# Quarter file sets


@dataclass(frozen=True, slots=True)
class QuarterFiles:
    """Paths of one quarter's table files. Only DRUG is mandatory."""

    drug: Path | None = None
    demo: Path | None = None
    indi: Path | None = None
    reac: Path | None = None

    def get(self, kind: str) -> Path | None:
        return getattr(self, kind.lower())

    def present(self) -> list[Path]:
        return [p for p in (self.demo, self.drug, self.indi, self.reac) if p is not None]


def quarter_filename(kind: str, quarter: Quarter) -> str:
    if kind not in TABLE_KINDS:
        raise ValueError(f"unknown table kind {kind!r}")
    return f"{kind}{quarter.yy}Q{quarter.q}.TXT"


def parse_quarter_filename(name: str) -> tuple[str, Quarter] | None:
    m = _FILENAME_RE.match(name)
    if m is None:
        return None
    kind = m.group(1).upper()
    return kind, Quarter(expand_two_digit_year(int(m.group(2))), int(m.group(3)))


def discover_quarters(directory: Path) -> dict[Quarter, QuarterFiles]:
    """Scan a directory for DEMO/DRUG/INDI/REAC quarter file sets."""
    directory = Path(directory)
    if not directory.is_dir():
        raise IngestError(f"not a directory: {directory}")
    found: dict[Quarter, dict[str, Path]] = {}
    for path in sorted(directory.iterdir()):
        parsed = parse_quarter_filename(path.name)
        if parsed is None:
            continue
        kind, quarter = parsed
        found.setdefault(quarter, {})[kind.lower()] = path
    return {q: QuarterFiles(**kinds) for q, kinds in sorted(found.items())}


def file_checksums(paths: Iterable[Path]) -> dict[str, str]:
    """sha256 of each file, keyed by file name (for snapshot provenance)."""
    sums: dict[str, str] = {}
    for path in paths:
        digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()
        sums[Path(path).name] = f"sha256:{digest}"
    return sums


# --------------------------------------------------------------------------
# Quarter loading (the joins feeding the count model)


def _parse_file(
    path: Path, schema: TableSchema, log: RejectLog
) -> list[RawRow]:
    file_id = path.name
    with open(path, "rb") as f:
        rows_iter, rejects = parse_table(f, schema, file_id)
        rows = list(rows_iter)
    log.extend(rejects)
    data_lines = len(rows) + len(rejects)
    empty = rejects.count(EMPTY_ISR)
    if data_lines > 0 and empty / data_lines > _EMPTY_ISR_FATAL_FRACTION:
        raise SchemaMismatchError(
            f"{file_id}: ISR column empty on {empty}/{data_lines} rows; "
            f"schema (isr column {schema.isr_col}) likely wrong for this file"
        )
    if data_lines > 0 and len(rejects) / data_lines > _EMPTY_ISR_FATAL_FRACTION:
        logger.warning(
            "%s: %d of %d rows rejected; check the schema config",
            file_id, len(rejects), data_lines,
        )
    return rows


def load_quarter(
    files: QuarterFiles, quarter: Quarter, config: SchemaConfig
) -> tuple[list[SubjectReport], RejectLog]:
    """Join one quarter's tables into SubjectReports.

    One report per distinct ISR in the DRUG table; ISRs seen only in DEMO
    yield reports with no drug mentions (they still count as subjects).
    Indication and reaction tallies are per-ISR row counts. The result is
    sorted by ISR and independent of file read order.
    """
    if files.drug is None:
        raise MissingTableError(f"no DRUG file for {quarter}")
    if not files.drug.is_file():
        raise MissingTableError(f"DRUG file missing: {files.drug}")

    log = RejectLog()
    demo_isrs: set[str] = set()
    mentions: dict[str, list[str]] = {}
    indications: dict[str, int] = {}
    reactions: dict[str, int] = {}

    # Fixed kind order keeps the reject log deterministic.
    for kind in TABLE_KINDS:
        path = files.get(kind)
        if path is None or not path.is_file():
            if kind != "DRUG":
                logger.warning("%s: no %s file, treating as zero rows", quarter, kind)
            continue
        schema = config.resolve(kind, quarter)
        rows = _parse_file(path, schema, log)
        if kind == "DEMO":
            for row in rows:
                demo_isrs.add(row.fields[schema.isr_col].strip())
        elif kind == "DRUG":
            col = schema.payload_col
            for row in rows:
                isr = row.fields[schema.isr_col].strip()
                name = normalize_drug_name(row.fields[col])
                bucket = mentions.get(isr)
                if bucket is None:
                    mentions[isr] = [name]
                else:
                    bucket.append(name)
        elif kind == "INDI":
            for row in rows:
                isr = row.fields[schema.isr_col].strip()
                indications[isr] = indications.get(isr, 0) + 1
        else:  # REAC
            for row in rows:
                isr = row.fields[schema.isr_col].strip()
                reactions[isr] = reactions.get(isr, 0) + 1

    subjects = set(mentions) | demo_isrs
    reports = [
        SubjectReport(
            isr=isr,
            quarter=quarter,
            drug_names=tuple(mentions.get(isr, ())),
            indication_count=indications.get(isr, 0),
            reaction_count=reactions.get(isr, 0),
        )
        for isr in sorted(subjects, key=lambda s: (int(s), s))
    ]
    return reports, log
