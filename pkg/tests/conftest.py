"""Shared fixtures and hand-rolled corpus builders.

The table writers here hardcode the legacy column layout (independent of
the package's schema config) so tests cross-check the implementation
against a second spelling of the file format.
"""
from __future__ import annotations

from pathlib import Path

import pytest

from aerswatch import Quarter, QuarterFiles, load_schema_config

# Legacy layout: (field count, column positions).
FIELDS = {"DEMO": 23, "DRUG": 12, "INDI": 3, "REAC": 2}
ISR_COL = 0
DRUG_SEQ_COL = 1
DRUGNAME_COL = 3
INDI_SEQ_COL = 1
INDI_TERM_COL = 2
REAC_TERM_COL = 1


def table_text(kind: str, rows: list[dict[int, str]]) -> str:
    n = FIELDS[kind]
    lines = ["$".join(f"H{i}" for i in range(n))]
    for row in rows:
        fields = [""] * n
        for col, value in row.items():
            fields[col] = str(value)
        lines.append("$".join(fields))
    return "\n".join(lines) + "\n"


def demo_row(isr) -> dict[int, str]:
    return {ISR_COL: str(isr)}


def drug_row(isr, name, seq=1) -> dict[int, str]:
    return {ISR_COL: str(isr), DRUG_SEQ_COL: str(seq), DRUGNAME_COL: name}


def indi_row(isr, term="INDICATION 0001", seq=1) -> dict[int, str]:
    return {ISR_COL: str(isr), INDI_SEQ_COL: str(seq), INDI_TERM_COL: term}


def reac_row(isr, term="REACTION 0001") -> dict[int, str]:
    return {ISR_COL: str(isr), REAC_TERM_COL: term}


def write_quarter(
    directory: Path,
    quarter: Quarter,
    demo: list[dict[int, str]] | None = None,
    drug: list[dict[int, str]] | None = None,
    indi: list[dict[int, str]] | None = None,
    reac: list[dict[int, str]] | None = None,
) -> QuarterFiles:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    yy = f"{quarter.year % 100:02d}"
    paths = {}
    for kind, rows in (("DEMO", demo), ("DRUG", drug), ("INDI", indi), ("REAC", reac)):
        if rows is None:
            paths[kind.lower()] = None
            continue
        path = directory / f"{kind}{yy}Q{quarter.q}.TXT"
        path.write_text(table_text(kind, rows), encoding="ascii", newline="")
        paths[kind.lower()] = path
    return QuarterFiles(**paths)


def write_two_subject_quarter(directory: Path, quarter: Quarter) -> QuarterFiles:
    """Subject A {X, Y; I=1, R=2}, subject B {X; I=0, R=1}.

    Hand-checked counts: weight(A) = 3, weight(B) = 1, so X = 3 + 1 = 4,
    Y = 3; subjects = 2; total events = 7.
    """
    return write_quarter(
        directory,
        quarter,
        demo=[demo_row(1), demo_row(2)],
        drug=[drug_row(1, "X", 1), drug_row(1, "Y", 2), drug_row(2, "X", 1)],
        indi=[indi_row(1)],
        reac=[reac_row(1), reac_row(1), reac_row(2)],
    )


@pytest.fixture(scope="session")
def schema_config():
    return load_schema_config()
