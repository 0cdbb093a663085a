"""Calendar quarters: the time axis shared by every series in the package."""
from __future__ import annotations

import re
from dataclasses import dataclass

_QUARTER_RE = re.compile(r"^(\d{4})Q([1-4])$")


@dataclass(frozen=True, order=True, slots=True)
class Quarter:
    """A calendar quarter such as 2004Q1. Ordered chronologically."""

    year: int
    q: int

    def __post_init__(self) -> None:
        if not isinstance(self.q, int) or not 1 <= self.q <= 4:
            raise ValueError(f"quarter index must be 1..4, got {self.q!r}")
        if not isinstance(self.year, int) or self.year < 1:
            raise ValueError(f"year must be a positive integer, got {self.year!r}")

    @classmethod
    def parse(cls, text: str) -> "Quarter":
        """Parse the YYYYQn form used everywhere (e.g. '2008Q1')."""
        m = _QUARTER_RE.match(text.strip().upper())
        if m is None:
            raise ValueError(f"bad quarter {text!r}: expected YYYYQn, e.g. 2008Q1")
        return cls(int(m.group(1)), int(m.group(2)))

    def __str__(self) -> str:
        return f"{self.year}Q{self.q}"

    @property
    def yy(self) -> str:
        """Two-digit year used in legacy file names (DRUG04Q1.TXT)."""
        return f"{self.year % 100:02d}"

    def next(self) -> "Quarter":
        if self.q == 4:
            return Quarter(self.year + 1, 1)
        return Quarter(self.year, self.q + 1)


def quarter_range(first: Quarter, last: Quarter) -> list[Quarter]:
    """Inclusive chronological list of quarters from `first` to `last`."""
    if last < first:
        raise ValueError(f"quarter range reversed: {first} > {last}")
    out = [first]
    while out[-1] < last:
        out.append(out[-1].next())
    return out


def expand_two_digit_year(yy: int) -> int:
    """Map a two-digit file-name year to a full year (04 -> 2004, 99 -> 1999)."""
    return 2000 + yy if yy < 69 else 1900 + yy
