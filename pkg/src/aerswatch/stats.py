"""Descriptive statistics over per-drug totals and per-drug quarterly series.

Conventions are pinned to the classic statistical-package defaults:
sample (n-1) standard deviation, bias-corrected skewness and kurtosis,
and the weighted-average percentile method with rank h = p*(n+1).
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from math import fsum, sqrt
from typing import Mapping, Sequence

from .model import CountStore
from .quarters import Quarter

METRICS = ("QSUM", "QMIN", "QMAX", "QMEDIAN", "QAVERAGE", "QSD")

MEASURES_HEADER = [
    "DRUG_NAME", "QSUM", "QMIN", "QMAX", "QMEDIAN", "QAVERAGE", "QSD", "ACTIVE_QUARTERS",
]


@dataclass(frozen=True, slots=True)
class Moments:
    """Moment statistics; fields below their n-threshold are None."""

    mean: float
    sd: float | None
    variance: float | None
    se_mean: float | None
    skewness: float | None
    kurtosis: float | None


@dataclass(frozen=True, slots=True)
class CorpusSummary:
    """Summary of the multiset of per-drug total counts."""

    n_drug_names: int
    sum: int
    mean: float
    se_mean: float | None
    sd: float | None
    variance: float | None
    skewness: float | None
    se_skewness: float | None
    kurtosis: float | None
    se_kurtosis: float | None
    range: int
    min: int
    max: int
    median: float
    mode: int
    p25: float
    p50: float
    p75: float


@dataclass(frozen=True, slots=True)
class QuarterlyMeasures:
    """Per-drug quarterly measures over active quarters (count >= 1)."""

    drug_name: str
    qsum: int
    qmin: int
    qmax: int
    qmedian: float
    qaverage: float
    qsd: float
    active_quarters: int


def percentile(values: Sequence[float], p: float) -> float:
    """Weighted-average percentile: rank h = p*(n+1) on the sorted values,
    linearly interpolated and clamped to [min, max]."""
    if not values:
        raise ValueError("percentile of an empty list")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"percentile fraction must be in [0, 1], got {p}")
    xs = sorted(values)
    n = len(xs)
    h = p * (n + 1)
    if h <= 1.0:
        return float(xs[0])
    if h >= n:
        return float(xs[-1])
    k = int(h)
    return float(xs[k - 1] + (h - k) * (xs[k] - xs[k - 1]))


def moments(values: Sequence[float]) -> Moments:
    """Mean, sample sd/variance, se of mean, and bias-corrected skewness
    and kurtosis. Degenerate cases (n below threshold, sd = 0) come back
    as None rather than raising."""
    n = len(values)
    if n == 0:
        raise ValueError("moments of an empty list")
    mean = fsum(values) / n
    if n < 2:
        return Moments(mean, None, None, None, None, None)
    variance = fsum((x - mean) ** 2 for x in values) / (n - 1)
    sd = sqrt(variance)
    se_mean = sd / sqrt(n)
    skewness = kurtosis = None
    if sd > 0:
        if n >= 3:
            z3 = fsum(((x - mean) / sd) ** 3 for x in values)
            skewness = n / ((n - 1) * (n - 2)) * z3
        if n >= 4:
            z4 = fsum(((x - mean) / sd) ** 4 for x in values)
            kurtosis = (
                n * (n + 1) / ((n - 1) * (n - 2) * (n - 3)) * z4
                - 3 * (n - 1) ** 2 / ((n - 2) * (n - 3))
            )
    return Moments(mean, sd, variance, se_mean, skewness, kurtosis)


def standard_errors(n: int) -> tuple[float, float]:
    """Standard errors of skewness and kurtosis from n alone."""
    if n < 4:
        raise ValueError(f"standard errors need n >= 4, got {n}")
    se_skewness = sqrt(6.0 * n * (n - 1) / ((n - 2) * (n + 1) * (n + 3)))
    se_kurtosis = 2.0 * se_skewness * sqrt((n * n - 1) / ((n - 3) * (n + 5)))
    return se_skewness, se_kurtosis


def sample_sd(values: Sequence[float]) -> float:
    """Sample (n-1) standard deviation; 0.0 for a single value."""
    n = len(values)
    if n == 0:
        raise ValueError("sample_sd of an empty list")
    if n == 1:
        return 0.0
    mean = fsum(values) / n
    return sqrt(fsum((x - mean) ** 2 for x in values) / (n - 1))


def _mode(values: Sequence[int]) -> int:
    counts = Counter(values)
    best = max(counts.values())
    return min(v for v, c in counts.items() if c == best)


def corpus_summary(store: CountStore) -> CorpusSummary:
    """Summary statistics over per-drug total counts (quarter-summed)."""
    totals = [sum(series.values()) for series in store.counts.values()]
    if not totals:
        raise ValueError("corpus summary of an empty store")
    n = len(totals)
    m = moments(totals)
    se_skew = se_kurt = None
    if n >= 4:
        se_skew, se_kurt = standard_errors(n)
    lo, hi = min(totals), max(totals)
    return CorpusSummary(
        n_drug_names=n,
        sum=sum(totals),
        mean=m.mean,
        se_mean=m.se_mean,
        sd=m.sd,
        variance=m.variance,
        skewness=m.skewness,
        se_skewness=se_skew,
        kurtosis=m.kurtosis,
        se_kurtosis=se_kurt,
        range=hi - lo,
        min=lo,
        max=hi,
        median=percentile(totals, 0.5),
        mode=_mode(totals),
        p25=percentile(totals, 0.25),
        p50=percentile(totals, 0.5),
        p75=percentile(totals, 0.75),
    )


def drug_quarter_measures(name: str, series: Mapping[Quarter, int]) -> QuarterlyMeasures:
    """Quarterly measures for one drug, over its active quarters only."""
    active = sorted(c for c in series.values() if c > 0)
    if not active:
        raise ValueError(f"{name!r}: no active quarters")
    n = len(active)
    qsum = sum(series.values())
    return QuarterlyMeasures(
        drug_name=name,
        qsum=qsum,
        qmin=active[0],
        qmax=active[-1],
        qmedian=percentile(active, 0.5),
        qaverage=qsum / n,
        qsd=sample_sd(active),
        active_quarters=n,
    )


_METRIC_KEYS = {
    "QSUM": lambda m: m.qsum,
    "QMAX": lambda m: m.qmax,
    "QAVERAGE": lambda m: m.qaverage,
}


def top_n(store: CountStore, n: int, metric: str = "QSUM") -> list[QuarterlyMeasures]:
    """Top drugs by a quarterly metric, ties broken by drug-name byte order."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    key = _METRIC_KEYS.get(metric.upper())
    if key is None:
        raise ValueError(f"unknown ranking metric {metric!r}; use QSUM, QMAX or QAVERAGE")
    measures = [drug_quarter_measures(name, series) for name, series in store.counts.items()]
    measures.sort(key=lambda m: (-key(m), m.drug_name))
    return measures[:n]


# --------------------------------------------------------------------------
# Serialization mirrors of the summary and measures tables


def summary_items(summary: CorpusSummary) -> list[tuple[str, int | float | None]]:
    """(statistic, value) pairs in the documented export order."""
    return [
        ("sum", summary.sum),
        ("drug_names", summary.n_drug_names),
        ("mean", summary.mean),
        ("se_mean", summary.se_mean),
        ("sd", summary.sd),
        ("variance", summary.variance),
        ("skewness", summary.skewness),
        ("se_skewness", summary.se_skewness),
        ("kurtosis", summary.kurtosis),
        ("se_kurtosis", summary.se_kurtosis),
        ("range", summary.range),
        ("min", summary.min),
        ("max", summary.max),
        ("median", summary.median),
        ("mode", summary.mode),
        ("p25", summary.p25),
        ("p50", summary.p50),
        ("p75", summary.p75),
    ]


def measures_row(m: QuarterlyMeasures) -> list:
    return [
        m.drug_name, m.qsum, m.qmin, m.qmax,
        m.qmedian, m.qaverage, m.qsd, m.active_quarters,
    ]
