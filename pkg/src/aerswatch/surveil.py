"""Population-level trends, per-quarter distributions and outbreak alerts.

Departure scoring standardizes each quarter's count against a leave-one-out
baseline built from the drug's other active quarters (median as center,
sample sd as spread). Excluding the scored quarter keeps a mass-poisoning
quarter from inflating its own baseline and masking itself.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .model import CountStore
from .quarters import Quarter
from .stats import percentile, sample_sd

# Scoring is undefined below this many active quarters.
MIN_SCORING_QUARTERS = 4

TREND_HEADER = ["year", "quarter", "subjects", "events", "ratio",
                "subject_share", "event_share", "ref_ratio"]
ALERTS_HEADER = ["drug_name", "year", "quarter", "count",
                 "baseline_median", "baseline_sd", "score", "fold"]
BOXPLOT_HEADER = ["year", "quarter", "min", "p25", "median", "p75", "max"]
OUTLIERS_HEADER = ["drug_name", "count"]

# Reference line for the trend export: one subject to two reference events.
REFERENCE_RATIO = 0.5


class SurveilConfigError(Exception):
    """Invalid detection thresholds."""


@dataclass(frozen=True, slots=True)
class QuarterTrend:
    quarter: Quarter
    subjects: int
    events: int
    ratio: float | None  # subjects / events; None when the quarter has no events
    subject_share: float
    event_share: float


@dataclass(frozen=True, slots=True)
class Departure:
    count: int
    baseline_median: float
    baseline_sd: float
    score: float | None  # None when sd = 0 masks a real deviation
    fold_change: float


@dataclass(frozen=True, slots=True)
class Alert:
    drug_name: str
    quarter: Quarter
    count: int
    baseline_median: float
    baseline_sd: float
    departure_score: float
    fold_change: float


@dataclass(frozen=True, slots=True)
class BoxplotSummary:
    quarter: Quarter
    min: int
    p25: float
    median: float
    p75: float
    max: int
    outliers: tuple[tuple[str, int], ...]


@dataclass(frozen=True, slots=True)
class DetectionConfig:
    theta: float = 3.0
    min_count: int = 1000
    min_active_quarters: int = 4

    def __post_init__(self) -> None:
        if self.theta <= 0:
            raise SurveilConfigError(f"score threshold must be > 0, got {self.theta}")
        if self.min_count < 1:
            raise SurveilConfigError(f"minimum count must be >= 1, got {self.min_count}")
        if self.min_active_quarters < 1:
            raise SurveilConfigError(
                f"minimum active quarters must be >= 1, got {self.min_active_quarters}"
            )


def population_trend(store: CountStore) -> list[QuarterTrend]:
    """Per-quarter subject and event totals with shares of the study period."""
    events = store.events_by_quarter()
    total_subjects = sum(store.subjects_per_quarter.values())
    total_events = sum(events.values())
    out = []
    for q in store.quarters:
        s = store.subjects_per_quarter.get(q, 0)
        e = events[q]
        out.append(QuarterTrend(
            quarter=q,
            subjects=s,
            events=e,
            ratio=s / e if e > 0 else None,
            subject_share=s / total_subjects if total_subjects else 0.0,
            event_share=e / total_events if total_events else 0.0,
        ))
    return out


def quarter_departures(
    series: Mapping[Quarter, int], min_active: int = MIN_SCORING_QUARTERS
) -> dict[Quarter, Departure]:
    """Leave-one-out departure of each active quarter from the others.

    Empty below the support threshold (never scored under four active
    quarters). A zero-sd baseline leaves the score absent; the fold change
    is always defined.
    """
    active = sorted((q, c) for q, c in series.items() if c > 0)
    if len(active) < max(min_active, MIN_SCORING_QUARTERS):
        return {}
    counts = [c for _, c in active]
    out: dict[Quarter, Departure] = {}
    for i, (q, c) in enumerate(active):
        others = counts[:i] + counts[i + 1:]
        center = percentile(others, 0.5)
        spread = sample_sd(others)
        if spread > 0:
            score = (c - center) / spread
        elif c == center:
            score = 0.0  # no departure at all, whatever the spread
        else:
            score = None  # real deviation of undefined magnitude
        out[q] = Departure(
            count=c,
            baseline_median=center,
            baseline_sd=spread,
            score=score,
            fold_change=c / max(1.0, center),
        )
    return out


def departure_scores(series: Mapping[Quarter, int]) -> dict[Quarter, float | None]:
    """Score per active quarter; all scores absent below four active quarters."""
    departures = quarter_departures(series)
    return {
        q: (departures[q].score if q in departures else None)
        for q, c in sorted(series.items()) if c > 0
    }


def detect_outbreaks(
    store: CountStore, config: DetectionConfig | None = None
) -> list[Alert]:
    """Alerts for every (drug, quarter) whose departure clears the thresholds.

    Deterministic: sorted by descending score, then drug-name byte order,
    then quarter.
    """
    cfg = config if config is not None else DetectionConfig()
    alerts = []
    for name, series in store.counts.items():
        for q, dep in quarter_departures(series, cfg.min_active_quarters).items():
            if dep.score is not None and dep.score >= cfg.theta and dep.count >= cfg.min_count:
                alerts.append(Alert(
                    drug_name=name,
                    quarter=q,
                    count=dep.count,
                    baseline_median=dep.baseline_median,
                    baseline_sd=dep.baseline_sd,
                    departure_score=dep.score,
                    fold_change=dep.fold_change,
                ))
    alerts.sort(key=lambda a: (-a.departure_score, a.drug_name, a.quarter))
    return alerts


def boxplot_summary(
    store: CountStore, quarter: Quarter, max_outliers: int = 50
) -> BoxplotSummary:
    """Five-number summary of the quarter's per-drug counts plus 1.5*IQR outliers."""
    pairs = [
        (name, series[quarter])
        for name, series in store.counts.items()
        if series.get(quarter, 0) > 0
    ]
    if not pairs:
        raise ValueError(f"no drug counts in {quarter}")
    counts = sorted(c for _, c in pairs)
    p25 = percentile(counts, 0.25)
    p75 = percentile(counts, 0.75)
    fence = p75 + 1.5 * (p75 - p25)
    outliers = sorted(
        ((name, c) for name, c in pairs if c > fence),
        key=lambda t: (-t[1], t[0]),
    )[:max_outliers]
    return BoxplotSummary(
        quarter=quarter,
        min=counts[0],
        p25=p25,
        median=percentile(counts, 0.5),
        p75=p75,
        max=counts[-1],
        outliers=tuple(outliers),
    )


# --------------------------------------------------------------------------
# Export rows (plot-ready CSV shapes)


def _fmt(x: float | None) -> str:
    return "" if x is None else f"{x:.6f}"


def trend_rows(trends: list[QuarterTrend]) -> list[list]:
    rows = [list(TREND_HEADER)]
    for t in trends:
        rows.append([
            t.quarter.year, t.quarter.q, t.subjects, t.events,
            _fmt(t.ratio), _fmt(t.subject_share), _fmt(t.event_share),
            _fmt(REFERENCE_RATIO),
        ])
    return rows


def alert_rows(alerts: list[Alert]) -> list[list]:
    rows = [list(ALERTS_HEADER)]
    for a in alerts:
        rows.append([
            a.drug_name, a.quarter.year, a.quarter.q, a.count,
            _fmt(a.baseline_median), _fmt(a.baseline_sd),
            _fmt(a.departure_score), _fmt(a.fold_change),
        ])
    return rows


def boxplot_rows(box: BoxplotSummary) -> list[list]:
    return [
        list(BOXPLOT_HEADER),
        [box.quarter.year, box.quarter.q, box.min, _fmt(box.p25),
         _fmt(box.median), _fmt(box.p75), box.max],
    ]


def outlier_rows(box: BoxplotSummary) -> list[list]:
    rows = [list(OUTLIERS_HEADER)]
    rows.extend([name, count] for name, count in box.outliers)
    return rows
