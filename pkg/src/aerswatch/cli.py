"""Command-line front end: ingest corpora, export every table and plot
dataset, run outbreak detection, and drive the synthetic test bed.

Exit codes: 0 success, 1 runtime failure, 2 usage error. Data goes to
--out (or stdout); progress and diagnostics go to stderr only.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import ingest as ing
from . import model, render, stats, surveil, synth
from .quarters import Quarter, quarter_range

logger = logging.getLogger(__name__)

SNAPSHOT_NAME = "counts.csv"
REJECTS_NAME = "rejects.csv"

_INGEST_WORKERS = 4


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def _write_rows(rows, dest: Path | None) -> None:
    if dest is None:
        csv.writer(sys.stdout, lineterminator="\n").writerows(rows)
    else:
        with open(dest, "w", encoding="utf-8", newline="") as f:
            csv.writer(f, lineterminator="\n").writerows(rows)


def _write_text(text: str, dest: Path | None) -> None:
    if dest is None:
        sys.stdout.write(text)
    else:
        dest.write_text(text, encoding="utf-8")


def _write_json(doc, dest: Path | None) -> None:
    _write_text(json.dumps(doc, indent=2) + "\n", dest)


def _snapshot_path(path: Path) -> Path:
    path = Path(path)
    return path / SNAPSHOT_NAME if path.is_dir() else path


def _load_store(args) -> model.CountStore:
    store = model.import_snapshot(_snapshot_path(args.src))
    first = getattr(args, "quarter_from", None)
    last = getattr(args, "quarter_to", None)
    if first or last:
        store = model.slice_store(store, first, last)
    return store


def _schema_config() -> ing.SchemaConfig:
    return ing.load_schema_config(os.environ.get("AERS_SCHEMA"))


# --------------------------------------------------------------------------
# Subcommands


def _cmd_ingest(args) -> int:
    config = _schema_config()
    quarters = ing.discover_quarters(Path(args.src))
    quarters = {
        q: files for q, files in quarters.items()
        if (args.quarter_from is None or args.quarter_from <= q)
        and (args.quarter_to is None or q <= args.quarter_to)
    }
    if not quarters:
        print(f"error: no quarter file sets found in {args.src}", file=sys.stderr)
        return 1
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    def load_one(item):
        quarter, files = item
        logger.info("loading %s", quarter)
        reports, rejects = ing.load_quarter(files, quarter, config)
        partial = model.build_counts(
            [reports], quarters=[quarter],
            multiplicative=args.multiplicative,
            checksums=ing.file_checksums(files.present()),
        )
        return quarter, partial, rejects

    ordered = sorted(quarters.items())
    with ThreadPoolExecutor(max_workers=min(_INGEST_WORKERS, len(ordered))) as pool:
        results = {q: (partial, rejects) for q, partial, rejects in pool.map(load_one, ordered)}

    store: model.CountStore | None = None
    log = ing.RejectLog()
    for q, _ in ordered:
        partial, rejects = results[q]
        store = partial if store is None else model.merge_stores(store, partial)
        log.extend(rejects)

    model.export_snapshot(store, out_dir / SNAPSHOT_NAME)
    log.write_csv(out_dir / REJECTS_NAME)
    logger.info(
        "ingested %d quarters: %d drug names, %d subjects, %d events, %d rejects",
        len(ordered), store.n_drugs, store.total_subjects, store.total_events, len(log),
    )
    return 0


def _cmd_summarize(args) -> int:
    summary = stats.corpus_summary(_load_store(args))
    items = stats.summary_items(summary)
    dest = Path(args.out) if args.out else None
    if args.format == "json":
        _write_json(dict(items), dest)
    else:
        rows = [["statistic", "value"]] + [[k, _cell(v)] for k, v in items]
        _write_rows(rows, dest)
    return 0


def _cmd_top(args) -> int:
    if args.n < 1:
        print("error: --n must be >= 1", file=sys.stderr)
        return 2
    measures = stats.top_n(_load_store(args), args.n, args.metric)
    dest = Path(args.out) if args.out else None
    if args.format == "json":
        _write_json([dataclasses.asdict(m) for m in measures], dest)
    else:
        rows = [list(stats.MEASURES_HEADER)]
        rows += [[_cell(v) for v in stats.measures_row(m)] for m in measures]
        _write_rows(rows, dest)
    return 0


def _cmd_series(args) -> int:
    store = _load_store(args)
    name = ing.normalize_drug_name(args.drug)
    if name not in store.counts:
        print(f"error: drug name not in store: {name}", file=sys.stderr)
        return 1
    series = store.counts[name]
    dest = Path(args.out) if args.out else None
    if args.format == "json":
        _write_json(
            {"drug_name": name,
             "series": [{"quarter": str(q), "count": series.get(q, 0)} for q in store.quarters]},
            dest,
        )
    else:
        rows = [["year", "quarter", "count"]]
        rows += [[q.year, q.q, series.get(q, 0)] for q in store.quarters]
        _write_rows(rows, dest)
    return 0


def _cmd_trend(args) -> int:
    trends = surveil.population_trend(_load_store(args))
    dest = Path(args.out) if args.out else None
    if args.render and dest is None:
        print("error: --render requires --out", file=sys.stderr)
        return 2
    if args.format == "json":
        _write_json(
            [
                {"quarter": str(t.quarter), "subjects": t.subjects, "events": t.events,
                 "ratio": t.ratio, "subject_share": t.subject_share,
                 "event_share": t.event_share, "ref_ratio": surveil.REFERENCE_RATIO}
                for t in trends
            ],
            dest,
        )
    else:
        _write_rows(surveil.trend_rows(trends), dest)
    if args.render:
        dest.with_suffix(".svg").write_text(render.trend_svg(trends), encoding="utf-8")
    return 0


def _cmd_boxplot(args) -> int:
    store = _load_store(args)
    box = surveil.boxplot_summary(store, args.quarter)
    out = Path(args.out)
    if args.format == "json":
        _write_json(
            {"quarter": str(box.quarter), "min": box.min, "p25": box.p25,
             "median": box.median, "p75": box.p75, "max": box.max,
             "outliers": [{"drug_name": n, "count": c} for n, c in box.outliers]},
            out,
        )
    else:
        _write_rows(surveil.boxplot_rows(box), out)
        _write_rows(surveil.outlier_rows(box), out.with_suffix(".outliers.csv"))
    if args.render:
        out.with_suffix(".svg").write_text(render.boxplot_svg(box), encoding="utf-8")
    return 0


def _cmd_detect(args) -> int:
    try:
        config = surveil.DetectionConfig(theta=args.theta, min_count=args.min_count)
    except surveil.SurveilConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    alerts = surveil.detect_outbreaks(_load_store(args), config)
    dest = Path(args.out) if args.out else None
    if args.format == "json":
        _write_json(
            [
                {"drug_name": a.drug_name, "quarter": str(a.quarter), "count": a.count,
                 "baseline_median": a.baseline_median, "baseline_sd": a.baseline_sd,
                 "score": a.departure_score, "fold": a.fold_change}
                for a in alerts
            ],
            dest,
        )
    else:
        _write_rows(surveil.alert_rows(alerts), dest)
    logger.info("%d alerts", len(alerts))
    return 0


def _cmd_synth(args) -> int:
    config = synth.SynthConfig(
        quarters=tuple(quarter_range(args.quarter_from, args.quarter_to)),
        subjects_per_quarter=args.subjects,
        vocab_size=args.vocab,
        seed=args.seed,
        stationary=args.stationary,
    )
    corpus = synth.generate_corpus(config, Path(args.out), _schema_config())
    logger.info(
        "generated %d quarters x %d subjects into %s",
        len(corpus.quarters), args.subjects, corpus.root,
    )
    return 0


def _cmd_inject(args) -> int:
    if args.multiplier < 1:
        print("error: --multiplier must be >= 1", file=sys.stderr)
        return 2
    corpus = synth.GeneratedCorpus.open(Path(args.src))
    synth.inject_spike(corpus, args.drug, args.quarter, args.multiplier, _schema_config())
    logger.info("amplified %s in %s by x%d", args.drug, args.quarter, args.multiplier)
    return 0


# --------------------------------------------------------------------------
# Parser


def _add_range_flags(p: argparse.ArgumentParser, required: bool = False) -> None:
    p.add_argument("--from", dest="quarter_from", type=Quarter.parse, required=required,
                   metavar="YYYYQn", help="first quarter (inclusive)")
    p.add_argument("--to", dest="quarter_to", type=Quarter.parse, required=required,
                   metavar="YYYYQn", help="last quarter (inclusive)")


def _add_io_flags(p: argparse.ArgumentParser, out_required: bool = False) -> None:
    p.add_argument("--in", dest="src", required=True, metavar="PATH",
                   help="input snapshot file or directory")
    p.add_argument("--out", required=out_required, metavar="PATH",
                   help="output path (stdout when omitted)" if not out_required else "output path")
    p.add_argument("--format", choices=["csv", "json"], default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aerswatch",
        description="Drug-name reference counting and surveillance over "
                    "AERS quarterly ASCII data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse quarter file sets into a count snapshot")
    p.add_argument("--in", dest="src", required=True, metavar="DIR",
                   help="directory holding DEMO/DRUG/INDI/REAC quarter files")
    p.add_argument("--out", required=True, metavar="DIR",
                   help="directory for counts.csv, counts.meta.json and rejects.csv")
    p.add_argument("--multiplicative", action="store_true",
                   help="use the chained-join mention weight (sensitivity variant)")
    _add_range_flags(p)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("summarize", help="corpus summary statistics over per-drug totals")
    _add_io_flags(p)
    _add_range_flags(p)
    p.set_defaults(func=_cmd_summarize)

    p = sub.add_parser("top", help="top drug names by quarterly measures")
    _add_io_flags(p)
    _add_range_flags(p)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--metric", choices=["QSUM", "QMAX", "QAVERAGE"], default="QSUM")
    p.set_defaults(func=_cmd_top)

    p = sub.add_parser("series", help="quarterly count series for one drug")
    _add_io_flags(p)
    _add_range_flags(p)
    p.add_argument("--drug", required=True, help="drug name (normalized before lookup)")
    p.set_defaults(func=_cmd_series)

    p = sub.add_parser("trend", help="population ratio trend dataset")
    _add_io_flags(p)
    _add_range_flags(p)
    p.add_argument("--render", choices=["svg"], help="also write an SVG beside --out")
    p.set_defaults(func=_cmd_trend)

    p = sub.add_parser("boxplot", help="per-quarter distribution summary")
    _add_io_flags(p, out_required=True)
    p.add_argument("--quarter", type=Quarter.parse, required=True, metavar="YYYYQn")
    p.add_argument("--render", choices=["svg"], help="also write an SVG beside --out")
    p.set_defaults(func=_cmd_boxplot)

    p = sub.add_parser("detect", help="baseline-departure outbreak alerts")
    _add_io_flags(p)
    _add_range_flags(p)
    p.add_argument("--theta", type=float, default=3.0, help="score threshold (default 3.0)")
    p.add_argument("--min-count", type=int, default=1000,
                   help="minimum quarter count to alert on (default 1000)")
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("synth", help="generate a synthetic AERS-format corpus")
    p.add_argument("--out", required=True, metavar="DIR")
    _add_range_flags(p, required=True)
    p.add_argument("--subjects", type=int, default=100, help="subjects per quarter")
    p.add_argument("--vocab", type=int, default=50, help="drug vocabulary size")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stationary", action="store_true",
                   help="quota-based generation with quarterly noise bounded "
                        "below the default detection threshold")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("inject", help="amplify one drug in one quarter of a synthetic corpus")
    p.add_argument("--in", dest="src", required=True, metavar="DIR")
    p.add_argument("--drug", required=True)
    p.add_argument("--quarter", type=Quarter.parse, required=True, metavar="YYYYQn")
    p.add_argument("--multiplier", type=int, required=True)
    p.set_defaults(func=_cmd_inject)

    return parser


def run(argv: list[str] | None = None) -> int:
    """Parse arguments and run one subcommand; never raises SystemExit."""
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse handles usage text itself
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ing.IngestError, model.ModelError, synth.SynthError,
            surveil.SurveilConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
