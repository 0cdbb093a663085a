"""Deterministic synthetic AERS-format corpora with recorded ground truth.

The generator emits quarter file sets bit-compatible with the shipped
schema defaults, remembers every subject it created, and pairs with a
naive counting oracle that shares no logic with the production count
model. Drug popularity follows a Zipf law so synthetic corpora show the
same long-tail shape as the real data (mode 1, heavy right skew).
"""
from __future__ import annotations

import json
import random
import re
from bisect import bisect_left
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

from .ingest import (
    EMPTY_NAME,
    QuarterFiles,
    SchemaConfig,
    SubjectReport,
    load_schema_config,
    normalize_drug_name,
    quarter_filename,
)
from .model import BUILD_VERSION, CountStore, StoreMeta
from .quarters import Quarter, expand_two_digit_year

GROUND_TRUTH_FILE = "ground_truth.json"

# Seeded at the head of the vocabulary (= the most popular Zipf ranks) so
# synthetic output reads like the drugs people expect to see on top.
REAL_NAMES = ("HEPARIN SODIUM INJECTION", "ASPIRIN", "VIOXX")

_FIRST_ISR = 1000001

# Column labels for generated headers, keyed by (kind, column role).
_HEADER_LABELS = {
    "isr": "ISR",
    "drug_seq": "DRUG_SEQ",
    "DRUG.payload": "DRUGNAME",
    "INDI.payload": "INDI_PT",
    "REAC.payload": "PT",
}


class SynthError(Exception):
    """Invalid generator configuration or corpus manipulation."""


@dataclass(frozen=True, slots=True)
class QuarterProfile:
    """Per-quarter overrides of the subject-level distributions."""

    drugs_per_subject: tuple[int, int] | None = None
    indications: tuple[int, int] | None = None
    reactions: tuple[int, int] | None = None


@dataclass(frozen=True, slots=True)
class SynthConfig:
    """Generator configuration.

    `stationary` switches drug assignment from per-subject Zipf draws to
    fixed per-quarter mention quotas (Zipf-shaped, with a balanced +/-1
    alternation across quarters) and pins indication/reaction counts to
    their range midpoints. Quarterly noise is then structurally bounded
    well below a departure score of 3, so a stationary corpus never trips
    default detection while an injected spike always does.
    """

    quarters: tuple[Quarter, ...]
    subjects_per_quarter: int = 100
    vocab_size: int = 50
    zipf_exponent: float = 1.1
    drugs_per_subject: tuple[int, int] = (1, 10)
    indications: tuple[int, int] = (0, 4)
    reactions: tuple[int, int] = (0, 2)
    seed: int = 0
    seed_real_names: bool = True
    stationary: bool = False
    overrides: Mapping[Quarter, QuarterProfile] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.quarters:
            raise SynthError("config needs at least one quarter")
        if len(set(self.quarters)) != len(self.quarters):
            raise SynthError("duplicate quarters in config")
        if self.subjects_per_quarter < 0:
            raise SynthError("subjects_per_quarter must be >= 0")
        if self.vocab_size < 1:
            raise SynthError("vocab_size must be >= 1")
        if self.zipf_exponent <= 0:
            raise SynthError("zipf_exponent must be > 0")
        for label, rng in (("drugs_per_subject", self.drugs_per_subject),
                           ("indications", self.indications),
                           ("reactions", self.reactions)):
            lo, hi = rng
            if lo < 0 or hi < lo:
                raise SynthError(f"{label} range must satisfy 0 <= lo <= hi, got {rng}")
        if self.stationary and self.drugs_per_subject[0] < 1:
            raise SynthError("stationary mode needs at least one drug per subject")
        for q in self.overrides:
            if q not in self.quarters:
                raise SynthError(f"override for {q} outside configured quarters")


@dataclass(frozen=True, slots=True)
class GroundTruth:
    """Every SubjectReport the generator emitted, in generation order."""

    reports: tuple[SubjectReport, ...]

    def for_quarter(self, quarter: Quarter) -> list[SubjectReport]:
        return [r for r in self.reports if r.quarter == quarter]

    def subjects_per_quarter(self) -> dict[Quarter, int]:
        out: dict[Quarter, int] = {}
        for r in self.reports:
            out[r.quarter] = out.get(r.quarter, 0) + 1
        return out

    def max_isr(self) -> int:
        return max((int(r.isr) for r in self.reports), default=_FIRST_ISR - 1)

    def save(self, path: Path) -> None:
        doc = {
            "reports": [
                {
                    "isr": r.isr,
                    "quarter": str(r.quarter),
                    "drug_names": list(r.drug_names),
                    "indication_count": r.indication_count,
                    "reaction_count": r.reaction_count,
                }
                for r in self.reports
            ]
        }
        with open(path, "w", encoding="utf-8", newline="") as f:
            json.dump(doc, f, indent=1)
            f.write("\n")

    @classmethod
    def load(cls, path: Path) -> "GroundTruth":
        doc = json.loads(Path(path).read_text("utf-8"))
        reports = tuple(
            SubjectReport(
                isr=r["isr"],
                quarter=Quarter.parse(r["quarter"]),
                drug_names=tuple(r["drug_names"]),
                indication_count=int(r["indication_count"]),
                reaction_count=int(r["reaction_count"]),
            )
            for r in doc["reports"]
        )
        return cls(reports=reports)


@dataclass(frozen=True, slots=True)
class GeneratedCorpus:
    """A corpus directory: quarter file sets plus saved ground truth."""

    root: Path
    quarters: tuple[Quarter, ...]
    vocabulary: tuple[str, ...]
    ground_truth: GroundTruth

    def files_for(self, quarter: Quarter) -> QuarterFiles:
        return QuarterFiles(
            demo=self.root / quarter_filename("DEMO", quarter),
            drug=self.root / quarter_filename("DRUG", quarter),
            indi=self.root / quarter_filename("INDI", quarter),
            reac=self.root / quarter_filename("REAC", quarter),
        )

    @classmethod
    def open(cls, root: Path) -> "GeneratedCorpus":
        root = Path(root)
        truth_path = root / GROUND_TRUTH_FILE
        if not truth_path.is_file():
            raise SynthError(f"not a generated corpus (no {GROUND_TRUTH_FILE}): {root}")
        truth = GroundTruth.load(truth_path)
        quarters = tuple(sorted(_scan_quarters(root)))
        vocab = tuple(sorted({n for r in truth.reports for n in r.drug_names}))
        return cls(root=root, quarters=quarters, vocabulary=vocab, ground_truth=truth)


def build_vocabulary(config: SynthConfig) -> tuple[str, ...]:
    names: list[str] = list(REAL_NAMES[: config.vocab_size]) if config.seed_real_names else []
    i = 1
    while len(names) < config.vocab_size:
        names.append(f"DRUG {i:05d}")
        i += 1
    return tuple(names)


def _zipf_probs(n: int, exponent: float) -> list[float]:
    weights = [k ** -exponent for k in range(1, n + 1)]
    total = sum(weights)
    return [w / total for w in weights]


class _ZipfSampler:
    """Ranks 1..n with probability proportional to rank**-exponent."""

    def __init__(self, n: int, exponent: float):
        acc = 0.0
        cum = []
        for p in _zipf_probs(n, exponent):
            acc += p
            cum.append(acc)
        self._cum = cum

    def sample(self, rng: random.Random) -> int:
        """0-based rank index."""
        return bisect_left(self._cum, rng.random())


def _midpoint(bounds: tuple[int, int]) -> int:
    return (bounds[0] + bounds[1]) // 2


def _stationary_quota_base(config: SynthConfig) -> list[int]:
    """Per-drug mention quota shared by every quarter (Zipf-shaped).

    Largest-remainder rounding keeps the quota total exactly at
    subjects * midpoint(drugs_per_subject).
    """
    probs = _zipf_probs(config.vocab_size, config.zipf_exponent)
    total = config.subjects_per_quarter * _midpoint(config.drugs_per_subject)
    base = [int(total * p) for p in probs]
    remainder = total - sum(base)
    by_fraction = sorted(
        range(config.vocab_size), key=lambda k: (-(total * probs[k] - base[k]), k)
    )
    for k in by_fraction[:remainder]:
        base[k] += 1
    return base


def _iid_subject_specs(
    rng: random.Random,
    n_subjects: int,
    drug_range: tuple[int, int],
    indi_range: tuple[int, int],
    reac_range: tuple[int, int],
    vocab: tuple[str, ...],
    zipf: _ZipfSampler,
) -> list[tuple[list[str], int, int]]:
    specs = []
    for _ in range(n_subjects):
        n_drugs = rng.randint(*drug_range)
        n_indi = rng.randint(*indi_range)
        n_reac = rng.randint(*reac_range)
        names = [vocab[zipf.sample(rng)] for _ in range(n_drugs)]
        specs.append((names, n_indi, n_reac))
    return specs


def _stationary_subject_specs(
    rng: random.Random,
    n_subjects: int,
    drug_range: tuple[int, int],
    indi_range: tuple[int, int],
    reac_range: tuple[int, int],
    vocab: tuple[str, ...],
    quotas: list[int],
) -> list[tuple[list[str], int, int]]:
    """Deal a fixed mention pool into subjects; complexity at range midpoints."""
    pool: list[str] = []
    for k, quota in enumerate(quotas):
        pool.extend([vocab[k]] * quota)
    lo, hi = drug_range
    if not n_subjects * lo <= len(pool) <= n_subjects * hi:
        raise SynthError(
            f"stationary mention pool of {len(pool)} does not fit "
            f"{n_subjects} subjects with {lo}..{hi} drugs each"
        )
    rng.shuffle(pool)
    sizes = [lo] * n_subjects
    for i in range(len(pool) - n_subjects * lo):
        sizes[i % n_subjects] += 1
    n_indi = _midpoint(indi_range)
    n_reac = _midpoint(reac_range)
    specs = []
    offset = 0
    for size in sizes:
        specs.append((pool[offset:offset + size], n_indi, n_reac))
        offset += size
    return specs


def _header_line(kind: str, schema) -> str:
    labels = {}
    labels[schema.isr_col] = _HEADER_LABELS["isr"]
    if schema.seq_col is not None:
        labels[schema.seq_col] = _HEADER_LABELS["drug_seq"]
    if schema.payload_col is not None:
        labels[schema.payload_col] = _HEADER_LABELS[f"{kind}.payload"]
    cols = [labels.get(i, f"F{i}") for i in range(schema.n_fields)]
    return schema.delimiter.join(cols)


def _make_row(schema, isr: str, payload: str | None = None, seq: int | None = None) -> str:
    fields = [""] * schema.n_fields
    fields[schema.isr_col] = isr
    if payload is not None and schema.payload_col is not None:
        fields[schema.payload_col] = payload
    if seq is not None and schema.seq_col is not None:
        fields[schema.seq_col] = str(seq)
    return schema.delimiter.join(fields)


def _resolved_schemas(config_quarter: Quarter, schema_config: SchemaConfig) -> dict:
    return {kind: schema_config.resolve(kind, config_quarter)
            for kind in ("DEMO", "DRUG", "INDI", "REAC")}


def generate_corpus(
    config: SynthConfig, dest: Path, schema_config: SchemaConfig | None = None
) -> GeneratedCorpus:
    """Write a synthetic corpus into `dest`; byte-deterministic per seed."""
    schema_config = schema_config or load_schema_config()
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    vocab = build_vocabulary(config)
    zipf = _ZipfSampler(len(vocab), config.zipf_exponent)
    quota_base = _stationary_quota_base(config) if config.stationary else None
    rng = random.Random(config.seed)

    reports: list[SubjectReport] = []
    next_isr = _FIRST_ISR
    for q_index, quarter in enumerate(sorted(config.quarters)):
        profile = config.overrides.get(quarter, QuarterProfile())
        drug_range = profile.drugs_per_subject or config.drugs_per_subject
        indi_range = profile.indications or config.indications
        reac_range = profile.reactions or config.reactions
        schemas = _resolved_schemas(quarter, schema_config)

        if config.subjects_per_quarter == 0:
            specs: list[tuple[list[str], int, int]] = []
        elif quota_base is not None:
            # Balanced +/-1 alternation: every drug's quarterly series is
            # two-valued with a near-even split, so leave-one-out departure
            # scores stay below 2 regardless of seed.
            quotas = [base + (k + q_index) % 2 for k, base in enumerate(quota_base)]
            specs = _stationary_subject_specs(
                rng, config.subjects_per_quarter, drug_range,
                indi_range, reac_range, vocab, quotas,
            )
        else:
            specs = _iid_subject_specs(
                rng, config.subjects_per_quarter, drug_range,
                indi_range, reac_range, vocab, zipf,
            )

        lines = {kind: [_header_line(kind, schemas[kind])] for kind in schemas}
        for names, n_indi, n_reac in specs:
            isr = str(next_isr)
            next_isr += 1
            lines["DEMO"].append(_make_row(schemas["DEMO"], isr))
            for seq, name in enumerate(names, start=1):
                lines["DRUG"].append(_make_row(schemas["DRUG"], isr, name, seq))
            for i in range(n_indi):
                seq = (i % len(names)) + 1 if names else 1
                term = f"INDICATION {rng.randint(1, 200):04d}"
                lines["INDI"].append(_make_row(schemas["INDI"], isr, term, seq))
            for _ in range(n_reac):
                term = f"REACTION {rng.randint(1, 300):04d}"
                lines["REAC"].append(_make_row(schemas["REAC"], isr, term))

            reports.append(SubjectReport(
                isr=isr,
                quarter=quarter,
                drug_names=tuple(names),
                indication_count=n_indi,
                reaction_count=n_reac,
            ))

        for kind, content in lines.items():
            path = dest / quarter_filename(kind, quarter)
            path.write_bytes(("\n".join(content) + "\n").encode("ascii"))

    truth = GroundTruth(reports=tuple(reports))
    truth.save(dest / GROUND_TRUTH_FILE)
    return GeneratedCorpus(
        root=dest,
        quarters=tuple(sorted(config.quarters)),
        vocabulary=vocab,
        ground_truth=truth,
    )


def inject_spike(
    corpus: GeneratedCorpus,
    drug_name: str,
    quarter: Quarter,
    multiplier: int,
    schema_config: SchemaConfig | None = None,
) -> GeneratedCorpus:
    """Append single-mention subjects until the drug's mention count in the
    quarter reaches multiplier x its baseline. Other quarters' files are
    left byte-identical; the saved ground truth is updated in step."""
    if multiplier < 1:
        raise SynthError(f"multiplier must be >= 1, got {multiplier}")
    if quarter not in corpus.quarters:
        raise SynthError(f"{quarter} is not in the corpus")
    name = normalize_drug_name(drug_name)
    if name not in corpus.vocabulary:
        raise SynthError(f"unknown drug name {drug_name!r}")

    baseline = sum(
        1
        for r in corpus.ground_truth.for_quarter(quarter)
        for n in r.drug_names
        if n == name
    )
    if baseline == 0:
        raise SynthError(f"{name!r} has no mentions in {quarter}; nothing to amplify")
    extra = (multiplier - 1) * baseline
    if extra == 0:
        return corpus

    schema_config = schema_config or load_schema_config()
    demo_schema = schema_config.resolve("DEMO", quarter)
    drug_schema = schema_config.resolve("DRUG", quarter)
    files = corpus.files_for(quarter)

    next_isr = corpus.ground_truth.max_isr() + 1
    demo_lines, drug_lines, new_reports = [], [], []
    for _ in range(extra):
        isr = str(next_isr)
        next_isr += 1
        demo_lines.append(_make_row(demo_schema, isr))
        drug_lines.append(_make_row(drug_schema, isr, name, 1))
        new_reports.append(SubjectReport(
            isr=isr,
            quarter=quarter,
            drug_names=(name,),
            indication_count=0,
            reaction_count=0,
        ))
    with open(files.demo, "ab") as f:
        f.write(("\n".join(demo_lines) + "\n").encode("ascii"))
    with open(files.drug, "ab") as f:
        f.write(("\n".join(drug_lines) + "\n").encode("ascii"))

    truth = GroundTruth(reports=corpus.ground_truth.reports + tuple(new_reports))
    truth.save(corpus.root / GROUND_TRUTH_FILE)
    return replace(corpus, ground_truth=truth)


# --------------------------------------------------------------------------
# The naive counting oracle.
#
# Deliberately the most direct computation possible, and deliberately
# independent of the production model: its own file scan, its own column
# positions (the shipped legacy layout), its own inline normalization.

_ORACLE_FILE_RE = re.compile(r"^(DEMO|DRUG|INDI|REAC)(\d{2})Q([1-4])\.TXT$", re.IGNORECASE)
_ORACLE_COLUMNS = {
    "DEMO": {"fields": 23, "isr": 0},
    "DRUG": {"fields": 12, "isr": 0, "name": 3},
    "INDI": {"fields": 3, "isr": 0},
    "REAC": {"fields": 2, "isr": 0},
}


def _scan_quarters(root: Path) -> set[Quarter]:
    quarters = set()
    for path in Path(root).iterdir():
        m = _ORACLE_FILE_RE.match(path.name)
        if m:
            quarters.add(Quarter(expand_two_digit_year(int(m.group(2))), int(m.group(3))))
    return quarters


def _oracle_rows(root: Path, kind: str, quarter: Quarter) -> list[list[str]]:
    path = Path(root) / quarter_filename(kind, quarter)
    if not path.is_file():
        return []
    layout = _ORACLE_COLUMNS[kind]
    text = path.read_text(encoding="ascii", errors="replace")
    rows = []
    for line in text.splitlines()[1:]:
        fields = line.split("$")
        if len(fields) != layout["fields"]:
            continue
        if fields[layout["isr"]].strip().isdigit():
            rows.append(fields)
    return rows


def oracle_counts(root: Path) -> CountStore:
    """Reference counts computed by plain per-subject loops over the files."""
    root = Path(root)
    quarters = sorted(_scan_quarters(root))
    counts: dict[str, dict[Quarter, int]] = {}
    subjects: dict[Quarter, int] = {}
    for quarter in quarters:
        demo_isrs = [row[0].strip() for row in _oracle_rows(root, "DEMO", quarter)]
        drug_rows = _oracle_rows(root, "DRUG", quarter)
        indi_isrs = [row[0].strip() for row in _oracle_rows(root, "INDI", quarter)]
        reac_isrs = [row[0].strip() for row in _oracle_rows(root, "REAC", quarter)]

        mentions: dict[str, list[str]] = {}
        for row in drug_rows:
            isr = row[0].strip()
            name = " ".join(row[_ORACLE_COLUMNS["DRUG"]["name"]].split()).upper()
            mentions.setdefault(isr, []).append(name if name else EMPTY_NAME)

        indi_tally: dict[str, int] = {}
        for isr in indi_isrs:
            indi_tally[isr] = indi_tally.get(isr, 0) + 1
        reac_tally: dict[str, int] = {}
        for isr in reac_isrs:
            reac_tally[isr] = reac_tally.get(isr, 0) + 1

        universe = set(mentions) | set(demo_isrs)
        subjects[quarter] = len(universe)
        for isr in universe:
            weight = indi_tally.get(isr, 0) + reac_tally.get(isr, 0)
            if weight == 0:
                weight = 1
            for name in mentions.get(isr, ()):
                series = counts.setdefault(name, {})
                series[quarter] = series.get(quarter, 0) + weight

    return CountStore(
        counts=counts,
        subjects_per_quarter={q: subjects.get(q, 0) for q in quarters},
        quarters=quarters,
        meta=StoreMeta(version=BUILD_VERSION, checksums={}),
    )
