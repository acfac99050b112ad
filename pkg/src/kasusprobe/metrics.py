"""Evaluation metrics: per-set AUC-ROC, aggregation tables, human-rating
normalization and QC, and human-model correlation.

The AUC of a minimal variation set is the probability that the acceptable
sentence outscores a randomly drawn violation, with ties counted half
(Mann-Whitney convention); 0.5 is chance, and a constant scorer lands on
0.5 exactly.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence, Union

from .genset import VIOLATION_TYPES, Dataset
from .scoring import ScoreTable

RESTRICTIONS = ("all",) + VIOLATION_TYPES

#: Display names for restrictions, following the reporting convention
#: "1-6" for full sets and "1-2 <case>" for single-violation subsets.
RESTRICTION_DISPLAY = {
    "all": "1-6",
    "double_NOM": "1-2 nom",
    "double_ACC": "1-2 acc",
    "double_DAT": "1-2 dat",
}

#: Case orders by increasing markedness. The appendix-style ordering (NDA
#: least marked) is the default; the main-table ordering starts at NAD.
MARKEDNESS_ORDER_APPENDIX = ("NDA", "NAD", "DNA", "AND", "DAN", "ADN")
MARKEDNESS_ORDER_MAIN = ("NAD", "NDA", "DNA", "AND", "DAN", "ADN")

#: Role assignments by decreasing plausibility (human agents and
#: recipients with an inanimate patient first).
PLAUSIBILITY_ORDER = (
    "ag1,re2,pa3",
    "ag2,re1,pa3",
    "ag1,re3,pa2",
    "ag2,re3,pa1",
    "ag3,re1,pa2",
    "ag3,re2,pa1",
)

CANONICAL_ROLE_LABELS = ("ag1,re2,pa3", "ag2,re1,pa3")

#: Case-order pairs differing only by swapping dative and accusative;
#: first member has the dative earlier.
_DATIVE_FIRST_PAIRS = (("NDA", "NAD"), ("DNA", "AND"), ("DAN", "ADN"))


class MetricsError(ValueError):
    """Evaluation input failure (empty sides, coverage gaps, bad labels)."""


@dataclass(frozen=True)
class ConstraintRanking:
    """Configured orderings of the 6 case orders and 6 role labels."""

    markedness_order: tuple[str, ...] = MARKEDNESS_ORDER_APPENDIX
    plausibility_order: tuple[str, ...] = PLAUSIBILITY_ORDER

    def __post_init__(self):
        if sorted(self.markedness_order) != sorted(MARKEDNESS_ORDER_APPENDIX):
            raise MetricsError("markedness_order must permute the 6 case orders")
        if sorted(self.plausibility_order) != sorted(PLAUSIBILITY_ORDER):
            raise MetricsError("plausibility_order must permute the 6 role labels")


RANKING_PRESETS = {
    "appendix": ConstraintRanking(),
    "main": ConstraintRanking(markedness_order=MARKEDNESS_ORDER_MAIN),
}


def auc(positives: Sequence[float], negatives: Sequence[float]) -> float:
    """Pairwise rank-statistic AUC with half credit for ties.

    Equals the area under the ROC curve of the two score samples.
    """
    if not positives or not negatives:
        raise MetricsError("auc requires at least one positive and one negative score")
    doubled = 0  # 2*wins + ties, kept integral for exactness
    for p in positives:
        for n in negatives:
            if p > n:
                doubled += 2
            elif p == n:
                doubled += 1
    return doubled / (2 * len(positives) * len(negatives))


@dataclass(frozen=True)
class SetAuc:
    """AUC of one minimal variation set, with the anchor's provenance."""

    acceptable_id: str
    restriction: str
    auc: float
    case_order: str
    role_label: str
    template_id: str


def evaluate_sets(
    dataset: Dataset,
    scores: Union[ScoreTable, Mapping[str, float]],
    restriction: str = "all",
    skip_incomplete: bool = False,
) -> list[SetAuc]:
    """One SetAuc per acceptable sentence: 1 positive vs 6 negatives for
    the full sets, 1 vs 2 under a single-violation restriction.

    Missing scores raise with the full list of missing ids unless
    ``skip_incomplete`` drops affected sets with a warning.
    """
    if restriction not in RESTRICTIONS:
        raise MetricsError(f"unknown restriction: {restriction!r}")
    entries = scores.entries if isinstance(scores, ScoreTable) else scores

    missing: list[str] = []
    results: list[SetAuc] = []
    skipped = 0
    for record in dataset.records:
        if not record.acceptable:
            continue
        mvs = dataset.sets[record.id]
        negative_ids = mvs.violation_ids if restriction == "all" else mvs.by_type[restriction]
        wanted = (record.id,) + tuple(negative_ids)
        absent = [sid for sid in wanted if sid not in entries]
        if absent:
            if skip_incomplete:
                skipped += 1
                continue
            missing.extend(absent)
            continue
        results.append(
            SetAuc(
                acceptable_id=record.id,
                restriction=restriction,
                auc=auc([entries[record.id]], [entries[sid] for sid in negative_ids]),
                case_order=record.case_order,
                role_label=record.role_label,
                template_id=record.template_id,
            )
        )
    if missing:
        unique = sorted(set(missing))
        raise MetricsError(
            f"score table is missing {len(unique)} sentence ids: {', '.join(unique[:20])}"
            + (" ..." if len(unique) > 20 else "")
        )
    if skipped:
        warnings.warn(f"skipped {skipped} sets with incomplete score coverage", stacklevel=2)
    return results


# ---------------------------------------------------------------------------
# Aggregation

GROUP_BY_MODES = ("case_order*role", "case_order", "role", "restriction")


@dataclass
class AggregateTable:
    """Mean AUCs bucketed on a row axis and optionally a column axis.

    Marginal means are the unweighted means of the corresponding cells;
    for complete evaluations the design is balanced (every cell averages
    one value per template), so they equal the means over the raw per-set
    values as well.
    """

    row_axis: str
    col_axis: str
    rows: tuple[str, ...]
    cols: tuple[str, ...]
    cells: dict[tuple[str, str], float]
    cell_counts: dict[tuple[str, str], int]
    row_means: dict[str, float] = field(init=False)
    col_means: dict[str, float] = field(init=False)
    grand_mean: float = field(init=False)

    def __post_init__(self):
        self.row_means = {
            r: _mean([self.cells[(r, c)] for c in self.cols if (r, c) in self.cells])
            for r in self.rows
        }
        self.col_means = {
            c: _mean([self.cells[(r, c)] for r in self.rows if (r, c) in self.cells])
            for c in self.cols
        }
        self.grand_mean = _mean(list(self.cells.values()))


def _mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values)


def _ordered_present(order: Sequence[str], present: set[str], axis: str) -> tuple[str, ...]:
    unknown = present.difference(order)
    if unknown:
        raise MetricsError(f"unknown {axis} label(s): {sorted(unknown)}")
    return tuple(label for label in order if label in present)


def aggregate(
    set_aucs: Sequence[SetAuc],
    ranking: ConstraintRanking | None = None,
    group_by: str = "case_order*role",
) -> AggregateTable:
    """Bucket per-set AUCs and average each bucket.

    Row and column orderings follow the configured ranking; only labels
    present in the input appear, so a full evaluation yields the 6x6
    case-order x role-assignment table and a single SetAuc yields a 1x1
    table.
    """
    if not set_aucs:
        raise MetricsError("no per-set AUC values to aggregate")
    if group_by not in GROUP_BY_MODES:
        raise MetricsError(f"unknown group_by mode: {group_by!r}")
    ranking = ranking or ConstraintRanking()

    if group_by == "case_order*role":
        keyfn = lambda s: (s.case_order, s.role_label)  # noqa: E731
    elif group_by == "case_order":
        keyfn = lambda s: (s.case_order, "mean_auc")  # noqa: E731
    elif group_by == "role":
        keyfn = lambda s: (s.role_label, "mean_auc")  # noqa: E731
    else:
        keyfn = lambda s: (s.restriction, "mean_auc")  # noqa: E731

    buckets: dict[tuple[str, str], list[float]] = {}
    for set_auc in set_aucs:
        buckets.setdefault(keyfn(set_auc), []).append(set_auc.auc)

    row_labels = {key[0] for key in buckets}
    if group_by == "case_order*role":
        rows = _ordered_present(ranking.markedness_order, row_labels, "case order")
        cols = _ordered_present(
            ranking.plausibility_order, {key[1] for key in buckets}, "role label"
        )
    elif group_by == "case_order":
        rows = _ordered_present(ranking.markedness_order, row_labels, "case order")
        cols = ("mean_auc",)
    elif group_by == "role":
        rows = _ordered_present(ranking.plausibility_order, row_labels, "role label")
        cols = ("mean_auc",)
    else:
        rows = _ordered_present(RESTRICTIONS, row_labels, "restriction")
        cols = ("mean_auc",)

    cells = {key: _mean(values) for key, values in buckets.items()}
    counts = {key: len(values) for key, values in buckets.items()}
    return AggregateTable(
        row_axis=group_by.split("*")[0],
        col_axis="role" if group_by == "case_order*role" else "value",
        rows=rows,
        cols=cols,
        cells=cells,
        cell_counts=counts,
    )


# ---------------------------------------------------------------------------
# Ordering-constraint report

@dataclass(frozen=True)
class ConstraintReport:
    """Descriptive check of the two graded ordering constraints.

    ``nomalign``: do nominative-initial case orders outscore
    nominative-final ones on average? ``datalign``: among canonical role
    assignments, do dative-before-accusative orders outscore their
    swapped counterparts? Deltas are reported as evidence, not as a
    pass/fail gate.
    """

    nomalign_holds: bool
    nomalign_initial_mean: float
    nomalign_final_mean: float
    nomalign_delta: float
    datalign_holds: bool
    datalign_pair_deltas: dict[str, float]
    datalign_mean_delta: float

    def to_dict(self) -> dict:
        return {
            "nomalign": {
                "holds": self.nomalign_holds,
                "nominative_initial_mean": self.nomalign_initial_mean,
                "nominative_final_mean": self.nomalign_final_mean,
                "delta": self.nomalign_delta,
            },
            "datalign": {
                "holds": self.datalign_holds,
                "pair_deltas": dict(self.datalign_pair_deltas),
                "mean_delta": self.datalign_mean_delta,
            },
        }


def constraint_check(table: AggregateTable) -> ConstraintReport:
    """Evaluate the ordering constraints on a 6x6 case-order x role table."""
    if set(table.rows) != set(MARKEDNESS_ORDER_APPENDIX) or set(table.cols) != set(
        PLAUSIBILITY_ORDER
    ):
        raise MetricsError("constraint_check needs the full 6x6 case-order x role table")

    initial = _mean([table.row_means["NAD"], table.row_means["NDA"]])
    final = _mean([table.row_means["DAN"], table.row_means["ADN"]])

    pair_deltas = {}
    for dative_first, swapped in _DATIVE_FIRST_PAIRS:
        first = _mean([table.cells[(dative_first, role)] for role in CANONICAL_ROLE_LABELS])
        second = _mean([table.cells[(swapped, role)] for role in CANONICAL_ROLE_LABELS])
        pair_deltas[f"{dative_first}>{swapped}"] = first - second
    mean_delta = _mean(list(pair_deltas.values()))

    return ConstraintReport(
        nomalign_holds=initial > final,
        nomalign_initial_mean=initial,
        nomalign_final_mean=final,
        nomalign_delta=initial - final,
        datalign_holds=mean_delta > 0,
        datalign_pair_deltas=pair_deltas,
        datalign_mean_delta=mean_delta,
    )


# ---------------------------------------------------------------------------
# Human annotations

@dataclass(frozen=True)
class AnnotationRecord:
    annotator_id: str
    sentence_id: str
    raw: int
    timestamp: str
    is_filler: bool = False
    filler_kind: str = "none"  # acceptable | violation | none
    is_warmup: bool = False

    def __post_init__(self):
        if not isinstance(self.raw, int) or isinstance(self.raw, bool) or not 0 <= self.raw <= 99:
            raise MetricsError(
                f"rating for {self.sentence_id!r} must be an integer in [0, 99], got {self.raw!r}"
            )
        if self.filler_kind not in ("acceptable", "violation", "none"):
            raise MetricsError(f"bad filler_kind: {self.filler_kind!r}")


def normalize_annotations(
    records: Sequence[AnnotationRecord],
    include_fillers: bool = False,
) -> dict[str, float]:
    """Per-annotator z-transform, then per-sentence averaging.

    Each annotator's ratings are shifted and scaled to zero mean and unit
    population standard deviation; a sentence's score is the mean of its
    annotators' normalized values. Warm-up ratings never participate;
    filler ratings are excluded from both the transform and the output
    unless ``include_fillers``.

    An annotator with constant ratings has no scale; their centered
    ratings are left at 0 with a warning.
    """
    usable = [
        r for r in records if not r.is_warmup and (include_fillers or not r.is_filler)
    ]
    by_annotator: dict[str, list[AnnotationRecord]] = {}
    for record in usable:
        by_annotator.setdefault(record.annotator_id, []).append(record)

    per_sentence: dict[str, list[float]] = {}
    for annotator_id, annotator_records in by_annotator.items():
        values = [float(r.raw) for r in annotator_records]
        mean = math.fsum(values) / len(values)
        sd = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / len(values))
        if sd == 0.0:
            warnings.warn(
                f"annotator {annotator_id!r} gave constant ratings; normalized to 0",
                stacklevel=2,
            )
        for record, value in zip(annotator_records, values):
            normalized = 0.0 if sd == 0.0 else (value - mean) / sd
            per_sentence.setdefault(record.sentence_id, []).append(normalized)

    return {sid: math.fsum(vals) / len(vals) for sid, vals in per_sentence.items()}


def qc_filter(records: Sequence[AnnotationRecord]) -> set[str]:
    """Annotators retained by the filler check.

    Retained iff the mean raw rating over acceptable fillers is strictly
    greater than over violation fillers. Annotators missing either filler
    kind cannot be validated and are excluded with a warning; the equality
    boundary also removes (conservative reading of the removal rule).
    """
    acceptable: dict[str, list[int]] = {}
    violation: dict[str, list[int]] = {}
    annotators: set[str] = set()
    for record in records:
        annotators.add(record.annotator_id)
        if not record.is_filler or record.is_warmup:
            continue
        bucket = acceptable if record.filler_kind == "acceptable" else violation
        bucket.setdefault(record.annotator_id, []).append(record.raw)

    retained = set()
    for annotator_id in annotators:
        acc = acceptable.get(annotator_id)
        vio = violation.get(annotator_id)
        if not acc or not vio:
            warnings.warn(
                f"annotator {annotator_id!r} lacks filler ratings of both kinds; excluded",
                stacklevel=2,
            )
            continue
        if math.fsum(acc) / len(acc) > math.fsum(vio) / len(vio):
            retained.add(annotator_id)
    return retained


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Product-moment correlation, clamped to [-1, 1] against rounding."""
    if len(x) != len(y):
        raise MetricsError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise MetricsError("pearson requires at least 2 points")
    n = len(x)
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    cov = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    vx = math.fsum((a - mx) ** 2 for a in x)
    vy = math.fsum((b - my) ** 2 for b in y)
    if vx == 0.0 or vy == 0.0:
        raise MetricsError("pearson is undefined for zero-variance input")
    return max(-1.0, min(1.0, cov / math.sqrt(vx * vy)))


# ---------------------------------------------------------------------------
# Annotation record I/O (one JSON object per line)

def annotation_to_json(record: AnnotationRecord) -> str:
    return json.dumps(
        {
            "annotator_id": record.annotator_id,
            "sentence_id": record.sentence_id,
            "raw": record.raw,
            "timestamp": record.timestamp,
            "is_filler": record.is_filler,
            "filler_kind": record.filler_kind,
            "is_warmup": record.is_warmup,
        },
        ensure_ascii=False,
        sort_keys=True,
        separators=(",", ":"),
    )


def read_annotations(source: Union[str, Path, IO[str], Iterable[str]]) -> list[AnnotationRecord]:
    if isinstance(source, (str, Path)):
        lines: Iterable[str] = Path(source).read_text(encoding="utf-8").splitlines()
    else:
        lines = source
    records = []
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MetricsError(f"annotation line {lineno}: invalid JSON ({exc})") from None
        try:
            records.append(
                AnnotationRecord(
                    annotator_id=raw["annotator_id"],
                    sentence_id=raw["sentence_id"],
                    raw=raw["raw"],
                    timestamp=raw.get("timestamp", ""),
                    is_filler=raw.get("is_filler", False),
                    filler_kind=raw.get("filler_kind", "none"),
                    is_warmup=raw.get("is_warmup", False),
                )
            )
        except KeyError as exc:
            raise MetricsError(f"annotation line {lineno}: missing field {exc}") from None
    return records


def write_annotations(records: Iterable[AnnotationRecord], path: Union[str, Path]) -> None:
    lines = [annotation_to_json(r) + "\n" for r in records]
    Path(path).write_text("".join(lines), encoding="utf-8", newline="\n")


# ---------------------------------------------------------------------------
# Table rendering (rows = case orders, columns = role assignments, with
# trailing averages, mirroring the published table layout)

def render_markdown(table: AggregateTable, title: str | None = None, digits: int = 2) -> str:
    def fmt(value: float) -> str:
        return f"{value:.{digits}f}"

    header = [table.row_axis] + list(table.cols) + ["avg"]
    lines = []
    if title:
        lines.append(f"**{title}**")
        lines.append("")
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "|".join(["---"] * len(header)) + "|")
    for row in table.rows:
        cells = [fmt(table.cells[(row, col)]) if (row, col) in table.cells else "" for col in table.cols]
        lines.append("| " + " | ".join([row] + cells + [fmt(table.row_means[row])]) + " |")
    footer = ["avg"] + [fmt(table.col_means[col]) for col in table.cols] + [fmt(table.grand_mean)]
    lines.append("| " + " | ".join(footer) + " |")
    return "\n".join(lines) + "\n"


def render_csv(table: AggregateTable) -> str:
    """CSV rendering with full-precision cells for traceability."""
    rows = [[table.row_axis] + list(table.cols) + ["avg"]]
    for row in table.rows:
        cells = [
            repr(table.cells[(row, col)]) if (row, col) in table.cells else ""
            for col in table.cols
        ]
        rows.append([row] + cells + [repr(table.row_means[row])])
    rows.append(
        ["avg"] + [repr(table.col_means[col]) for col in table.cols] + [repr(table.grand_mean)]
    )
    return "\n".join(",".join(cell for cell in row) for row in rows) + "\n"
