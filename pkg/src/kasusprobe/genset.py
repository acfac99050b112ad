"""Sentence-set generation: acceptable permutations, case violations and
minimal variation sets.

Each template is a verb-final subordinate clause with three NP argument
slots. From one template we enumerate

* 36 acceptable sentences: 6 case orders (permutations of NOM/ACC/DAT)
  x 6 arrangements (which lexical item fills which position), and
* 108 violations: the 18 case sequences containing exactly one duplicated
  case x 6 arrangements, 36 per doubled case.

Every acceptable sentence anchors a minimal variation set of 6 violations
(change exactly one position's case to a case already present; 2 per
doubled case), and every violation belongs to exactly 2 such sets.

Enumeration order is a repo convention: case sequences in lexicographic
order under NOM < ACC < DAT, arrangements in lexicographic order, template
order as given. Identical inputs therefore produce byte-identical datasets,
including sentence ids.
"""

from __future__ import annotations

import itertools
import json
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Union

from .lexicon import CASE_ROLE, CASES, Case, Lexicon, inflect

#: Role ordering used when rendering role labels: agent, recipient, patient.
_ROLE_ORDER = {"ag": 0, "re": 1, "pa": 2}

VIOLATION_TYPES = ("double_NOM", "double_ACC", "double_DAT")

CaseSequence = tuple[Case, Case, Case]
Arrangement = tuple[int, int, int]

#: The 6 acceptable case orders, lexicographic under NOM < ACC < DAT.
ACCEPTABLE_SEQUENCES: tuple[CaseSequence, ...] = tuple(itertools.permutations(CASES))

#: The 18 sequences with exactly one duplicated case (never all-three-same),
#: in lexicographic order under NOM < ACC < DAT.
VIOLATION_SEQUENCES: tuple[CaseSequence, ...] = tuple(
    seq for seq in itertools.product(CASES, repeat=3) if len(set(seq)) == 2
)

#: The 6 arrangements (item filling positions 1..3), lexicographic.
ARRANGEMENTS: tuple[Arrangement, ...] = tuple(itertools.permutations((1, 2, 3)))

_ID_RE = re.compile(r"^[A-Za-z0-9_.-]+$")


class GensetError(ValueError):
    """Template or dataset construction failure."""


@dataclass(frozen=True)
class Template:
    """A subordinate-clause frame: prefix ending in the complementizer,
    three lexical items, and the clause-final verb."""

    id: str
    prefix: str
    verb: str
    items: tuple[str, str, str]
    determiner_overrides: tuple[str | None, str | None, str | None] = (None, None, None)
    gloss: str | None = None

    def __post_init__(self):
        if not _ID_RE.match(self.id):
            raise GensetError(f"template id {self.id!r} must match {_ID_RE.pattern}")
        if len(self.items) != 3:
            raise GensetError(f"template {self.id!r} must have exactly 3 items")
        for text_field in ("prefix", "verb"):
            value = getattr(self, text_field)
            if not value or any(ch in value for ch in "\t\n\r"):
                raise GensetError(
                    f"template {self.id!r}: {text_field} must be non-empty single-line text"
                )


@dataclass(frozen=True)
class SentenceRecord:
    """One realized sentence with full provenance."""

    id: str
    template_id: str
    text: str
    case_sequence: CaseSequence
    arrangement: Arrangement
    role_label: str
    acceptable: bool
    violation_type: str  # "none" or one of VIOLATION_TYPES

    @property
    def case_order(self) -> str:
        return case_order_label(self.case_sequence)


@dataclass(frozen=True)
class MinimalVariationSet:
    """One acceptable sentence id with its 6 violation ids, 2 per doubled case."""

    acceptable_id: str
    by_type: dict[str, tuple[str, str]]

    @property
    def violation_ids(self) -> tuple[str, ...]:
        return tuple(vid for vtype in VIOLATION_TYPES for vid in self.by_type[vtype])


@dataclass
class Dataset:
    """All sentence records plus the minimal variation index."""

    records: list[SentenceRecord]
    sets: dict[str, MinimalVariationSet]
    template_ids: list[str]
    by_id: dict[str, SentenceRecord] = field(init=False, repr=False)

    def __post_init__(self):
        self.by_id = {record.id: record for record in self.records}

    @property
    def acceptable_records(self) -> list[SentenceRecord]:
        return [r for r in self.records if r.acceptable]


def case_order_label(seq: CaseSequence) -> str:
    """Compact case-order label, e.g. (NOM, DAT, ACC) -> "NDA"."""
    return "".join(case.letter for case in seq)


def parse_case_order(label: str) -> CaseSequence:
    by_letter = {c.letter: c for c in CASES}
    if len(label) != 3 or any(ch not in by_letter for ch in label):
        raise GensetError(f"bad case order label: {label!r}")
    return tuple(by_letter[ch] for ch in label)  # type: ignore[return-value]


def arrangement_label(arr: Arrangement) -> str:
    return "".join(str(i) for i in arr)


def parse_arrangement(label: str) -> Arrangement:
    if sorted(label) != ["1", "2", "3"]:
        raise GensetError(f"bad arrangement label: {label!r}")
    return tuple(int(ch) for ch in label)  # type: ignore[return-value]


def role_label(seq: CaseSequence, arr: Arrangement) -> str:
    """Derive the role label: each position's item takes the role of that
    position's case (NOM->ag, ACC->pa, DAT->re), rendered in role order
    (agent, recipient, patient) with ties broken by item number.

    Duplicated cases yield duplicated role prefixes, e.g. "ag1,ag2,pa3"
    for a doubled nominative.
    """
    pairs = sorted(
        ((CASE_ROLE[case], item) for case, item in zip(seq, arr)),
        key=lambda pair: (_ROLE_ORDER[pair[0]], pair[1]),
    )
    return ",".join(f"{role}{item}" for role, item in pairs)


def sentence_id(template_id: str, seq: CaseSequence, arr: Arrangement) -> str:
    """Content-derived id, stable across runs: template:caseorder:arrangement."""
    return f"{template_id}:{case_order_label(seq)}:{arrangement_label(arr)}"


def violation_type_of(seq: CaseSequence) -> str:
    distinct = set(seq)
    if len(distinct) == 3:
        return "none"
    if len(distinct) == 1:
        raise GensetError(f"all-same case sequence is not representable: {seq}")
    doubled = next(c for c in distinct if seq.count(c) == 2)
    return f"double_{doubled.value}"


def realize(template: Template, seq: CaseSequence, arr: Arrangement, lexicon: Lexicon) -> str:
    """Assemble the surface string: prefix, three NPs, verb, final period.

    Single spaces throughout, no intervening elements, exactly one
    terminal period.
    """
    nps = []
    for position in range(3):
        item = arr[position]
        lexeme_id = template.items[item - 1]
        override = template.determiner_overrides[item - 1]
        nps.append(inflect(lexicon, lexeme_id, seq[position], determiner_class=override))
    return f"{template.prefix} {nps[0]} {nps[1]} {nps[2]} {template.verb}."


def _record(template: Template, seq: CaseSequence, arr: Arrangement, lexicon: Lexicon) -> SentenceRecord:
    vtype = violation_type_of(seq)
    return SentenceRecord(
        id=sentence_id(template.id, seq, arr),
        template_id=template.id,
        text=realize(template, seq, arr, lexicon),
        case_sequence=seq,
        arrangement=arr,
        role_label=role_label(seq, arr),
        acceptable=vtype == "none",
        violation_type=vtype,
    )


def enumerate_acceptable(template: Template, lexicon: Lexicon) -> list[SentenceRecord]:
    """All 36 acceptable sentences of a template, in documented order."""
    return [
        _record(template, seq, arr, lexicon)
        for seq in ACCEPTABLE_SEQUENCES
        for arr in ARRANGEMENTS
    ]


def enumerate_violations(template: Template, lexicon: Lexicon) -> list[SentenceRecord]:
    """All 108 case-violation sentences of a template, 36 per doubled case."""
    return [
        _record(template, seq, arr, lexicon)
        for seq in VIOLATION_SEQUENCES
        for arr in ARRANGEMENTS
    ]


def variation_set_for(template_id: str, seq: CaseSequence, arr: Arrangement) -> MinimalVariationSet:
    """The minimal variation set anchored at one acceptable sentence.

    Members share template and arrangement and differ in exactly one
    position's case, replaced by a case already present elsewhere.
    """
    if len(set(seq)) != 3:
        raise GensetError(f"not an acceptable case sequence: {seq}")
    by_type: dict[str, list[str]] = {vtype: [] for vtype in VIOLATION_TYPES}
    for position in range(3):
        for replacement in CASES:
            if replacement == seq[position]:
                continue
            mutated = list(seq)
            mutated[position] = replacement
            vtype = f"double_{replacement.value}"
            by_type[vtype].append(sentence_id(template_id, tuple(mutated), arr))
    assert all(len(ids) == 2 for ids in by_type.values())
    return MinimalVariationSet(
        acceptable_id=sentence_id(template_id, seq, arr),
        by_type={vtype: tuple(sorted(ids)) for vtype, ids in by_type.items()},
    )


def check_template_items(template: Template, lexicon: Lexicon) -> None:
    """Validate item resolvability; warn (not reject) on unusual animacy."""
    animacies = [lexicon.lexeme(item).animacy for item in template.items]
    if animacies[0] != "human" or animacies[1] != "human":
        warnings.warn(
            f"template {template.id!r}: items 1 and 2 are expected to be human "
            f"(got {animacies[0]}, {animacies[1]})",
            stacklevel=2,
        )
    if animacies[2] == "human":
        warnings.warn(
            f"template {template.id!r}: item 3 is typically inanimate",
            stacklevel=2,
        )


def build_dataset(templates: Iterable[Template], lexicon: Lexicon) -> Dataset:
    """Generate all records and the minimal variation index.

    Per template: 36 acceptable records first, then 108 violations, in
    documented deterministic order. 144 records per template overall.
    """
    templates = list(templates)
    if not templates:
        raise GensetError("at least one template is required")
    seen: set[str] = set()
    for template in templates:
        if template.id in seen:
            raise GensetError(f"duplicate template id: {template.id!r}")
        seen.add(template.id)

    records: list[SentenceRecord] = []
    sets: dict[str, MinimalVariationSet] = {}
    for template in templates:
        check_template_items(template, lexicon)
        acceptable = enumerate_acceptable(template, lexicon)
        records.extend(acceptable)
        records.extend(enumerate_violations(template, lexicon))
        for record in acceptable:
            mvs = variation_set_for(template.id, record.case_sequence, record.arrangement)
            sets[record.id] = mvs
    return Dataset(records=records, sets=sets, template_ids=[t.id for t in templates])


def minimal_variation_set(
    dataset: Dataset, acceptable_id: str, restriction: str = "all"
) -> tuple[str, ...]:
    """Violation ids of one set: all 6, or the 2 for one doubled case."""
    record = dataset.by_id.get(acceptable_id)
    if record is None or not record.acceptable:
        raise GensetError(f"not an acceptable sentence id: {acceptable_id!r}")
    mvs = dataset.sets[acceptable_id]
    if restriction == "all":
        return mvs.violation_ids
    if restriction not in VIOLATION_TYPES:
        raise GensetError(f"unknown restriction: {restriction!r}")
    return mvs.by_type[restriction]


# ---------------------------------------------------------------------------
# Template and dataset files

# Template file schema: one JSON object per line with fields
#   id, prefix, verb, items (3 lexeme ids), determiner_overrides (optional),
#   gloss (optional)

def load_templates(source: Union[str, Path, IO[str], Iterable[str]]) -> list[Template]:
    lines = _read_lines(source)
    templates = []
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise GensetError(f"template line {lineno}: invalid JSON ({exc})") from None
        for fname in ("id", "prefix", "verb", "items"):
            if fname not in raw:
                raise GensetError(f"template line {lineno}: missing field {fname!r}")
        items = raw["items"]
        if not isinstance(items, list) or len(items) != 3:
            raise GensetError(f"template {raw['id']!r}: items must list exactly 3 lexeme ids")
        overrides = raw.get("determiner_overrides", [None, None, None])
        if not isinstance(overrides, list) or len(overrides) != 3:
            raise GensetError(f"template {raw['id']!r}: determiner_overrides must have 3 entries")
        templates.append(
            Template(
                id=raw["id"],
                prefix=raw["prefix"],
                verb=raw["verb"],
                items=tuple(items),
                determiner_overrides=tuple(overrides),
                gloss=raw.get("gloss"),
            )
        )
    return templates


# Dataset file schema (stable): one JSON object per line with fields
#   id, template_id, text, case_sequence ("NDA"), arrangement ("123"),
#   role_label, acceptable, violation_type

def record_to_json(record: SentenceRecord) -> str:
    return json.dumps(
        {
            "id": record.id,
            "template_id": record.template_id,
            "text": record.text,
            "case_sequence": case_order_label(record.case_sequence),
            "arrangement": arrangement_label(record.arrangement),
            "role_label": record.role_label,
            "acceptable": record.acceptable,
            "violation_type": record.violation_type,
        },
        ensure_ascii=False,
        sort_keys=True,
        separators=(",", ":"),
    )


def record_from_json(line: str) -> SentenceRecord:
    raw = json.loads(line)
    return SentenceRecord(
        id=raw["id"],
        template_id=raw["template_id"],
        text=raw["text"],
        case_sequence=parse_case_order(raw["case_sequence"]),
        arrangement=parse_arrangement(raw["arrangement"]),
        role_label=raw["role_label"],
        acceptable=raw["acceptable"],
        violation_type=raw["violation_type"],
    )


def dataset_to_lines(dataset: Dataset) -> Iterable[str]:
    """Newline-terminated JSON lines, ready for writelines or join."""
    for record in dataset.records:
        yield record_to_json(record) + "\n"


def sets_to_lines(dataset: Dataset) -> Iterable[str]:
    for record in dataset.records:
        if not record.acceptable:
            continue
        mvs = dataset.sets[record.id]
        payload = {"acceptable_id": mvs.acceptable_id}
        payload.update({vtype: list(mvs.by_type[vtype]) for vtype in VIOLATION_TYPES})
        yield json.dumps(payload, ensure_ascii=False, sort_keys=True, separators=(",", ":")) + "\n"


def read_dataset(path: Union[str, Path]) -> Dataset:
    """Load a dataset file; the variation index is rebuilt from the records."""
    records = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            records.append(record_from_json(line))
    sets = {}
    template_ids: list[str] = []
    for record in records:
        if record.template_id not in template_ids:
            template_ids.append(record.template_id)
        if record.acceptable:
            sets[record.id] = variation_set_for(
                record.template_id, record.case_sequence, record.arrangement
            )
    return Dataset(records=records, sets=sets, template_ids=template_ids)


def _read_lines(source) -> Iterable[str]:
    if isinstance(source, (str, Path)):
        return Path(source).read_text(encoding="utf-8").splitlines()
    return source
