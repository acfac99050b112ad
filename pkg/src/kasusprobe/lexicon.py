"""German noun-phrase paradigms and case-marked NP realization.

Only masculine singular paradigms are supported: masculine singular is the
one German paradigm where nominative, accusative and dative determiners are
all distinct, so every case swap is visible on the surface. Noun forms are
stored verbatim per case instead of being derived by declension rules;
weak-noun inflection is irregular and curators may deliberately prefer
colloquial variants (e.g. dative "dem Soldat" next to accusative
"den Soldaten").
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Union


class Case(enum.Enum):
    """Morphological case of a noun phrase."""

    NOM = "NOM"
    ACC = "ACC"
    DAT = "DAT"

    @property
    def letter(self) -> str:
        return self.value[0]


CASES = (Case.NOM, Case.ACC, Case.DAT)

#: Semantic role selected by each case in the ditransitive frame:
#: nominative marks the agent, accusative the patient, dative the recipient.
CASE_ROLE = {Case.NOM: "ag", Case.ACC: "pa", Case.DAT: "re"}

DETERMINER_CLASSES = ("definite", "indefinite")
ANIMACY_VALUES = ("human", "inanimate")

#: Masculine singular determiner paradigm.
DEFAULT_DETERMINERS = {
    ("definite", Case.NOM): "der",
    ("definite", Case.ACC): "den",
    ("definite", Case.DAT): "dem",
    ("indefinite", Case.NOM): "ein",
    ("indefinite", Case.ACC): "einen",
    ("indefinite", Case.DAT): "einem",
}


class LexiconError(ValueError):
    """Base class for lexicon loading and lookup failures."""


class SchemaError(LexiconError):
    """A lexeme record violates the lexicon schema."""

    def __init__(self, message: str, *, lexeme_id: str | None = None, field: str | None = None):
        super().__init__(message)
        self.lexeme_id = lexeme_id
        self.field = field


class UnknownLexemeError(LexiconError):
    def __init__(self, lexeme_id: str):
        super().__init__(f"unknown lexeme id: {lexeme_id!r}")
        self.lexeme_id = lexeme_id


@dataclass(frozen=True)
class Lexeme:
    """One masculine singular noun with its curated case forms.

    ``noun_forms`` must cover exactly NOM, ACC and DAT. ``animacy`` is
    curated metadata used for reporting and template sanity warnings only;
    it never influences generation.
    """

    id: str
    noun_forms: dict[Case, str]
    determiner_class: str
    animacy: str
    gloss: str | None = None

    def __post_init__(self):
        if set(self.noun_forms) != set(CASES):
            missing = [c.value for c in CASES if c not in self.noun_forms]
            raise SchemaError(
                f"lexeme {self.id!r}: noun_forms must cover NOM, ACC, DAT (missing {missing})",
                lexeme_id=self.id,
                field=missing[0].lower() if missing else None,
            )
        if self.determiner_class not in DETERMINER_CLASSES:
            raise SchemaError(
                f"lexeme {self.id!r}: determiner_class must be one of {DETERMINER_CLASSES}",
                lexeme_id=self.id,
                field="determiner_class",
            )
        if self.animacy not in ANIMACY_VALUES:
            raise SchemaError(
                f"lexeme {self.id!r}: animacy must be one of {ANIMACY_VALUES}",
                lexeme_id=self.id,
                field="animacy",
            )


@dataclass(frozen=True)
class Lexicon:
    """Immutable collection of lexemes plus the determiner paradigm.

    Safe for unrestricted shared read access once constructed.
    """

    lexemes: dict[str, Lexeme]
    determiners: dict[tuple[str, Case], str] = field(
        default_factory=lambda: dict(DEFAULT_DETERMINERS)
    )

    def __post_init__(self):
        for det_class in DETERMINER_CLASSES:
            forms = [self.determiners.get((det_class, case)) for case in CASES]
            if any(f is None for f in forms):
                raise SchemaError(f"determiner table incomplete for class {det_class!r}")
            if len(set(forms)) != len(forms):
                # Distinct determiner forms are what make the three NP
                # realizations of a lexeme pairwise distinct.
                raise SchemaError(
                    f"determiner forms for class {det_class!r} must be pairwise distinct: {forms}"
                )

    def __contains__(self, lexeme_id: str) -> bool:
        return lexeme_id in self.lexemes

    def __len__(self) -> int:
        return len(self.lexemes)

    def lexeme(self, lexeme_id: str) -> Lexeme:
        try:
            return self.lexemes[lexeme_id]
        except KeyError:
            raise UnknownLexemeError(lexeme_id) from None


# Public lexicon file schema: one JSON object per line, UTF-8, with fields
#   id, nom, acc, dat, determiner_class, animacy, gloss (optional)
_REQUIRED_FIELDS = ("id", "nom", "acc", "dat", "determiner_class", "animacy")
_CASE_FIELDS = {"nom": Case.NOM, "acc": Case.ACC, "dat": Case.DAT}


def load_lexicon(source: Union[str, Path, IO[str], Iterable[str]]) -> Lexicon:
    """Load a lexicon from a JSONL document (path, open file or lines).

    Raises :class:`SchemaError` naming the offending lexeme and field, and
    on duplicate lexeme ids.
    """
    lines = _read_lines(source)
    lexemes: dict[str, Lexeme] = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"lexicon line {lineno}: invalid JSON ({exc})") from None
        if not isinstance(raw, dict):
            raise SchemaError(f"lexicon line {lineno}: expected an object")
        lexeme_id = raw.get("id")
        if not isinstance(lexeme_id, str) or not lexeme_id:
            raise SchemaError(f"lexicon line {lineno}: missing field 'id'", field="id")
        for fname in _REQUIRED_FIELDS:
            value = raw.get(fname)
            if not isinstance(value, str) or not value:
                raise SchemaError(
                    f"lexeme {lexeme_id!r}: missing field {fname!r}",
                    lexeme_id=lexeme_id,
                    field=fname,
                )
        if lexeme_id in lexemes:
            raise SchemaError(f"duplicate lexeme id: {lexeme_id!r}", lexeme_id=lexeme_id, field="id")
        gloss = raw.get("gloss")
        if gloss is not None and not isinstance(gloss, str):
            raise SchemaError(
                f"lexeme {lexeme_id!r}: gloss must be a string",
                lexeme_id=lexeme_id,
                field="gloss",
            )
        lexemes[lexeme_id] = Lexeme(
            id=lexeme_id,
            noun_forms={case: raw[fname] for fname, case in _CASE_FIELDS.items()},
            determiner_class=raw["determiner_class"],
            animacy=raw["animacy"],
            gloss=gloss,
        )
    return Lexicon(lexemes=lexemes)


def inflect(
    lexicon: Lexicon,
    lexeme_id: str,
    case: Case,
    determiner_class: str | None = None,
) -> str:
    """Realize the full NP (determiner + noun form) for one case.

    ``determiner_class`` overrides the lexeme's own class; templates may use
    this for slots where the curated default is not wanted. Deterministic
    and total over loaded lexemes and the three cases.
    """
    lexeme = lexicon.lexeme(lexeme_id)
    det_class = determiner_class if determiner_class is not None else lexeme.determiner_class
    if det_class not in DETERMINER_CLASSES:
        raise SchemaError(f"unknown determiner class {det_class!r}", field="determiner_class")
    determiner = lexicon.determiners[(det_class, case)]
    return f"{determiner} {lexeme.noun_forms[case]}"


def _read_lines(source) -> Iterable[str]:
    if isinstance(source, (str, Path)):
        return Path(source).read_text(encoding="utf-8").splitlines()
    return source
