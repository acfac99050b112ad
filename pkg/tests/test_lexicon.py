import json

import pytest

from kasusprobe import lexicon
from kasusprobe.lexicon import (
    CASES,
    Case,
    Lexeme,
    Lexicon,
    SchemaError,
    UnknownLexemeError,
    inflect,
    load_lexicon,
)


def make_lexeme(lid="soldat", det="definite", **forms):
    noun_forms = {
        Case.NOM: forms.get("nom", "Soldat"),
        Case.ACC: forms.get("acc", "Soldaten"),
        Case.DAT: forms.get("dat", "Soldat"),
    }
    return Lexeme(id=lid, noun_forms=noun_forms, determiner_class=det, animacy="human")


def lexicon_of(*lexemes):
    return Lexicon(lexemes={l.id: l for l in lexemes})


def test_case_letters():
    assert [c.letter for c in CASES] == ["N", "A", "D"]


def test_inflect_paradigm_cells():
    lex = lexicon_of(make_lexeme())
    assert inflect(lex, "soldat", Case.NOM) == "der Soldat"
    assert inflect(lex, "soldat", Case.ACC) == "den Soldaten"
    assert inflect(lex, "soldat", Case.DAT) == "dem Soldat"


def test_inflect_indefinite_class():
    brief = Lexeme(
        id="brief",
        noun_forms={Case.NOM: "Brief", Case.ACC: "Brief", Case.DAT: "Brief"},
        determiner_class="indefinite",
        animacy="inanimate",
    )
    lex = lexicon_of(brief)
    assert inflect(lex, "brief", Case.ACC) == "einen Brief"
    assert inflect(lex, "brief", Case.DAT) == "einem Brief"


def test_inflect_determiner_override():
    lex = lexicon_of(make_lexeme())
    assert inflect(lex, "soldat", Case.NOM, determiner_class="indefinite") == "ein Soldat"


def test_three_realizations_are_pairwise_distinct():
    # The determiner alone separates the cases even when the noun form is
    # constant, which is the property generation relies on.
    lex = lexicon_of(make_lexeme(nom="Offizier", acc="Offizier", dat="Offizier"))
    nps = {inflect(lex, "soldat", case) for case in CASES}
    assert len(nps) == 3


def test_unknown_lexeme_error_carries_id():
    lex = lexicon_of(make_lexeme())
    with pytest.raises(UnknownLexemeError) as exc:
        inflect(lex, "general", Case.NOM)
    assert exc.value.lexeme_id == "general"


def test_unknown_determiner_class_rejected():
    lex = lexicon_of(make_lexeme())
    with pytest.raises(SchemaError):
        inflect(lex, "soldat", Case.NOM, determiner_class="demonstrative")


def test_lexeme_requires_all_three_cases():
    with pytest.raises(SchemaError) as exc:
        Lexeme(
            id="x",
            noun_forms={Case.NOM: "X", Case.ACC: "X"},
            determiner_class="definite",
            animacy="human",
        )
    assert exc.value.lexeme_id == "x"


def test_lexeme_rejects_bad_animacy():
    with pytest.raises(SchemaError):
        Lexeme(
            id="x",
            noun_forms={c: "X" for c in CASES},
            determiner_class="definite",
            animacy="abstract",
        )


def test_determiners_must_be_distinct_per_class():
    determiners = dict(lexicon.DEFAULT_DETERMINERS)
    determiners[("definite", Case.DAT)] = "der"
    with pytest.raises(SchemaError):
        Lexicon(lexemes={}, determiners=determiners)


def test_load_lexicon_roundtrip(tmp_path):
    path = tmp_path / "lex.jsonl"
    rows = [
        {
            "id": "soldat",
            "nom": "Soldat",
            "acc": "Soldaten",
            "dat": "Soldat",
            "determiner_class": "definite",
            "animacy": "human",
            "gloss": "soldier",
        },
        {
            "id": "brief",
            "nom": "Brief",
            "acc": "Brief",
            "dat": "Brief",
            "determiner_class": "indefinite",
            "animacy": "inanimate",
        },
    ]
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    lex = load_lexicon(path)
    assert len(lex) == 2
    assert "soldat" in lex and "brief" in lex
    assert lex.lexeme("soldat").gloss == "soldier"
    assert lex.lexeme("brief").gloss is None


def test_load_lexicon_duplicate_id(tmp_path):
    row = '{"id":"a","nom":"A","acc":"A","dat":"A","determiner_class":"definite","animacy":"human"}'
    path = tmp_path / "lex.jsonl"
    path.write_text(row + "\n" + row + "\n", encoding="utf-8")
    with pytest.raises(SchemaError, match="duplicate"):
        load_lexicon(path)


def test_load_lexicon_missing_field_names_field():
    line = '{"id":"a","nom":"A","acc":"A","determiner_class":"definite","animacy":"human"}'
    with pytest.raises(SchemaError) as exc:
        load_lexicon([line])
    assert exc.value.field == "dat"
    assert exc.value.lexeme_id == "a"


def test_load_lexicon_bad_json_names_line():
    with pytest.raises(SchemaError, match="line 2"):
        load_lexicon(
            [
                '{"id":"a","nom":"A","acc":"A","dat":"A","determiner_class":"definite","animacy":"human"}',
                "{not json",
            ]
        )


def test_load_lexicon_skips_blank_lines():
    lex = load_lexicon(
        [
            "",
            '{"id":"a","nom":"A","acc":"A","dat":"A","determiner_class":"definite","animacy":"human"}',
            "   ",
        ]
    )
    assert len(lex) == 1
