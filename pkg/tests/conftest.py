"""Shared fixtures plus the acceptance-criteria summary.

Tests marked ``@pytest.mark.acceptance("<criterion>")`` get one PASS/FAIL
line each at the end of the run, so the acceptance status is readable
without scrolling the full report.
"""

import pytest

from kasusprobe import genset, lexicon

_results: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    name = getattr(report, "_acceptance_name", None)
    if name is None:
        return
    outcome = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
    # A criterion may be split over several tests; any failure wins.
    if _results.get(name) != "FAIL":
        _results[name] = outcome


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is not None:
        report._acceptance_name = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _results.items():
        terminalreporter.write_line(f"ACCEPTANCE {outcome:4s} {name}")


# ---------------------------------------------------------------------------
# Shared data fixtures

@pytest.fixture(scope="session")
def sample_lexicon():
    from importlib import resources

    return lexicon.load_lexicon(
        str(resources.files("kasusprobe").joinpath("data", "sample_lexicon.jsonl"))
    )


@pytest.fixture(scope="session")
def sample_templates():
    from importlib import resources

    return genset.load_templates(
        str(resources.files("kasusprobe").joinpath("data", "sample_templates.jsonl"))
    )


@pytest.fixture(scope="session")
def sample_dataset(sample_templates, sample_lexicon):
    return genset.build_dataset(sample_templates, sample_lexicon)


def synth_lexicon(n_templates: int) -> lexicon.Lexicon:
    """A lexicon with 3 distinct nouns per synthetic template."""
    lexemes = {}
    for i in range(n_templates):
        for j, (animacy, det) in enumerate(
            (("human", "definite"), ("human", "definite"), ("inanimate", "indefinite"))
        ):
            lid = f"noun{i}_{j}"
            stem = f"N{i}x{j}"
            lexemes[lid] = lexicon.Lexeme(
                id=lid,
                noun_forms={
                    lexicon.Case.NOM: stem,
                    lexicon.Case.ACC: stem + "n",
                    lexicon.Case.DAT: stem + "m",
                },
                determiner_class=det,
                animacy=animacy,
            )
    return lexicon.Lexicon(lexemes=lexemes)


def synth_templates(n_templates: int) -> list[genset.Template]:
    return [
        genset.Template(
            id=f"t{i:03d}",
            prefix="Er sagte, dass",
            verb=f"verbt{i}",
            items=(f"noun{i}_0", f"noun{i}_1", f"noun{i}_2"),
        )
        for i in range(n_templates)
    ]


@pytest.fixture(scope="session")
def big_dataset():
    """50 synthetic templates, the size the full probe uses."""
    return genset.build_dataset(synth_templates(50), synth_lexicon(50))
