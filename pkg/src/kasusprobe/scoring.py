"""Sentence scoring: native unigram/bigram baselines and the file-based
adapter for external scorers.

Native models assign a sentence the chain-rule log probability
``sum_i log P(w_i | context_i)`` under natural log. The unigram model uses
maximum-likelihood token probabilities; the bigram model applies add-one
(Laplace) smoothing with a single beginning-of-sentence boundary token as
the initial context and no end token (the terminal period already closes
sentences).

External scorers (e.g. causal LMs scoring via the chain rule, or masked
models scoring via pseudo-log-likelihood: mask each position in turn and
sum the conditional log probabilities of the masked tokens) run out of
process. They consume a request file of ``<id>\\t<text>`` lines and must
return a score file of ``<id>\\t<score>`` lines, one finite
log-probability-like value per sentence, higher = more acceptable. This
module writes the requests and validates the responses; it never runs a
neural network.

Conventions that are otherwise arbitrary are fixed here: vocabulary
defaults to the 50,000 most frequent tokens, unknown tokens map to a
reserved UNK symbol during both training and scoring, and punctuation
tokens count unless explicitly stripped.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Callable, Iterable, Sequence, Union

DEFAULT_VOCAB_SIZE = 50_000
UNK = "<unk>"
BOS = "<s>"
_RESERVED = (UNK, BOS)

_TERMINAL_PUNCT = ".,!?"


class ScoringError(ValueError):
    """Training, scoring or score-file import failure."""


def tokenize(text: str) -> list[str]:
    """Whitespace tokenization with terminal punctuation (. , ! ?) detached
    as separate tokens. Capitalization is preserved: German case morphology
    is capitalization-sensitive.
    """
    tokens: list[str] = []
    for chunk in text.split():
        trailing: list[str] = []
        while chunk and chunk[-1] in _TERMINAL_PUNCT:
            trailing.append(chunk[-1])
            chunk = chunk[:-1]
        if chunk:
            tokens.append(chunk)
        tokens.extend(reversed(trailing))
    return tokens


def strip_punctuation(tokens: Sequence[str]) -> list[str]:
    return [t for t in tokens if t not in set(_TERMINAL_PUNCT)]


@dataclass
class NgramModel:
    """Vocabulary-capped unigram or bigram counts with smoothed queries.

    ``vocab`` holds the top-``vocab_size`` training tokens plus UNK. For the
    bigram model the smoothing vocabulary additionally counts the BOS
    context token, so smoothed conditionals form a proper distribution over
    vocab + {BOS} and sum to 1 for every context.
    """

    order: int
    vocab_size: int
    unigram_counts: dict[str, int]
    bigram_counts: dict[str, dict[str, int]]
    total_tokens: int
    smoothing: bool = True
    context_totals: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ScoringError(f"order must be 1 or 2, got {self.order}")
        self.context_totals = {
            context: sum(successors.values())
            for context, successors in self.bigram_counts.items()
        }

    @property
    def vocab(self) -> set[str]:
        return set(self.unigram_counts)

    @property
    def smoothing_vocab_size(self) -> int:
        # UNK is already a vocab entry; BOS joins only for order 2.
        return len(self.unigram_counts) + (1 if self.order == 2 else 0)

    def map_token(self, token: str) -> str:
        return token if token in self.unigram_counts else UNK

    def log_prob(self, token: str, context: str | None = None) -> float:
        """Natural-log probability of one (possibly UNK-mapped) token."""
        token = self.map_token(token)
        if self.order == 1:
            count = self.unigram_counts[token]
            if count == 0:
                return float("-inf")
            return math.log(count / self.total_tokens)
        ctx = BOS if context is None or context == BOS else self.map_token(context)
        num = self.bigram_counts.get(ctx, {}).get(token, 0) + 1
        den = self.context_totals.get(ctx, 0) + self.smoothing_vocab_size
        return math.log(num / den)


def train_ngram(
    corpus: Union[Callable[[], Iterable[Sequence[str]]], Iterable[Sequence[str]]],
    order: int,
    vocab_size: int = DEFAULT_VOCAB_SIZE,
) -> NgramModel:
    """Train from a corpus of token sequences (one per sentence).

    ``corpus`` is either a re-iterable collection or a zero-argument
    callable returning a fresh iterator, which keeps large corpora
    streamable: training makes two passes, one to pick the vocabulary
    (top-``vocab_size`` by frequency, ties broken lexicographically) and one
    to count with out-of-vocabulary tokens mapped to UNK. Counting is exact
    and associative, so partitioned counting merges to the same model.
    """
    if vocab_size < 1:
        raise ScoringError("vocab_size must be >= 1")
    if order not in (1, 2):
        raise ScoringError(f"order must be 1 or 2, got {order}")

    if callable(corpus):
        make_pass = corpus
    else:
        materialized = corpus if isinstance(corpus, (list, tuple)) else list(corpus)
        make_pass = lambda: materialized  # noqa: E731

    raw_counts: dict[str, int] = {}
    for sentence in make_pass():
        if isinstance(sentence, str):
            raise ScoringError(
                "corpus sentences must be token sequences, not raw strings; "
                "run tokenize() on each line first"
            )
        for token in sentence:
            if token in _RESERVED:
                raise ScoringError(f"corpus contains reserved token {token!r}")
            raw_counts[token] = raw_counts.get(token, 0) + 1
    if not raw_counts:
        raise ScoringError("empty corpus: no tokens to train on")

    top = sorted(raw_counts.items(), key=lambda kv: (-kv[1], kv[0]))[:vocab_size]
    vocab = {token for token, _ in top}

    unigram_counts = {token: 0 for token in vocab}
    unigram_counts[UNK] = 0
    bigram_counts: dict[str, dict[str, int]] = {}
    total = 0
    for sentence in make_pass():
        previous = BOS
        for token in sentence:
            mapped = token if token in vocab else UNK
            unigram_counts[mapped] += 1
            total += 1
            if order == 2:
                bigram_counts.setdefault(previous, {})
                bigram_counts[previous][mapped] = bigram_counts[previous].get(mapped, 0) + 1
                previous = mapped
    return NgramModel(
        order=order,
        vocab_size=vocab_size,
        unigram_counts=unigram_counts,
        bigram_counts=bigram_counts,
        total_tokens=total,
    )


def score_chain(model: NgramModel, tokens: Sequence[str]) -> float:
    """Chain-rule log probability of a token sequence under the model.

    Unigram scores are sums of independent token log probabilities (and so
    are permutation-invariant); bigram scores condition each token on its
    predecessor, starting from the BOS boundary.
    """
    if not tokens:
        raise ScoringError("cannot score an empty token stream")
    if model.order == 1:
        return math.fsum(model.log_prob(token) for token in tokens)
    terms = []
    context = BOS
    for token in tokens:
        terms.append(model.log_prob(token, context))
        context = model.map_token(token)
    return math.fsum(terms)


# ---------------------------------------------------------------------------
# Model serialization (exact round trip: counts are integers)

MODEL_FORMAT = "kasusprobe-ngram/1"


def model_to_json(model: NgramModel) -> str:
    return json.dumps(
        {
            "format": MODEL_FORMAT,
            "order": model.order,
            "vocab_size": model.vocab_size,
            "smoothing": model.smoothing,
            "total_tokens": model.total_tokens,
            "unigram_counts": model.unigram_counts,
            "bigram_counts": model.bigram_counts,
        },
        ensure_ascii=False,
        sort_keys=True,
        separators=(",", ":"),
    )


def model_from_json(text: str) -> NgramModel:
    raw = json.loads(text)
    if raw.get("format") != MODEL_FORMAT:
        raise ScoringError(f"unsupported model format: {raw.get('format')!r}")
    return NgramModel(
        order=raw["order"],
        vocab_size=raw["vocab_size"],
        unigram_counts=raw["unigram_counts"],
        bigram_counts=raw["bigram_counts"],
        total_tokens=raw["total_tokens"],
        smoothing=raw["smoothing"],
    )


def save_model(model: NgramModel, path: Union[str, Path]) -> None:
    Path(path).write_text(model_to_json(model) + "\n", encoding="utf-8")


def load_model(path: Union[str, Path]) -> NgramModel:
    return model_from_json(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Score tables and the external-scorer file contract

@dataclass
class ScoreTable:
    """Sentence id -> score, with scorer provenance. Scores must be finite;
    any parameters of the producing scorer live only in ``scorer_name``.
    """

    scorer_name: str
    entries: dict[str, float] = field(default_factory=dict)

    def add(self, sentence_id: str, score: float) -> None:
        if sentence_id in self.entries:
            raise ScoringError(f"duplicate score for sentence {sentence_id!r}")
        if not math.isfinite(score):
            raise ScoringError(f"non-finite score for sentence {sentence_id!r}: {score!r}")
        self.entries[sentence_id] = score

    def __getitem__(self, sentence_id: str) -> float:
        return self.entries[sentence_id]

    def __contains__(self, sentence_id: str) -> bool:
        return sentence_id in self.entries

    def __len__(self) -> int:
        return len(self.entries)


def requests_to_text(records) -> str:
    """The scoring request file: one ``<id>\\t<text>`` line per sentence,
    LF-terminated, in dataset order."""
    return "".join(f"{record.id}\t{record.text}\n" for record in records)


def export_requests(records, destination: Union[str, Path, IO[str]]) -> int:
    """Write the scoring request file (see :func:`requests_to_text`),
    UTF-8. Returns the line count."""
    records = list(records)
    text = requests_to_text(records)
    if isinstance(destination, (str, Path)):
        Path(destination).write_text(text, encoding="utf-8", newline="\n")
    else:
        destination.write(text)
    return len(records)


def import_scores(
    source: Union[str, Path, IO[str], Iterable[str]],
    scorer_name: str = "external",
    known_ids: set[str] | None = None,
) -> ScoreTable:
    """Parse a score file (``<id>\\t<score>`` per line).

    Rejects malformed lines, duplicate ids, non-finite scores and, when
    ``known_ids`` is given, ids outside it, naming the offending line.
    Completeness relative to a dataset is checked separately with
    :func:`missing_ids`.
    """
    if isinstance(source, (str, Path)):
        lines: Iterable[str] = Path(source).read_text(encoding="utf-8").splitlines()
    else:
        lines = source
    table = ScoreTable(scorer_name=scorer_name)
    for lineno, line in enumerate(lines, start=1):
        line = line.rstrip("\n")
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ScoringError(f"score line {lineno}: expected '<id>\\t<score>', got {line!r}")
        sentence_id, score_text = parts
        try:
            score = float(score_text)
        except ValueError:
            raise ScoringError(f"score line {lineno}: bad score {score_text!r}") from None
        if known_ids is not None and sentence_id not in known_ids:
            raise ScoringError(f"score line {lineno}: unknown sentence id {sentence_id!r}")
        if not math.isfinite(score):
            raise ScoringError(f"score line {lineno}: non-finite score for {sentence_id!r}")
        if sentence_id in table:
            raise ScoringError(f"score line {lineno}: duplicate sentence id {sentence_id!r}")
        table.entries[sentence_id] = score
    return table


def scores_to_text(table: ScoreTable) -> str:
    """Score file body, ``<id>\\t<score>`` per line; ``repr`` keeps floats
    round-trip exact."""
    return "".join(f"{sid}\t{score!r}\n" for sid, score in table.entries.items())


def save_scores(table: ScoreTable, path: Union[str, Path]) -> None:
    Path(path).write_text(scores_to_text(table), encoding="utf-8", newline="\n")


def missing_ids(table: ScoreTable, ids: Iterable[str]) -> list[str]:
    """Ids from a dataset that the table does not cover, in input order."""
    return [sid for sid in ids if sid not in table]


def score_records(
    model: NgramModel,
    records,
    scorer_name: str | None = None,
    include_punctuation: bool = True,
) -> ScoreTable:
    """Score dataset records with a native n-gram model.

    Raises if a sentence receives a non-finite score, which happens only
    when UNK got zero training mass and the sentence contains
    out-of-vocabulary tokens; retrain with a smaller vocabulary cap or a
    corpus that covers the dataset.
    """
    if scorer_name is None:
        scorer_name = "unigram" if model.order == 1 else "bigram"
    table = ScoreTable(scorer_name=scorer_name)
    for record in records:
        tokens = tokenize(record.text)
        if not include_punctuation:
            tokens = strip_punctuation(tokens)
        score = score_chain(model, tokens)
        if not math.isfinite(score):
            raise ScoringError(
                f"sentence {record.id!r} scored {score!r}; the model's UNK token has "
                "zero probability mass and the sentence has out-of-vocabulary tokens"
            )
        table.add(record.id, score)
    return table
