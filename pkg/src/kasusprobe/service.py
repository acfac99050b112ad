"""Rating-session service for human annotators.

Builds seeded assignments under the collection constraints (216 test
sentences, at most 5 per template, exactly 25% acceptable, no repeats per
annotator, a global cap of 3 assignments per sentence), serves them one
item at a time over a small versioned HTTP/JSON interface, and persists
ratings to an append-only log that survives restarts.
"""

from __future__ import annotations

import json
import os
import random
import re
import threading
import time
import uuid
from dataclasses import dataclass, field
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

from .genset import Dataset
from .metrics import AnnotationRecord

API_VERSION = "v1"

# Annotators are asked to judge how natural a sentence sounds on a 0-99
# slider, explicitly setting aside how likely the described situation is.
# Instructions are delivered in German only.
RATING_INSTRUCTION = (
    "Bewerten Sie, wie natürlich dieser Satz klingt, auf einer Skala von 0 "
    "(„nicht natürlich“) bis 99 („sehr natürlich“). "
    "Beurteilen Sie allein die sprachliche Natürlichkeit, unabhängig davon, "
    "ob die beschriebene Situation wahrscheinlich ist oder nicht."
)
WARMUP_INSTRUCTION = (
    "Aufwärmphase: Dieser Satz ist ein Beispiel. Bewerten Sie ihn wie "
    "gewohnt, um sich mit der Skala vertraut zu machen. "
) + RATING_INSTRUCTION

RATING_MIN = 0
RATING_MAX = 99


class ServiceError(Exception):
    """Base class for request failures, carrying an HTTP status."""

    status = HTTPStatus.BAD_REQUEST


class CapacityError(ServiceError):
    status = HTTPStatus.CONFLICT


class UnknownSessionError(ServiceError):
    status = HTTPStatus.NOT_FOUND


class RatingError(ServiceError):
    status = HTTPStatus.BAD_REQUEST


class DuplicateRatingError(ServiceError):
    status = HTTPStatus.CONFLICT


@dataclass(frozen=True)
class AssignmentConfig:
    """Knobs for assignment composition.

    Defaults reproduce the collection protocol; tests and demos shrink
    them (a 3-template sample dataset cannot host 216-item assignments).
    """

    test_items: int = 216
    max_per_template: int = 5
    acceptable_fraction: float = 0.25
    target_annotations: int = 3
    filler_interval: int = 12  # one filler per this many test items; 0 disables
    warmup_items: int = 6

    def __post_init__(self):
        if self.test_items <= 0 or self.max_per_template <= 0:
            raise ValueError("test_items and max_per_template must be positive")
        if self.filler_interval < 0 or self.warmup_items < 0:
            raise ValueError("filler_interval and warmup_items must be >= 0")
        if self.target_annotations <= 0:
            raise ValueError("target_annotations must be positive")
        acc = self.test_items * self.acceptable_fraction
        if abs(acc - round(acc)) > 1e-9:
            raise ValueError(
                f"acceptable_fraction {self.acceptable_fraction} of {self.test_items} "
                "test items is not a whole number"
            )

    @property
    def acceptable_items(self) -> int:
        return round(self.test_items * self.acceptable_fraction)

    @property
    def filler_items(self) -> int:
        return self.test_items // self.filler_interval if self.filler_interval else 0


@dataclass(frozen=True)
class FillerItem:
    """A sentence with a known, obvious judgment, used for warm-up and
    attention checks. ``source_id`` ties it back to the dataset sentence
    it was derived from, if any."""

    id: str
    text: str
    kind: str  # acceptable | violation
    source_id: str = ""

    def __post_init__(self):
        if self.kind not in ("acceptable", "violation"):
            raise ValueError(f"filler kind must be acceptable or violation, got {self.kind!r}")


def derive_filler_pool(dataset: Dataset, per_kind: int = 60, seed: int = 0) -> list[FillerItem]:
    """Draw filler sentences from the dataset itself.

    Acceptable sentences serve as acceptable fillers and case violations
    as violation fillers (any case violation is an obvious error to a
    proficient speaker). Filler ids are prefixed so they never collide
    with test sentence ids.
    """
    # Seed under a stream-specific label: a plain integer seed here would
    # replay the same shuffle an equally seeded assignment draw uses, and
    # the pool's sources would then collide with that assignment's test
    # picks (which the eligibility filter must exclude).
    rng = random.Random(f"filler-pool:{seed}")
    acceptable = [r for r in dataset.records if r.acceptable]
    violations = [r for r in dataset.records if not r.acceptable]
    rng.shuffle(acceptable)
    rng.shuffle(violations)
    pool = []
    for record in acceptable[:per_kind]:
        pool.append(
            FillerItem(id=f"filler:acc:{record.id}", text=record.text, kind="acceptable", source_id=record.id)
        )
    for record in violations[:per_kind]:
        pool.append(
            FillerItem(id=f"filler:vio:{record.id}", text=record.text, kind="violation", source_id=record.id)
        )
    return pool


@dataclass(frozen=True)
class AssignmentItem:
    sentence_id: str
    text: str
    is_warmup: bool = False
    is_filler: bool = False
    filler_kind: str = "none"
    source_id: str = ""  # dataset sentence a filler was derived from


@dataclass(frozen=True)
class Assignment:
    annotator_id: str
    seed: int
    items: tuple[AssignmentItem, ...]

    @property
    def item_ids(self) -> tuple[str, ...]:
        return tuple(item.sentence_id for item in self.items)

    @property
    def test_ids(self) -> tuple[str, ...]:
        return tuple(i.sentence_id for i in self.items if not i.is_filler and not i.is_warmup)


_GREEDY_RETRIES = 25


def _pick(
    rng: random.Random,
    candidates: list,
    count: int,
    template_counts: dict[str, int],
    cap: int,
) -> Optional[list]:
    """One greedy pass over a shuffled candidate list, honoring the
    per-template cap. Returns None if the quota cannot be met."""
    pool = list(candidates)
    rng.shuffle(pool)
    chosen = []
    for record in pool:
        if len(chosen) == count:
            break
        if template_counts.get(record.template_id, 0) >= cap:
            continue
        template_counts[record.template_id] = template_counts.get(record.template_id, 0) + 1
        chosen.append(record)
    return chosen if len(chosen) == count else None


def create_assignment(
    annotator_id: str,
    dataset: Dataset,
    filler_pool: Sequence[FillerItem],
    seed: int,
    usage: Optional[Mapping[str, int]] = None,
    prior_sentences: Optional[set] = None,
    config: Optional[AssignmentConfig] = None,
) -> Assignment:
    """Compose one annotator's assignment from the remaining capacity.

    Pure given its inputs: the same seed, usage map and prior set yield
    byte-identical assignments. ``usage`` counts how many assignments
    each test sentence already appears in (the global cap is enforced
    here, at hand-out time). ``prior_sentences`` holds every item id the
    annotator has been served before, so nothing is ever rated twice by
    the same person.
    """
    config = config or AssignmentConfig()
    usage = usage or {}
    prior = prior_sentences or set()
    # The annotator id joins the seed so equal integer seeds still give
    # different annotators independent draws, and no draw replays the
    # filler pool's shuffle (see derive_filler_pool).
    rng = random.Random(f"assignment:{annotator_id}:{seed}")

    def has_capacity(record) -> bool:
        return (
            usage.get(record.id, 0) < config.target_annotations
            and record.id not in prior
        )

    acceptable = [r for r in dataset.records if r.acceptable and has_capacity(r)]
    violations = [r for r in dataset.records if not r.acceptable and has_capacity(r)]
    n_acc = config.acceptable_items
    n_vio = config.test_items - n_acc

    test_records = None
    for _ in range(_GREEDY_RETRIES):
        counts: dict[str, int] = {}
        picked_acc = _pick(rng, acceptable, n_acc, counts, config.max_per_template)
        if picked_acc is None:
            continue
        picked_vio = _pick(rng, violations, n_vio, counts, config.max_per_template)
        if picked_vio is None:
            continue
        test_records = picked_acc + picked_vio
        break
    if test_records is None:
        raise CapacityError(
            "not enough unassigned sentences remain to compose an assignment "
            f"({len(acceptable)} acceptable / {len(violations)} violations eligible); "
            "close the collection"
        )

    rng.shuffle(test_records)
    test_ids = {r.id for r in test_records}

    # Fillers must not duplicate a test sentence's surface form in this
    # assignment, nor anything this annotator saw before.
    eligible_fillers = [
        f
        for f in filler_pool
        if f.id not in prior and f.source_id not in test_ids and f.source_id not in prior
    ]
    rng.shuffle(eligible_fillers)
    needed = config.warmup_items + config.filler_items
    if len(eligible_fillers) < needed:
        raise CapacityError(
            f"filler pool exhausted ({len(eligible_fillers)} eligible, {needed} needed); "
            "close the collection"
        )
    warmup_fillers = eligible_fillers[: config.warmup_items]
    block_fillers = eligible_fillers[config.warmup_items : needed]

    items: list[AssignmentItem] = [
        AssignmentItem(
            f.id, f.text, is_warmup=True, is_filler=True, filler_kind=f.kind, source_id=f.source_id
        )
        for f in warmup_fillers
    ]
    filler_iter = iter(block_fillers)
    block_size = config.filler_interval or len(test_records)
    for start in range(0, len(test_records), block_size):
        block = [AssignmentItem(r.id, r.text) for r in test_records[start : start + block_size]]
        if config.filler_interval and len(block) == config.filler_interval:
            f = next(filler_iter)
            block.insert(
                rng.randrange(len(block) + 1),
                AssignmentItem(
                    f.id, f.text, is_filler=True, filler_kind=f.kind, source_id=f.source_id
                ),
            )
        items.extend(block)

    assignment = Assignment(annotator_id=annotator_id, seed=seed, items=tuple(items))
    seen = set()
    for item in assignment.items:
        if item.sentence_id in seen:
            raise AssertionError(f"duplicate item in assignment: {item.sentence_id}")
        seen.add(item.sentence_id)
    return assignment


@dataclass
class Session:
    session_id: str
    assignment: Assignment
    submitted: dict[str, int] = field(default_factory=dict)

    @property
    def annotator_id(self) -> str:
        return self.assignment.annotator_id

    @property
    def cursor(self) -> int:
        return len(self.submitted)

    @property
    def total(self) -> int:
        return len(self.assignment.items)

    @property
    def state(self) -> str:
        if self.cursor >= self.total:
            return "complete"
        if self.assignment.items[self.cursor].is_warmup:
            return "warmup"
        return "active"

    def current_item(self) -> Optional[AssignmentItem]:
        if self.cursor >= self.total:
            return None
        return self.assignment.items[self.cursor]


def _utc_now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


class AnnotationStore:
    """Append-only event log plus the in-memory state replayed from it.

    Two event kinds: ``assignment`` (freezes an assignment's items and
    flags) and ``rating``. A rating is acknowledged only after the line
    is flushed and fsynced. All mutation goes through one lock, so the
    global cap and no-repeat guarantees hold under concurrent sessions.
    """

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self.lock = threading.Lock()
        self.sessions: dict[str, Session] = {}
        self.usage: dict[str, int] = {}
        self.prior: dict[str, set] = {}
        self._fh = None
        if self.path.exists():
            self._replay()
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "a", encoding="utf-8", newline="\n")

    def _replay(self) -> None:
        with open(self.path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    event = json.loads(line)
                except json.JSONDecodeError:
                    raise ServiceError(f"corrupt store line {lineno}: not valid JSON") from None
                if event.get("event") == "assignment":
                    items = tuple(
                        AssignmentItem(
                            sentence_id=i["sentence_id"],
                            text=i["text"],
                            is_warmup=i["is_warmup"],
                            is_filler=i["is_filler"],
                            filler_kind=i["filler_kind"],
                            source_id=i.get("source_id", ""),
                        )
                        for i in event["items"]
                    )
                    assignment = Assignment(
                        annotator_id=event["annotator_id"], seed=event["seed"], items=items
                    )
                    self._register(event["session_id"], assignment)
                elif event.get("event") == "rating":
                    session = self.sessions[event["session_id"]]
                    session.submitted[event["sentence_id"]] = event["value"]
                else:
                    raise ServiceError(f"corrupt store line {lineno}: unknown event kind")

    def _register(self, session_id: str, assignment: Assignment) -> Session:
        session = Session(session_id=session_id, assignment=assignment)
        self.sessions[session_id] = session
        for sid in assignment.test_ids:
            self.usage[sid] = self.usage.get(sid, 0) + 1
        seen = self.prior.setdefault(assignment.annotator_id, set())
        seen.update(assignment.item_ids)
        # A filler's source sentence also counts as seen, so it can never
        # come back as a test item for the same annotator.
        seen.update(item.source_id for item in assignment.items if item.source_id)
        return session

    def _append(self, event: dict) -> None:
        self._fh.write(json.dumps(event, ensure_ascii=False, sort_keys=True) + "\n")
        self._fh.flush()
        os.fsync(self._fh.fileno())

    def create_session(
        self,
        annotator_id: str,
        dataset: Dataset,
        filler_pool: Sequence[FillerItem],
        seed: Optional[int] = None,
        config: Optional[AssignmentConfig] = None,
    ) -> Session:
        with self.lock:
            if seed is None:
                seed = random.SystemRandom().randrange(2**63)
            assignment = create_assignment(
                annotator_id,
                dataset,
                filler_pool,
                seed,
                usage=self.usage,
                prior_sentences=self.prior.get(annotator_id, set()),
                config=config,
            )
            session_id = uuid.uuid4().hex
            self._append(
                {
                    "event": "assignment",
                    "session_id": session_id,
                    "annotator_id": annotator_id,
                    "seed": seed,
                    "items": [
                        {
                            "sentence_id": i.sentence_id,
                            "text": i.text,
                            "is_warmup": i.is_warmup,
                            "is_filler": i.is_filler,
                            "filler_kind": i.filler_kind,
                            "source_id": i.source_id,
                        }
                        for i in assignment.items
                    ],
                }
            )
            return self._register(session_id, assignment)

    def get_session(self, session_id: str) -> Session:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise UnknownSessionError(f"unknown session: {session_id}") from None

    def submit_rating(self, session_id: str, sentence_id: str, value) -> Session:
        with self.lock:
            session = self.get_session(session_id)
            if isinstance(value, bool) or not isinstance(value, int):
                raise RatingError(f"rating must be an integer between {RATING_MIN} and {RATING_MAX}")
            if not RATING_MIN <= value <= RATING_MAX:
                raise RatingError(
                    f"rating {value} out of range: must be between {RATING_MIN} and {RATING_MAX}"
                )
            # Duplicate wins over the completion check: an idempotent retry
            # of the final rating must see "duplicate", not "complete".
            if sentence_id in session.submitted:
                raise DuplicateRatingError(f"sentence already rated in this session: {sentence_id}")
            if session.state == "complete":
                raise RatingError("session is already complete")
            current = session.current_item()
            if current is None or sentence_id != current.sentence_id:
                if sentence_id in session.assignment.item_ids:
                    raise RatingError(f"sentence not yet served: {sentence_id}")
                raise UnknownSessionError(f"sentence not in this session: {sentence_id}")
            self._append(
                {
                    "event": "rating",
                    "session_id": session_id,
                    "sentence_id": sentence_id,
                    "value": value,
                    "timestamp": _utc_now(),
                }
            )
            session.submitted[sentence_id] = value
            return session

    def export(self) -> list[AnnotationRecord]:
        """All persisted ratings in the analysis import format."""
        with self.lock:
            records = []
            for session in self.sessions.values():
                meta = {i.sentence_id: i for i in session.assignment.items}
                for sentence_id, value in session.submitted.items():
                    item = meta[sentence_id]
                    records.append(
                        AnnotationRecord(
                            annotator_id=session.annotator_id,
                            sentence_id=item.sentence_id,
                            raw=value,
                            timestamp="",
                            is_filler=item.is_filler,
                            filler_kind=item.filler_kind if item.is_filler else "none",
                            is_warmup=item.is_warmup,
                        )
                    )
            return records

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


# ---------------------------------------------------------------------------
# HTTP layer

_SESSION_PATH = re.compile(r"^/v1/sessions/([0-9a-f]{32})$")
_NEXT_PATH = re.compile(r"^/v1/sessions/([0-9a-f]{32})/next$")
_RATING_PATH = re.compile(r"^/v1/sessions/([0-9a-f]{32})/ratings$")

_STATIC_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".map": "application/json",
    ".svg": "image/svg+xml",
}


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "kasusprobe"

    # Quiet by default; the CLI flips this on with --verbose.
    def log_message(self, fmt, *args):
        if getattr(self.server, "verbose", False):
            super().log_message(fmt, *args)

    @property
    def ctx(self):
        return self.server.ctx

    def _send_json(self, status: int, payload: dict) -> None:
        body = json.dumps(payload, ensure_ascii=False, sort_keys=True).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self._send_cors()
        self.end_headers()
        self.wfile.write(body)

    def _send_cors(self) -> None:
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")

    def _send_error(self, exc: Exception) -> None:
        if isinstance(exc, ServiceError):
            self._send_json(exc.status, {"error": str(exc)})
        else:
            self._send_json(HTTPStatus.INTERNAL_SERVER_ERROR, {"error": str(exc)})

    def _read_json(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        if not raw:
            raise RatingError("request body required")
        try:
            payload = json.loads(raw.decode("utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError):
            raise RatingError("request body is not valid JSON") from None
        if not isinstance(payload, dict):
            raise RatingError("request body must be a JSON object")
        return payload

    def _session_payload(self, session: Session) -> dict:
        return {
            "session_id": session.session_id,
            "annotator_id": session.annotator_id,
            "state": session.state,
            "rated": session.cursor,
            "total": session.total,
        }

    def do_OPTIONS(self):
        self.send_response(HTTPStatus.NO_CONTENT)
        self._send_cors()
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self):
        try:
            if self.path == "/v1/health":
                from . import __version__

                self._send_json(
                    HTTPStatus.OK,
                    {"status": "ok", "api": API_VERSION, "version": __version__},
                )
                return
            match = _SESSION_PATH.match(self.path)
            if match:
                session = self.ctx.store.get_session(match.group(1))
                self._send_json(HTTPStatus.OK, self._session_payload(session))
                return
            match = _NEXT_PATH.match(self.path)
            if match:
                self._handle_next(match.group(1))
                return
            if self.path == "/v1/annotations":
                self._handle_export()
                return
            if self._try_static():
                return
            self._send_json(HTTPStatus.NOT_FOUND, {"error": f"no such resource: {self.path}"})
        except Exception as exc:  # noqa: BLE001 - map everything to a response
            self._send_error(exc)

    def do_POST(self):
        try:
            if self.path == "/v1/sessions":
                self._handle_create_session()
                return
            match = _RATING_PATH.match(self.path)
            if match:
                self._handle_rating(match.group(1))
                return
            self._send_json(HTTPStatus.NOT_FOUND, {"error": f"no such resource: {self.path}"})
        except Exception as exc:  # noqa: BLE001
            self._send_error(exc)

    def _handle_create_session(self):
        payload = self._read_json()
        annotator_id = payload.get("annotator_id")
        if not annotator_id or not isinstance(annotator_id, str):
            raise RatingError("annotator_id (non-empty string) is required")
        seed = payload.get("seed")
        if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)):
            raise RatingError("seed must be an integer if given")
        session = self.ctx.store.create_session(
            annotator_id,
            self.ctx.dataset,
            self.ctx.filler_pool,
            seed=seed,
            config=self.ctx.config,
        )
        self._send_json(HTTPStatus.CREATED, self._session_payload(session))

    def _handle_next(self, session_id: str):
        session = self.ctx.store.get_session(session_id)
        item = session.current_item()
        payload = self._session_payload(session)
        if item is None:
            payload["item"] = None
        else:
            payload["item"] = {
                "sentence_id": item.sentence_id,
                "text": item.text,
                "is_warmup": item.is_warmup,
                "instruction": WARMUP_INSTRUCTION if item.is_warmup else RATING_INSTRUCTION,
                "scale": {"min": RATING_MIN, "max": RATING_MAX},
            }
        self._send_json(HTTPStatus.OK, payload)

    def _handle_rating(self, session_id: str):
        payload = self._read_json()
        if "sentence_id" not in payload or "value" not in payload:
            raise RatingError("sentence_id and value are required")
        session = self.ctx.store.submit_rating(session_id, payload["sentence_id"], payload["value"])
        self._send_json(HTTPStatus.OK, {"accepted": True, **self._session_payload(session)})

    def _handle_export(self):
        from .metrics import annotation_to_json

        records = self.ctx.store.export()
        body = "".join(annotation_to_json(r) + "\n" for r in records).encode("utf-8")
        self.send_response(HTTPStatus.OK)
        self.send_header("Content-Type", "application/x-ndjson; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self._send_cors()
        self.end_headers()
        self.wfile.write(body)

    def _try_static(self) -> bool:
        root = self.ctx.static_dir
        if root is None:
            return False
        rel = self.path.split("?", 1)[0].lstrip("/") or "index.html"
        target = (root / rel).resolve()
        if not str(target).startswith(str(root.resolve())) or not target.is_file():
            return False
        body = target.read_bytes()
        self.send_response(HTTPStatus.OK)
        ctype = _STATIC_TYPES.get(target.suffix, "application/octet-stream")
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)
        return True


@dataclass
class ServiceContext:
    store: AnnotationStore
    dataset: Dataset
    filler_pool: Sequence[FillerItem]
    config: AssignmentConfig
    static_dir: Optional[Path] = None


def make_server(
    store: AnnotationStore,
    dataset: Dataset,
    filler_pool: Sequence[FillerItem],
    config: Optional[AssignmentConfig] = None,
    host: str = "127.0.0.1",
    port: int = 0,
    static_dir: Optional[Union[str, Path]] = None,
    verbose: bool = False,
) -> ThreadingHTTPServer:
    """Build a ready-to-serve HTTP server; port 0 picks a free port."""
    server = ThreadingHTTPServer((host, port), _Handler)
    server.ctx = ServiceContext(
        store=store,
        dataset=dataset,
        filler_pool=filler_pool,
        config=config or AssignmentConfig(),
        static_dir=Path(static_dir) if static_dir else None,
    )
    server.verbose = verbose
    server.daemon_threads = True
    return server
