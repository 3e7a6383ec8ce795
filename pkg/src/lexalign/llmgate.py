"""Chat-completion drivers and the experiment grid with resumable persistence.

Endpoints are config: a name, a wire adapter (openai-style, gemini-style, or
the in-process mock), decode parameters, and an environment variable naming
the secret. The mock endpoint is a deterministic function of the prompt: it
echoes the contextual knowledge blocks (numbered passages plus, for enhanced
prompts, the dimension label, description, and typical vocabulary), and
falls back to a fixed neutral sentence when the prompt carries no context.
That makes the whole offline grid reproducible while preserving the
qualitative effect under study: answers inherit whatever discourse the
prompt injects.

Answers persist to an append-only JSONL log keyed by
(model, dim, pole, question_id, mode, repeat_index); rerunning a grid skips
keys already on disk.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Sequence

from lexalign.factors import DimensionDescriptor, Pole
from lexalign.promptgen import PromptBundle, PromptMode, render
from lexalign.retrieval import ChunkIndex, EmbeddingProvider, make_query, retrieve

log = logging.getLogger(__name__)

NEUTRAL_ANSWER = (
    "There is not enough grounded information available to answer this "
    "question with confidence."
)

EPOCH_TIMESTAMP = "1970-01-01T00:00:00Z"

DEFAULT_REPEATS = 5


class GenerationError(Exception):
    pass


@dataclass(frozen=True)
class ModelEndpoint:
    name: str
    kind: str = "mock"  # mock | openai | gemini
    base_url: str = ""
    auth_env: str | None = None
    model_id: str = ""
    temperature: float = 0.7
    max_output_tokens: int = 1024
    max_attempts: int = 3
    backoff: float = 1.0
    timeout: float = 60.0
    concurrency: int = 2

    def vendor_model(self) -> str:
        return self.model_id or self.name


@dataclass(frozen=True)
class Question:
    topic_id: str
    question_id: str
    dim: int
    pole: Pole
    text: str


def load_questions(path: str | Path) -> list[Question]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return [
        Question(
            topic_id=q["topic_id"],
            question_id=q["question_id"],
            dim=int(q["dim"]),
            pole=Pole(q["pole"]),
            text=q["text"],
        )
        for q in payload["questions"]
    ]


@dataclass(frozen=True)
class AnswerRecord:
    model: str
    dim: int
    pole: Pole
    topic_id: str
    question_id: str
    mode: PromptMode
    repeat_index: int
    prompt_hash: str
    answer_text: str
    timestamp: str
    temperature: float = 0.7
    error: str | None = None

    @property
    def key(self) -> tuple:
        return (
            self.model,
            self.dim,
            self.pole.value,
            self.question_id,
            self.mode.value,
            self.repeat_index,
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "model": self.model,
                "dim": self.dim,
                "pole": self.pole.value,
                "topic_id": self.topic_id,
                "question_id": self.question_id,
                "mode": self.mode.value,
                "repeat_index": self.repeat_index,
                "prompt_hash": self.prompt_hash,
                "answer_text": self.answer_text,
                "timestamp": self.timestamp,
                "temperature": self.temperature,
                "error": self.error,
            },
            ensure_ascii=False,
        )

    @classmethod
    def from_json(cls, line: str) -> "AnswerRecord":
        d = json.loads(line)
        return cls(
            model=d["model"],
            dim=d["dim"],
            pole=Pole(d["pole"]),
            topic_id=d["topic_id"],
            question_id=d["question_id"],
            mode=PromptMode(d["mode"]),
            repeat_index=d["repeat_index"],
            prompt_hash=d["prompt_hash"],
            answer_text=d["answer_text"],
            timestamp=d["timestamp"],
            temperature=d.get("temperature", 0.7),
            error=d.get("error"),
        )


class RecordStore:
    """Append-only JSONL answer log with an in-memory unique-key index."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._keys: set[tuple] = set()
        if self.path.exists():
            for record in self.load():
                self._keys.add(record.key)

    def __contains__(self, key: tuple) -> bool:
        return key in self._keys

    def __len__(self) -> int:
        return len(self._keys)

    def append(self, record: AnswerRecord) -> None:
        if record.key in self._keys:
            raise GenerationError(f"duplicate answer record key {record.key}")
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(record.to_json() + "\n")
        self._keys.add(record.key)

    def load(self) -> list[AnswerRecord]:
        if not self.path.exists():
            return []
        records = []
        for line in self.path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                records.append(AnswerRecord.from_json(line))
        return records


def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


_PASSAGE_LINE_RE = re.compile(r"^\[\d+\] (.*)$")
_VOCABULARY_HEADER = "Typical vocabulary:"


def _block_after(lines: list[str], header: str) -> list[str]:
    try:
        start = lines.index(header) + 1
    except ValueError:
        return []
    block = []
    for line in lines[start:]:
        if not line.strip():
            break
        block.append(line)
    return block


def mock_generate(prompt: str) -> str:
    """Echo the prompt's knowledge blocks; neutral sentence without any.

    The lexical material a compliant model would reuse is reproduced
    verbatim: the typical-vocabulary block when the prompt asks the answer
    to reflect it, and the numbered context or example-text passages when
    retrieval supplied them.
    """
    lines = prompt.split("\n")
    pieces: list[str] = list(_block_after(lines, _VOCABULARY_HEADER))
    for line in lines:
        m = _PASSAGE_LINE_RE.match(line)
        if m:
            pieces.append(m.group(1))
    if not pieces:
        return NEUTRAL_ANSWER
    return " ".join(pieces)


Transport = Callable[[str, dict, dict, float], dict]


def _urllib_transport(url: str, payload: dict, headers: dict, timeout: float) -> dict:
    req = urllib.request.Request(
        url,
        data=json.dumps(payload).encode("utf-8"),
        headers={"Content-Type": "application/json", **headers},
        method="POST",
    )
    with urllib.request.urlopen(req, timeout=timeout) as resp:
        return json.loads(resp.read().decode("utf-8"))


def _auth_headers(endpoint: ModelEndpoint) -> dict:
    if not endpoint.auth_env:
        return {}
    token = os.environ.get(endpoint.auth_env)
    if not token:
        raise GenerationError(
            f"endpoint {endpoint.name}: auth environment variable "
            f"{endpoint.auth_env} unset"
        )
    if endpoint.kind == "gemini":
        return {"x-goog-api-key": token}
    return {"Authorization": f"Bearer {token}"}


def _openai_payload(endpoint: ModelEndpoint, prompt: str) -> dict:
    return {
        "model": endpoint.vendor_model(),
        "messages": [{"role": "user", "content": prompt}],
        "temperature": endpoint.temperature,
        "max_tokens": endpoint.max_output_tokens,
    }


def _openai_extract(response: dict) -> str:
    return response["choices"][0]["message"]["content"]


def _gemini_payload(endpoint: ModelEndpoint, prompt: str) -> dict:
    return {
        "contents": [{"role": "user", "parts": [{"text": prompt}]}],
        "generationConfig": {
            "temperature": endpoint.temperature,
            "maxOutputTokens": endpoint.max_output_tokens,
        },
    }


def _gemini_extract(response: dict) -> str:
    return response["candidates"][0]["content"]["parts"][0]["text"]


_ADAPTERS = {
    "openai": (_openai_payload, _openai_extract),
    "gemini": (_gemini_payload, _gemini_extract),
}


def generate(
    endpoint: ModelEndpoint, prompt: str, transport: Transport | None = None
) -> str:
    """One completion for one prompt, with retry and backoff on HTTP errors."""
    if endpoint.kind == "mock":
        return mock_generate(prompt)
    if endpoint.kind not in _ADAPTERS:
        raise GenerationError(f"unknown endpoint kind {endpoint.kind!r}")
    build_payload, extract = _ADAPTERS[endpoint.kind]
    transport = transport or _urllib_transport
    payload = build_payload(endpoint, prompt)
    last: Exception | None = None
    for attempt in range(endpoint.max_attempts):
        if attempt:
            time.sleep(endpoint.backoff * 2 ** (attempt - 1))
        try:
            response = transport(
                endpoint.base_url, payload, _auth_headers(endpoint), endpoint.timeout
            )
            return extract(response)
        except (urllib.error.URLError, OSError, KeyError, IndexError, ValueError) as exc:
            log.warning(
                "endpoint %s attempt %d/%d failed: %s",
                endpoint.name,
                attempt + 1,
                endpoint.max_attempts,
                exc,
            )
            last = exc
    raise GenerationError(f"endpoint {endpoint.name} failed after retries: {last}")


@dataclass
class GridStats:
    generated: int = 0
    skipped: int = 0
    failed: int = 0


@dataclass
class GridRunner:
    """Cross product of models x questions x modes x repeats, resumable."""

    endpoints: Sequence[ModelEndpoint]
    questions: Sequence[Question]
    descriptors: dict[int, DimensionDescriptor]
    store: RecordStore
    modes: Sequence[PromptMode] = (
        PromptMode.REGULAR_NOCONTEXT,
        PromptMode.REGULAR_RAG,
        PromptMode.ENHANCED_NOCONTEXT,
        PromptMode.ENHANCED_RAG,
    )
    repeats: int = DEFAULT_REPEATS
    index: ChunkIndex | None = None
    embedder: EmbeddingProvider | None = None
    top_k: int = 3
    templates_dir: str | Path | None = None
    transport: Transport | None = None
    _passage_cache: dict[tuple, tuple[str, ...]] = field(default_factory=dict)

    def _passages(self, question: Question) -> tuple[str, ...]:
        cache_key = (question.dim, question.pole.value, question.question_id)
        hit = self._passage_cache.get(cache_key)
        if hit is None:
            if self.index is None or self.embedder is None:
                raise GenerationError(
                    "RAG modes need a retrieval index and an embedding provider"
                )
            query = make_query(question.text, question.dim, question.pole, self.embedder)
            scored = retrieve(query, self.index, k=self.top_k)
            hit = tuple(sc.chunk.text for sc in scored)
            self._passage_cache[cache_key] = hit
        return hit

    def _prompt(self, question: Question, mode: PromptMode) -> str:
        bundle = PromptBundle(
            question=question.text,
            mode=mode,
            passages=self._passages(question) if mode.is_rag else (),
            descriptor=self.descriptors.get(question.dim) if mode.is_enhanced else None,
            pole=question.pole if mode.is_enhanced else None,
        )
        return render(bundle, self.templates_dir)

    def _cells(self) -> Iterable[tuple[Question, PromptMode, int]]:
        for question in self.questions:
            for mode in self.modes:
                for repeat in range(self.repeats):
                    yield question, mode, repeat

    def _run_cell(
        self, endpoint: ModelEndpoint, question: Question, mode: PromptMode, repeat: int
    ) -> AnswerRecord:
        prompt = self._prompt(question, mode)
        if endpoint.kind == "mock":
            timestamp = EPOCH_TIMESTAMP
        else:
            timestamp = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
        try:
            answer = generate(endpoint, prompt, self.transport)
            error = None
        except GenerationError as exc:
            answer = ""
            error = str(exc)
        return AnswerRecord(
            model=endpoint.name,
            dim=question.dim,
            pole=question.pole,
            topic_id=question.topic_id,
            question_id=question.question_id,
            mode=mode,
            repeat_index=repeat,
            prompt_hash=prompt_digest(prompt),
            answer_text=answer,
            timestamp=timestamp,
            temperature=endpoint.temperature,
            error=error,
        )

    def run(self) -> GridStats:
        stats = GridStats()
        for endpoint in self.endpoints:
            pending = []
            for question, mode, repeat in self._cells():
                key = (
                    endpoint.name,
                    question.dim,
                    question.pole.value,
                    question.question_id,
                    mode.value,
                    repeat,
                )
                if key in self.store:
                    stats.skipped += 1
                else:
                    pending.append((question, mode, repeat))
            if not pending:
                continue
            if endpoint.kind == "mock":
                # serial: keeps the record log byte-reproducible across machines
                for question, mode, repeat in pending:
                    self._emit(self._run_cell(endpoint, question, mode, repeat), stats)
            else:
                with ThreadPoolExecutor(max_workers=endpoint.concurrency) as pool:
                    futures = [
                        pool.submit(self._run_cell, endpoint, question, mode, repeat)
                        for question, mode, repeat in pending
                    ]
                    for future in futures:
                        self._emit(future.result(), stats)
        return stats

    def _emit(self, record: AnswerRecord, stats: GridStats) -> None:
        self.store.append(record)
        if record.error is None:
            stats.generated += 1
        else:
            stats.failed += 1
