"""Completion acquisition: OpenAI-compatible HTTP, deterministic mock, replay cache.

The mock backend makes the whole pipeline runnable, and bit-reproducible,
without a network. Its contract:

* a prompt containing ``@mockscore=X@`` is answered with exactly ``X``;
* a prompt containing ``@mockinvalid@`` is answered with a non-numeric
  sentence until ``sample_index >= 2``, then with ``"50"`` (exercises the
  temperature-escalation loop);
* otherwise the reply is a hash of the prompt mapped into the range implied
  by the prompt's answer cue, so repeated runs agree byte for byte on any
  platform.

Replay caching is keyed by a content hash of (model name, prompt text,
temperature with fixed decimal formatting, sample index); renaming the cache
files never invalidates keys. The index is JSON-lines with the short answer
texts inline; prompts are deduplicated into a sibling content-addressed blob
file so the index stays small.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import requests

from .errors import AuthMissing, CacheMiss, IoFailure, TransportError, UsageError

logger = logging.getLogger(__name__)

API_KEY_ENV = "GEMBA_API_KEY"

BACKEND_KINDS = ("http_completion", "http_chat", "mock", "replay")

_RETRYABLE_STATUS = {429, 500, 502, 503, 504}

_MOCK_SCORE_RE = re.compile(r"@mockscore=([^@]*)@")
_MOCK_INVALID_SENTENCE = "I cannot assign a score to this translation without more context."


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "mock"
    endpoint_url: str = ""
    model_name: str = "mock"
    max_tokens: int = 100
    timeout: float = 60.0
    max_parallel: int = 1
    cache_path: str = ""  # replay source / recording target
    retry_attempts: int = 5
    retry_base_delay: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in BACKEND_KINDS:
            raise UsageError(f"unknown backend kind {self.kind!r}; valid: {', '.join(BACKEND_KINDS)}")
        if self.max_tokens < 1:
            raise UsageError("max_tokens must be >= 1")
        if self.max_parallel < 1:
            raise UsageError("max_parallel must be >= 1")
        if self.kind.startswith("http") and not self.endpoint_url:
            raise UsageError(f"backend {self.kind} needs an endpoint URL")
        if self.kind == "replay" and not self.cache_path:
            raise UsageError("replay backend needs a cache path")


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    temperature: float = 0.0
    sample_index: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 2.0:
            raise UsageError(f"temperature {self.temperature} outside [0, 2]")
        if self.sample_index < 0:
            raise UsageError("sample_index must be non-negative")


@dataclass(frozen=True)
class RawAnswer:
    text: str
    request: CompletionRequest
    from_cache: bool = False


class Backend(Protocol):
    config: BackendConfig

    def complete(self, request: CompletionRequest) -> RawAnswer: ...


def cache_key(model_name: str, prompt: str, temperature: float, sample_index: int) -> str:
    """Content hash identifying one completion; stable across file renames."""
    payload = "\x00".join([model_name, prompt, f"{temperature:.4f}", str(sample_index)])
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _prompt_sha(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class ResponseCache:
    """JSON-lines replay cache with a sibling content-addressed prompt blob.

    Duplicate keys keep the first entry; later records for the same key are
    no-ops with a warning. Appends are serialized; reads are lock-free after
    load.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.blob_path = self.path.with_name(self.path.name + ".blobs")
        self._entries: dict[str, dict] = {}
        self._prompt_shas: set[str] = set()
        self._lock = threading.Lock()
        self._load()

    def _load(self) -> None:
        if self.path.exists():
            with self.path.open(encoding="utf-8") as handle:
                for line in handle:
                    if not line.strip():
                        continue
                    entry = json.loads(line)
                    self._entries.setdefault(entry["key"], entry)
        if self.blob_path.exists():
            with self.blob_path.open(encoding="utf-8") as handle:
                for line in handle:
                    if not line.strip():
                        continue
                    self._prompt_shas.add(json.loads(line)["sha"])

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: str) -> bool:
        return key in self._entries

    def get(self, key: str) -> dict | None:
        return self._entries.get(key)

    def entries(self) -> list[dict]:
        return list(self._entries.values())

    def record(self, answer: RawAnswer, model_name: str) -> bool:
        """Append one answer; returns False (and warns) when the key exists."""
        req = answer.request
        key = cache_key(model_name, req.prompt, req.temperature, req.sample_index)
        entry = {
            "key": key,
            "model": model_name,
            "temperature": f"{req.temperature:.4f}",
            "sample_index": req.sample_index,
            "prompt_sha": _prompt_sha(req.prompt),
            "text": answer.text,
        }
        with self._lock:
            if key in self._entries:
                logger.warning("cache %s already holds key %s; keeping first entry", self.path, key)
                return False
            try:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as handle:
                    handle.write(json.dumps(entry, ensure_ascii=False) + "\n")
                if entry["prompt_sha"] not in self._prompt_shas:
                    with self.blob_path.open("a", encoding="utf-8") as handle:
                        handle.write(
                            json.dumps(
                                {"sha": entry["prompt_sha"], "text": req.prompt},
                                ensure_ascii=False,
                            )
                            + "\n"
                        )
                    self._prompt_shas.add(entry["prompt_sha"])
            except OSError as exc:
                raise IoFailure(f"cannot append to cache {self.path}: {exc}") from exc
            self._entries[key] = entry
        return True

    def compact(self) -> int:
        """Rewrite both files with duplicates dropped; returns entry count."""
        try:
            tmp = self.path.with_suffix(".tmp")
            with tmp.open("w", encoding="utf-8") as handle:
                for entry in self._entries.values():
                    handle.write(json.dumps(entry, ensure_ascii=False) + "\n")
            tmp.replace(self.path)
            if self.blob_path.exists():
                seen: set[str] = set()
                blob_tmp = self.blob_path.with_suffix(".tmp")
                with self.blob_path.open(encoding="utf-8") as src, blob_tmp.open(
                    "w", encoding="utf-8"
                ) as dst:
                    for line in src:
                        if not line.strip():
                            continue
                        blob = json.loads(line)
                        if blob["sha"] in seen:
                            continue
                        seen.add(blob["sha"])
                        dst.write(json.dumps(blob, ensure_ascii=False) + "\n")
                blob_tmp.replace(self.blob_path)
        except OSError as exc:
            raise IoFailure(f"cannot compact cache {self.path}: {exc}") from exc
        return len(self._entries)


def record(cache_path: str | Path, answer: RawAnswer, model_name: str = "mock") -> bool:
    """One-shot convenience wrapper; bulk writers should hold a ResponseCache."""
    return ResponseCache(cache_path).record(answer, model_name)


class MockBackend:
    def __init__(self, config: BackendConfig):
        self.config = config

    def complete(self, request: CompletionRequest) -> RawAnswer:
        return RawAnswer(text=self._reply(request), request=request, from_cache=False)

    def _reply(self, request: CompletionRequest) -> str:
        marker = _MOCK_SCORE_RE.search(request.prompt)
        if marker:
            return marker.group(1)
        if "@mockinvalid@" in request.prompt:
            return "50" if request.sample_index >= 2 else _MOCK_INVALID_SENTENCE
        digest = hashlib.sha256(request.prompt.encode("utf-8")).digest()
        h = int.from_bytes(digest[:8], "big")
        if request.prompt.endswith("Stars:"):
            return str(1 + h % 5)
        if request.prompt.endswith("Class:"):
            from .parsing import CLASS_LABELS

            return CLASS_LABELS[h % 5]
        return str(h % 101)


class ReplayBackend:
    def __init__(self, config: BackendConfig, cache: ResponseCache | None = None):
        self.config = config
        self.cache = cache if cache is not None else ResponseCache(config.cache_path)

    def complete(self, request: CompletionRequest) -> RawAnswer:
        key = cache_key(
            self.config.model_name, request.prompt, request.temperature, request.sample_index
        )
        entry = self.cache.get(key)
        if entry is None:
            raise CacheMiss(key)
        return RawAnswer(text=entry["text"], request=request, from_cache=True)


class HttpBackend:
    """OpenAI-compatible completions / chat-completions client.

    Network-level retries (bounded, exponential backoff) are independent of
    the scorer's answer-validity retries and never change the temperature.
    """

    def __init__(self, config: BackendConfig, session: requests.Session | None = None):
        self.config = config
        self.api_key = os.environ.get(API_KEY_ENV, "")
        if not self.api_key:
            raise AuthMissing(API_KEY_ENV)
        self.session = session or requests.Session()

    def _body(self, request: CompletionRequest) -> dict:
        body = {
            "model": self.config.model_name,
            "temperature": request.temperature,
            "max_tokens": self.config.max_tokens,
        }
        if self.config.kind == "http_chat":
            body["messages"] = [{"role": "user", "content": request.prompt}]
        else:
            body["prompt"] = request.prompt
        return body

    def _extract(self, payload: dict) -> str:
        try:
            choice = payload["choices"][0]
            if self.config.kind == "http_chat":
                return choice["message"]["content"]
            return choice["text"]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(None, f"unexpected response shape: {payload!r}") from exc

    def complete(self, request: CompletionRequest) -> RawAnswer:
        headers = {
            "Authorization": f"Bearer {self.api_key}",
            "Content-Type": "application/json",
        }
        delay = self.config.retry_base_delay
        last_error: TransportError | None = None
        for attempt in range(self.config.retry_attempts):
            try:
                response = self.session.post(
                    self.config.endpoint_url,
                    json=self._body(request),
                    headers=headers,
                    timeout=self.config.timeout,
                )
            except requests.RequestException as exc:
                last_error = TransportError(None, str(exc))
            else:
                if response.status_code == 200:
                    return RawAnswer(
                        text=self._extract(response.json()), request=request, from_cache=False
                    )
                last_error = TransportError(response.status_code, response.text)
                if response.status_code not in _RETRYABLE_STATUS:
                    raise last_error
            if attempt + 1 < self.config.retry_attempts:
                logger.warning("request failed (%s); retrying in %.1fs", last_error, delay)
                time.sleep(delay)
                delay *= 2
        assert last_error is not None
        raise last_error


class RecordingBackend:
    """Wraps another backend and appends every fresh answer to a cache."""

    def __init__(self, inner: Backend, cache: ResponseCache):
        self.inner = inner
        self.config = inner.config
        self.cache = cache

    def complete(self, request: CompletionRequest) -> RawAnswer:
        answer = self.inner.complete(request)
        if not answer.from_cache:
            self.cache.record(answer, self.config.model_name)
        return answer


def make_backend(config: BackendConfig) -> Backend:
    if config.kind == "mock":
        backend: Backend = MockBackend(config)
    elif config.kind == "replay":
        backend = ReplayBackend(config)
    else:
        backend = HttpBackend(config)
    if config.cache_path and config.kind != "replay":
        backend = RecordingBackend(backend, ResponseCache(config.cache_path))
    return backend
