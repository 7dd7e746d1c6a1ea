"""Chat-completion client with a content-addressed record/replay cache.

Every request is keyed by (model, messages); replays are byte-identical, so a
warm cache makes `--offline` runs fully deterministic with zero network use.
Cache files are written atomically (temp file + rename), which gives
concurrent readers a consistent view and serializes writers per key.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Optional, Protocol

import httpx

from .errors import SitugenError

ENV_BASE_URL = "SITUGEN_LLM_BASE_URL"
ENV_API_KEY = "SITUGEN_LLM_API_KEY"
ENV_MODEL = "SITUGEN_LLM_MODEL"
ENV_CACHE_DIR = "SITUGEN_CACHE_DIR"


class LlmError(SitugenError):
    pass


class ChatClient(Protocol):
    def complete(self, messages: list[dict], model: Optional[str] = None) -> str: ...


def request_key(model: str, messages: list[dict]) -> str:
    payload = json.dumps({"model": model, "messages": messages}, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(payload.encode()).hexdigest()


class ReplayCache:
    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def get(self, key: str) -> Optional[str]:
        path = self._path(key)
        if not path.exists():
            return None
        return json.loads(path.read_text())["response"]

    def put(self, key: str, model: str, messages: list[dict], response: str) -> None:
        entry = json.dumps(
            {"model": model, "messages": messages, "response": response},
            ensure_ascii=False,
            sort_keys=True,
        )
        fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
        try:
            with os.fdopen(fd, "w") as f:
                f.write(entry)
            os.replace(tmp, self._path(key))
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)

    def __len__(self) -> int:
        return len(list(self.directory.glob("*.json")))


class HttpChatClient:
    """Plain chat-completions transport (messages array of role/content; image
    content as base64 data-URL entries)."""

    def __init__(
        self,
        base_url: str,
        api_key: str = "",
        model: str = "",
        timeout: float = 120.0,
        transport: Optional[httpx.BaseTransport] = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.model = model
        self.timeout = timeout
        self._transport = transport

    def complete(self, messages: list[dict], model: Optional[str] = None) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        with httpx.Client(transport=self._transport, timeout=self.timeout) as client:
            resp = client.post(
                f"{self.base_url}/chat/completions",
                headers=headers,
                json={"model": model or self.model, "messages": messages},
            )
        if resp.status_code != 200:
            raise LlmError(f"chat endpoint returned {resp.status_code}: {resp.text[:500]}")
        data = resp.json()
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError) as exc:
            raise LlmError(f"malformed chat response: {data}") from exc


class CachedChatClient:
    """Cache wrapper; in offline mode a cache miss is an error, never a call."""

    def __init__(
        self,
        cache: ReplayCache,
        inner: Optional[ChatClient] = None,
        model: str = "",
        offline: bool = False,
    ):
        self.cache = cache
        self.inner = inner
        self.model = model
        self.offline = offline

    def complete(self, messages: list[dict], model: Optional[str] = None) -> str:
        model = model or self.model
        key = request_key(model, messages)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        if self.offline or self.inner is None:
            raise LlmError(f"offline mode and no cached response for key {key[:12]}…")
        response = self.inner.complete(messages, model=model)
        self.cache.put(key, model, messages, response)
        return response


def client_from_env(offline: bool = False, cache_dir: str | Path | None = None) -> CachedChatClient:
    cache_dir = cache_dir or os.environ.get(ENV_CACHE_DIR) or ".situgen_cache"
    base_url = os.environ.get(ENV_BASE_URL, "")
    model = os.environ.get(ENV_MODEL, "")
    inner = None
    if base_url and not offline:
        inner = HttpChatClient(base_url, os.environ.get(ENV_API_KEY, ""), model)
    return CachedChatClient(ReplayCache(cache_dir), inner, model=model, offline=offline)
