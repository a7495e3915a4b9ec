"""Chat-completions gateway with an HTTP backend and a deterministic scripted one.

Every backend implements a single ``complete(messages) -> text`` call. The
scripted backend replays canned responses (ordered or keyed by a substring of
the latest user message) so traversal runs and tests are fully reproducible
offline; the HTTP backend speaks the chat-completions wire protocol.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Mapping, Protocol, Sequence, Union

import requests

logger = logging.getLogger(__name__)

API_KEY_ENV_VAR = "LLM_API_KEY"

ROLES = ("system", "user", "assistant")


class LlmGatewayError(Exception):
    """Base class for backend failures."""


class ScriptExhaustedError(LlmGatewayError):
    """A scripted backend ran out of responses (or no key matched)."""


class LlmTransportError(LlmGatewayError):
    """The HTTP backend failed after exhausting its retry budget."""


class LlmProtocolError(LlmGatewayError):
    """The remote endpoint answered with a non-2xx status or a bad payload."""


class CassetteMismatchError(LlmGatewayError):
    """A replayed request does not match the recorded exchange."""


@dataclass(frozen=True)
class ChatMessage:
    """One message in chat-completions format."""

    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"invalid role {self.role!r}, expected one of {ROLES}")

    def as_dict(self) -> dict[str, str]:
        return {"role": self.role, "content": self.content}


class ChatHistory:
    """Append-only ordered chat messages; at most one system message, first."""

    def __init__(self, messages: Sequence[ChatMessage] = ()) -> None:
        self._messages: list[ChatMessage] = []
        for message in messages:
            self.append(message)

    def append(self, message: ChatMessage) -> None:
        if message.role == "system":
            if self._messages:
                raise ValueError("system message must be the first message")
        self._messages.append(message)

    @property
    def messages(self) -> tuple[ChatMessage, ...]:
        return tuple(self._messages)

    def last_assistant(self) -> str:
        for message in reversed(self._messages):
            if message.role == "assistant":
                return message.content
        return ""

    def __len__(self) -> int:
        return len(self._messages)

    def __iter__(self):
        return iter(self._messages)

    def as_dicts(self) -> list[dict[str, str]]:
        return [m.as_dict() for m in self._messages]


class Backend(Protocol):
    """Anything that can answer a chat-completions style message list."""

    def complete(self, messages: Sequence[ChatMessage]) -> str: ...


class ScriptedBackend:
    """Deterministic backend replaying canned responses.

    With an ordered script, responses are consumed one per call; exhaustion
    raises loudly. With a keyed script, the first key (in insertion order)
    that occurs as a substring of the latest user message selects the
    response; no match raises.
    """

    def __init__(self, responses: Union[Sequence[str], Mapping[str, str]]) -> None:
        if isinstance(responses, Mapping):
            self._keyed: dict[str, str] | None = dict(responses)
            self._ordered: list[str] = []
        else:
            self._keyed = None
            self._ordered = list(responses)
        self._cursor = 0
        self.call_count = 0

    def complete(self, messages: Sequence[ChatMessage]) -> str:
        self.call_count += 1
        if self._keyed is not None:
            latest_user = ""
            for message in reversed(messages):
                if message.role == "user":
                    latest_user = message.content
                    break
            for key, response in self._keyed.items():
                if key in latest_user:
                    return response
            raise ScriptExhaustedError(
                f"no script key matches user message: {latest_user[:120]!r}"
            )
        if self._cursor >= len(self._ordered):
            raise ScriptExhaustedError(
                f"scripted backend exhausted after {self._cursor} responses"
            )
        response = self._ordered[self._cursor]
        self._cursor += 1
        return response


def scripted_backend(responses: Union[Sequence[str], Mapping[str, str]]) -> ScriptedBackend:
    """Build a deterministic scripted backend from an ordered or keyed script."""
    return ScriptedBackend(responses)


def request_body(
    messages: Sequence[ChatMessage],
    model: str,
    temperature: float,
    seed: int | None,
) -> dict:
    body: dict = {
        "model": model,
        "messages": [m.as_dict() for m in messages],
        "temperature": temperature,
    }
    if seed is not None:
        body["seed"] = seed
    return body


def request_fingerprint(body: dict) -> str:
    """Stable hash of a wire request, used to index cassette records."""
    canonical = json.dumps(body, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class HttpBackend:
    """Chat-completions client over HTTP with retry on transient failures.

    Retries 3 attempts with exponential backoff starting at 500 ms, only on
    transport errors and 429/5xx statuses. Nothing is ever truncated
    silently; an oversized context surfaces as the endpoint's error.
    """

    max_attempts = 3
    backoff_start = 0.5

    def __init__(
        self,
        endpoint: str,
        model: str,
        temperature: float = 1.0,
        seed: int | None = None,
        timeout: float = 60.0,
        record_to: str | None = None,
    ) -> None:
        if not endpoint or not model:
            raise ValueError("http backend requires a non-empty endpoint and model")
        self.endpoint = endpoint
        self.model = model
        self.temperature = temperature
        self.seed = seed
        self.timeout = timeout
        self.record_to = record_to
        self.call_count = 0

    def complete(self, messages: Sequence[ChatMessage]) -> str:
        self.call_count += 1
        body = request_body(messages, self.model, self.temperature, self.seed)
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(API_KEY_ENV_VAR)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"

        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(self.backoff_start * (2 ** (attempt - 1)))
            try:
                response = requests.post(
                    self.endpoint, json=body, headers=headers, timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_error = exc
                logger.warning("transport error on attempt %d: %s", attempt + 1, exc)
                continue
            if response.status_code == 429 or response.status_code >= 500:
                last_error = LlmProtocolError(
                    f"endpoint answered {response.status_code}"
                )
                logger.warning(
                    "retryable status %d on attempt %d", response.status_code, attempt + 1
                )
                continue
            if not response.ok:
                raise LlmProtocolError(
                    f"endpoint answered {response.status_code}: {response.text[:500]}"
                )
            text = self._extract_content(response)
            if self.record_to is not None:
                _append_cassette_record(self.record_to, body, text)
            return text
        raise LlmTransportError(
            f"request failed after {self.max_attempts} attempts: {last_error}"
        )

    @staticmethod
    def _extract_content(response: requests.Response) -> str:
        try:
            payload = response.json()
            content = payload["choices"][0]["message"]["content"]
        except (ValueError, LookupError, TypeError) as exc:
            raise LlmProtocolError(f"malformed chat-completions payload: {exc}") from exc
        if not isinstance(content, str):
            raise LlmProtocolError("chat-completions content is not text")
        return content


def _append_cassette_record(path: str, body: dict, response_text: str) -> None:
    record = {"request_hash": request_fingerprint(body), "response_text": response_text}
    with open(path, "a", encoding="utf-8") as handle:
        handle.write(json.dumps(record, ensure_ascii=False) + "\n")


class CassetteBackend:
    """Replays recorded HTTP exchanges offline, in order.

    Each replayed request is re-fingerprinted with the same model,
    temperature and seed; a hash mismatch or an exhausted cassette raises so
    drifting prompts fail loudly instead of replaying the wrong response.
    """

    def __init__(
        self,
        cassette_path: str,
        model: str,
        temperature: float = 1.0,
        seed: int | None = None,
    ) -> None:
        self.model = model
        self.temperature = temperature
        self.seed = seed
        self._records: list[dict] = []
        with open(cassette_path, encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if line:
                    self._records.append(json.loads(line))
        self._cursor = 0
        self.call_count = 0

    def complete(self, messages: Sequence[ChatMessage]) -> str:
        self.call_count += 1
        if self._cursor >= len(self._records):
            raise CassetteMismatchError("cassette exhausted")
        record = self._records[self._cursor]
        self._cursor += 1
        body = request_body(messages, self.model, self.temperature, self.seed)
        fingerprint = request_fingerprint(body)
        if record["request_hash"] != fingerprint:
            raise CassetteMismatchError(
                f"request hash {fingerprint} does not match recorded "
                f"{record['request_hash']}"
            )
        return record["response_text"]


@dataclass(frozen=True)
class BackendConfig:
    """Immutable backend description; build() creates a fresh backend instance.

    A fresh instance per session keeps ordered scripts deterministic: every
    session replays the script from the start.
    """

    kind: str  # "http" or "scripted"
    endpoint: str = ""
    model: str = ""
    temperature: float = 1.0
    seed: int | None = None
    script: tuple[str, ...] = ()
    keyed_script: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in ("http", "scripted"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.kind == "http" and (not self.endpoint or not self.model):
            raise ValueError("http backend config requires endpoint and model")

    def build(self) -> Backend:
        if self.kind == "scripted":
            if self.keyed_script:
                return ScriptedBackend(dict(self.keyed_script))
            return ScriptedBackend(list(self.script))
        return HttpBackend(
            endpoint=self.endpoint,
            model=self.model,
            temperature=self.temperature,
            seed=self.seed,
        )


def llm_response(
    user_message: str,
    system_message: str,
    history: ChatHistory | None,
    backend: Backend,
) -> tuple[str, ChatHistory]:
    """Send one user turn to the backend and record both turns in the history.

    A fresh history is created (system message first) when none is given; an
    existing history already carries its system message and is appended to in
    place. Returns the assistant response and the updated history.
    """
    if history is None:
        history = ChatHistory()
        if system_message:
            history.append(ChatMessage("system", system_message))
    history.append(ChatMessage("user", user_message))
    response = backend.complete(history.messages)
    history.append(ChatMessage("assistant", response))
    logger.debug(
        "llm exchange: %s",
        json.dumps({"messages": history.as_dicts()}, ensure_ascii=False),
    )
    return response, history
