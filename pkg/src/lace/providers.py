"""Model-backed services behind small interfaces: chat, embeddings, and
entailment.

Each service has an HTTP implementation and a deterministic mock, so the
whole pipeline runs offline and every test is reproducible.  Credentials
are named by environment variable and resolved only at call time; they are
never stored on config objects, logged, or serialized.
"""

from __future__ import annotations

import hashlib
import os
import re
import time
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Protocol, Sequence

import numpy as np
import requests

from .errors import (
    AuthError,
    ConfigError,
    MalformedOutput,
    MockMiss,
    Timeout,
    TransportError,
)


class EntailmentLabel(Enum):
    ENTAILED = "entailed"
    CONTRADICTED = "contradicted"
    NEUTRAL = "neutral"


@dataclass(frozen=True)
class ProviderConfig:
    endpoint: str
    model: str
    credential_env: str | None = None
    timeout: float = 30.0
    max_retries: int = 2
    backoff_seconds: float = 0.5

    def __post_init__(self):
        if self.timeout <= 0:
            raise ConfigError("provider timeout must be positive")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be at least 0")

    def credential(self) -> str | None:
        """Resolves the credential from the environment at call time."""
        if self.credential_env is None:
            return None
        value = os.environ.get(self.credential_env)
        if value is None:
            raise AuthError(
                f"credential environment variable {self.credential_env} is not set"
            )
        return value


class ChatProvider(Protocol):
    def chat(self, prompt: str) -> str: ...


class EmbeddingProvider(Protocol):
    @property
    def dimension(self) -> int | None: ...

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]: ...


class EntailmentProvider(Protocol):
    def entail(self, premise: str, hypothesis: str) -> EntailmentLabel: ...


# ---------------------------------------------------------------------------
# HTTP implementations


def _post_json(config: ProviderConfig, payload: dict, owner) -> dict:
    """POSTs with retries and exponential backoff.

    Transport failures, timeouts, and 5xx responses are retried up to
    ``max_retries`` times; auth rejections are not.  ``owner.last_retries``
    records how many retries the last call used.
    """
    headers = {"Content-Type": "application/json"}
    credential = config.credential()
    if credential is not None:
        headers["Authorization"] = f"Bearer {credential}"
    attempts = config.max_retries + 1
    owner.last_retries = 0
    failure: Exception | None = None
    for attempt in range(attempts):
        if attempt:
            time.sleep(config.backoff_seconds * 2 ** (attempt - 1))
            owner.last_retries = attempt
        try:
            response = requests.post(
                config.endpoint, json=payload, headers=headers, timeout=config.timeout
            )
        except requests.Timeout as exc:
            failure = Timeout(f"{config.endpoint} timed out after {config.timeout}s")
            failure.__cause__ = exc
            continue
        except requests.RequestException as exc:
            failure = TransportError(f"cannot reach {config.endpoint}: {exc.__class__.__name__}")
            failure.__cause__ = exc
            continue
        if response.status_code in (401, 403):
            raise AuthError(
                f"{config.endpoint} rejected the credential from "
                f"{config.credential_env or 'no configured variable'}"
            )
        if response.status_code >= 500:
            failure = TransportError(
                f"{config.endpoint} answered {response.status_code}"
            )
            continue
        if response.status_code >= 400:
            raise TransportError(
                f"{config.endpoint} answered {response.status_code}"
            )
        try:
            return response.json()
        except ValueError as exc:
            raise MalformedOutput(f"{config.endpoint} returned non-JSON body") from exc
    raise failure if failure is not None else TransportError("no attempts made")


class HttpChatProvider:
    def __init__(self, config: ProviderConfig):
        self.config = config
        self.last_retries = 0
        self.call_count = 0

    def chat(self, prompt: str) -> str:
        self.call_count += 1
        payload = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
        }
        data = _post_json(self.config, payload, self)
        try:
            content = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise MalformedOutput("chat reply is missing choices[0].message.content")
        if not isinstance(content, str):
            raise MalformedOutput("chat reply content is not a string")
        return content


class HttpEmbeddingProvider:
    def __init__(self, config: ProviderConfig, dimension: int | None = None):
        self.config = config
        self.last_retries = 0
        self.call_count = 0
        self._dimension = dimension

    @property
    def dimension(self) -> int | None:
        return self._dimension

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        self.call_count += 1
        payload = {"model": self.config.model, "input": list(texts)}
        data = _post_json(self.config, payload, self)
        rows = data.get("data") if isinstance(data, dict) else None
        if not isinstance(rows, list) or len(rows) != len(texts):
            raise MalformedOutput("embedding reply does not align with the input texts")
        vectors: list[np.ndarray] = []
        for row in rows:
            values = row.get("embedding") if isinstance(row, dict) else None
            if not isinstance(values, list):
                raise MalformedOutput("embedding reply row has no vector")
            vec = np.asarray(values, dtype=np.float64)
            if vec.ndim != 1 or vec.size == 0 or not np.all(np.isfinite(vec)):
                raise MalformedOutput("embedding vector is empty or not finite")
            if self._dimension is None:
                self._dimension = int(vec.size)
            elif vec.size != self._dimension:
                raise MalformedOutput(
                    f"embedding dimension changed from {self._dimension} to {vec.size}"
                )
            vectors.append(_unit(vec))
        return vectors


_ENTAILMENT_PROMPT = (
    "Decide the relation between the two statements.\n"
    "Premise: {premise}\n"
    "Hypothesis: {hypothesis}\n"
    "Answer with exactly one word: entailed, contradicted, or neutral."
)


class HttpEntailmentProvider:
    """Entailment over the chat wire with a fixed labeling prompt."""

    def __init__(self, config: ProviderConfig):
        self._chat = HttpChatProvider(config)

    @property
    def last_retries(self) -> int:
        return self._chat.last_retries

    def entail(self, premise: str, hypothesis: str) -> EntailmentLabel:
        reply = self._chat.chat(
            _ENTAILMENT_PROMPT.format(premise=premise, hypothesis=hypothesis)
        )
        lowered = reply.lower()
        for label in EntailmentLabel:
            if label.value in lowered:
                return label
        raise MalformedOutput(f"entailment reply is not a known label: {reply!r}")


# ---------------------------------------------------------------------------
# mocks


def prompt_key(prompt: str) -> str:
    """Script key for a prompt: its sha256 hexdigest."""
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class MockChatProvider:
    """Scripted chat replies keyed by prompt hash.

    Script values may be lists, consumed one reply per call until the last,
    which then repeats.  The key ``"*"`` answers prompts with no dedicated
    entry.  A prompt with no entry at all raises :class:`MockMiss`.
    """

    def __init__(self, script: Mapping[str, str | list[str]] | None = None):
        self._script: dict[str, list[str]] = {}
        for key, value in (script or {}).items():
            self._script[key] = list(value) if isinstance(value, list) else [value]
        self.call_count = 0
        self.prompts: list[str] = []

    def add(self, prompt: str, reply: str | list[str]) -> None:
        self._script[prompt_key(prompt)] = (
            list(reply) if isinstance(reply, list) else [reply]
        )

    def chat(self, prompt: str) -> str:
        self.call_count += 1
        self.prompts.append(prompt)
        queue = self._script.get(prompt_key(prompt))
        if queue is None:
            queue = self._script.get("*")
        if not queue:
            raise MockMiss(f"no scripted reply for prompt {prompt_key(prompt)[:12]}...")
        if len(queue) > 1:
            return queue.pop(0)
        return queue[0]


def _unit(vec: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        out = np.zeros_like(vec)
        out[0] = 1.0
        return out
    return vec / norm


class MockEmbeddingProvider:
    """Deterministic bag-of-tokens embedding.

    Tokens are lowercased and hashed (salted sha256) to a signed bucket;
    occurrences accumulate and the result is L2-normalized.  Token order
    never matters and the same text embeds to the same bytes on every
    platform.
    """

    _SALT = b"signed-bucket-v1:"

    def __init__(self, dimension: int = 256):
        if dimension < 2:
            raise ConfigError("embedding dimension must be at least 2")
        self._dimension = dimension
        self.call_count = 0

    @property
    def dimension(self) -> int:
        return self._dimension

    def bucket(self, token: str) -> tuple[int, float]:
        digest = hashlib.sha256(self._SALT + token.encode("utf-8")).digest()
        index = int.from_bytes(digest[:4], "big") % self._dimension
        sign = 1.0 if digest[4] % 2 == 0 else -1.0
        return index, sign

    @staticmethod
    def tokenize(text: str) -> list[str]:
        return [t.strip("'") for t in re.findall(r"[a-z0-9:']+", text.lower()) if t.strip("'")]

    def embed_one(self, text: str) -> np.ndarray:
        vec = np.zeros(self._dimension, dtype=np.float64)
        for token in self.tokenize(text):
            index, sign = self.bucket(token)
            vec[index] += sign
        return _unit(vec)

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        self.call_count += 1
        return [self.embed_one(t) for t in texts]


# entailment mock -----------------------------------------------------------

_STOPWORDS = frozenset(
    """a an the to is are am was were be being been can could shall should
    will would in on at of by if and or only between from their there it its
    for with when while during that this these those who which after before
    outside inside within time day days""".split()
)
_NEGATORS = frozenset({"not", "no", "never", "cannot"})
_ALLOW_WORDS = frozenset({"allow", "allowed", "allows", "permit", "permits", "permitted", "may"})
_DENY_WORDS = frozenset({"deny", "denied", "denies", "prohibit", "prohibits", "prohibited", "forbid", "forbidden", "banned"})
_GLUE_ATTRS = frozenset({"location", "device", "room", "place"})
_DAY_ALIAS_TOKENS = {
    "weekend": ("saturday", "sunday"),
    "weekends": ("saturday", "sunday"),
    "weekday": ("monday", "tuesday", "wednesday", "thursday", "friday"),
    "weekdays": ("monday", "tuesday", "wednesday", "thursday", "friday"),
}
_OPWORD = {">=": "ge", "<=": "le", "==": "eq", "!=": "ne", ">": "gt", "<": "lt"}

_TIME_RANGE_RE = re.compile(
    r"(?:between\s+|from\s+)?(\d{1,2}:\d{2})\s*(?:-|to|and|until|till)\s*(\d{1,2}:\d{2})"
)
_COMPARE_RE = re.compile(
    r"\b([a-z_][a-z0-9_.]*)\s*(>=|<=|==|!=|>|<)\s*([0-9a-z:._]+)"
)


def _fold_comparison(match: re.Match) -> str:
    attr, op, value = match.group(1), _OPWORD[match.group(2)], match.group(3)
    value = value.rstrip(".")
    if attr == "time":
        return f" {op}:{value} "
    if attr == "day" or attr in _GLUE_ATTRS:
        if op == "eq":
            return f" {value} "
        if op == "ne":
            return f" ne:{value} "
        return f" {op}:{value} "
    return f" {attr} {op}:{value} "


class MockEntailmentProvider:
    """Token-overlap entailment with negation sensitivity.

    Both sentences are normalized to a bag of content tokens: comparisons
    and written time ranges collapse to ``ge:``/``le:`` style tokens, day
    aliases expand to day names, allow/deny synonyms fold to one word, and
    glue words drop out.  The hypothesis is entailed when its bag is
    contained in the premise's and the negation parity agrees; matching
    bags with opposite parity contradict; anything else is neutral.
    """

    def normalize(self, text: str) -> tuple[Counter, int]:
        lowered = " ".join(text.lower().split())
        lowered = _TIME_RANGE_RE.sub(lambda m: f" ge:{m.group(1)} le:{m.group(2)} ", lowered)
        lowered = _COMPARE_RE.sub(_fold_comparison, lowered)
        lowered = re.sub(r"[-\[\](){},;!?'\"]", " ", lowered)
        tokens: list[str] = []
        parity = 0
        for raw in lowered.split():
            token = raw.strip(".")
            if not token:
                continue
            if token in _NEGATORS:
                parity ^= 1
                continue
            if token in _STOPWORDS:
                continue
            if token in _ALLOW_WORDS:
                tokens.append("allow")
            elif token in _DENY_WORDS:
                tokens.append("deny")
            elif token in _DAY_ALIAS_TOKENS:
                tokens.extend(_DAY_ALIAS_TOKENS[token])
            else:
                tokens.append(token)
        return Counter(tokens), parity

    def entail(self, premise: str, hypothesis: str) -> EntailmentLabel:
        p_tokens, p_parity = self.normalize(premise)
        h_tokens, h_parity = self.normalize(hypothesis)
        forward = not (h_tokens - p_tokens)  # hypothesis adds nothing new
        backward = not (p_tokens - h_tokens)
        if forward and p_parity == h_parity:
            return EntailmentLabel.ENTAILED
        if (forward or backward) and p_parity != h_parity:
            return EntailmentLabel.CONTRADICTED
        return EntailmentLabel.NEUTRAL
