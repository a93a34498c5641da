"""Policy storage with embedding-based retrieval.

Every verified policy is indexed under the embedding of its reconstructed
sentence.  Requests are phrased as a short query string, embedded with the
same provider, and ranked by cosine similarity against a flat index (the
index stores unit vectors, so cosine is a single matrix product).
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import CorpusFormatError, SchemaError, UnverifiedPolicy
from .model import (
    AccessRequest,
    Day,
    Policy,
    Status,
    TimeOfDay,
    policy_from_dict,
    policy_to_dict,
    render_literal,
    render_policy_sentence,
)
from .providers import EmbeddingProvider

_UNIT_TOLERANCE = 1e-9


def as_embedding(values: Sequence[float], dimension: int | None = None) -> np.ndarray:
    """Validates a raw vector as a finite unit vector."""
    vec = np.asarray(values, dtype=np.float64)
    if vec.ndim != 1 or vec.size == 0:
        raise SchemaError("embedding must be a non-empty flat vector")
    if dimension is not None and vec.size != dimension:
        raise SchemaError(f"embedding has dimension {vec.size}, expected {dimension}")
    if not np.all(np.isfinite(vec)):
        raise SchemaError("embedding contains non-finite values")
    norm = float(np.linalg.norm(vec))
    if abs(norm - 1.0) > _UNIT_TOLERANCE:
        raise SchemaError(f"embedding norm {norm} is not 1 within {_UNIT_TOLERANCE}")
    return vec


def _twelve_hour(time: TimeOfDay) -> str:
    hours, minutes = time.minutes // 60, time.minutes % 60
    suffix = "AM" if hours < 12 else "PM"
    hours = hours % 12 or 12
    if minutes:
        return f"{hours}:{minutes:02d} {suffix}"
    return f"{hours} {suffix}"


def build_query_string(request: AccessRequest) -> str:
    """Phrases a request the way the indexed sentences phrase policies."""
    parts = [f"User {request.subject} wants to {request.action} {request.resource}"]
    for attr in sorted(request.context):
        value = request.context[attr]
        if attr == "time" and isinstance(value, TimeOfDay):
            parts.append(f"at {_twelve_hour(value)}")
        elif attr == "day" and isinstance(value, Day):
            parts.append(f"on {value.name}")
        elif attr == "device":
            parts.append(f"on a {render_literal(value)}")
        else:
            parts.append(f"{attr} is {render_literal(value)}")
    query = " ".join(parts)
    if request.context_text:
        query += f". Context: {request.context_text}"
    return query


@dataclass(frozen=True)
class IndexEntry:
    policy: Policy
    vector: np.ndarray
    text: str


@dataclass(frozen=True)
class MatchResult:
    policy: Policy
    score: float
    text: str

    @property
    def policy_id(self) -> str:
        return self.policy.id


class PolicyRepository:
    """Flat cosine index over verified policies."""

    def __init__(self, embedder: EmbeddingProvider):
        self._embedder = embedder
        self._entries: dict[str, IndexEntry] = {}
        self._matrix: np.ndarray | None = None
        self._order: list[str] = []

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, policy_id: str) -> bool:
        return policy_id in self._entries

    def get(self, policy_id: str) -> Policy | None:
        entry = self._entries.get(policy_id)
        return entry.policy if entry else None

    def policies(self) -> list[Policy]:
        return [self._entries[pid].policy for pid in sorted(self._entries)]

    def match_text_of(self, policy_id: str) -> str:
        """The exact text a policy was indexed under."""
        return self._entries[policy_id].text

    def index_policy(self, policy: Policy) -> IndexEntry:
        if policy.status is not Status.VERIFIED:
            raise UnverifiedPolicy(
                f"policy {policy.id} is {policy.status.value}; only verified "
                "policies are indexed"
            )
        text = render_policy_sentence(policy)
        vector = self._embedder.embed([text])[0]
        entry = IndexEntry(policy=policy, vector=as_embedding(vector), text=text)
        self._entries[policy.id] = entry
        self._matrix = None
        return entry

    def index_policies(self, policies: Iterable[Policy]) -> list[IndexEntry]:
        return [self.index_policy(p) for p in policies]

    def remove(self, policy_id: str) -> bool:
        if policy_id in self._entries:
            del self._entries[policy_id]
            self._matrix = None
            return True
        return False

    def _ensure_matrix(self) -> None:
        if self._matrix is None:
            self._order = sorted(self._entries)
            if self._order:
                self._matrix = np.vstack(
                    [self._entries[pid].vector for pid in self._order]
                )
            else:
                self._matrix = np.zeros((0, 0), dtype=np.float64)

    def match_text(self, text: str, limit: int | None = None) -> list[MatchResult]:
        """Ranks all indexed policies against a free-text query."""
        self._ensure_matrix()
        if not self._order:
            return []
        if limit is not None and limit <= 0:
            return []
        query = as_embedding(self._embedder.embed([text])[0])
        scores = self._matrix @ query
        # rows sit in ascending id order, so stable sorts of the negated
        # scores break ties toward the smaller id while the whole ranking
        # stays inside numpy
        count = len(self._order)
        if limit is None or limit >= count:
            ranked = np.argsort(-scores, kind="stable")
        else:
            # selection instead of a full sort; the band keeps every row at
            # or above the cutoff score, so boundary ties stay deterministic
            cut = count - limit
            block = np.argpartition(scores, cut)[cut:]
            band = np.flatnonzero(scores >= scores[block].min())
            ranked = band[np.argsort(-scores[band], kind="stable")][:limit]
        out = []
        for row in ranked:
            entry = self._entries[self._order[row]]
            out.append(
                MatchResult(
                    policy=entry.policy,
                    score=float(scores[row]),
                    text=entry.text,
                )
            )
        return out

    def match(self, request: AccessRequest, limit: int | None = 5) -> list[MatchResult]:
        """Top matches for a request; ``limit=None`` ranks everything."""
        return self.match_text(build_query_string(request), limit=limit)

    # persistence -----------------------------------------------------------

    def persist(self, path: str | Path) -> None:
        """Writes the index as JSON lines, atomically.

        The first line is a header carrying the embedding dimension; each
        following line holds one policy with its vector and indexed text.
        """
        path = Path(path)
        self._ensure_matrix()
        dimension = self._embedder.dimension
        if dimension is None and self._order:
            dimension = int(self._entries[self._order[0]].vector.size)
        lines = [json.dumps({"dim": dimension, "count": len(self._entries)})]
        for pid in sorted(self._entries):
            entry = self._entries[pid]
            lines.append(
                json.dumps(
                    {
                        "policy": policy_to_dict(entry.policy),
                        "vector": [float(x) for x in entry.vector],
                        "text": entry.text,
                    },
                    sort_keys=True,
                )
            )
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as handle:
                handle.write("\n".join(lines) + "\n")
                handle.flush()
                os.fsync(handle.fileno())
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    @classmethod
    def load(cls, path: str | Path, embedder: EmbeddingProvider) -> "PolicyRepository":
        path = Path(path)
        repo = cls(embedder)
        with open(path, "r", encoding="utf-8") as handle:
            raw_lines = handle.read().splitlines()
        if not raw_lines:
            raise CorpusFormatError("corpus file is empty", line=1)
        try:
            header = json.loads(raw_lines[0])
        except json.JSONDecodeError as exc:
            raise CorpusFormatError(f"header is not JSON: {exc}", line=1)
        if not isinstance(header, dict) or "dim" not in header:
            raise CorpusFormatError("header must be an object with a 'dim' key", line=1)
        dimension = header["dim"]
        if dimension is not None and (
            not isinstance(dimension, int) or dimension < 2
        ):
            raise CorpusFormatError(f"invalid dimension {dimension!r}", line=1)
        expected = header.get("count")
        body = [line for line in raw_lines[1:] if line.strip()]
        if isinstance(expected, int) and expected != len(body):
            raise CorpusFormatError(
                f"header promises {expected} entries, file holds {len(body)}", line=1
            )
        for number, line in enumerate(raw_lines[1:], start=2):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"entry is not JSON: {exc}", line=number)
            if not isinstance(obj, dict) or not {"policy", "vector", "text"} <= set(obj):
                raise CorpusFormatError(
                    "entry must be an object with policy, vector and text keys",
                    line=number,
                )
            try:
                policy = policy_from_dict(obj["policy"])
                vector = as_embedding(obj["vector"], dimension=dimension)
            except SchemaError as exc:
                raise CorpusFormatError(str(exc), line=number)
            if policy.status is not Status.VERIFIED:
                raise CorpusFormatError(
                    f"policy {policy.id} is {policy.status.value}, not verified",
                    line=number,
                )
            if policy.id in repo._entries:
                raise CorpusFormatError(
                    f"duplicate policy id {policy.id}", line=number
                )
            repo._entries[policy.id] = IndexEntry(
                policy=policy, vector=vector, text=str(obj["text"])
            )
        repo._matrix = None
        return repo
