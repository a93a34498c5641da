"""HTTP gateway over the policy engine.

Endpoints cover the full pipeline: submit descriptions, list and delete
policies, decide requests (single or batch), inspect conflicts, read
feedback records, and check health.  Submissions are atomic: when any new
verified policy raises an effect conflict, nothing from that submission is
stored and the conflict reports come back with status 409.

Errors always serialize as ``{"code": ..., "message": ..., "details": ...}``.
Credential values never appear in any response; health reports only which
kind of provider is configured.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import Body, FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import audit as audit_mod
from .audit import AuditLog
from .config import (
    EngineConfig,
    build_chat_provider,
    build_embedding_provider,
    build_entailment_provider,
    load_config,
)
from .conflicts import ConflictKind, detect_all, report_to_dict
from .engine import DecisionEngine, decision_to_dict
from .errors import (
    AuthError,
    ConfigError,
    EmptyInput,
    LaceError,
    MalformedOutput,
    MockMiss,
    ParseError,
    SchemaError,
    Timeout,
    TransportError,
    UnverifiedPolicy,
)
from .generation import generate_policies, verify_policies
from .model import (
    Status,
    policies_from_json,
    policy_to_dict,
    request_from_dict,
)
from .providers import ChatProvider, EntailmentProvider
from .repository import PolicyRepository
from .taxonomy import EMPTY_TAXONOMY, Taxonomy


@dataclass
class GatewayState:
    repository: PolicyRepository
    taxonomy: Taxonomy = EMPTY_TAXONOMY
    chat: ChatProvider | None = None
    entailment: EntailmentProvider | None = None
    audit: AuditLog | None = None
    top_k: int | None = None
    corpus_path: Path | None = None
    provider_kinds: dict = field(default_factory=dict)

    def __post_init__(self):
        self.engine = DecisionEngine(
            self.repository, self.taxonomy, self.chat, self.top_k, self.audit
        )

    def persist(self) -> None:
        if self.corpus_path is not None:
            self.repository.persist(self.corpus_path)


def gateway_from_config(config: EngineConfig) -> GatewayState:
    embedder = build_embedding_provider(config)
    taxonomy = EMPTY_TAXONOMY
    if config.taxonomy_path is not None:
        taxonomy = Taxonomy.from_file(config.taxonomy_path)

    if config.corpus_path is not None and Path(config.corpus_path).exists():
        repository = PolicyRepository.load(config.corpus_path, embedder)
    else:
        repository = PolicyRepository(embedder)
        if config.policies_path is not None:
            text = Path(config.policies_path).read_text(encoding="utf-8")
            for policy in policies_from_json(json.loads(text)):
                if policy.status is Status.VERIFIED:
                    repository.index_policy(policy)

    return GatewayState(
        repository=repository,
        taxonomy=taxonomy,
        chat=build_chat_provider(config),
        entailment=build_entailment_provider(config),
        audit=AuditLog(config.audit_path),
        top_k=config.top_k,
        corpus_path=config.corpus_path,
        provider_kinds={
            "chat": config.chat["provider"],
            "embedding": config.embedding["provider"],
            "entailment": config.entailment["provider"],
        },
    )


_ERROR_STATUS = {
    SchemaError: 400,
    ParseError: 400,
    EmptyInput: 400,
    UnverifiedPolicy: 400,
    ConfigError: 500,
    AuthError: 503,
    Timeout: 502,
    TransportError: 502,
    MockMiss: 502,
    MalformedOutput: 502,
}


def _error_payload(code: str, message: str, details=None) -> dict:
    return {"code": code, "message": message, "details": details or {}}


def create_app(state: GatewayState) -> FastAPI:
    app = FastAPI(title="lace gateway")
    app.state.gateway = state

    @app.exception_handler(LaceError)
    async def lace_error(request: Request, exc: LaceError):
        status = 500
        for kind, code in _ERROR_STATUS.items():
            if isinstance(exc, kind):
                status = code
                break
        return JSONResponse(
            status_code=status,
            content=_error_payload(type(exc).__name__.lower(), str(exc)),
        )

    @app.post("/v1/descriptions")
    async def submit_descriptions(payload: dict = Body(...)):
        descriptions = payload.get("descriptions")
        if not isinstance(descriptions, list) or not all(
            isinstance(d, str) for d in descriptions
        ):
            return JSONResponse(
                status_code=400,
                content=_error_payload(
                    "schemaerror", "body must carry a 'descriptions' list of strings"
                ),
            )
        if state.chat is None or state.entailment is None:
            return JSONResponse(
                status_code=503,
                content=_error_payload(
                    "providers_unavailable",
                    "policy generation needs chat and entailment providers",
                ),
            )
        result = generate_policies(descriptions, state.chat)
        checked = verify_policies(result.policies, state.entailment)
        verified = [p for p, v in checked if p.status is Status.VERIFIED]

        existing = state.repository.policies()
        taken = {p.id for p in existing}
        clash = sorted(p.id for p in verified if p.id in taken)
        if clash:
            return JSONResponse(
                status_code=400,
                content=_error_payload(
                    "schemaerror",
                    f"policy id already stored: {', '.join(clash)}",
                    {"ids": clash},
                ),
            )

        new_ids = {p.id for p in verified}
        reports = [
            r
            for r in detect_all(existing + verified, state.taxonomy)
            if {r.first, r.second} & new_ids
        ]
        effect = [r for r in reports if r.kind is ConflictKind.EFFECT]
        body = {
            "policies": [policy_to_dict(p) for p, _ in checked],
            "verdicts": [
                {
                    "policy_id": v.policy_id,
                    "status": v.status.value,
                    "forward": v.forward.value,
                    "backward": v.backward.value,
                    "rendered_sentence": v.rendered_sentence,
                }
                for _, v in checked
            ],
            "failures": [
                {"index": f.index, "error": f.error} for f in result.failures
            ],
            "conflicts": [report_to_dict(r) for r in reports],
        }
        if effect:
            return JSONResponse(
                status_code=409,
                content=_error_payload(
                    "effect_conflict",
                    "submission raises effect conflicts; nothing was stored",
                    body,
                ),
            )
        for policy in verified:
            state.repository.index_policy(policy)
        if verified:
            state.persist()
        body["stored"] = sorted(p.id for p in verified)
        return body

    @app.get("/v1/policies")
    async def list_policies():
        return {
            "policies": [policy_to_dict(p) for p in state.repository.policies()]
        }

    @app.delete("/v1/policies/{policy_id}")
    async def delete_policy(policy_id: str):
        if not state.repository.remove(policy_id):
            return JSONResponse(
                status_code=404,
                content=_error_payload(
                    "not_found", f"no policy with id {policy_id}"
                ),
            )
        state.persist()
        return {"deleted": policy_id}

    @app.post("/v1/decisions")
    async def decide(payload: dict = Body(...)):
        if "requests" in payload:
            raw = payload["requests"]
            if not isinstance(raw, list):
                return JSONResponse(
                    status_code=400,
                    content=_error_payload("schemaerror", "'requests' must be a list"),
                )
            requests = []
            for i, entry in enumerate(raw):
                try:
                    if not isinstance(entry, dict):
                        raise SchemaError("request must be an object")
                    requests.append(request_from_dict(entry))
                except (SchemaError, ParseError) as exc:
                    return JSONResponse(
                        status_code=400,
                        content=_error_payload(
                            "schemaerror",
                            f"requests[{i}]: {exc}",
                            {"index": i},
                        ),
                    )
            decisions = state.engine.decide_batch(requests)
            return {"decisions": [decision_to_dict(d) for d in decisions]}
        decision = state.engine.decide(request_from_dict(payload))
        return decision_to_dict(decision)

    @app.get("/v1/conflicts")
    async def conflicts():
        reports = detect_all(state.repository.policies(), state.taxonomy)
        return {"conflicts": [report_to_dict(r) for r in reports]}

    @app.get("/v1/feedback")
    async def feedback(since: int = 0):
        if state.audit is None:
            return {"feedback": [], "last_seq": 0}
        records = state.audit.read(since=since, kind=audit_mod.KIND_MISMATCH)
        return {"feedback": records, "last_seq": state.audit.last_seq}

    @app.get("/v1/health")
    async def health():
        return {
            "status": "ok",
            "policies": len(state.repository),
            "last_seq": state.audit.last_seq if state.audit else 0,
            "providers": dict(state.provider_kinds),
        }

    return app


def create_app_from_config(path) -> FastAPI:
    return create_app(gateway_from_config(load_config(path)))
