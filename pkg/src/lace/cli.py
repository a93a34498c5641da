"""Command line entry points.

``lace generate`` turns descriptions into verified policies, ``lace
decide`` answers requests, ``lace conflicts`` and ``lace verify`` audit a
policy set, ``lace serve`` runs the HTTP gateway, and ``lace bench``
measures retrieval latency across corpus sizes.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
import time
from pathlib import Path

from .config import (
    build_chat_provider,
    build_embedding_provider,
    build_entailment_provider,
    load_config,
)
from .conflicts import ConflictKind, detect_all, report_to_dict
from .engine import DecisionEngine, decision_to_dict
from .errors import LaceError, ParseError
from .generation import generate_policies, verify_policies
from .model import (
    AccessRequest,
    Day,
    Effect,
    Policy,
    Status,
    TimeOfDay,
    parse_conditions,
    policies_from_json,
    policy_to_dict,
    request_from_dict,
)
from .providers import MockEmbeddingProvider
from .repository import PolicyRepository
from .service import create_app, gateway_from_config
from .taxonomy import EMPTY_TAXONOMY, Taxonomy


def _read_json(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read input file {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"input file {path} is not valid JSON: {exc}") from exc


def _emit(value) -> None:
    print(json.dumps(value, indent=2, ensure_ascii=False))


def _load_state(args):
    config = load_config(args.config)
    return gateway_from_config(config)


def _cmd_generate(args) -> int:
    config = load_config(args.config)
    chat = build_chat_provider(config)
    entailment = build_entailment_provider(config)
    if chat is None or entailment is None:
        print("generate needs chat and entailment providers", file=sys.stderr)
        return 2
    raw = _read_json(args.file)
    descriptions = raw.get("descriptions") if isinstance(raw, dict) else raw
    result = generate_policies(descriptions, chat)
    checked = verify_policies(result.policies, entailment)
    _emit(
        {
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
        }
    )
    return 0


def _policies_for_audit(args) -> tuple[list[Policy], Taxonomy]:
    config = load_config(args.config)
    taxonomy = EMPTY_TAXONOMY
    if config.taxonomy_path is not None:
        taxonomy = Taxonomy.from_file(config.taxonomy_path)
    if args.file:
        policies = policies_from_json(_read_json(args.file))
    else:
        state = gateway_from_config(config)
        policies = state.repository.policies()
    return policies, taxonomy


def _cmd_conflicts(args) -> int:
    policies, taxonomy = _policies_for_audit(args)
    reports = detect_all(policies, taxonomy)
    _emit({"conflicts": [report_to_dict(r) for r in reports]})
    return 0


def _cmd_verify(args) -> int:
    policies, taxonomy = _policies_for_audit(args)
    reports = detect_all(policies, taxonomy)
    _emit({"conflicts": [report_to_dict(r) for r in reports]})
    effect = [r for r in reports if r.kind is ConflictKind.EFFECT]
    if effect:
        print(f"{len(effect)} effect conflict(s) found", file=sys.stderr)
        return 1
    return 0


def _cmd_decide(args) -> int:
    state = _load_state(args)
    raw = _read_json(args.file)
    if isinstance(raw, dict) and "requests" in raw:
        raw = raw["requests"]
    if isinstance(raw, dict):
        raw = [raw]
    requests = [request_from_dict(r) for r in raw]
    if args.batch:
        decisions = state.engine.decide_batch(requests)
    else:
        decisions = [state.engine.decide(r) for r in requests]
    _emit({"decisions": [decision_to_dict(d) for d in decisions]})
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    config = load_config(args.config)
    host, _, port = config.listen.rpartition(":")
    if args.host is not None:
        host = args.host
    if args.port is not None:
        port = args.port
    app = create_app(gateway_from_config(config))
    uvicorn.run(app, host=host, port=int(port), log_level="warning")
    return 0


def _bench_policies(count: int, rng: random.Random) -> list[Policy]:
    subjects = ["guests", "children", "parents", "visitors", "staff", "admins"]
    resources = ["camera", "thermostat", "door lock", "speaker", "display", "sensor"]
    actions = ["view", "adjust", "control", "configure", "mute", "unlock"]
    policies = []
    for i in range(count):
        conditions = [f"time >= {rng.randrange(24):02d}:00"]
        if rng.random() < 0.5:
            conditions.append("day in weekdays")
        policies.append(
            Policy(
                id=f"bench-{i:04d}",
                subject=[rng.choice(subjects)],
                resource=[rng.choice(resources)],
                action=[rng.choice(actions)],
                effect=Effect(rng.choice(["allowed", "denied"])),
                conditions=parse_conditions(conditions),
                status=Status.VERIFIED,
            )
        )
    return policies


def _cmd_bench(args) -> int:
    rng = random.Random(7)
    sizes = [args.policies] if args.policies else [50, 100, 200, 500]
    requests = [
        AccessRequest(
            id=f"req-{i}",
            subject="guests",
            resource="camera",
            action="view",
            context={"time": TimeOfDay(19 * 60), "day": Day("Saturday")},
        )
        for i in range(args.requests)
    ]
    rows = []
    for size in sizes:
        repository = PolicyRepository(MockEmbeddingProvider(args.dimension))
        repository.index_policies(_bench_policies(size, random.Random(size)))
        engine = DecisionEngine(repository)
        for request in requests[:3]:  # warm caches before timing
            engine.assess(request)
        start = time.perf_counter()
        for request in requests:
            engine.assess(request)
        match_elapsed = time.perf_counter() - start
        start = time.perf_counter()
        for request in requests:
            engine.decide(request)
        decide_elapsed = time.perf_counter() - start
        count = max(1, len(requests))
        rows.append(
            {
                "policies": size,
                "requests": len(requests),
                "match_total_seconds": round(match_elapsed, 6),
                "match_mean_ms": round(1000.0 * match_elapsed / count, 3),
                "decide_mean_ms": round(1000.0 * decide_elapsed / count, 3),
            }
        )
    _emit({"bench": rows})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lace", description="natural language access control engine"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="turn descriptions into verified policies")
    p.add_argument("-f", "--file", required=True, help="descriptions JSON file")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("conflicts", help="report policy conflicts")
    p.add_argument("-f", "--file", help="policy JSON file (default: stored policies)")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_conflicts)

    p = sub.add_parser("verify", help="audit policies; exit 1 on effect conflicts")
    p.add_argument("-f", "--file", help="policy JSON file (default: stored policies)")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("decide", help="decide access requests")
    p.add_argument("-f", "--file", required=True, help="requests JSON file")
    p.add_argument("--config", required=True)
    p.add_argument("--batch", action="store_true", help="one grouped model call")
    p.set_defaults(func=_cmd_decide)

    p = sub.add_parser("serve", help="run the HTTP gateway")
    p.add_argument("--config", required=True)
    p.add_argument("--host", help="override the configured listen host")
    p.add_argument("--port", type=int, help="override the configured listen port")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("bench", help="measure retrieval latency")
    p.add_argument("--policies", type=int, help="corpus size (default: a ladder)")
    p.add_argument("--requests", type=int, default=10)
    p.add_argument("--dimension", type=int, default=256)
    p.set_defaults(func=_cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except LaceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
