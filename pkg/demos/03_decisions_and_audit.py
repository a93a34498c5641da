"""How requests are decided, with and without a model in the loop.

Four stops: pure rule decisions for unambiguous requests, the safe
degradation when an ambiguous request arrives and no model is configured,
a model answer that the compliance check confirms, and an adversarial
model whose unsupported answer is overridden.  Every stop lands in the
audit log, and every disagreement produces a feedback record.
"""

import json
import tempfile
from pathlib import Path

from lace.audit import AuditLog
from lace.engine import DecisionEngine, decision_to_dict, feedback_to_dict
from lace.model import (
    Effect,
    Policy,
    Status,
    parse_conditions,
    policies_from_json,
    request_from_dict,
)
from lace.providers import MockChatProvider, MockEmbeddingProvider
from lace.repository import PolicyRepository
from lace.taxonomy import Taxonomy

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def _show(final) -> None:
    d = decision_to_dict(final)
    print(
        f"  {d['request_id']}: {d['decision']} via {d['path']}"
        f" ({d['checker']}) :: {d['reason']}"
    )


def main() -> None:
    taxonomy = Taxonomy.from_file(FIXTURES / "taxonomy.json")
    policies = policies_from_json(
        json.loads((FIXTURES / "home_policies.json").read_text())
    )
    repository = PolicyRepository(MockEmbeddingProvider(256))
    repository.index_policies(policies)
    requests = [
        request_from_dict(entry)
        for entry in json.loads((FIXTURES / "requests.json").read_text())["requests"]
    ]
    by_id = {r.id: r for r in requests}

    print("== rule path: the context settles everything ==")
    engine = DecisionEngine(repository, taxonomy=taxonomy)
    _show(engine.decide(by_id["demo-guest-plug"]))
    _show(engine.decide(by_id["demo-stranger-lock"]))

    print("\n== no model configured: ambiguity degrades to the rule answer ==")
    _show(engine.decide(by_id["demo-child-speaker"]))

    print("\n== scripted model answer, confirmed by the compliance check ==")
    script = json.loads((FIXTURES / "mock_chat_script.json").read_text())
    checked = DecisionEngine(repository, taxonomy=taxonomy, chat=MockChatProvider(script))
    unscheduled = request_from_dict(
        {
            "id": "demo-visitor-unscheduled",
            "subject": "visitors",
            "resource": "smart doorbells",
            "action": "receive temporary access codes",
            "context": {},
        }
    )
    _show(checked.decide(unscheduled))

    print("\n== adversarial model: an unsupported allow is overridden ==")
    oven_ban = Policy(
        id="children-oven",
        subject="children",
        resource="oven",
        action="use",
        effect=Effect.DENIED,
        conditions=parse_conditions(["with an adult in the kitchen"]),
    ).with_status(Status.VERIFIED)
    repository.index_policy(oven_ban)
    always_allow = MockChatProvider(
        {"*": json.dumps({"decision": "allow", "reason": "sounds harmless"})}
    )
    with tempfile.TemporaryDirectory() as scratch:
        audit = AuditLog(Path(scratch) / "audit.jsonl")
        guarded = DecisionEngine(
            repository, taxonomy=taxonomy, chat=always_allow, audit=audit
        )
        final = guarded.decide(
            request_from_dict(
                {
                    "id": "demo-child-oven",
                    "subject": "children",
                    "resource": "oven",
                    "action": "use",
                    "context": {},
                }
            )
        )
        _show(final)
        print("  feedback:", json.dumps(feedback_to_dict(final.feedback)))
        kinds = [record["kind"] for record in audit.read()]
        print(f"  audit log now holds: {kinds}")


if __name__ == "__main__":
    main()
