"""Descriptions in, verified policies out.

Runs the generation prompt against the scripted mock chat provider, then
shows the round-trip verification step: each structured policy is rendered
back into one canonical sentence and checked against its source description
with entailment in both directions.  A policy whose effect was flipped in
transit fails that check and never reaches the index.
"""

import json
from dataclasses import replace
from pathlib import Path

from lace.generation import generate_policies, verify_policies, verify_policy_correctness
from lace.model import Effect, render_policy_sentence
from lace.providers import MockChatProvider, MockEntailmentProvider

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def main() -> None:
    descriptions = json.loads((FIXTURES / "descriptions.json").read_text())[
        "descriptions"
    ]
    chat = MockChatProvider(json.loads((FIXTURES / "mock_chat_script.json").read_text()))

    print("== generation ==")
    result = generate_policies(descriptions, chat)
    for policy in result.policies:
        print(f"  {policy.id}: {render_policy_sentence(policy)}")
    for failure in result.failures:
        print(f"  FAILED entry {failure.index}: {failure.error}")

    print("\n== verification (sentence <-> description, both directions) ==")
    entailment = MockEntailmentProvider()
    pairs = verify_policies(result.policies, entailment)
    for policy, verdict in pairs:
        print(
            f"  {policy.id}: {policy.status.value}"
            f" (forward={verdict.forward.value}, backward={verdict.backward.value})"
        )

    print("\n== a flipped effect cannot sneak through ==")
    students = next(p for p in result.policies if p.id == "students-phones")
    flipped = replace(students, effect=Effect.DENIED)
    verdict = verify_policy_correctness(
        flipped, students.source_description, entailment
    )
    print(f"  description: {students.source_description}")
    print(f"  tampered sentence: {verdict.rendered_sentence}")
    print(f"  verdict: {verdict.status.value} (forward={verdict.forward.value})")


if __name__ == "__main__":
    main()
