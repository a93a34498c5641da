"""What the conflict screen catches before a policy is stored.

Three situations, smallest first: opposite effects that can fire at the
same moment (blocks storage), a policy completely covered by a broader one
(stored with a redundancy warning), and same-effect policies whose
conditions exclude each other (stored with an inconsistency warning).
"""

import json
from pathlib import Path

from lace.conflicts import detect_all, report_to_dict
from lace.model import Effect, Policy, parse_conditions, policies_from_json
from lace.taxonomy import Taxonomy

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def _policy(ident: str, subject: str, effect: Effect, conditions: list[str]) -> Policy:
    return Policy(
        id=ident,
        subject=subject,
        resource="television",
        action="watch",
        effect=effect,
        conditions=parse_conditions(conditions),
    )


def main() -> None:
    taxonomy = Taxonomy.from_file(FIXTURES / "taxonomy.json")

    print("== effect conflict (taxonomy bridges the scopes) ==")
    pair = policies_from_json(
        json.loads((FIXTURES / "conflict_pair.json").read_text())
    )
    for policy in pair:
        print(f"  {policy.id}: {policy.effect.value}, resource={list(policy.resource)}")
    for report in detect_all(pair, taxonomy):
        print(json.dumps(report_to_dict(report), indent=2))

    print("\n== redundancy (narrower policy covered by a broader one) ==")
    weekend = _policy("kids-tv-weekend", "children", Effect.ALLOWED, ["day in weekends"])
    always = _policy("family-tv", "all family members", Effect.ALLOWED, [])
    for report in detect_all([weekend, always], taxonomy):
        print(f"  {report.kind.value}: {report.explanation}")

    print("\n== inconsistency (same effect, conditions never overlap) ==")
    monday = _policy("tv-monday", "children", Effect.ALLOWED, ["day == Monday"])
    friday = _policy("tv-friday", "children", Effect.ALLOWED, ["day == Friday"])
    for report in detect_all([monday, friday], taxonomy):
        print(f"  {report.kind.value}: {report.explanation}")


if __name__ == "__main__":
    main()
