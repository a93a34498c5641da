"""Regenerates the scripted chat replies under fixtures/.

The mock chat provider looks replies up by the SHA-256 of the exact prompt,
so the script file must be rebuilt whenever the prompt templates or the
fixture descriptions change.  Run from the repository root:

    python3 scripts/build_fixtures.py
"""

from __future__ import annotations

import json
from pathlib import Path

from lace.generation import build_generation_prompt
from lace.providers import prompt_key

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

GENERATED_POLICIES = [
    {
        "id": "students-phones",
        "subject": ["students"],
        "resource": ["personal phones"],
        "action": ["use"],
        "effect": "allowed",
        "conditions": ["location == lab", "day in weekends"],
    },
    {
        "id": "guest-plugs",
        "subject": ["guests"],
        "resource": ["smart plugs"],
        "action": ["operate"],
        "effect": "allowed",
        "conditions": ["time >= 18:00", "time <= 20:00"],
    },
    {
        "id": "children-tv",
        "subject": ["children"],
        "resource": ["television"],
        "action": ["watch"],
        "effect": "denied",
        "conditions": ["day in weekdays"],
    },
    {
        "id": "homeowner-cameras",
        "subject": ["homeowners"],
        "resource": ["cameras"],
        "action": ["view"],
        "effect": "allowed",
        "conditions": [],
    },
    {
        "id": "visitor-doorbell",
        "subject": ["visitors"],
        "resource": ["smart doorbell"],
        "action": ["answer"],
        "effect": "allowed",
        "conditions": ["with homeowner approval"],
    },
]

CONFLICT_POLICY = [
    {
        "id": "monday-multimedia",
        "subject": ["family member A"],
        "resource": ["multimedia devices"],
        "action": ["access"],
        "effect": "allowed",
        "conditions": ["day == Monday"],
    }
]


def main() -> None:
    descriptions = json.loads((FIXTURES / "descriptions.json").read_text())[
        "descriptions"
    ]
    conflict = json.loads((FIXTURES / "conflict_description.json").read_text())[
        "descriptions"
    ]
    script = {
        prompt_key(build_generation_prompt(descriptions).render()): json.dumps(
            GENERATED_POLICIES
        ),
        prompt_key(build_generation_prompt(conflict).render()): json.dumps(
            CONFLICT_POLICY
        ),
        "*": json.dumps(
            {
                "decision": "deny",
                "reason": "the matched policies do not clearly permit this request",
            }
        ),
    }
    out = FIXTURES / "mock_chat_script.json"
    out.write_text(json.dumps(script, indent=2) + "\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
