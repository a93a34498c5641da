"""Prompt protocol text shared by policy generation and decision making.

These strings are part of the wire protocol: scripted chat mocks key their
replies on the exact rendered prompt, so any change here invalidates
recorded scripts.
"""

from __future__ import annotations

BASIC_BACKGROUNDS = """Basic backgrounds:
1. An Access control policy typically encompasses Subject, Resource, Action, Effect, and Conditions.
2. Subject refers to the entity (e.g., a user or a role) that attempts to perform an action on a resource.
3. Resource represents the object (e.g., files, devices) over which access is being controlled.
4. Action denotes the operations (e.g., view, read, write, control) that a subject wishes to perform on a resource.
5. Effect defines the policy's stance--allowing or prohibiting the action under the conditions specified within the policy itself.
6. Conditions specify the criteria or constraints that must be met for the policy to apply, influencing whether the effect is to permit or deny access."""

GENERATION_INSTRUCTION = (
    "You are a security expert, please convert the natural language described "
    "access control description provided by the Input data into formalized "
    "access control policies based on the Context."
)

POLICY_SCHEMA = (
    '{"subject": ["s1", "s2" ...], "resource": ["r1", "r2" ...], '
    '"action": ["a1", "a2" ...], "effect": "allowed or denied", '
    '"conditions": ["c1", "c2" ...]}'
)

GENERATION_OUTPUT_INDICATOR = (
    f"the access control policy list in the JSON format: {POLICY_SCHEMA}."
)

DECISION_INSTRUCTION = (
    "You are a security expert, please make an access decision based on the "
    "access request and the associated access control policies, i.e., whether "
    "to allow or deny the request, and provide the reason for the decision."
)

REASONING_STEPS = """Follow the **reasoning steps** below to determine whether access is permitted:
1. **Verify subject's identity.**
2. **Check each access control policy.**
3. **Analyze fuzzy conditions.** (For example, is the current situation considered an 'emergency'? )
4. **Provide a decision (Allow / Deny) along with the rationale.**
5. **Self-check: Review whether the decision complies with all policies. Are there any conflicts?**
6. **If there are errors, correct them and re-evaluate the decision.**"""

DECISION_SCHEMA = '{"decision": "allow or deny", "reason": "xxx"}'

DECISION_OUTPUT_INDICATOR = (
    f"the access control result in the JSON format: {DECISION_SCHEMA}."
)

BATCH_DECISION_OUTPUT_INDICATOR = (
    "the access control results as a JSON array holding one "
    f"{DECISION_SCHEMA} object per request, in the same order as the "
    "numbered requests."
)

RECHECK_SUFFIX = (
    "\n\nSelf-check: the decision above may not comply with the matched "
    "policies ({reason}). Re-evaluate and reply again with only the JSON."
)

REPAIR_SUFFIX = (
    "\n\nYour previous output was not valid JSON matching the Output "
    "indicator. Reply again with only the JSON."
)
