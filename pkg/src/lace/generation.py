"""Policy generation from natural language, plus correctness verification.

Generation sends the descriptions to a chat model under a fixed prompt and
parses the JSON reply into policies.  Verification reconstructs each policy
as one sentence ("subject can be effect to action resource if conditions")
and asks an entailment model to compare it with the source description in
both directions; only mutual entailment marks the policy Verified.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

from . import prompts
from .errors import EmptyInput, MalformedOutput, SchemaError
from .model import Policy, Status, policy_from_dict, render_policy_sentence
from .providers import ChatProvider, EntailmentLabel, EntailmentProvider


@dataclass(frozen=True)
class GenerationPrompt:
    instruction: str
    context: str
    input_data: tuple[str, ...]
    output_indicator: str

    def render(self) -> str:
        numbered = "\n".join(
            f"{i}. {text}" for i, text in enumerate(self.input_data, start=1)
        )
        return (
            f"Instruction: {self.instruction}\n\n"
            f"Context:\n{self.context}\n\n"
            f"Input data:\n{numbered}\n\n"
            f"Output indicator: {self.output_indicator}"
        )


def build_generation_prompt(descriptions: list[str]) -> GenerationPrompt:
    """Numbered descriptions under the fixed policy-authoring prompt."""
    cleaned = [d.strip() for d in descriptions if d and d.strip()]
    if not cleaned:
        raise EmptyInput("no access control descriptions given")
    return GenerationPrompt(
        instruction=prompts.GENERATION_INSTRUCTION,
        context=prompts.BASIC_BACKGROUNDS,
        input_data=tuple(cleaned),
        output_indicator=prompts.GENERATION_OUTPUT_INDICATOR,
    )


def extract_json_value(text: str):
    """Finds the first JSON value in a model reply.

    Tolerates prose and markdown fences around the value.  Raises
    ``ValueError`` when nothing parses.
    """
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    decoder = json.JSONDecoder()
    for i, ch in enumerate(text):
        if ch in "[{":
            try:
                value, _ = decoder.raw_decode(text, i)
                return value
            except json.JSONDecodeError:
                continue
    raise ValueError("reply contains no JSON value")


@dataclass(frozen=True)
class GenerationFailure:
    index: int
    error: str


@dataclass(frozen=True)
class GenerationResult:
    policies: list[Policy]
    failures: list[GenerationFailure]
    raw_reply: str


def generate_policies(
    descriptions: list[str], chat: ChatProvider
) -> GenerationResult:
    """Turns descriptions into unverified policies via the chat provider.

    The reply may be a JSON array, a single object, or a name-keyed map.
    Entries are mapped to descriptions positionally; an entry that fails
    schema validation is reported in ``failures`` without sinking the rest.
    Up to two repair re-prompts are attempted when a reply holds no JSON.
    """
    cleaned = [d.strip() for d in descriptions if d and d.strip()]
    prompt = build_generation_prompt(cleaned).render()
    reply = chat.chat(prompt)
    value = None
    for attempt in range(3):
        try:
            value = extract_json_value(reply)
            break
        except ValueError:
            if attempt == 2:
                raise MalformedOutput(
                    "generation reply contained no JSON after two repair attempts"
                )
            reply = chat.chat(prompt + prompts.REPAIR_SUFFIX)

    if isinstance(value, dict) and "subject" in value:
        entries: list[tuple[str | None, dict]] = [(None, value)]
    elif isinstance(value, dict):
        entries = [(name, entry) for name, entry in value.items()]
    elif isinstance(value, list):
        entries = [(None, entry) for entry in value]
    else:
        raise MalformedOutput(f"generation reply is not a policy document: {value!r}")

    policies: list[Policy] = []
    failures: list[GenerationFailure] = []
    for index, (name, entry) in enumerate(entries):
        try:
            if not isinstance(entry, dict):
                raise SchemaError(f"entry is not an object: {entry!r}")
            policy = policy_from_dict(entry, default_id=name)
        except SchemaError as exc:
            failures.append(GenerationFailure(index=index, error=str(exc)))
            continue
        if index < len(cleaned) and policy.source_description is None:
            policy = replace(policy, source_description=cleaned[index])
        policies.append(policy)
    return GenerationResult(policies=policies, failures=failures, raw_reply=reply)


@dataclass(frozen=True)
class VerificationVerdict:
    policy_id: str
    status: Status
    forward: EntailmentLabel  # sentence => description
    backward: EntailmentLabel  # description => sentence
    rendered_sentence: str


def verify_policy_correctness(
    policy: Policy, description: str, entailment: EntailmentProvider
) -> VerificationVerdict:
    """Checks a policy's reconstructed sentence against a description.

    Verified requires entailment in both directions; anything weaker is
    Rejected, including a missing direction from an effect flip or a
    changed condition.
    """
    if not description or not description.strip():
        raise EmptyInput(f"policy {policy.id} has no description to verify against")
    sentence = render_policy_sentence(policy)
    forward = entailment.entail(sentence, description)
    backward = entailment.entail(description, sentence)
    verified = (
        forward is EntailmentLabel.ENTAILED and backward is EntailmentLabel.ENTAILED
    )
    return VerificationVerdict(
        policy_id=policy.id,
        status=Status.VERIFIED if verified else Status.REJECTED,
        forward=forward,
        backward=backward,
        rendered_sentence=sentence,
    )


def verify_policies(
    policies: list[Policy], entailment: EntailmentProvider
) -> list[tuple[Policy, VerificationVerdict]]:
    """Applies verification to each policy, returning status-updated copies."""
    out: list[tuple[Policy, VerificationVerdict]] = []
    for policy in policies:
        if policy.source_description is None:
            raise SchemaError(f"policy {policy.id} has no source description")
        verdict = verify_policy_correctness(
            policy, policy.source_description, entailment
        )
        out.append((policy.with_status(verdict.status), verdict))
    return out
