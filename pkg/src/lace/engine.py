"""Access decisions: rule evaluation, model routing, and the compliance check.

A request is matched against the indexed policies and each match is graded
Applicable (conditions hold), Possible (some condition cannot be decided
from the context, typically a fuzzy one), or Inapplicable.  Requests with
no Possible policy are simple and decided by deny-overrides rules alone.
Anything else is complex and goes to the chat model together with the
matched policies; the model's answer then passes a deterministic compliance
check before it is enforced.

The checker accepts every deny.  An allow must be supported by at least one
allowed policy that is applicable or possible, and is refused outright when
an applicable policy denies the action.  A refused answer triggers one
re-evaluation prompt when a chat provider is at hand; if the model still
does not comply, the checker's deny is enforced and a feedback record is
filed.  Batched requests trade the re-evaluation pass for a single round
trip: refusals are overridden immediately.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum

from . import prompts
from .audit import KIND_DECISION, KIND_MISMATCH, AuditLog
from .errors import MalformedOutput, ProviderError
from .generation import extract_json_value
from .model import (
    AccessRequest,
    Effect,
    Fuzzy,
    Policy,
    condition_source,
    normalize_fuzzy,
    request_to_dict,
)
from .providers import ChatProvider
from .repository import PolicyRepository
from .solver import ThreeValued, evaluate
from .taxonomy import EMPTY_TAXONOMY, Taxonomy, subsumed


class Applicability(Enum):
    APPLICABLE = "applicable"
    POSSIBLE = "possible"
    INAPPLICABLE = "inapplicable"


class Complexity(Enum):
    SIMPLE = "simple"
    COMPLEX = "complex"


class DecisionPath(Enum):
    RULE = "rule"
    LLM = "llm"


class Verdict(Enum):
    ALLOW = "allow"
    DENY = "deny"

    @classmethod
    def parse(cls, text) -> "Verdict":
        if isinstance(text, str):
            word = text.strip().lower()
            if word in ("allow", "allowed"):
                return cls.ALLOW
            if word in ("deny", "denied"):
                return cls.DENY
        raise MalformedOutput(f"not an access decision: {text!r}")


class CheckerOutcome(Enum):
    CONFIRMED = "confirmed"
    OVERRIDDEN = "overridden"
    REPROMPTED_THEN_CONFIRMED = "reprompted_then_confirmed"
    REPROMPTED_THEN_OVERRIDDEN = "reprompted_then_overridden"


@dataclass(frozen=True)
class PolicyAssessment:
    policy: Policy
    applicability: Applicability
    score: float = 0.0


@dataclass(frozen=True)
class Decision:
    verdict: Verdict
    rationale: str

    def __post_init__(self):
        if not self.rationale:
            raise ValueError("a decision needs a non-empty rationale")


@dataclass(frozen=True)
class FeedbackRecord:
    """A disagreement between the model and the compliance check.

    ``llm_decision`` is None when the model never produced a usable answer
    and the engine fell back to the rule decision.
    """

    request_id: str
    llm_decision: str | None
    checker_decision: str
    matched_policy_ids: tuple[str, ...]
    timestamp: str
    prompt_sha256: str | None


@dataclass(frozen=True)
class FinalDecision:
    request_id: str
    verdict: Verdict
    rationale: str
    path: DecisionPath
    complexity: Complexity
    checker: CheckerOutcome
    matched_policy_ids: tuple[str, ...]
    applicable: tuple[str, ...]
    possible: tuple[str, ...]
    feedback: FeedbackRecord | None = None


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def assertions_for(request: AccessRequest, policies: list[Policy]) -> frozenset[str]:
    """Fuzzy condition texts the request context explicitly asserts.

    A fuzzy condition counts as asserted when its normalized text occurs,
    on word boundaries, inside the request's free-text context.
    """
    if not request.context_text:
        return frozenset()
    haystack = normalize_fuzzy(request.context_text)
    asserted: set[str] = set()
    for policy in policies:
        for atom in policy.conditions:
            if isinstance(atom, Fuzzy) and atom.text not in asserted:
                if re.search(rf"(?<!\w){re.escape(atom.text)}(?!\w)", haystack):
                    asserted.add(atom.text)
    return frozenset(asserted)


def applicability(
    policy: Policy,
    request: AccessRequest,
    taxonomy: Taxonomy = EMPTY_TAXONOMY,
    assertions: frozenset[str] | None = None,
) -> Applicability:
    """Grades one policy against a request."""
    if assertions is None:
        assertions = assertions_for(request, [policy])
    in_scope = (
        subsumed([request.subject], policy.subject, taxonomy)
        and subsumed([request.resource], policy.resource, taxonomy)
        and subsumed([request.action], policy.action, taxonomy)
    )
    if not in_scope:
        return Applicability.INAPPLICABLE
    value = evaluate(policy.conditions, request.context, assertions)
    if value is ThreeValued.TRUE:
        return Applicability.APPLICABLE
    if value is ThreeValued.FALSE:
        return Applicability.INAPPLICABLE
    return Applicability.POSSIBLE


def grade(
    request: AccessRequest,
    matched: list[Policy],
    taxonomy: Taxonomy = EMPTY_TAXONOMY,
) -> list[PolicyAssessment]:
    """Applicability of every matched policy, in the given order."""
    asserted = assertions_for(request, matched)
    return [
        PolicyAssessment(p, applicability(p, request, taxonomy, asserted))
        for p in matched
    ]


def classify(
    request: AccessRequest,
    matched: list[Policy],
    taxonomy: Taxonomy = EMPTY_TAXONOMY,
) -> Complexity:
    """Simple when no matched policy is merely possible."""
    return _classify(grade(request, matched, taxonomy))


def _classify(assessments: list[PolicyAssessment]) -> Complexity:
    if any(a.applicability is Applicability.POSSIBLE for a in assessments):
        return Complexity.COMPLEX
    return Complexity.SIMPLE


def decide_rule_based(
    request: AccessRequest,
    matched: list[Policy],
    taxonomy: Taxonomy = EMPTY_TAXONOMY,
) -> Decision:
    """Deny-overrides combination over the applicable policies."""
    return _rule_decision(grade(request, matched, taxonomy))


def _rule_decision(assessments: list[PolicyAssessment]) -> Decision:
    applicable = [a for a in assessments if a.applicability is Applicability.APPLICABLE]
    denying = sorted(a.policy.id for a in applicable if a.policy.effect is Effect.DENIED)
    if denying:
        return Decision(
            Verdict.DENY, f"denied by applicable policy {', '.join(denying)}"
        )
    allowing = sorted(
        a.policy.id for a in applicable if a.policy.effect is Effect.ALLOWED
    )
    if allowing:
        return Decision(
            Verdict.ALLOW, f"allowed by applicable policy {', '.join(allowing)}"
        )
    return Decision(Verdict.DENY, "default deny")


# ---------------------------------------------------------------------------
# prompts


def _policy_for_prompt(policy: Policy) -> str:
    return json.dumps(
        {
            "id": policy.id,
            "subject": list(policy.subject),
            "resource": list(policy.resource),
            "action": list(policy.action),
            "effect": policy.effect.value,
            "conditions": [condition_source(a) for a in policy.conditions],
        },
        ensure_ascii=False,
    )


def _request_for_prompt(request: AccessRequest) -> str:
    return json.dumps(request_to_dict(request), ensure_ascii=False)


def build_decision_prompt(request: AccessRequest, matched: list[Policy]) -> str:
    policy_lines = "\n".join(_policy_for_prompt(p) for p in matched)
    return (
        f"Instruction: {prompts.DECISION_INSTRUCTION}\n\n"
        f"Context:\n{prompts.BASIC_BACKGROUNDS}\n\n{prompts.REASONING_STEPS}\n\n"
        f"Input data:\n"
        f"Access request: {_request_for_prompt(request)}\n"
        f"Access control policies:\n{policy_lines}\n\n"
        f"Output indicator: {prompts.DECISION_OUTPUT_INDICATOR}"
    )


def build_batch_decision_prompt(
    items: list[tuple[AccessRequest, list[Policy]]]
) -> str:
    blocks = []
    for number, (request, matched) in enumerate(items, start=1):
        policy_lines = "\n".join(_policy_for_prompt(p) for p in matched)
        blocks.append(
            f"Request {number}: {_request_for_prompt(request)}\n"
            f"Policies for request {number}:\n{policy_lines}"
        )
    body = "\n\n".join(blocks)
    return (
        f"Instruction: {prompts.DECISION_INSTRUCTION}\n\n"
        f"Context:\n{prompts.BASIC_BACKGROUNDS}\n\n{prompts.REASONING_STEPS}\n\n"
        f"Input data:\n{body}\n\n"
        f"Output indicator: {prompts.BATCH_DECISION_OUTPUT_INDICATOR}"
    )


def _parse_decision_value(value) -> Decision:
    if not isinstance(value, dict) or "decision" not in value:
        raise MalformedOutput(f"decision reply must be an object: {value!r}")
    verdict = Verdict.parse(value["decision"])
    reason = value.get("reason")
    if not isinstance(reason, str) or not reason:
        reason = "no reason given"
    return Decision(verdict, reason)


def _ask(chat: ChatProvider, prompt: str) -> Decision:
    """One chat turn with one repair attempt for malformed replies."""
    reply = chat.chat(prompt)
    try:
        return _parse_decision_value(extract_json_value(reply))
    except (ValueError, MalformedOutput):
        reply = chat.chat(prompt + prompts.REPAIR_SUFFIX)
        try:
            return _parse_decision_value(extract_json_value(reply))
        except ValueError:
            raise MalformedOutput(
                "decision reply held no JSON after one repair attempt"
            )


def decide_llm(
    request: AccessRequest, matched: list[Policy], chat: ChatProvider
) -> Decision:
    """The model's decision for one request over its matched policies."""
    return _ask(chat, build_decision_prompt(request, matched))


# ---------------------------------------------------------------------------
# compliance check


def violation(decision: Decision, assessments: list[PolicyAssessment]) -> str | None:
    """Why a decision does not comply with the policies, or None.

    Denies are always compliant.  An allow fails when an applicable policy
    denies the action, and when no allowed policy is applicable or possible.
    """
    if decision.verdict is Verdict.DENY:
        return None
    denying = sorted(
        a.policy.id
        for a in assessments
        if a.applicability is Applicability.APPLICABLE
        and a.policy.effect is Effect.DENIED
    )
    if denying:
        return f"applicable policy {', '.join(denying)} denies the action"
    supporting = [
        a
        for a in assessments
        if a.applicability is not Applicability.INAPPLICABLE
        and a.policy.effect is Effect.ALLOWED
    ]
    if not supporting:
        return "no allowed policy is applicable or possible for this request"
    return None


def check_decision(
    decision: Decision,
    request: AccessRequest,
    matched: list[Policy],
    taxonomy: Taxonomy = EMPTY_TAXONOMY,
    *,
    chat: ChatProvider | None = None,
    prompt: str | None = None,
    path: DecisionPath = DecisionPath.LLM,
    complexity: Complexity = Complexity.COMPLEX,
) -> tuple[FinalDecision, FeedbackRecord | None]:
    """Validates a decision against the deterministic checker rules.

    A violating decision gets one re-evaluation prompt when a chat provider
    and the original prompt are supplied; a decision that still violates is
    overridden to deny.  Provider trouble during the re-evaluation degrades
    to an immediate override.  Every non-confirmed outcome carries a
    feedback record.
    """
    return _check(
        decision,
        grade(request, matched, taxonomy),
        request,
        chat=chat,
        prompt=prompt,
        path=path,
        complexity=complexity,
    )


def _check(
    decision: Decision,
    assessments: list[PolicyAssessment],
    request: AccessRequest,
    *,
    chat: ChatProvider | None,
    prompt: str | None,
    path: DecisionPath,
    complexity: Complexity,
) -> tuple[FinalDecision, FeedbackRecord | None]:
    ids = _ids_by_grade(assessments)
    reason = violation(decision, assessments)
    if reason is None:
        return _final(request, decision, path, complexity, CheckerOutcome.CONFIRMED, ids), None

    first_verdict = decision.verdict
    if chat is not None and prompt is not None:
        try:
            retry = _ask(chat, prompt + prompts.RECHECK_SUFFIX.format(reason=reason))
        except ProviderError:
            retry = None
        if retry is not None and violation(retry, assessments) is None:
            feedback = _feedback(request, first_verdict.value, retry.verdict.value, ids, prompt)
            final = _final(
                request,
                retry,
                path,
                complexity,
                CheckerOutcome.REPROMPTED_THEN_CONFIRMED,
                ids,
                feedback,
            )
            return final, feedback
        outcome = CheckerOutcome.REPROMPTED_THEN_OVERRIDDEN
        reported = retry.verdict.value if retry is not None else first_verdict.value
    else:
        outcome = CheckerOutcome.OVERRIDDEN
        reported = first_verdict.value
    feedback = _feedback(request, reported, Verdict.DENY.value, ids, prompt)
    final = _final(
        request, Decision(Verdict.DENY, reason), path, complexity, outcome, ids, feedback
    )
    return final, feedback


class DecisionEngine:
    """Retrieval, routing, and checked decisions over one policy index."""

    def __init__(
        self,
        repository: PolicyRepository,
        taxonomy: Taxonomy = EMPTY_TAXONOMY,
        chat: ChatProvider | None = None,
        top_k: int | None = 5,
        audit: AuditLog | None = None,
    ):
        self.repository = repository
        self.taxonomy = taxonomy
        self.chat = chat
        self.top_k = top_k
        self.audit = audit

    def assess(self, request: AccessRequest) -> list[PolicyAssessment]:
        """Matched policies in retrieval order, graded for applicability."""
        matches = self.repository.match(request, limit=self.top_k)
        policies = [m.policy for m in matches]
        asserted = assertions_for(request, policies)
        return [
            PolicyAssessment(
                policy=m.policy,
                applicability=applicability(
                    m.policy, request, self.taxonomy, asserted
                ),
                score=m.score,
            )
            for m in matches
        ]

    # single requests -------------------------------------------------------

    def decide(self, request: AccessRequest) -> FinalDecision:
        """Decides one request; provider failures propagate to the caller."""
        assessments = self.assess(request)
        complexity = _classify(assessments)
        rule = _rule_decision(assessments)
        if complexity is Complexity.SIMPLE:
            final, feedback = _check(
                rule,
                assessments,
                request,
                chat=None,
                prompt=None,
                path=DecisionPath.RULE,
                complexity=complexity,
            )
        elif self.chat is None:
            final, feedback = _degraded(request, assessments, complexity, rule, None)
        else:
            matched = [
                a.policy
                for a in assessments
                if a.applicability is not Applicability.INAPPLICABLE
            ]
            prompt = build_decision_prompt(request, matched)
            decision = _ask(self.chat, prompt)
            final, feedback = _check(
                decision,
                assessments,
                request,
                chat=self.chat,
                prompt=prompt,
                path=DecisionPath.LLM,
                complexity=complexity,
            )
        self._audit(final, feedback)
        return final

    # batches ---------------------------------------------------------------

    def decide_batch(self, requests: list[AccessRequest]) -> list[FinalDecision]:
        """Decides many requests with at most one chat call.

        All complex requests travel in one numbered prompt and the reply is
        aligned to them by array index.  When the group reply cannot be
        used even after one retry, each complex request degrades to its
        rule decision instead of failing the batch.
        """
        prepared = []
        for request in requests:
            assessments = self.assess(request)
            prepared.append(
                (
                    request,
                    assessments,
                    _classify(assessments),
                    _rule_decision(assessments),
                )
            )
        complex_items = [p for p in prepared if p[2] is Complexity.COMPLEX]

        answers: dict[str, Decision] = {}
        group_prompt: str | None = None
        if complex_items and self.chat is not None:
            group_prompt = build_batch_decision_prompt(
                [
                    (
                        request,
                        [
                            a.policy
                            for a in assessments
                            if a.applicability is not Applicability.INAPPLICABLE
                        ],
                    )
                    for request, assessments, _, _ in complex_items
                ]
            )
            values = self._ask_group(group_prompt, len(complex_items))
            if values is not None:
                for (request, _, _, _), value in zip(complex_items, values):
                    try:
                        answers[request.id] = _parse_decision_value(value)
                    except MalformedOutput:
                        continue

        out = []
        for request, assessments, complexity, rule in prepared:
            if complexity is Complexity.SIMPLE:
                final, feedback = _check(
                    rule,
                    assessments,
                    request,
                    chat=None,
                    prompt=None,
                    path=DecisionPath.RULE,
                    complexity=complexity,
                )
            else:
                decision = answers.get(request.id)
                if decision is None:
                    final, feedback = _degraded(
                        request, assessments, complexity, rule, group_prompt
                    )
                else:
                    final, feedback = _check(
                        decision,
                        assessments,
                        request,
                        chat=None,  # batches never re-prompt per item
                        prompt=None,
                        path=DecisionPath.LLM,
                        complexity=complexity,
                    )
            self._audit(final, feedback)
            out.append(final)
        return out

    def _ask_group(self, prompt: str, expected: int) -> list | None:
        """The grouped reply as a list, or None after the retry fails."""
        reply = self.chat.chat(prompt)
        for attempt in range(2):
            try:
                value = extract_json_value(reply)
            except ValueError:
                value = None
            if isinstance(value, list) and len(value) == expected:
                return value
            if attempt == 0:
                reply = self.chat.chat(prompt + prompts.REPAIR_SUFFIX)
        return None

    def _audit(self, final: FinalDecision, feedback: FeedbackRecord | None) -> None:
        if self.audit is None:
            return
        self.audit.append(KIND_DECISION, decision_to_dict(final))
        if feedback is not None:
            self.audit.append(KIND_MISMATCH, feedback_to_dict(feedback))


# ---------------------------------------------------------------------------
# assembly helpers


def _degraded(
    request: AccessRequest,
    assessments: list[PolicyAssessment],
    complexity: Complexity,
    rule: Decision,
    prompt: str | None,
) -> tuple[FinalDecision, FeedbackRecord]:
    """Complex request answered by rules because the model was unusable."""
    ids = _ids_by_grade(assessments)
    feedback = _feedback(request, None, rule.verdict.value, ids, prompt)
    final = _final(
        request,
        rule,
        DecisionPath.LLM,
        complexity,
        CheckerOutcome.OVERRIDDEN,
        ids,
        feedback,
    )
    return final, feedback


def _final(request, decision, path, complexity, outcome, ids, feedback=None):
    applicable, possible = ids
    return FinalDecision(
        request_id=request.id,
        verdict=decision.verdict,
        rationale=decision.rationale,
        path=path,
        complexity=complexity,
        checker=outcome,
        matched_policy_ids=tuple(sorted(applicable + possible)),
        applicable=applicable,
        possible=possible,
        feedback=feedback,
    )


def _feedback(request, llm_decision, checker_decision, ids, prompt):
    applicable, possible = ids
    return FeedbackRecord(
        request_id=request.id,
        llm_decision=llm_decision,
        checker_decision=checker_decision,
        matched_policy_ids=tuple(sorted(applicable + possible)),
        timestamp=_now(),
        prompt_sha256=(
            hashlib.sha256(prompt.encode("utf-8")).hexdigest()
            if prompt is not None
            else None
        ),
    )


def _ids_by_grade(
    assessments: list[PolicyAssessment],
) -> tuple[tuple[str, ...], tuple[str, ...]]:
    applicable = tuple(
        sorted(
            a.policy.id
            for a in assessments
            if a.applicability is Applicability.APPLICABLE
        )
    )
    possible = tuple(
        sorted(
            a.policy.id
            for a in assessments
            if a.applicability is Applicability.POSSIBLE
        )
    )
    return applicable, possible


# ---------------------------------------------------------------------------
# serialization


def feedback_to_dict(record: FeedbackRecord) -> dict:
    return {
        "request_id": record.request_id,
        "llm_decision": record.llm_decision,
        "checker_decision": record.checker_decision,
        "matched": list(record.matched_policy_ids),
        "timestamp": record.timestamp,
        "prompt_sha256": record.prompt_sha256,
    }


def decision_to_dict(decision: FinalDecision) -> dict:
    return {
        "request_id": decision.request_id,
        "decision": decision.verdict.value,
        "reason": decision.rationale,
        "path": decision.path.value,
        "checker": decision.checker.value,
        "complexity": decision.complexity.value,
        "matched": list(decision.matched_policy_ids),
        "applicable": list(decision.applicable),
        "possible": list(decision.possible),
    }


def decision_json(decision: FinalDecision) -> str:
    """Canonical one-line JSON; equal decisions serialize byte-identically."""
    return json.dumps(
        decision_to_dict(decision), sort_keys=True, separators=(",", ":")
    )
