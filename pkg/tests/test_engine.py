"""Decision pipeline: grading, routing, rule decisions, and the checker."""

import json

import pytest

from lace import prompts
from lace.audit import KIND_DECISION, KIND_MISMATCH, AuditLog
from lace.engine import (
    Applicability,
    CheckerOutcome,
    Complexity,
    Decision,
    DecisionEngine,
    DecisionPath,
    Verdict,
    applicability,
    assertions_for,
    build_decision_prompt,
    check_decision,
    classify,
    decide_llm,
    decide_rule_based,
    decision_json,
    decision_to_dict,
    feedback_to_dict,
    grade,
    violation,
)
from lace.errors import MalformedOutput
from lace.model import (
    AccessRequest,
    Day,
    Effect,
    Policy,
    Status,
    TimeOfDay,
    parse_conditions,
)
from lace.providers import MockChatProvider, MockEmbeddingProvider, prompt_key
from lace.repository import PolicyRepository
from lace.taxonomy import Taxonomy


def _policy(ident, subject, resource, action, effect="allowed", conditions=()):
    return Policy(
        id=ident,
        subject=subject,
        resource=resource,
        action=action,
        effect=Effect.parse(effect),
        conditions=parse_conditions(conditions),
        status=Status.VERIFIED,
    )


def _request(ident="r1", subject="guests", resource="smart plugs",
             action="operate", context=None, context_text=None):
    return AccessRequest(
        id=ident, subject=subject, resource=resource, action=action,
        context=context or {}, context_text=context_text,
    )


EVENING_PLUGS = _policy(
    "evening-plugs", "guests", "smart plugs", "operate", "allowed",
    ["time >= 18:00", "time <= 20:00"],
)
CONSENT_SPEAKER = _policy(
    "consent-speaker", "children", "smart speakers", "change volume", "allowed",
    ["with parental consent"],
)
NO_CAMERAS = _policy(
    "no-cameras", "guests", "cameras", "view", "denied",
)


# ---------------------------------------------------------------------------
# grading


def test_assertions_for_matches_on_word_boundaries():
    request = _request(context_text="Granted With Parental Consent.")
    assert assertions_for(request, [CONSENT_SPEAKER]) == {"with parental consent"}

    prefixed = _request(context_text="without parental consent")
    assert assertions_for(prefixed, [CONSENT_SPEAKER]) == frozenset()

    embedded = _request(context_text="the nonconsent form")
    consent_only = _policy("c", "s", "r", "a", "allowed", ["consent"])
    assert assertions_for(embedded, [consent_only]) == frozenset()


def test_assertions_for_without_context_text():
    assert assertions_for(_request(), [CONSENT_SPEAKER]) == frozenset()


def test_applicability_out_of_scope():
    request = _request(subject="strangers")
    assert (
        applicability(EVENING_PLUGS, request) is Applicability.INAPPLICABLE
    )


def test_applicability_conditions_decide_the_grade():
    inside = _request(context={"time": TimeOfDay(19 * 60)})
    outside = _request(context={"time": TimeOfDay(9 * 60)})
    unknown = _request()  # no time in the context
    assert applicability(EVENING_PLUGS, inside) is Applicability.APPLICABLE
    assert applicability(EVENING_PLUGS, outside) is Applicability.INAPPLICABLE
    assert applicability(EVENING_PLUGS, unknown) is Applicability.POSSIBLE


def test_applicability_fuzzy_condition_needs_an_assertion():
    base = dict(subject="children", resource="smart speakers", action="change volume")
    silent = _request(**base)
    asserted = _request(**base, context_text="with parental consent")
    assert applicability(CONSENT_SPEAKER, silent) is Applicability.POSSIBLE
    assert applicability(CONSENT_SPEAKER, asserted) is Applicability.APPLICABLE


def test_applicability_uses_the_taxonomy_for_scope(fixture_taxonomy):
    family_policy = _policy(
        "family-ac", "all family members", "smart air conditioners", "adjust"
    )
    request = _request(
        subject="children", resource="smart air conditioners", action="adjust"
    )
    assert (
        applicability(family_policy, request, fixture_taxonomy)
        is Applicability.APPLICABLE
    )
    assert applicability(family_policy, request) is Applicability.INAPPLICABLE


def test_grade_keeps_input_order():
    request = _request(context={"time": TimeOfDay(19 * 60)})
    assessments = grade(request, [NO_CAMERAS, EVENING_PLUGS])
    assert [a.policy.id for a in assessments] == ["no-cameras", "evening-plugs"]
    assert assessments[0].applicability is Applicability.INAPPLICABLE
    assert assessments[1].applicability is Applicability.APPLICABLE


def test_classify_simple_versus_complex():
    sure = _request(context={"time": TimeOfDay(19 * 60)})
    unsure = _request()
    assert classify(sure, [EVENING_PLUGS]) is Complexity.SIMPLE
    assert classify(unsure, [EVENING_PLUGS]) is Complexity.COMPLEX
    assert classify(sure, []) is Complexity.SIMPLE


# ---------------------------------------------------------------------------
# rule decisions


def test_rule_decision_allows_by_applicable_policy():
    request = _request(context={"time": TimeOfDay(19 * 60)})
    decision = decide_rule_based(request, [EVENING_PLUGS])
    assert decision.verdict is Verdict.ALLOW
    assert decision.rationale == "allowed by applicable policy evening-plugs"


def test_rule_decision_deny_overrides_allow():
    deny_plugs = _policy("deny-plugs", "guests", "smart plugs", "operate", "denied")
    request = _request(context={"time": TimeOfDay(19 * 60)})
    decision = decide_rule_based(request, [EVENING_PLUGS, deny_plugs])
    assert decision.verdict is Verdict.DENY
    assert decision.rationale == "denied by applicable policy deny-plugs"


def test_rule_decision_defaults_to_deny():
    request = _request(subject="strangers")
    decision = decide_rule_based(request, [EVENING_PLUGS])
    assert decision.verdict is Verdict.DENY
    assert decision.rationale == "default deny"


def test_decision_requires_a_rationale():
    with pytest.raises(ValueError):
        Decision(Verdict.ALLOW, "")


def test_verdict_parse():
    assert Verdict.parse("allow") is Verdict.ALLOW
    assert Verdict.parse(" Allowed ") is Verdict.ALLOW
    assert Verdict.parse("DENY") is Verdict.DENY
    assert Verdict.parse("denied") is Verdict.DENY
    with pytest.raises(MalformedOutput):
        Verdict.parse("abstain")
    with pytest.raises(MalformedOutput):
        Verdict.parse(None)


# ---------------------------------------------------------------------------
# model decisions


def test_decide_llm_uses_the_scripted_reply():
    request = _request()
    prompt = build_decision_prompt(request, [EVENING_PLUGS])
    chat = MockChatProvider(
        {prompt_key(prompt): '{"decision": "deny", "reason": "outside hours"}'}
    )
    decision = decide_llm(request, [EVENING_PLUGS], chat)
    assert decision == Decision(Verdict.DENY, "outside hours")
    assert chat.call_count == 1


def test_decide_llm_repairs_a_malformed_reply_once():
    request = _request()
    prompt = build_decision_prompt(request, [EVENING_PLUGS])
    chat = MockChatProvider(
        {
            prompt_key(prompt): "let me think about that",
            prompt_key(prompt + prompts.REPAIR_SUFFIX): '{"decision": "allow", "reason": "ok"}',
        }
    )
    assert decide_llm(request, [EVENING_PLUGS], chat) == Decision(Verdict.ALLOW, "ok")
    assert chat.call_count == 2


def test_decide_llm_gives_up_after_one_repair():
    request = _request()
    chat = MockChatProvider({"*": "never json"})
    with pytest.raises(MalformedOutput):
        decide_llm(request, [EVENING_PLUGS], chat)
    assert chat.call_count == 2


def test_decide_llm_fills_in_a_missing_reason():
    request = _request()
    prompt = build_decision_prompt(request, [EVENING_PLUGS])
    chat = MockChatProvider({prompt_key(prompt): '{"decision": "allow"}'})
    decision = decide_llm(request, [EVENING_PLUGS], chat)
    assert decision.rationale == "no reason given"


def test_decision_prompt_carries_request_and_policies():
    request = _request(context={"time": TimeOfDay(19 * 60)})
    prompt = build_decision_prompt(request, [EVENING_PLUGS])
    assert '"evening-plugs"' in prompt
    assert '"subject": "guests"' in prompt
    assert prompt.startswith("Instruction: ")
    assert "Output indicator: " in prompt


# ---------------------------------------------------------------------------
# the compliance checker


def test_violation_rules():
    request = _request(context={"time": TimeOfDay(19 * 60)})
    deny_plugs = _policy("deny-plugs", "guests", "smart plugs", "operate", "denied")

    allow = Decision(Verdict.ALLOW, "seems fine")
    assessments = grade(request, [EVENING_PLUGS])
    assert violation(allow, assessments) is None

    denied = grade(request, [EVENING_PLUGS, deny_plugs])
    assert violation(allow, denied) == (
        "applicable policy deny-plugs denies the action"
    )

    unsupported = grade(_request(subject="strangers"), [EVENING_PLUGS])
    assert violation(allow, unsupported) == (
        "no allowed policy is applicable or possible for this request"
    )

    # a possible allow is enough support for an allow decision
    possible = grade(_request(), [EVENING_PLUGS])
    assert violation(allow, possible) is None

    # denies are always compliant
    assert violation(Decision(Verdict.DENY, "x"), denied) is None
    assert violation(Decision(Verdict.DENY, "x"), unsupported) is None


def test_check_decision_confirms_a_compliant_decision():
    request = _request(ident="rq", context={"time": TimeOfDay(19 * 60)})
    decision = Decision(Verdict.ALLOW, "evening access is fine")
    final, feedback = check_decision(decision, request, [EVENING_PLUGS])
    assert feedback is None
    assert final.checker is CheckerOutcome.CONFIRMED
    assert final.verdict is Verdict.ALLOW
    assert final.rationale == "evening access is fine"
    assert final.request_id == "rq"
    assert final.matched_policy_ids == ("evening-plugs",)
    assert final.applicable == ("evening-plugs",)
    assert final.possible == ()


def test_check_decision_overrides_without_a_chat_provider():
    request = _request(subject="strangers")
    decision = Decision(Verdict.ALLOW, "sure, why not")
    final, feedback = check_decision(decision, request, [EVENING_PLUGS])
    assert final.checker is CheckerOutcome.OVERRIDDEN
    assert final.verdict is Verdict.DENY
    assert final.rationale == (
        "no allowed policy is applicable or possible for this request"
    )
    assert feedback is not None
    assert feedback.llm_decision == "allow"
    assert feedback.checker_decision == "deny"
    assert feedback.prompt_sha256 is None
    assert final.feedback == feedback


def test_check_decision_reprompt_then_confirmed():
    request = _request(ident="rq", context={"time": TimeOfDay(19 * 60)})
    deny_plugs = _policy("deny-plugs", "guests", "smart plugs", "operate", "denied")
    matched = [EVENING_PLUGS, deny_plugs]
    prompt = build_decision_prompt(request, matched)
    reason = "applicable policy deny-plugs denies the action"
    recheck = prompt + prompts.RECHECK_SUFFIX.format(reason=reason)
    chat = MockChatProvider(
        {prompt_key(recheck): '{"decision": "deny", "reason": "on second thought"}'}
    )
    bad = Decision(Verdict.ALLOW, "plugged in")
    final, feedback = check_decision(
        bad, request, matched, chat=chat, prompt=prompt
    )
    assert chat.call_count == 1
    assert chat.prompts == [recheck]
    assert final.checker is CheckerOutcome.REPROMPTED_THEN_CONFIRMED
    assert final.verdict is Verdict.DENY
    assert final.rationale == "on second thought"
    assert feedback.llm_decision == "allow"
    assert feedback.checker_decision == "deny"
    assert feedback.prompt_sha256 == prompt_key(prompt)


def test_check_decision_reprompt_then_overridden():
    request = _request(subject="strangers")
    matched = [EVENING_PLUGS]
    prompt = build_decision_prompt(request, matched)
    chat = MockChatProvider({"*": '{"decision": "allow", "reason": "still yes"}'})
    bad = Decision(Verdict.ALLOW, "yes")
    final, feedback = check_decision(
        bad, request, matched, chat=chat, prompt=prompt
    )
    assert final.checker is CheckerOutcome.REPROMPTED_THEN_OVERRIDDEN
    assert final.verdict is Verdict.DENY
    assert feedback.llm_decision == "allow"
    assert feedback.checker_decision == "deny"


def test_check_decision_provider_failure_during_reprompt_overrides():
    request = _request(subject="strangers")
    matched = [EVENING_PLUGS]
    prompt = build_decision_prompt(request, matched)
    chat = MockChatProvider({})  # every call raises MockMiss
    bad = Decision(Verdict.ALLOW, "yes")
    final, feedback = check_decision(
        bad, request, matched, chat=chat, prompt=prompt
    )
    assert final.checker is CheckerOutcome.REPROMPTED_THEN_OVERRIDDEN
    assert final.verdict is Verdict.DENY
    assert feedback.llm_decision == "allow"


def test_check_decision_compliant_deny_needs_no_reprompt():
    request = _request(subject="strangers")
    chat = MockChatProvider({})
    decision = Decision(Verdict.DENY, "not covered")
    final, feedback = check_decision(
        decision, request, [EVENING_PLUGS], chat=chat,
        prompt="unused", path=DecisionPath.LLM,
    )
    assert chat.call_count == 0
    assert final.checker is CheckerOutcome.CONFIRMED
    assert feedback is None


# ---------------------------------------------------------------------------
# the engine


def _home_engine(home_repository, fixture_taxonomy, chat=None, audit=None):
    return DecisionEngine(
        home_repository, fixture_taxonomy, chat=chat, audit=audit
    )


def test_engine_assess_carries_scores_and_grades(home_repository, fixture_taxonomy):
    engine = _home_engine(home_repository, fixture_taxonomy)
    request = _request(
        context={"time": TimeOfDay(19 * 60)},
        context_text="within designated time slots approved by the homeowner",
    )
    assessments = engine.assess(request)
    assert len(assessments) == 5
    scores = [a.score for a in assessments]
    assert scores == sorted(scores, reverse=True)
    by_id = {a.policy.id: a for a in assessments}
    assert by_id["policy2"].applicability is Applicability.APPLICABLE


def test_engine_simple_request_takes_the_rule_path(home_repository, fixture_taxonomy):
    engine = _home_engine(home_repository, fixture_taxonomy)
    request = _request(
        ident="gr-1",
        context={"time": TimeOfDay(19 * 60), "day": Day("Saturday")},
        context_text="within designated time slots approved by the homeowner",
    )
    final = engine.decide(request)
    assert final.path is DecisionPath.RULE
    assert final.complexity is Complexity.SIMPLE
    assert final.checker is CheckerOutcome.CONFIRMED
    assert final.verdict is Verdict.ALLOW
    assert final.rationale == "allowed by applicable policy policy2"


def test_engine_complex_request_uses_the_chat_provider(
    home_repository, fixture_taxonomy
):
    engine = _home_engine(home_repository, fixture_taxonomy)
    request = _request(
        ident="child-1",
        subject="children",
        resource="smart speakers",
        action="change volume",
        context={"time": TimeOfDay(15 * 60)},
    )
    # reproduce the exact prompt the engine will send
    matched = [
        a.policy
        for a in engine.assess(request)
        if a.applicability is not Applicability.INAPPLICABLE
    ]
    prompt = build_decision_prompt(request, matched)
    chat = MockChatProvider(
        {prompt_key(prompt): '{"decision": "deny", "reason": "no consent shown"}'}
    )
    engine.chat = chat
    final = engine.decide(request)
    assert chat.call_count == 1
    assert final.path is DecisionPath.LLM
    assert final.complexity is Complexity.COMPLEX
    assert final.checker is CheckerOutcome.CONFIRMED
    assert final.verdict is Verdict.DENY
    assert final.rationale == "no consent shown"


def test_engine_without_chat_degrades_complex_to_rules(
    home_repository, fixture_taxonomy
):
    engine = _home_engine(home_repository, fixture_taxonomy)
    request = _request(
        ident="child-2",
        subject="children",
        resource="smart speakers",
        action="change volume",
        context={"time": TimeOfDay(15 * 60)},
    )
    final = engine.decide(request)
    assert final.path is DecisionPath.LLM
    assert final.checker is CheckerOutcome.OVERRIDDEN
    assert final.verdict is Verdict.DENY  # rule default deny
    assert final.feedback is not None
    assert final.feedback.llm_decision is None
    assert final.feedback.checker_decision == "deny"


def test_engine_audits_decisions_and_mismatches(
    home_repository, fixture_taxonomy, tmp_path
):
    audit = AuditLog(tmp_path / "audit.jsonl")
    engine = _home_engine(home_repository, fixture_taxonomy, audit=audit)

    simple = _request(
        ident="ok-1",
        context={"time": TimeOfDay(19 * 60), "day": Day("Saturday")},
        context_text="within designated time slots approved by the homeowner",
    )
    engine.decide(simple)
    assert audit.last_seq == 1

    degraded = _request(
        ident="deg-1",
        subject="children",
        resource="smart speakers",
        action="change volume",
        context={"time": TimeOfDay(15 * 60)},
    )
    engine.decide(degraded)
    assert audit.last_seq == 3

    decisions = audit.read(kind=KIND_DECISION)
    mismatches = audit.read(kind=KIND_MISMATCH)
    assert [r["data"]["request_id"] for r in decisions] == ["ok-1", "deg-1"]
    assert [r["data"]["request_id"] for r in mismatches] == ["deg-1"]
    assert mismatches[0]["data"]["llm_decision"] is None


def test_engine_batch_sends_exactly_one_chat_call(home_repository, fixture_taxonomy):
    engine = _home_engine(home_repository, fixture_taxonomy)
    simple_a = _request(
        ident="s-a",
        context={"time": TimeOfDay(19 * 60), "day": Day("Saturday")},
        context_text="within designated time slots approved by the homeowner",
    )
    complex_b = _request(
        ident="c-b", subject="children", resource="smart speakers",
        action="change volume", context={"time": TimeOfDay(15 * 60)},
    )
    complex_c = _request(
        ident="c-c", subject="visitors", resource="smart doorbells",
        action="receive temporary access codes",
    )
    simple_d = _request(ident="s-d", subject="strangers", resource="locks",
                        action="open")

    requests = [simple_a, complex_b, complex_c, simple_d]
    reply = json.dumps(
        [
            {"decision": "deny", "reason": "no consent shown"},
            {"decision": "allow", "reason": "valid visit window"},
        ]
    )
    chat = MockChatProvider({"*": reply})
    engine.chat = chat

    finals = engine.decide_batch(requests)
    assert chat.call_count == 1
    assert [f.request_id for f in finals] == ["s-a", "c-b", "c-c", "s-d"]

    by_id = {f.request_id: f for f in finals}
    assert by_id["s-a"].path is DecisionPath.RULE
    assert by_id["s-a"].verdict is Verdict.ALLOW
    assert by_id["s-d"].path is DecisionPath.RULE
    assert by_id["s-d"].rationale == "default deny"
    assert by_id["c-b"].path is DecisionPath.LLM
    assert by_id["c-b"].verdict is Verdict.DENY
    assert by_id["c-c"].path is DecisionPath.LLM
    assert by_id["c-c"].verdict is Verdict.ALLOW
    assert by_id["c-c"].checker is CheckerOutcome.CONFIRMED


def test_engine_batch_without_complex_requests_never_calls_chat(
    home_repository, fixture_taxonomy
):
    chat = MockChatProvider({"*": "[]"})
    engine = _home_engine(home_repository, fixture_taxonomy, chat=chat)
    request = _request(
        context={"time": TimeOfDay(19 * 60), "day": Day("Saturday")},
        context_text="within designated time slots approved by the homeowner",
    )
    finals = engine.decide_batch([request])
    assert chat.call_count == 0
    assert finals[0].path is DecisionPath.RULE


def test_engine_batch_retries_a_malformed_group_reply_once(
    home_repository, fixture_taxonomy
):
    engine = _home_engine(home_repository, fixture_taxonomy)
    complex_b = _request(
        ident="c-b", subject="children", resource="smart speakers",
        action="change volume", context={"time": TimeOfDay(15 * 60)},
    )
    good = json.dumps([{"decision": "deny", "reason": "no consent"}])
    chat = MockChatProvider({"*": ["not json at all", good]})
    engine.chat = chat
    finals = engine.decide_batch([complex_b])
    assert chat.call_count == 2
    assert finals[0].verdict is Verdict.DENY
    assert finals[0].rationale == "no consent"


def test_engine_batch_degrades_when_the_group_reply_stays_unusable(
    home_repository, fixture_taxonomy
):
    engine = _home_engine(home_repository, fixture_taxonomy)
    complex_b = _request(
        ident="c-b", subject="children", resource="smart speakers",
        action="change volume", context={"time": TimeOfDay(15 * 60)},
    )
    chat = MockChatProvider({"*": '{"decision": "allow"}'})  # object, not array
    engine.chat = chat
    finals = engine.decide_batch([complex_b])
    assert chat.call_count == 2  # the retry was used up
    final = finals[0]
    assert final.path is DecisionPath.LLM
    assert final.checker is CheckerOutcome.OVERRIDDEN
    assert final.feedback.llm_decision is None


def test_engine_batch_wrong_length_reply_degrades(home_repository, fixture_taxonomy):
    engine = _home_engine(home_repository, fixture_taxonomy)
    b = _request(
        ident="c-b", subject="children", resource="smart speakers",
        action="change volume", context={"time": TimeOfDay(15 * 60)},
    )
    c = _request(
        ident="c-c", subject="visitors", resource="smart doorbells",
        action="receive temporary access codes",
    )
    one_answer = json.dumps([{"decision": "deny", "reason": "x"}])
    chat = MockChatProvider({"*": one_answer})
    engine.chat = chat
    finals = engine.decide_batch([b, c])
    assert chat.call_count == 2
    assert all(f.checker is CheckerOutcome.OVERRIDDEN for f in finals)


def test_engine_batch_skips_only_the_malformed_entry(
    home_repository, fixture_taxonomy
):
    engine = _home_engine(home_repository, fixture_taxonomy)
    b = _request(
        ident="c-b", subject="children", resource="smart speakers",
        action="change volume", context={"time": TimeOfDay(15 * 60)},
    )
    c = _request(
        ident="c-c", subject="visitors", resource="smart doorbells",
        action="receive temporary access codes",
    )
    reply = json.dumps(
        [
            {"decision": "abstain", "reason": "??"},  # unusable entry
            {"decision": "allow", "reason": "fine"},
        ]
    )
    chat = MockChatProvider({"*": reply})
    engine.chat = chat
    finals = engine.decide_batch([b, c])
    by_id = {f.request_id: f for f in finals}
    assert by_id["c-b"].checker is CheckerOutcome.OVERRIDDEN  # degraded
    assert by_id["c-c"].verdict is Verdict.ALLOW
    assert by_id["c-c"].checker is CheckerOutcome.CONFIRMED


# ---------------------------------------------------------------------------
# serialization


def test_decision_to_dict_key_set(home_repository, fixture_taxonomy):
    engine = _home_engine(home_repository, fixture_taxonomy)
    request = _request(
        context={"time": TimeOfDay(19 * 60), "day": Day("Saturday")},
        context_text="within designated time slots approved by the homeowner",
    )
    final = engine.decide(request)
    d = decision_to_dict(final)
    assert set(d) == {
        "request_id", "decision", "reason", "path", "checker",
        "complexity", "matched", "applicable", "possible",
    }
    assert d["decision"] == "allow"
    assert d["path"] == "rule"
    assert d["checker"] == "confirmed"
    assert d["complexity"] == "simple"
    assert d["applicable"] == ["policy2"]


def test_decision_json_is_canonical(home_repository, fixture_taxonomy):
    engine = _home_engine(home_repository, fixture_taxonomy)
    request = _request(
        context={"time": TimeOfDay(19 * 60), "day": Day("Saturday")},
        context_text="within designated time slots approved by the homeowner",
    )
    first = decision_json(engine.decide(request))
    second = decision_json(engine.decide(request))
    assert first == second
    parsed = json.loads(first)
    assert list(parsed) == sorted(parsed)


def test_feedback_to_dict_key_set(home_repository, fixture_taxonomy):
    engine = _home_engine(home_repository, fixture_taxonomy)
    request = _request(
        ident="deg", subject="children", resource="smart speakers",
        action="change volume", context={"time": TimeOfDay(15 * 60)},
    )
    final = engine.decide(request)
    record = feedback_to_dict(final.feedback)
    assert set(record) == {
        "request_id", "llm_decision", "checker_decision",
        "matched", "timestamp", "prompt_sha256",
    }
    assert record["request_id"] == "deg"
