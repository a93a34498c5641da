"""Natural language access control: generation, verification, conflict
detection, retrieval, and checked decisions."""

from .conflicts import ConflictKind, ConflictReport, detect_all, detect_pair
from .engine import (
    Applicability,
    CheckerOutcome,
    Complexity,
    Decision,
    DecisionEngine,
    DecisionPath,
    FeedbackRecord,
    FinalDecision,
    Verdict,
    applicability,
    check_decision,
    classify,
    decide_llm,
    decide_rule_based,
    grade,
)
from .errors import LaceError
from .generation import generate_policies, verify_policies, verify_policy_correctness
from .model import (
    AccessRequest,
    Effect,
    Policy,
    Status,
    parse_conditions,
    policy_from_dict,
    policy_to_dict,
    render_policy_sentence,
)
from .providers import (
    MockChatProvider,
    MockEmbeddingProvider,
    MockEntailmentProvider,
)
from .repository import MatchResult, PolicyRepository, build_query_string
from .solver import ThreeValued, co_satisfiable, evaluate, implies, satisfiable
from .taxonomy import Taxonomy, canonicalize_terms

__version__ = "0.1.0"

__all__ = [
    "AccessRequest",
    "Applicability",
    "CheckerOutcome",
    "Complexity",
    "ConflictKind",
    "ConflictReport",
    "Decision",
    "DecisionEngine",
    "DecisionPath",
    "Effect",
    "FeedbackRecord",
    "FinalDecision",
    "LaceError",
    "MatchResult",
    "MockChatProvider",
    "MockEmbeddingProvider",
    "MockEntailmentProvider",
    "Policy",
    "PolicyRepository",
    "Status",
    "Taxonomy",
    "ThreeValued",
    "Verdict",
    "applicability",
    "build_query_string",
    "canonicalize_terms",
    "check_decision",
    "classify",
    "co_satisfiable",
    "decide_llm",
    "decide_rule_based",
    "detect_all",
    "detect_pair",
    "evaluate",
    "generate_policies",
    "grade",
    "implies",
    "parse_conditions",
    "policy_from_dict",
    "policy_to_dict",
    "render_policy_sentence",
    "satisfiable",
    "verify_policies",
    "verify_policy_correctness",
]
