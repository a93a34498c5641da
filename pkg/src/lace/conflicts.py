"""Pairwise policy conflict detection.

Three kinds are reported, checked in precedence order:

* Effect: overlapping scope, opposite effects, and conditions that can hold
  at the same time.  The report carries a witness assignment.
* Redundancy: one policy's scope is contained in the other's, effects are
  equal, and the narrower conditions imply the broader ones.  The subsumed
  policy is listed first.
* Inconsistency: overlapping scope and equal effects, but the two condition
  sets can never hold together.

A policy whose own conditions are unsatisfiable implies everything, so it
is reported as Redundancy when scope subsumption holds; the explanation
flags the unsatisfiable policy explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .model import Policy, literal_to_json
from .solver import Witness, co_satisfiable, implies, satisfiable
from .taxonomy import Taxonomy, overlaps, subsumed


class ConflictKind(Enum):
    EFFECT = "effect"
    REDUNDANCY = "redundancy"
    INCONSISTENCY = "inconsistency"


@dataclass(frozen=True)
class ConflictReport:
    kind: ConflictKind
    first: str
    second: str
    explanation: str
    witness: Witness | None = None


def report_to_dict(report: ConflictReport) -> dict:
    out = {
        "kind": report.kind.value,
        "first": report.first,
        "second": report.second,
        "explanation": report.explanation,
        "witness": None,
    }
    if report.witness is not None:
        out["witness"] = {
            "context": {
                attr: literal_to_json(value)
                for attr, value in sorted(report.witness.context.items())
            },
            "assertions": sorted(report.witness.assertions),
        }
    return out


def _scope_overlaps(p1: Policy, p2: Policy, taxonomy: Taxonomy) -> bool:
    return (
        overlaps(p1.subject, p2.subject, taxonomy)
        and overlaps(p1.resource, p2.resource, taxonomy)
        and overlaps(p1.action, p2.action, taxonomy)
    )


def _scope_subsumed(inner: Policy, outer: Policy, taxonomy: Taxonomy) -> bool:
    return (
        subsumed(inner.subject, outer.subject, taxonomy)
        and subsumed(inner.resource, outer.resource, taxonomy)
        and subsumed(inner.action, outer.action, taxonomy)
    )


def detect_pair(p1: Policy, p2: Policy, taxonomy: Taxonomy) -> ConflictReport | None:
    """Reports the highest-precedence conflict between two policies, if any."""
    if not _scope_overlaps(p1, p2, taxonomy):
        return None
    a, b = sorted((p1, p2), key=lambda p: p.id)

    if p1.effect is not p2.effect:
        sat = co_satisfiable(p1.conditions, p2.conditions)
        if sat:
            return ConflictReport(
                kind=ConflictKind.EFFECT,
                first=a.id,
                second=b.id,
                explanation=(
                    f"policies {a.id} and {b.id} overlap in scope, take opposite "
                    "effects, and their conditions can hold at the same time"
                ),
                witness=sat.witness,
            )
        return None

    sub12 = _scope_subsumed(p1, p2, taxonomy) and implies(p1.conditions, p2.conditions)
    sub21 = _scope_subsumed(p2, p1, taxonomy) and implies(p2.conditions, p1.conditions)
    narrower: Policy | None = None
    if sub12 and sub21:
        narrower = a  # mutual: smaller id reported as covered
    elif sub12:
        narrower = p1
    elif sub21:
        narrower = p2
    if narrower is not None:
        broader = p2 if narrower is p1 else p1
        explanation = (
            f"policy {narrower.id} is covered by {broader.id}: its scope is "
            "contained and its conditions imply the broader policy's conditions"
        )
        if not satisfiable(narrower.conditions):
            explanation += (
                f" (note: the conditions of {narrower.id} are unsatisfiable on their own)"
            )
        return ConflictReport(
            kind=ConflictKind.REDUNDANCY,
            first=narrower.id,
            second=broader.id,
            explanation=explanation,
        )

    if not co_satisfiable(p1.conditions, p2.conditions):
        return ConflictReport(
            kind=ConflictKind.INCONSISTENCY,
            first=a.id,
            second=b.id,
            explanation=(
                f"policies {a.id} and {b.id} share scope and effect but their "
                "conditions can never hold at the same time"
            ),
        )
    return None


def detect_all(policies: list[Policy], taxonomy: Taxonomy) -> list[ConflictReport]:
    """All pairwise conflicts, in a deterministic order independent of the
    input ordering."""
    ordered = sorted(policies, key=lambda p: p.id)
    reports: list[ConflictReport] = []
    for i, p1 in enumerate(ordered):
        for p2 in ordered[i + 1 :]:
            report = detect_pair(p1, p2, taxonomy)
            if report is not None:
                reports.append(report)
    return reports
