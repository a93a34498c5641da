"""Decidable satisfiability for condition sets.

Every structured atom constrains exactly one attribute, and a condition set
is a pure conjunction, so satisfiability decomposes per attribute:

* times are integers 0..1439 solved by bound arithmetic,
* days are a seven-value enum (calendar order, Monday first),
* numbers are exact rationals solved by interval intersection with finitely
  many excluded points,
* text attributes get a finite model: every observed literal plus one fresh
  value that differs from all of them,
* booleans have two values.

Fuzzy atoms are independent propositions keyed by their normalized text.
They carry no negation, so a conjunction of fuzzy atoms is always
satisfiable by asserting them all.

Evaluation is three-valued (Kleene): False absorbs, Unknown dominates True.
A fuzzy atom can evaluate to True (its text was asserted) or Unknown, never
to False.

``brute_force_satisfiable`` is a deliberately naive second opinion: it scans
whole attribute domains value by value with its own atom checker instead of
reasoning about bounds.  Scanning attributes independently gives the same
answer as enumerating the full cross product, because no atom mentions two
attributes; the cross-product size is still what the enumeration bound
limits.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterable, Mapping

from .errors import EnumerationTooLarge
from .model import (
    Bool,
    Comparison,
    ConditionAtom,
    ConditionSet,
    Day,
    DAY_NAMES,
    Fuzzy,
    Literal,
    Membership,
    Number,
    Op,
    ORDERING_OPS,
    Polarity,
    Text,
    TimeOfDay,
    normalize_fuzzy,
)

DEFAULT_ENUMERATION_BOUND = 10_000_000


class ThreeValued(Enum):
    FALSE = 0
    UNKNOWN = 1
    TRUE = 2

    def __and__(self, other: "ThreeValued") -> "ThreeValued":
        return ThreeValued(min(self.value, other.value))

    def __or__(self, other: "ThreeValued") -> "ThreeValued":
        return ThreeValued(max(self.value, other.value))

    def __bool__(self) -> bool:
        raise TypeError("three-valued truth does not collapse to bool; compare explicitly")


def _tv(flag: bool) -> ThreeValued:
    return ThreeValued.TRUE if flag else ThreeValued.FALSE


def _order_key(lit: Literal):
    if isinstance(lit, TimeOfDay):
        return lit.minutes
    if isinstance(lit, Number):
        return lit.value
    if isinstance(lit, Day):
        return lit.index
    return None


def evaluate_atom(
    atom: ConditionAtom,
    context: Mapping[str, Literal],
    assertions: Iterable[str] = (),
) -> ThreeValued:
    """Evaluates one atom against ground context and asserted fuzzy facts."""
    if isinstance(atom, Fuzzy):
        asserted = {normalize_fuzzy(a) for a in assertions}
        return ThreeValued.TRUE if atom.text in asserted else ThreeValued.UNKNOWN

    value = context.get(atom.attribute)
    if value is None:
        return ThreeValued.UNKNOWN

    if isinstance(atom, Comparison):
        lit = atom.literal
        if type(value) is not type(lit):
            return ThreeValued.UNKNOWN
        if atom.op is Op.EQ:
            return _tv(value == lit)
        if atom.op is Op.NE:
            return _tv(value != lit)
        left, right = _order_key(value), _order_key(lit)
        if left is None:
            return ThreeValued.UNKNOWN  # no order on text or booleans
        if atom.op is Op.LT:
            return _tv(left < right)
        if atom.op is Op.LE:
            return _tv(left <= right)
        if atom.op is Op.GT:
            return _tv(left > right)
        return _tv(left >= right)

    same_kind = [v for v in atom.values if type(v) is type(value)]
    if not same_kind:
        return ThreeValued.UNKNOWN
    hit = value in same_kind
    if atom.polarity is Polarity.IN:
        return _tv(hit)
    return _tv(not hit)


def evaluate(
    conditions: ConditionSet,
    context: Mapping[str, Literal],
    assertions: Iterable[str] = (),
) -> ThreeValued:
    """Kleene conjunction over all atoms; the empty set is True."""
    result = ThreeValued.TRUE
    asserted = {normalize_fuzzy(a) for a in assertions}
    for atom in conditions:
        result = result & evaluate_atom(atom, context, asserted)
        if result is ThreeValued.FALSE:
            return result
    return result


@dataclass(frozen=True)
class Witness:
    context: dict[str, Literal] = field(default_factory=dict)
    assertions: frozenset[str] = frozenset()


@dataclass(frozen=True)
class SatResult:
    satisfiable: bool
    witness: Witness | None = None

    def __bool__(self) -> bool:
        return self.satisfiable


def satisfiable(conditions: ConditionSet) -> SatResult:
    """Decides whether some assignment makes every atom True.

    The witness, when present, makes ``evaluate`` return True.  Witness
    choice is deterministic: attributes are solved in sorted order and each
    domain is scanned from its smallest value.
    """
    by_attr: dict[str, list[Comparison | Membership]] = {}
    fuzzy_texts: set[str] = set()
    for atom in conditions:
        if isinstance(atom, Fuzzy):
            fuzzy_texts.add(atom.text)
        else:
            by_attr.setdefault(atom.attribute, []).append(atom)

    context: dict[str, Literal] = {}
    for attr in sorted(by_attr):
        value = _solve_attribute(by_attr[attr])
        if value is None:
            return SatResult(False)
        context[attr] = value
    return SatResult(True, Witness(context, frozenset(fuzzy_texts)))


def co_satisfiable(c1: ConditionSet, c2: ConditionSet) -> SatResult:
    """Satisfiability of the conjunction of both sets."""
    return satisfiable(c1.union(c2))


def implies(c1: ConditionSet, c2: ConditionSet) -> bool:
    """True when every assignment satisfying ``c1`` satisfies ``c2``.

    Checked atom by atom: ``c1`` implies ``c2`` exactly when no negated
    atom of ``c2`` is jointly satisfiable with ``c1``.  An unsatisfiable
    ``c1`` implies everything; every ``c1`` implies the empty set.
    """
    if not satisfiable(c1):
        return True
    c1_atoms = set(c1.atoms)
    for atom in c2:
        if isinstance(atom, Fuzzy):
            # fuzzy propositions are independent: only c1 asserting the
            # same text forces it true
            if atom not in c1_atoms:
                return False
        else:
            if satisfiable(ConditionSet(c1.atoms + (atom.negated(),))):
                return False
    return True


# ---------------------------------------------------------------------------
# per-attribute solving

_KIND_PRIORITY = (TimeOfDay, Day, Number, Bool, Text)


def _solve_attribute(atoms: list[Comparison | Membership]) -> Literal | None:
    kinds: list[type] = []
    for atom in atoms:
        literals = [atom.literal] if isinstance(atom, Comparison) else list(atom.values)
        for lit in literals:
            if type(lit) not in kinds:
                kinds.append(type(lit))
    for kind in _KIND_PRIORITY:
        if kind not in kinds:
            continue
        if not _kind_shape_ok(atoms, kind):
            continue
        value = _solve_kind(atoms, kind)
        if value is not None:
            return value
    return None


def _kind_shape_ok(atoms: list[Comparison | Membership], kind: type) -> bool:
    """A value of ``kind`` can only make every atom True when each
    comparison literal has that kind and each membership lists at least one
    member of it."""
    for atom in atoms:
        if isinstance(atom, Comparison):
            if type(atom.literal) is not kind:
                return False
            if atom.op in ORDERING_OPS and kind in (Text, Bool):
                return False
        else:
            if not any(type(v) is kind for v in atom.values):
                return False
    return True


def _check_candidate(atoms, attr_value: Literal) -> bool:
    context = {atoms[0].attribute: attr_value}
    return all(
        evaluate_atom(atom, context) is ThreeValued.TRUE for atom in atoms
    )


def _solve_kind(atoms, kind: type) -> Literal | None:
    if kind is Day:
        for name in DAY_NAMES:
            if _check_candidate(atoms, Day(name)):
                return Day(name)
        return None
    if kind is Bool:
        for flag in (False, True):
            if _check_candidate(atoms, Bool(flag)):
                return Bool(flag)
        return None
    if kind is Text:
        observed: list[str] = []
        for atom in atoms:
            literals = [atom.literal] if isinstance(atom, Comparison) else atom.values
            for lit in literals:
                if isinstance(lit, Text) and lit.value not in observed:
                    observed.append(lit.value)
        fresh = "other"
        while fresh in observed:
            fresh += "_"
        for value in observed + [fresh]:
            if _check_candidate(atoms, Text(value)):
                return Text(value)
        return None
    if kind is TimeOfDay:
        return _solve_time(atoms)
    return _solve_number(atoms)


def _solve_time(atoms) -> TimeOfDay | None:
    low, high = 0, 1439
    excluded: set[int] = set()
    allowed: set[int] | None = None
    for atom in atoms:
        if isinstance(atom, Comparison):
            m = atom.literal.minutes
            if atom.op is Op.EQ:
                allowed = {m} if allowed is None else allowed & {m}
            elif atom.op is Op.NE:
                excluded.add(m)
            elif atom.op is Op.LT:
                high = min(high, m - 1)
            elif atom.op is Op.LE:
                high = min(high, m)
            elif atom.op is Op.GT:
                low = max(low, m + 1)
            else:
                low = max(low, m)
        else:
            members = {v.minutes for v in atom.values if isinstance(v, TimeOfDay)}
            if atom.polarity is Polarity.IN:
                allowed = members if allowed is None else allowed & members
            else:
                excluded |= members
    if allowed is not None:
        for m in sorted(allowed):
            if low <= m <= high and m not in excluded:
                return TimeOfDay(m)
        return None
    m = low
    while m <= high:
        if m not in excluded:
            return TimeOfDay(m)
        m += 1
    return None


def _solve_number(atoms) -> Number | None:
    low: Fraction | None = None
    high: Fraction | None = None
    low_open = high_open = False
    excluded: set[Fraction] = set()
    allowed: set[Fraction] | None = None
    for atom in atoms:
        if isinstance(atom, Comparison):
            v = atom.literal.value
            if atom.op is Op.EQ:
                allowed = {v} if allowed is None else allowed & {v}
            elif atom.op is Op.NE:
                excluded.add(v)
            elif atom.op in (Op.LT, Op.LE):
                opened = atom.op is Op.LT
                if high is None or v < high or (v == high and opened and not high_open):
                    high, high_open = v, opened
            else:
                opened = atom.op is Op.GT
                if low is None or v > low or (v == low and opened and not low_open):
                    low, low_open = v, opened
        else:
            members = {v.value for v in atom.values if isinstance(v, Number)}
            if atom.polarity is Polarity.IN:
                allowed = members if allowed is None else allowed & members
            else:
                excluded |= members

    def fits(v: Fraction) -> bool:
        if v in excluded:
            return False
        if low is not None and (v < low or (v == low and low_open)):
            return False
        if high is not None and (v > high or (v == high and high_open)):
            return False
        return True

    if allowed is not None:
        for v in sorted(allowed):
            if fits(v):
                return Number(v)
        return None

    if low is not None and high is not None:
        if low > high or (low == high and (low_open or high_open)):
            return None
        span = high - low
        candidates = [low, high]
        steps = len(excluded) + 2
        candidates += [low + span * k / steps for k in range(1, steps)]
    elif low is not None:
        candidates = [low] + [low + k for k in range(1, len(excluded) + 2)]
    elif high is not None:
        candidates = [high] + [high - k for k in range(1, len(excluded) + 2)]
    else:
        candidates = [Fraction(k) for k in range(len(excluded) + 1)]
    for v in candidates:
        if fits(v):
            return Number(v)
    return None


# ---------------------------------------------------------------------------
# brute force


def brute_force_satisfiable(
    conditions: ConditionSet, bound: int = DEFAULT_ENUMERATION_BOUND
) -> bool:
    """Second-opinion satisfiability by exhaustive value scanning.

    Raises :class:`EnumerationTooLarge` when the full assignment space
    (product of the per-attribute domain sizes) exceeds ``bound``.
    """
    by_attr: dict[str, list[Comparison | Membership]] = {}
    for atom in conditions:
        if isinstance(atom, Fuzzy):
            continue  # always satisfiable by asserting the text
        by_attr.setdefault(atom.attribute, []).append(atom)

    domains: list[tuple[list[Comparison | Membership], list[Literal]]] = []
    space = 1
    for attr in sorted(by_attr):
        atoms = by_attr[attr]
        domain = _oracle_domain(atoms)
        space *= max(len(domain), 1)
        if space > bound:
            raise EnumerationTooLarge(
                f"assignment space exceeds {bound} at attribute {attr!r}"
            )
        domains.append((atoms, domain))

    for atoms, domain in domains:
        if not any(
            all(_oracle_atom_holds(a, value) for a in atoms) for value in domain
        ):
            return False
    return True


def _oracle_domain(atoms) -> list[Literal]:
    kinds: list[type] = []
    texts: list[str] = []
    numbers: set[Fraction] = set()
    for atom in atoms:
        literals = [atom.literal] if isinstance(atom, Comparison) else list(atom.values)
        for lit in literals:
            if type(lit) not in kinds:
                kinds.append(type(lit))
            if isinstance(lit, Text) and lit.value not in texts:
                texts.append(lit.value)
            if isinstance(lit, Number):
                numbers.add(lit.value)
    domain: list[Literal] = []
    if TimeOfDay in kinds:
        domain += [TimeOfDay(m) for m in range(1440)]
    if Day in kinds:
        domain += [Day(name) for name in DAY_NAMES]
    if Number in kinds:
        points = sorted(numbers)
        candidates = list(points)
        candidates.append(points[0] - 1)
        candidates.append(points[-1] + 1)
        for a, b in zip(points, points[1:]):
            candidates.append((a + b) / 2)
        domain += [Number(v) for v in candidates]
    if Bool in kinds:
        domain += [Bool(False), Bool(True)]
    if Text in kinds:
        fresh = "other"
        while fresh in texts:
            fresh += "_"
        domain += [Text(t) for t in texts + [fresh]]
    return domain


def _oracle_atom_holds(atom: Comparison | Membership, value: Literal) -> bool:
    """The oracle's own truth check: True only when the atom is definitely
    true under the value (Unknown counts as failure)."""
    if isinstance(atom, Comparison):
        lit = atom.literal
        if type(value) is not type(lit):
            return False
        if atom.op is Op.EQ:
            return value == lit
        if atom.op is Op.NE:
            return value != lit
        if isinstance(value, TimeOfDay):
            a, b = value.minutes, lit.minutes
        elif isinstance(value, Number):
            a, b = value.value, lit.value
        elif isinstance(value, Day):
            a, b = value.index, lit.index
        else:
            return False
        if atom.op is Op.LT:
            return a < b
        if atom.op is Op.LE:
            return a <= b
        if atom.op is Op.GT:
            return a > b
        return a >= b
    same_kind = [v for v in atom.values if type(v) is type(value)]
    if not same_kind:
        return False
    if atom.polarity is Polarity.IN:
        return value in same_kind
    return value not in same_kind
