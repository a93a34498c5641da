"""Core policy model: typed literals, condition atoms, policies, requests.

A policy is the tuple (subjects, resources, actions, effect, conditions).
Conditions are a conjunction of atoms drawn from a small grammar; text that
does not fit the grammar is kept verbatim as a fuzzy atom, so nothing an
author writes is ever silently dropped.

Grammar for structured conditions::

    attr OP literal          OP in {==, !=, <, <=, >, >=}
    attr in [lit, lit, ...]
    attr not in [lit, ...]
    attr in weekend|weekdays

Literals are HH:MM times (minute granularity), day-of-week names, decimal
numbers, true/false, quoted strings, or bare words.  Ordering operators
(<, <=, >, >=) are only meaningful for times, numbers, and days (calendar
order, Monday first); anything else falls back to a fuzzy atom.
"""

from __future__ import annotations

import json
import re
import uuid
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Union

from .errors import InvalidCondition, ParseError, SchemaError

DAY_NAMES = (
    "Monday",
    "Tuesday",
    "Wednesday",
    "Thursday",
    "Friday",
    "Saturday",
    "Sunday",
)
_DAY_INDEX = {name.lower(): i for i, name in enumerate(DAY_NAMES)}

# Aliases expand to day lists wherever a membership value may appear.
DAY_ALIASES = {
    "weekend": ("Saturday", "Sunday"),
    "weekends": ("Saturday", "Sunday"),
    "weekday": DAY_NAMES[:5],
    "weekdays": DAY_NAMES[:5],
}

_TIME_RE = re.compile(r"^(\d{1,2}):(\d{2})$")
_NUMBER_RE = re.compile(r"^[+-]?(?:\d+(?:\.\d*)?|\.\d+)$")
_ATTR = r"[A-Za-z_][A-Za-z0-9_.]*"
_MEMBERSHIP_RE = re.compile(
    rf"^({_ATTR})\s+(not\s+in|in)\s+(.+)$", re.IGNORECASE
)
_COMPARISON_RE = re.compile(rf"^({_ATTR})\s*(==|!=|<=|>=|<|>)\s*(\S.*)$")


class Effect(Enum):
    ALLOWED = "allowed"
    DENIED = "denied"

    @classmethod
    def parse(cls, text: str) -> "Effect":
        """Accepts allowed/denied plus the allow/deny aliases, any case."""
        if not isinstance(text, str):
            raise SchemaError(f"effect must be a string, got {type(text).__name__}")
        normalized = text.strip().lower()
        table = {
            "allowed": cls.ALLOWED,
            "allow": cls.ALLOWED,
            "denied": cls.DENIED,
            "deny": cls.DENIED,
        }
        if normalized not in table:
            raise SchemaError(f"effect must be allowed or denied, got {text!r}")
        return table[normalized]


class Status(Enum):
    UNVERIFIED = "unverified"
    VERIFIED = "verified"
    REJECTED = "rejected"


class Op(Enum):
    EQ = "=="
    NE = "!="
    LT = "<"
    LE = "<="
    GT = ">"
    GE = ">="


_NEGATED_OP = {
    Op.EQ: Op.NE,
    Op.NE: Op.EQ,
    Op.LT: Op.GE,
    Op.LE: Op.GT,
    Op.GT: Op.LE,
    Op.GE: Op.LT,
}

ORDERING_OPS = frozenset({Op.LT, Op.LE, Op.GT, Op.GE})


class Polarity(Enum):
    IN = "in"
    NOT_IN = "not in"


@dataclass(frozen=True)
class TimeOfDay:
    """Minutes after midnight, 0..1439."""

    minutes: int

    def __post_init__(self):
        if not isinstance(self.minutes, int) or not 0 <= self.minutes <= 1439:
            raise ValueError(f"time of day out of range: {self.minutes!r}")


@dataclass(frozen=True)
class Day:
    name: str

    def __post_init__(self):
        canonical = self.name.strip().capitalize()
        if canonical.lower() not in _DAY_INDEX:
            raise ValueError(f"not a day name: {self.name!r}")
        object.__setattr__(self, "name", canonical)

    @property
    def index(self) -> int:
        """Calendar position, Monday == 0."""
        return _DAY_INDEX[self.name.lower()]


@dataclass(frozen=True)
class Number:
    """Exact rational; parsed decimals keep their exact value."""

    value: Fraction

    def __post_init__(self):
        v = self.value
        if isinstance(v, bool):
            raise ValueError("booleans are not numbers")
        if isinstance(v, float):
            v = Fraction(str(v))
        elif isinstance(v, (int, str)):
            v = Fraction(v)
        elif not isinstance(v, Fraction):
            raise ValueError(f"cannot make a number from {v!r}")
        object.__setattr__(self, "value", v)


@dataclass(frozen=True)
class Text:
    value: str


@dataclass(frozen=True)
class Bool:
    value: bool


Literal = Union[TimeOfDay, Day, Number, Text, Bool]


@dataclass(frozen=True)
class Comparison:
    attribute: str
    op: Op
    literal: Literal

    def __post_init__(self):
        object.__setattr__(self, "attribute", self.attribute.lower())

    def negated(self) -> "Comparison":
        return Comparison(self.attribute, _NEGATED_OP[self.op], self.literal)


@dataclass(frozen=True)
class Membership:
    attribute: str
    polarity: Polarity
    values: tuple[Literal, ...]

    def __post_init__(self):
        object.__setattr__(self, "attribute", self.attribute.lower())
        deduped: list[Literal] = []
        for v in self.values:
            if v not in deduped:
                deduped.append(v)
        if not deduped:
            raise ValueError("membership needs at least one value")
        object.__setattr__(self, "values", tuple(deduped))

    def negated(self) -> "Membership":
        flipped = Polarity.NOT_IN if self.polarity is Polarity.IN else Polarity.IN
        return Membership(self.attribute, flipped, self.values)


@dataclass(frozen=True)
class Fuzzy:
    """A condition kept as free text; evaluation can only confirm it, never
    refute it."""

    text: str

    def __post_init__(self):
        object.__setattr__(self, "text", normalize_fuzzy(self.text))


ConditionAtom = Union[Comparison, Membership, Fuzzy]


def normalize_fuzzy(text: str) -> str:
    """Lowercase, collapse whitespace, drop trailing periods.  Idempotent."""
    collapsed = " ".join(text.lower().split())
    return collapsed.rstrip(".").rstrip()


@dataclass(frozen=True)
class ConditionSet:
    """Ordered conjunction of atoms with structural duplicates removed."""

    atoms: tuple[ConditionAtom, ...] = ()

    def __post_init__(self):
        deduped: list[ConditionAtom] = []
        seen: set[ConditionAtom] = set()
        for atom in tuple(self.atoms):
            if atom not in seen:
                seen.add(atom)
                deduped.append(atom)
        object.__setattr__(self, "atoms", tuple(deduped))

    def __iter__(self) -> Iterator[ConditionAtom]:
        return iter(self.atoms)

    def __len__(self) -> int:
        return len(self.atoms)

    def __bool__(self) -> bool:
        return bool(self.atoms)

    def union(self, other: "ConditionSet") -> "ConditionSet":
        return ConditionSet(self.atoms + tuple(other.atoms))


def _coerce_terms(value, field_name: str) -> tuple[str, ...]:
    if isinstance(value, str):
        value = [value]
    if not isinstance(value, (list, tuple)):
        raise SchemaError(f"{field_name} must be a string or list of strings")
    terms: list[str] = []
    for item in value:
        if not isinstance(item, str):
            raise SchemaError(f"{field_name} entries must be strings, got {item!r}")
        cleaned = " ".join(item.split())
        if cleaned and cleaned not in terms:
            terms.append(cleaned)
    if not terms:
        raise SchemaError(f"{field_name} must contain at least one term")
    return tuple(terms)


@dataclass(frozen=True)
class Policy:
    id: str
    subject: tuple[str, ...]
    resource: tuple[str, ...]
    action: tuple[str, ...]
    effect: Effect
    conditions: ConditionSet = field(default_factory=ConditionSet)
    source_description: str | None = None
    status: Status = Status.UNVERIFIED

    def __post_init__(self):
        object.__setattr__(self, "subject", _coerce_terms(self.subject, "subject"))
        object.__setattr__(self, "resource", _coerce_terms(self.resource, "resource"))
        object.__setattr__(self, "action", _coerce_terms(self.action, "action"))

    def with_status(self, status: Status) -> "Policy":
        return replace(self, status=status)


@dataclass(frozen=True)
class AccessRequest:
    id: str
    subject: str
    resource: str
    action: str
    context: Mapping[str, Literal] = field(default_factory=dict)
    context_text: str | None = None

    def __post_init__(self):
        for name, value in (
            ("subject", self.subject),
            ("resource", self.resource),
            ("action", self.action),
        ):
            if not isinstance(value, str) or not value.strip():
                raise SchemaError(f"request {name} must be a non-empty string")
        object.__setattr__(
            self, "context", {k.lower(): v for k, v in dict(self.context).items()}
        )

    def __hash__(self):  # context dict is treated as immutable
        return hash((self.id, self.subject, self.resource, self.action))


# ---------------------------------------------------------------------------
# condition parsing


def _classify_bare(token: str) -> Literal | None:
    m = _TIME_RE.match(token)
    if m:
        hours, minutes = int(m.group(1)), int(m.group(2))
        if hours <= 23 and minutes <= 59:
            return TimeOfDay(hours * 60 + minutes)
        return None
    if token.lower() in _DAY_INDEX:
        return Day(token)
    if token.lower() in ("true", "false"):
        return Bool(token.lower() == "true")
    if _NUMBER_RE.match(token):
        return Number(Fraction(token))
    if re.fullmatch(r"[^\s\[\],'\"]+", token):
        return Text(token)
    return None


def _classify_quoted(content: str) -> Literal:
    if content.lower() in _DAY_INDEX:
        return Day(content)
    m = _TIME_RE.match(content)
    if m and int(m.group(1)) <= 23 and int(m.group(2)) <= 59:
        return TimeOfDay(int(m.group(1)) * 60 + int(m.group(2)))
    return Text(content)


def _read_quoted(text: str) -> str | None:
    """Returns the unescaped content when the whole text is one quoted
    string, else None."""
    if len(text) < 2 or text[0] not in "'\"" or text[-1] != text[0]:
        return None
    quote = text[0]
    out: list[str] = []
    i = 1
    while i < len(text) - 1:
        ch = text[i]
        if ch == "\\" and i + 1 < len(text) - 1:
            out.append(text[i + 1])
            i += 2
            continue
        if ch == quote:
            return None  # closes early; trailing junk follows
        out.append(ch)
        i += 1
    return "".join(out)


def _split_list_items(body: str) -> list[str] | None:
    """Splits a bracket body on commas, respecting quotes."""
    items: list[str] = []
    current: list[str] = []
    quote: str | None = None
    i = 0
    while i < len(body):
        ch = body[i]
        if quote:
            current.append(ch)
            if ch == "\\" and i + 1 < len(body):
                current.append(body[i + 1])
                i += 2
                continue
            if ch == quote:
                quote = None
        elif ch in "'\"":
            quote = ch
            current.append(ch)
        elif ch == ",":
            items.append("".join(current).strip())
            current = []
        else:
            current.append(ch)
        i += 1
    if quote is not None:
        return None
    items.append("".join(current).strip())
    if any(not item for item in items):
        return None
    return items


def _parse_member(item: str) -> list[Literal] | None:
    quoted = _read_quoted(item)
    if quoted is not None:
        return [_classify_quoted(quoted)]
    alias = DAY_ALIASES.get(item.lower())
    if alias:
        return [Day(d) for d in alias]
    if " " in item:
        # multi-word bare items are unambiguous between commas
        if re.fullmatch(r"[^\[\],'\"]+", item):
            return [Text(" ".join(item.split()))]
        return None
    lit = _classify_bare(item)
    return None if lit is None else [lit]


def _try_structured(text: str) -> ConditionAtom | None:
    m = _MEMBERSHIP_RE.match(text)
    if m:
        attr, keyword, rhs = m.group(1), m.group(2).lower(), m.group(3).strip()
        polarity = Polarity.NOT_IN if keyword.startswith("not") else Polarity.IN
        values: list[Literal] = []
        if rhs.startswith("[") and rhs.endswith("]"):
            items = _split_list_items(rhs[1:-1])
            if items is None:
                return None
            for item in items:
                member = _parse_member(item)
                if member is None:
                    return None
                values.extend(member)
        elif rhs.lower() in DAY_ALIASES:
            values = [Day(d) for d in DAY_ALIASES[rhs.lower()]]
        else:
            return None
        if not values:
            return None
        return Membership(attr, polarity, tuple(values))

    m = _COMPARISON_RE.match(text)
    if m:
        attr, op_text, rhs = m.group(1), m.group(2), m.group(3).strip()
        op = Op(op_text)
        quoted = _read_quoted(rhs)
        if quoted is not None:
            lit: Literal | None = _classify_quoted(quoted)
        elif " " in rhs:
            lit = None
        else:
            lit = _classify_bare(rhs)
        if lit is None:
            return None
        if op in ORDERING_OPS and not isinstance(lit, (TimeOfDay, Number, Day)):
            return None
        return Comparison(attr, op, lit)
    return None


def parse_condition(text: str) -> ConditionAtom:
    """Parses one condition string; non-grammar text becomes a fuzzy atom."""
    if text is None or not str(text).strip():
        raise InvalidCondition("condition text is empty")
    raw = str(text).strip()
    head = raw.rstrip(".").rstrip()
    if head:
        atom = _try_structured(head)
        if atom is not None:
            return atom
    return Fuzzy(raw)


def parse_conditions(texts: Iterable[str]) -> ConditionSet:
    return ConditionSet(tuple(parse_condition(t) for t in texts))


# ---------------------------------------------------------------------------
# rendering


def render_literal(lit: Literal) -> str:
    """Human-readable form used inside policy sentences."""
    if isinstance(lit, TimeOfDay):
        return f"{lit.minutes // 60:02d}:{lit.minutes % 60:02d}"
    if isinstance(lit, Day):
        return lit.name
    if isinstance(lit, Number):
        return _decimal_string(lit.value)
    if isinstance(lit, Bool):
        return "true" if lit.value else "false"
    if isinstance(lit, Text):
        if re.fullmatch(r"[^\s\[\],'\"]+", lit.value) or " " in lit.value:
            return lit.value
        return _quote(lit.value)
    raise TypeError(f"not a literal: {lit!r}")


def literal_source(lit: Literal) -> str:
    """Round-trippable form used inside serialized condition strings."""
    if isinstance(lit, Text):
        return _quote(lit.value)
    return render_literal(lit)


def _quote(value: str) -> str:
    escaped = value.replace("\\", "\\\\").replace('"', '\\"')
    return f'"{escaped}"'


def _decimal_string(f: Fraction) -> str:
    if f.denominator == 1:
        return str(f.numerator)
    sign = "-" if f < 0 else ""
    f = abs(f)
    d = f.denominator
    twos = fives = 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:  # not reachable from parsed decimals
        return f"{sign}{f.numerator}/{f.denominator}"
    places = max(twos, fives)
    scaled = f.numerator * 10**places // f.denominator
    digits = str(scaled).rjust(places + 1, "0")
    return f"{sign}{digits[:-places]}.{digits[-places:]}"


def condition_source(atom: ConditionAtom) -> str:
    """Serialized condition string; reparsing yields an equal atom."""
    if isinstance(atom, Comparison):
        return f"{atom.attribute} {atom.op.value} {literal_source(atom.literal)}"
    if isinstance(atom, Membership):
        members = ", ".join(literal_source(v) for v in atom.values)
        return f"{atom.attribute} {atom.polarity.value} [{members}]"
    if isinstance(atom, Fuzzy):
        return atom.text
    raise TypeError(f"not a condition atom: {atom!r}")


def condition_phrase(atom: ConditionAtom) -> str:
    """Condition as it appears inside a rendered policy sentence."""
    if isinstance(atom, Comparison):
        return f"{atom.attribute} {atom.op.value} {render_literal(atom.literal)}"
    if isinstance(atom, Membership):
        members = ", ".join(render_literal(v) for v in atom.values)
        return f"{atom.attribute} {atom.polarity.value} [{members}]"
    return atom.text


def render_policy_sentence(policy: Policy) -> str:
    """Deterministic one-sentence reconstruction of a policy.

    Two policies that differ only in effect produce sentences that differ
    exactly at the effect word.
    """
    subjects = " and ".join(policy.subject)
    actions = " and ".join(policy.action)
    resources = " and ".join(policy.resource)
    sentence = f"{subjects} can be {policy.effect.value} to {actions} {resources}"
    if policy.conditions:
        clauses = " and ".join(condition_phrase(a) for a in policy.conditions)
        sentence += f" if {clauses}"
    return sentence


# ---------------------------------------------------------------------------
# JSON serialization


def literal_to_json(lit: Literal):
    """Literal as a JSON value; times and days travel as strings."""
    if isinstance(lit, Bool):
        return lit.value
    if isinstance(lit, Number):
        if lit.value.denominator == 1:
            return int(lit.value)
        return float(lit.value)
    if isinstance(lit, Text):
        return lit.value
    return render_literal(lit)


def literal_from_json(value) -> Literal:
    if isinstance(value, bool):
        return Bool(value)
    if isinstance(value, (int, float, Fraction)):
        return Number(Fraction(str(value)) if isinstance(value, float) else Fraction(value))
    if isinstance(value, str):
        lit = _classify_bare(value.strip()) if value.strip() else None
        if lit is None:
            return Text(value)
        return lit
    raise SchemaError(f"cannot interpret context value {value!r}")


def policy_to_dict(policy: Policy) -> dict:
    out = {
        "id": policy.id,
        "subject": list(policy.subject),
        "resource": list(policy.resource),
        "action": list(policy.action),
        "effect": policy.effect.value,
        "conditions": [condition_source(a) for a in policy.conditions],
        "status": policy.status.value,
    }
    if policy.source_description is not None:
        out["source_description"] = policy.source_description
    return out


def policy_from_dict(obj, default_id: str | None = None) -> Policy:
    if not isinstance(obj, dict):
        raise SchemaError(f"policy must be a JSON object, got {type(obj).__name__}")
    for key in ("subject", "resource", "action"):
        if key not in obj:
            raise SchemaError(f"policy is missing {key!r}")
    if "effect" not in obj:
        raise SchemaError("policy is missing 'effect'")
    effect = Effect.parse(obj["effect"])
    raw_conditions = obj.get("conditions", [])
    if raw_conditions is None:
        raw_conditions = []
    if not isinstance(raw_conditions, list):
        raise SchemaError("conditions must be a list of strings")
    for entry in raw_conditions:
        if not isinstance(entry, str):
            raise SchemaError(f"conditions entries must be strings, got {entry!r}")
    status = Status.UNVERIFIED
    if "status" in obj:
        try:
            status = Status(str(obj["status"]).lower())
        except ValueError:
            raise SchemaError(f"unknown status {obj['status']!r}")
    policy_id = obj.get("id") or default_id or uuid.uuid4().hex
    if not isinstance(policy_id, str):
        raise SchemaError("policy id must be a string")
    source = obj.get("source_description")
    if source is not None and not isinstance(source, str):
        raise SchemaError("source_description must be a string")
    return Policy(
        id=policy_id,
        subject=obj["subject"],
        resource=obj["resource"],
        action=obj["action"],
        effect=effect,
        conditions=parse_conditions(raw_conditions),
        source_description=source,
        status=status,
    )


def parse_policy(text: str) -> Policy:
    """Parses a single policy from JSON text."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"policy document is not valid JSON: {exc}") from exc
    return policy_from_dict(obj)


def parse_policy_document(text: str) -> list[Policy]:
    """Parses a policy file: one object, an array, or a name-keyed map."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"policy document is not valid JSON: {exc}") from exc
    return policies_from_json(obj)


def policies_from_json(obj) -> list[Policy]:
    if isinstance(obj, dict):
        if "subject" in obj:
            return [policy_from_dict(obj)]
        policies = []
        for name, entry in obj.items():
            if not isinstance(entry, dict):
                raise SchemaError(f"entry {name!r} is not a policy object")
            policies.append(policy_from_dict(entry, default_id=name))
        return policies
    if isinstance(obj, list):
        return [policy_from_dict(entry) for entry in obj]
    raise SchemaError("policy document must be an object or an array")


def serialize_policy(policy: Policy) -> str:
    return json.dumps(policy_to_dict(policy), ensure_ascii=False)


def request_to_dict(request: AccessRequest) -> dict:
    out = {
        "id": request.id,
        "subject": request.subject,
        "resource": request.resource,
        "action": request.action,
        "context": {
            attr: literal_to_json(request.context[attr])
            for attr in sorted(request.context)
        },
    }
    if request.context_text is not None:
        out["context_text"] = request.context_text
    return out


def request_from_dict(obj, default_id: str | None = None) -> AccessRequest:
    if not isinstance(obj, dict):
        raise SchemaError(f"request must be a JSON object, got {type(obj).__name__}")
    for key in ("subject", "resource", "action"):
        if key not in obj or not isinstance(obj[key], str):
            raise SchemaError(f"request needs a string {key!r}")
    raw_context = obj.get("context") or {}
    if not isinstance(raw_context, dict):
        raise SchemaError("request context must be an object")
    context = {str(k): literal_from_json(v) for k, v in raw_context.items()}
    context_text = obj.get("context_text")
    if context_text is not None and not isinstance(context_text, str):
        raise SchemaError("context_text must be a string")
    request_id = obj.get("id") or default_id or uuid.uuid4().hex
    if not isinstance(request_id, str):
        raise SchemaError("request id must be a string")
    return AccessRequest(
        id=request_id,
        subject=obj["subject"],
        resource=obj["resource"],
        action=obj["action"],
        context=context,
        context_text=context_text,
    )


def canonical_term(term: str) -> str:
    """Normal form used for taxonomy lookups and term matching."""
    return " ".join(term.lower().split())
