"""Satisfiability, implication, and three-valued evaluation.

The random-equivalence tests here run at a small scale for fast feedback;
the acceptance suite repeats them at the sizes the project guarantees.
"""

import random
from fractions import Fraction

import pytest

from generators import random_condition_set
from lace.errors import EnumerationTooLarge
from lace.model import (
    Bool,
    Comparison,
    ConditionSet,
    Day,
    Fuzzy,
    Membership,
    Number,
    Op,
    Polarity,
    Text,
    TimeOfDay,
    parse_conditions,
)
from lace.solver import (
    ThreeValued,
    brute_force_satisfiable,
    co_satisfiable,
    evaluate,
    evaluate_atom,
    implies,
    satisfiable,
)


# The reference engine scans each attribute's domain independently, so a
# large bound costs nothing; it only widens the product-space guard.
ORACLE_BOUND = 10**15


def oracle_satisfiable(conditions: ConditionSet) -> bool:
    return brute_force_satisfiable(conditions, bound=ORACLE_BOUND)


def oracle_co_satisfiable(c1: ConditionSet, c2: ConditionSet) -> bool:
    return brute_force_satisfiable(c1.union(c2), bound=ORACLE_BOUND)


def oracle_implies(c1: ConditionSet, c2: ConditionSet) -> bool:
    """Definition-literal implication over the brute-force engine.

    A conjunction implies each of its consequents separately.  A structured
    atom fails exactly when its negation is jointly satisfiable with the
    premise; a fuzzy atom is an independent proposition only the premise
    itself can assert.
    """
    if not brute_force_satisfiable(c1, bound=ORACLE_BOUND):
        return True
    for atom in c2:
        if isinstance(atom, Fuzzy):
            if atom not in set(c1.atoms):
                return False
        elif brute_force_satisfiable(
            ConditionSet(c1.atoms + (atom.negated(),)), bound=ORACLE_BOUND
        ):
            return False
    return True


def check_pair_against_oracle(c1: ConditionSet, c2: ConditionSet) -> None:
    assert bool(satisfiable(c1)) == oracle_satisfiable(c1)
    assert bool(satisfiable(c2)) == oracle_satisfiable(c2)
    assert bool(co_satisfiable(c1, c2)) == oracle_co_satisfiable(c1, c2)
    assert implies(c1, c2) == oracle_implies(c1, c2)
    assert implies(c2, c1) == oracle_implies(c2, c1)


def test_oracle_equivalence_small_sample():
    rng = random.Random(2024)
    for _ in range(150):
        c1 = random_condition_set(rng)
        c2 = random_condition_set(rng)
        check_pair_against_oracle(c1, c2)


def test_empty_set_is_satisfiable_and_implied_by_everything():
    empty = ConditionSet()
    assert bool(satisfiable(empty))
    rng = random.Random(5)
    for _ in range(20):
        c = random_condition_set(rng)
        assert implies(c, empty)


def test_witness_makes_evaluate_true():
    rng = random.Random(99)
    seen = 0
    for _ in range(200):
        c = random_condition_set(rng)
        result = satisfiable(c)
        if result:
            seen += 1
            witness = result.witness
            value = evaluate(c, witness.context, witness.assertions)
            assert value is ThreeValued.TRUE, (c, witness)
    assert seen > 50  # the generator must not be degenerate


def test_witness_scans_domains_from_the_smallest_value():
    c = parse_conditions(["time >= 18:00", "time <= 20:00"])
    result = satisfiable(c)
    assert result.witness.context == {"time": TimeOfDay(18 * 60)}

    days = parse_conditions(["day in [Friday, Wednesday]"])
    assert satisfiable(days).witness.context == {"day": Day("Wednesday")}


def test_contradictory_bounds_unsatisfiable():
    c = parse_conditions(["time > 20:00", "time < 18:00"])
    assert not satisfiable(c)
    assert not oracle_satisfiable(c)


def test_equal_bounds_meet_at_a_point():
    c = parse_conditions(["time >= 20:00", "time <= 20:00"])
    result = satisfiable(c)
    assert result.witness.context == {"time": TimeOfDay(20 * 60)}


def test_excluded_point_forces_the_next_value():
    c = parse_conditions(["time >= 18:00", "time != 18:00"])
    assert satisfiable(c).witness.context == {"time": TimeOfDay(18 * 60 + 1)}


def test_text_attribute_gets_a_fresh_value_for_inequalities():
    c = ConditionSet(
        (
            Comparison("mode", Op.NE, Text("alpha")),
            Comparison("mode", Op.NE, Text("beta")),
        )
    )
    result = satisfiable(c)
    assert result
    value = result.witness.context["mode"]
    assert value not in (Text("alpha"), Text("beta"))


def test_membership_not_in_the_whole_day_set_unsatisfiable():
    c = parse_conditions(
        ["day not in [Monday, Tuesday, Wednesday, Thursday, Friday, Saturday, Sunday]"]
    )
    assert not satisfiable(c)
    assert not oracle_satisfiable(c)


def test_fuzzy_atoms_are_always_jointly_satisfiable():
    c = ConditionSet((Fuzzy("with consent"), Fuzzy("during the day")))
    result = satisfiable(c)
    assert result
    assert result.witness.assertions == frozenset(
        {"with consent", "during the day"}
    )


def test_co_satisfiability_of_the_conflict_example_conditions():
    monday = parse_conditions(["day == Monday"])
    weekdays = parse_conditions(["day in weekdays"])
    result = co_satisfiable(monday, weekdays)
    assert result
    assert result.witness.context == {"day": Day("Monday")}


def test_implies_is_a_preorder_on_random_sets():
    rng = random.Random(31)
    sets = [random_condition_set(rng, max_atoms=3) for _ in range(12)]
    for c in sets:
        assert implies(c, c)
    for a in sets:
        for b in sets:
            for c in sets:
                if implies(a, b) and implies(b, c):
                    assert implies(a, c), (a, b, c)


def test_implies_concrete_examples():
    monday = parse_conditions(["day == Monday"])
    weekdays = parse_conditions(["day in weekdays"])
    assert implies(monday, weekdays)
    assert not implies(weekdays, monday)

    narrow = parse_conditions(["time >= 19:00", "time <= 20:00"])
    wide = parse_conditions(["time >= 18:00"])
    assert implies(narrow, wide)
    assert not implies(wide, narrow)

    unsat = parse_conditions(["time > 20:00", "time < 18:00"])
    assert implies(unsat, monday)

    fuzzy = ConditionSet((Fuzzy("with consent"),))
    assert implies(fuzzy, fuzzy)
    assert not implies(weekdays, fuzzy)


def test_kleene_conjunction_truth_table():
    t, u, f = ThreeValued.TRUE, ThreeValued.UNKNOWN, ThreeValued.FALSE
    assert (t & t) is t
    assert (t & u) is u
    assert (u & u) is u
    assert (t & f) is f
    assert (u & f) is f
    assert (f & f) is f


def test_three_valued_does_not_collapse_to_bool():
    with pytest.raises(TypeError):
        bool(ThreeValued.UNKNOWN)


def test_evaluate_missing_attribute_is_unknown():
    c = parse_conditions(["time >= 18:00"])
    assert evaluate(c, {}) is ThreeValued.UNKNOWN


def test_evaluate_false_absorbs_unknown():
    c = parse_conditions(["time >= 18:00", "day == Monday"])
    context = {"time": TimeOfDay(9 * 60)}  # day stays unknown
    assert evaluate(c, context) is ThreeValued.FALSE


def test_evaluate_fuzzy_confirmed_only_by_assertion():
    atom = Fuzzy("With parental consent.")
    assert evaluate_atom(atom, {}) is ThreeValued.UNKNOWN
    assert (
        evaluate_atom(atom, {}, ["with parental consent"]) is ThreeValued.TRUE
    )


def test_evaluate_type_mismatch_is_unknown():
    c = parse_conditions(["time >= 18:00"])
    assert evaluate(c, {"time": Text("evening")}) is ThreeValued.UNKNOWN


def test_membership_evaluation_against_context():
    c = parse_conditions(["day in weekend"])
    assert evaluate(c, {"day": Day("Saturday")}) is ThreeValued.TRUE
    assert evaluate(c, {"day": Day("Monday")}) is ThreeValued.FALSE


def test_number_intervals_with_exclusions():
    c = ConditionSet(
        (
            Comparison("level", Op.GT, Number(Fraction(1))),
            Comparison("level", Op.LT, Number(Fraction(2))),
        )
    )
    result = satisfiable(c)
    assert result
    value = result.witness.context["level"]
    assert Fraction(1) < value.value < Fraction(2)
    assert oracle_satisfiable(c)


def test_bool_attribute_domains():
    c = ConditionSet(
        (
            Comparison("active", Op.NE, Bool(True)),
            Membership("active", Polarity.IN, (Bool(False),)),
        )
    )
    result = satisfiable(c)
    assert result.witness.context == {"active": Bool(False)}

    contradiction = ConditionSet(
        (
            Comparison("active", Op.EQ, Bool(True)),
            Comparison("active", Op.EQ, Bool(False)),
        )
    )
    assert not satisfiable(contradiction)


def test_mixed_kinds_on_one_attribute_cannot_all_hold():
    c = ConditionSet(
        (
            Comparison("x", Op.EQ, TimeOfDay(600)),
            Comparison("x", Op.EQ, Day("Monday")),
        )
    )
    assert not satisfiable(c)
    assert not oracle_satisfiable(c)


def test_enumeration_bound_is_enforced():
    c = parse_conditions(["time >= 10:00"])
    with pytest.raises(EnumerationTooLarge):
        brute_force_satisfiable(c, bound=100)
