from __future__ import annotations

from fractions import Fraction

import pytest
from conftest import relations, subdists
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import hall_feasible, lp_feasible

from probref.coupling import (
    CouplingError,
    CouplingWitness,
    check_witness,
    compose,
    diagonal,
    equality,
    exists_coupling,
    full,
    lift_ret,
    mass_bound,
    max_flow_coupling,
    pointwise_bound,
    witness_violation,
)
from probref.markov import flip_model
from probref.subdist import SubDist, ret, uniform, zero

HALF = Fraction(1, 2)
QUARTER = Fraction(1, 4)


def test_zero_coupling_is_trivial():
    assert check_witness(zero(), uniform(2), full, CouplingWitness(zero()))
    assert exists_coupling(zero(), uniform(2), set()) == CouplingWitness(zero())


def test_identity_coupling():
    assert check_witness(uniform(1), uniform(1), equality, diagonal(uniform(1)))


def test_diagonal_rejected_against_point_mass():
    w = diagonal(uniform(1))
    assert not check_witness(uniform(1), ret(0), equality, w)
    assert "right marginal" in witness_violation(uniform(1), ret(0), equality, w)


def test_bijection_coupling():
    w = exists_coupling(uniform(1), uniform(1), {(0, 1), (1, 0)})
    assert w == CouplingWitness.of({(0, 1): HALF, (1, 0): HALF})


def test_full_relation_against_point_mass_exists():
    w = exists_coupling(uniform(1), ret(0), full)
    assert w == CouplingWitness.of({(0, 0): HALF, (1, 0): HALF})


def test_insufficient_right_mass():
    res = max_flow_coupling(uniform(1), SubDist({0: QUARTER}), full)
    assert not res.feasible
    assert res.value == QUARTER
    assert res.deficit == Fraction(3, 4)
    assert exists_coupling(uniform(1), SubDist({0: QUARTER}), full) is None


def test_hall_set_certifies_infeasibility():
    mu1 = SubDist({0: HALF, 1: HALF})
    mu2 = SubDist({0: HALF, 1: HALF})
    res = max_flow_coupling(mu1, mu2, {(0, 0), (1, 0)})
    assert res.deficit == HALF
    X = set(res.hall_set)
    nbrs = {b for a in X for b in (0,) if (a, b) in {(0, 0), (1, 0)}}
    assert sum(mu1[a] for a in X) - sum(mu2[b] for b in nbrs) == res.deficit


def test_witness_json_round_trip():
    w = CouplingWitness.of({(0, 1): HALF, (1, 0): QUARTER})
    assert CouplingWitness.from_json(w.to_json()) == w
    assert w.to_json()[0] == {"left": 0, "right": 1, "numerator": 1, "denominator": 2}


def test_check_rejects_support_outside_relation():
    w = CouplingWitness.of({(0, 1): HALF, (1, 0): HALF})
    assert not check_witness(uniform(1), uniform(1), equality, w)


def test_check_rejects_wrong_left_marginal():
    w = CouplingWitness.of({(0, 0): QUARTER, (1, 1): HALF})
    assert "left marginal" in witness_violation(uniform(1), uniform(1), equality, w)


def test_pointwise_and_mass_bounds():
    mu1, mu2 = SubDist({0: QUARTER}), uniform(1)
    w = CouplingWitness.of({(0, 0): QUARTER})
    assert pointwise_bound(mu1, mu2, w) == [(0, QUARTER, HALF), (1, Fraction(0), HALF)]
    assert mass_bound(mu1, mu2, w) == (QUARTER, 1)
    assert mass_bound(zero(), uniform(1), CouplingWitness(zero())) == (0, 1)
    assert pointwise_bound(zero(), zero(), CouplingWitness(zero())) == []
    assert mass_bound(uniform(1), uniform(1), diagonal(uniform(1))) == (1, 1)
    assert all(a == b for _, a, b in pointwise_bound(uniform(1), uniform(1), diagonal(uniform(1))))


def test_bounds_refuse_invalid_witness():
    with pytest.raises(CouplingError):
        pointwise_bound(uniform(1), ret(0), diagonal(uniform(1)))


def test_compose_diagonals():
    w = compose(diagonal(uniform(1)), uniform, uniform, lambda a, b: diagonal(uniform(a)), equality)
    assert check_witness(uniform(1).bind(uniform), uniform(1).bind(uniform), equality, w)
    assert w == diagonal(uniform(1).bind(uniform))


def test_ret_lifting():
    assert check_witness(ret(1), ret(2), {(1, 2)}, lift_ret(1, 2, {(1, 2)}))
    with pytest.raises(CouplingError):
        lift_ret(1, 3, {(1, 2)})


def test_compose_flip_model_two_steps():
    # the program tosses a coin (0/1); the model moves true -> {true, false}
    model = flip_model()
    R1 = {(True, 1), (False, 0)}
    w1 = exists_coupling(model(True), uniform(1), R1)
    assert w1 is not None

    def prog_next(b: int) -> SubDist:
        return uniform(1) if b == 1 else ret(0)

    def pair_witness(m, b):
        return exists_coupling(model(m) if m else ret(False), prog_next(b), lambda x, y: x == (y == 1))

    w = compose(w1, lambda m: model(m) if m else ret(False), prog_next, pair_witness, lambda x, y: x == (y == 1))
    # brute force: four joint outcomes
    expected = {(True, 1): QUARTER, (False, 0): Fraction(3, 4)}
    assert w.joint == SubDist(expected)


def test_compose_rejects_missing_continuation():
    with pytest.raises(CouplingError):
        compose(diagonal(uniform(1)), uniform, uniform, {}, equality)


@settings(max_examples=300, deadline=None)
@given(subdists(), subdists(), relations())
def test_flow_agrees_with_lp_oracle(mu1, mu2, R):
    expected = lp_feasible(dict(mu1.items()), dict(mu2.items()), R)
    assert hall_feasible(dict(mu1.items()), dict(mu2.items()), R) == expected
    w = exists_coupling(mu1, mu2, R)
    assert (w is not None) == expected
    if w is not None:
        assert check_witness(mu1, mu2, R, w)


@settings(max_examples=200, deadline=None)
@given(subdists())
def test_self_coupling_always_exists(mu):
    assert check_witness(mu, mu, equality, diagonal(mu))
    assert exists_coupling(mu, mu, equality) is not None


@settings(max_examples=200, deadline=None)
@given(subdists(), subdists(), relations(), st.data())
def test_compose_preserves_validity(mu1, mu2, R, data):
    w1 = exists_coupling(mu1, mu2, R)
    if w1 is None:
        return
    f1 = {a: data.draw(subdists()) for a in range(4)}
    # make every continuation pair coupleable by giving the right side the same distribution
    f2 = {b: SubDist({}) for b in range(4)}
    for b in range(4):
        f2[b] = data.draw(subdists(full=True))

    def pair(a, b):
        return exists_coupling(f1[a], f2[b], full)

    S = full
    if any(pair(a, b) is None for a, b in w1.joint.outcomes()):
        with pytest.raises(CouplingError):
            compose(w1, f1.__getitem__, f2.__getitem__, pair, S)
        return
    w = compose(w1, f1.__getitem__, f2.__getitem__, pair, S)
    assert check_witness(mu1.bind(f1.__getitem__), mu2.bind(f2.__getitem__), S, w)


@settings(max_examples=200, deadline=None)
@given(subdists(), subdists(), relations())
def test_mass_lemma(mu1, mu2, R):
    w = exists_coupling(mu1, mu2, R)
    if w is not None:
        m1, m2 = mass_bound(mu1, mu2, w, R)
        assert m1 <= m2


@settings(max_examples=200, deadline=None)
@given(subdists(), subdists())
def test_pointwise_lemma(mu1, mu2):
    w = exists_coupling(mu1, mu2, equality)
    assert (w is not None) == all(mu1[a] <= mu2[a] for a in mu1.support)
    if w is not None:
        assert all(p <= q for _, p, q in pointwise_bound(mu1, mu2, w))
