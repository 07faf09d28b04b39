from __future__ import annotations

import json
from fractions import Fraction

import pytest
from conftest import kernels, subdists
from hypothesis import given, settings

from probref.subdist import (
    SubDist,
    SubDistError,
    as_prob,
    bind,
    fold_m,
    fraction_str,
    mass,
    parse_fraction,
    ret,
    support,
    uniform,
    zero,
)

HALF = Fraction(1, 2)


def test_ret_is_dirac():
    assert ret(5) == SubDist({5: 1})
    assert support(ret("x")) == {"x"}
    assert mass(ret(())) == 1


def test_bind_worked_example():
    # two branches: 1 -> ret(0) (1/2), 0 -> uniform(1) (1/2 split evenly)
    mu = bind(uniform(1), lambda b: ret(0) if b == 1 else uniform(1))
    assert mu == SubDist({0: Fraction(3, 4), 1: Fraction(1, 4)})


def test_bind_zero_and_right_identity():
    assert bind(zero(), lambda a: ret(a + 1)) == zero()
    mu = SubDist({0: Fraction(1, 3), 2: Fraction(1, 6)})
    assert bind(mu, ret) == mu


def test_mass_examples():
    assert mass(zero()) == 0
    assert mass(uniform(3)) == 1
    assert mass(SubDist({0: HALF})) == HALF


def test_uniform():
    assert uniform(1) == SubDist({0: HALF, 1: HALF})
    assert uniform(0) == ret(0)
    assert mass(uniform(5)) == 1
    assert all(p == Fraction(1, 6) for _, p in uniform(5).items())
    with pytest.raises(SubDistError):
        uniform(-1)


def test_zero_has_empty_support():
    assert support(zero()) == frozenset()
    assert len(zero()) == 0


def test_rejects_invalid_entries():
    with pytest.raises(SubDistError):
        SubDist({0: Fraction(3, 4), 1: HALF})
    with pytest.raises(SubDistError):
        SubDist({0: Fraction(-1, 4)})
    with pytest.raises(SubDistError):
        as_prob(0.5)


def test_zero_entries_are_pruned():
    mu = SubDist({0: 0, 1: HALF})
    assert mu.support == {1}
    assert mu == SubDist({1: HALF})
    assert bind(uniform(1), lambda a: zero() if a == 0 else ret(a)) == SubDist({1: HALF})


def test_iteration_is_canonical():
    mu = SubDist({3: Fraction(1, 4), False: Fraction(1, 4), "a": Fraction(1, 4), 1: Fraction(1, 4)})
    assert mu.outcomes() == [False, 1, 3, "a"]


def test_json_round_trip():
    mu = SubDist({(0, True): Fraction(1, 3), (1, False): Fraction(1, 6)})
    records = json.loads(json.dumps(mu.to_json()))
    assert records[0] == {"outcome": [0, True], "numerator": 1, "denominator": 3}
    back = SubDist.from_json(json.loads(mu.dumps()), decode=lambda v: tuple(v))
    assert back == mu


def test_fraction_text():
    assert parse_fraction("3/4") == Fraction(3, 4)
    assert fraction_str(Fraction(1, 2)) == "1/2"
    with pytest.raises(SubDistError):
        parse_fraction("0.5x")


def test_fold_m_sequences_kernels():
    mu = fold_m(lambda acc, _: uniform(1).map(lambda b: acc + b), 0, range(3))
    assert mu == SubDist({0: Fraction(1, 8), 1: Fraction(3, 8), 2: Fraction(3, 8), 3: Fraction(1, 8)})


@settings(max_examples=200)
@given(subdists(), kernels())
def test_left_identity(mu, f):
    for a in range(4):
        assert bind(ret(a), f) == f(a)


@settings(max_examples=200)
@given(subdists())
def test_right_identity(mu):
    assert bind(mu, ret) == mu


@settings(max_examples=200)
@given(subdists(), kernels(), kernels())
def test_associativity(mu, f, g):
    assert bind(bind(mu, f), g) == bind(mu, lambda a: bind(f(a), g))


@settings(max_examples=200)
@given(subdists(), kernels())
def test_bind_never_gains_mass(mu, f):
    out = bind(mu, f)
    assert out.mass <= mu.mass
    assert all(p > 0 for _, p in out.items())


@settings(max_examples=100)
@given(subdists())
def test_bind_with_full_kernels_keeps_mass(mu):
    assert bind(mu, lambda a: uniform(a)).mass == mu.mass
