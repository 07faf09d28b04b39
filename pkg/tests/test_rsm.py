from __future__ import annotations

import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from probref.corpus import load_case
from probref.markov import LISTGEN_STATES, Model, flip_model, listgen_model, random_walk, two_coin_model
from probref.rsm import RSMCertificate, RSMError, check_rsm, listgen_rsm, rsm_from_json, two_coin_rsm
from probref.subdist import SubDist

HALF = Fraction(1, 2)
TWO_COIN_STATES = [(a, b) for a in (True, False) for b in (True, False)]


def _flip_rsm(eps) -> RSMCertificate:
    return RSMCertificate(lambda b: Fraction(2) if b else Fraction(0), Fraction(eps))


def test_listgen_drifts():
    rep = check_rsm(listgen_model(), listgen_rsm(), LISTGEN_STATES)
    assert rep.verified
    rows = {r.state: r for r in rep.rows}
    # expected next values next to f - eps
    assert (rows["q0"].expected, rows["q0"].f - HALF) == (Fraction(3, 2), Fraction(3, 2))
    assert (rows["q1"].expected, rows["q1"].f - HALF) == (Fraction(5, 2), Fraction(5, 2))
    assert rows["qf"].final and rows["qf"].expected is None


def test_two_coin_drift():
    rep = check_rsm(two_coin_model(), two_coin_rsm(), TWO_COIN_STATES)
    assert rep.verified
    for r in rep.rows:
        if not r.final:
            assert r.expected == 1 == r.f - 1


def test_flip_with_epsilon_two_is_rejected():
    assert check_rsm(flip_model(), _flip_rsm(1), [True, False]).verified
    rep = check_rsm(flip_model(), _flip_rsm(2), [True, False])
    assert not rep.verified
    assert rep.first_violation.state is True
    assert rep.to_json()["verdict"] == "rejected"
    assert rep.to_json()["first_violation"] is True


def test_tightening_listgen_epsilon_breaks_it():
    cert = RSMCertificate(listgen_rsm().f, Fraction(3, 4))
    assert not check_rsm(listgen_model(), cert, LISTGEN_STATES).verified


def test_epsilon_must_be_positive():
    with pytest.raises(RSMError):
        RSMCertificate(lambda s: Fraction(0), Fraction(0))


def test_negative_ranking_value():
    cert = RSMCertificate(lambda b: Fraction(-1), Fraction(1))
    with pytest.raises(RSMError, match="negative"):
        check_rsm(flip_model(), cert, [True])


def test_sub_unit_step_is_an_error():
    lossy = Model(lambda s: SubDist({0: HALF}), lambda s: s == 0)
    with pytest.raises(RSMError, match="step mass"):
        check_rsm(lossy, RSMCertificate(lambda s: Fraction(s), Fraction(1, 4)), [1])


def test_walk_has_no_linear_certificate():
    # f(n) = n has zero drift for the symmetric walk
    cert = RSMCertificate(lambda n: Fraction(n), Fraction(1, 100))
    assert not check_rsm(random_walk(), cert, range(0, 6)).verified


def test_corpus_rsm_files():
    assert check_rsm(listgen_model(), load_case("listgen").rsm, LISTGEN_STATES).verified
    assert check_rsm(two_coin_model(), load_case("lazy_real").rsm, TWO_COIN_STATES).verified


def test_rsm_json_forms():
    cert = rsm_from_json(json.dumps({"f": "listgen", "epsilon": {"num": 1, "den": 2}}))
    assert check_rsm(listgen_model(), cert, LISTGEN_STATES).verified
    with pytest.raises(RSMError):
        rsm_from_json({"f": "nope", "epsilon": {"num": 1, "den": 2}})
    with pytest.raises(RSMError):
        rsm_from_json({"f": [{"state": "q0"}], "epsilon": {"num": 1, "den": 2}})
    with pytest.raises(RSMError):
        rsm_from_json({"f": "listgen"})
    partial = rsm_from_json({"f": [{"state": "q0", "num": 2, "den": 1}], "epsilon": {"num": 1, "den": 2}})
    with pytest.raises(RSMError, match="undefined"):
        check_rsm(listgen_model(), partial, ["q0"])


def test_report_rows_serialise():
    out = check_rsm(listgen_model(), listgen_rsm(), LISTGEN_STATES).to_json()
    assert out["verdict"] == "verified on explored set"
    q0 = next(r for r in out["states"] if r["state"] == "q0")
    assert (q0["expected_next"], q0["limit"]) == ("3/2", "3/2")


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.integers(0, 8), min_size=3, max_size=3),
    st.integers(1, 8),
    st.lists(st.sampled_from(LISTGEN_STATES), unique=True),
)
def test_verdict_is_monotone_in_the_state_set(values, eps_den, subset):
    table = dict(zip(LISTGEN_STATES, map(Fraction, values)))
    cert = RSMCertificate(table.__getitem__, Fraction(1, eps_den))
    full = check_rsm(listgen_model(), cert, LISTGEN_STATES)
    part = check_rsm(listgen_model(), cert, subset)
    if full.verified:
        assert part.verified
    # independent drift computation for the two non-final states
    f = table
    ok_q0 = HALF * f["qf"] + HALF * f["q1"] <= f["q0"] - cert.epsilon
    ok_q1 = HALF * f["q1"] + HALF * f["q0"] <= f["q1"] - cert.epsilon
    assert full.verified == (ok_q0 and ok_q1)
