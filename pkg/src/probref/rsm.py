"""Ranking-supermartingale checks on explored state sets.

A certificate ``(f, eps)`` is verified on a set of states when ``f >= 0``
everywhere on the set and, at every non-final state ``s`` of the set,

    sum_{s'} step(s)(s') * f(s')  <=  f(s) - eps.

Final states are exempt from the drift condition and may carry any
non-negative value.  A verdict only speaks for the states that were checked;
for infinite-state models it is not a global termination proof.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Iterable

from .markov import Model, state_from_json, state_to_json
from .subdist import fraction_str


class RSMError(ValueError):
    """The certificate or the checked state set violates a precondition."""


@dataclass(frozen=True)
class RSMCertificate:
    f: Callable[[Any], Fraction]
    epsilon: Fraction
    name: str = "rsm"

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise RSMError(f"epsilon must be positive, got {self.epsilon}")


@dataclass
class DriftRow:
    state: Any
    final: bool
    f: Fraction
    expected: Fraction | None = None
    ok: bool = True

    def to_json(self, eps: Fraction) -> dict[str, Any]:
        out: dict[str, Any] = {"state": state_to_json(self.state), "final": self.final, "f": fraction_str(self.f)}
        if self.expected is not None:
            out["expected_next"] = fraction_str(self.expected)
            out["limit"] = fraction_str(self.f - eps)
        out["ok"] = self.ok
        return out


@dataclass
class RSMReport:
    verified: bool
    epsilon: Fraction
    rows: list[DriftRow] = field(default_factory=list)
    first_violation: DriftRow | None = None

    def to_json(self) -> dict[str, Any]:
        return {
            "verdict": "verified on explored set" if self.verified else "rejected",
            "epsilon": fraction_str(self.epsilon),
            "states": [r.to_json(self.epsilon) for r in self.rows],
            "first_violation": None if self.first_violation is None else state_to_json(self.first_violation.state),
        }


def check_rsm(model: Model, cert: RSMCertificate, states: Iterable[Any]) -> RSMReport:
    """Check the drift condition exactly on ``states``.

    Raises :class:`RSMError` when ``f`` is negative somewhere or a
    non-final state has a step of mass below one, since the drift condition
    is not meaningful there.
    """
    report = RSMReport(True, cert.epsilon)
    for s in states:
        fs = Fraction(cert.f(s))
        if fs < 0:
            raise RSMError(f"f({s!r}) = {fs} is negative")
        if model.is_final(s):
            report.rows.append(DriftRow(s, True, fs))
            continue
        mu = model.step(s)
        if mu.mass != 1:
            raise RSMError(f"non-final state {s!r} has step mass {mu.mass}")
        expected = Fraction(0)
        for t, p in mu.items():
            ft = Fraction(cert.f(t))
            if ft < 0:
                raise RSMError(f"f({t!r}) = {ft} is negative")
            expected += p * ft
        row = DriftRow(s, False, fs, expected, expected <= fs - cert.epsilon)
        report.rows.append(row)
        if not row.ok and report.first_violation is None:
            report.verified = False
            report.first_violation = row
    return report


# Built-in certificates ----------------------------------------------------------------------

_LISTGEN_F = {"qf": Fraction(0), "q0": Fraction(2), "q1": Fraction(3)}


def listgen_rsm() -> RSMCertificate:
    return RSMCertificate(lambda q: _LISTGEN_F[q], Fraction(1, 2), name="listgen")


def two_coin_rsm() -> RSMCertificate:
    return RSMCertificate(lambda s: Fraction(0) if s[0] != s[1] else Fraction(2), Fraction(1), name="two_coin")


BUILTINS: dict[str, Callable[[], RSMCertificate]] = {"listgen": listgen_rsm, "two_coin": two_coin_rsm}


def rsm_from_json(doc: dict[str, Any] | str) -> RSMCertificate:
    """Parse ``{f: [{state, num, den}] | "builtin-id", epsilon: {num, den}}``."""
    if isinstance(doc, str):
        doc = json.loads(doc)
    f = doc.get("f")
    if isinstance(f, str):
        if f not in BUILTINS:
            raise RSMError(f"unknown builtin ranking function {f!r}")
        base = BUILTINS[f]()
        func = base.f
    elif isinstance(f, list):
        table: dict[Any, Fraction] = {}
        for row in f:
            try:
                table[state_from_json(row["state"])] = Fraction(int(row["num"]), int(row["den"]))
            except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
                raise RSMError(f"malformed ranking entry {row!r}") from exc

        def func(s: Any) -> Fraction:
            if s not in table:
                raise RSMError(f"ranking function undefined at {s!r}")
            return table[s]

    else:
        raise RSMError("certificate needs 'f' as a table or builtin id")
    eps = doc.get("epsilon")
    try:
        epsilon = Fraction(int(eps["num"]), int(eps["den"]))
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
        raise RSMError(f"malformed epsilon {eps!r}") from exc
    return RSMCertificate(func, epsilon, name=str(doc.get("name", "rsm")))


__all__ = [
    "BUILTINS",
    "DriftRow",
    "RSMCertificate",
    "RSMError",
    "RSMReport",
    "check_rsm",
    "listgen_rsm",
    "rsm_from_json",
    "two_coin_rsm",
]
