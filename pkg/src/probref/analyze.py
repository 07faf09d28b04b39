"""Exact truncated execution, Monte-Carlo estimation and model/program comparison."""

from __future__ import annotations

import csv
import io
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable

from .markov import DEFAULT_STATE_CAP, Model, iter_exec
from .randml.machine import BudgetExhausted, Stuck, Terminated, alpha_key, as_markov, config_key, run_sample
from .randml.parser import parse
from .randml.semantics import state_step
from .randml.syntax import EMPTY_STATE, Expr, State
from .refine import CrosscheckReport, soundness_crosscheck
from .subdist import fraction_str


@dataclass
class ExactReport:
    masses: list[Fraction] = field(default_factory=list)
    reachable: list[int] = field(default_factory=list)
    values: Any = None  # exec_n at the last depth

    @property
    def depth(self) -> int:
        return len(self.masses) - 1

    def to_csv(self) -> str:
        return mass_csv(self.masses)

    def to_json(self) -> dict[str, Any]:
        return {
            "depth": self.depth,
            "mass": fraction_str(self.masses[-1]),
            "masses": [fraction_str(m) for m in self.masses],
            "reachable": self.reachable,
        }


def mass_csv(masses: list[Fraction]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["depth", "mass_num", "mass_den"])
    for k, m in enumerate(masses):
        w.writerow([k, m.numerator, m.denominator])
    return buf.getvalue()


def exact_exec_model(model: Model, start: Any, n: int, state_cap: int = DEFAULT_STATE_CAP) -> ExactReport:
    rep = ExactReport()
    for k, dist, _, size in iter_exec(model, start, state_cap=state_cap):
        rep.masses.append(dist.mass)
        rep.reachable.append(size)
        rep.values = dist
        if k >= n:
            break
    return rep


def exact_exec_program(
    program: Expr | str,
    init_state: State = EMPTY_STATE,
    n: int = 200,
    state_cap: int = DEFAULT_STATE_CAP,
) -> ExactReport:
    """Exact ``exec_k`` masses of a closed program for ``k = 0..n``.

    Configurations equal up to renaming of bound variables are merged.
    """
    if isinstance(program, str):
        program = parse(program)
    m = as_markov(program, init_state)
    rep = ExactReport()
    for k, dist, _, size in iter_exec(m, m.start, state_cap=state_cap, key=config_key):
        rep.masses.append(dist.mass)
        rep.reachable.append(size)
        rep.values = dist
        if k >= n:
            break
    return rep


def _keyed_exec(program: Expr, state: State, n: int, state_cap: int, project: Callable) -> list[dict[Any, Fraction]]:
    m = as_markov(program, state)
    out = []
    for k, dist, _, _ in iter_exec(m, m.start, state_cap=state_cap, key=config_key):
        keyed: dict[Any, Fraction] = {}
        for cfg, w in dist.raw().items():
            ck = project(cfg)
            keyed[ck] = keyed.get(ck, Fraction(0)) + w
        out.append(keyed)
        if k >= n:
            break
    return out


def erasure_check(
    program: Expr | str,
    state: State,
    label: int,
    n: int,
    state_cap: int = DEFAULT_STATE_CAP,
    values_only: bool = False,
) -> int | None:
    """Compare ``exec_k(e, state)`` with ``state_step(state, label) >>= exec_k(e, -)`` for ``k <= n``.

    Final configurations are compared up to renaming of bound variables;
    with ``values_only`` only the returned values are compared, which is
    needed when a presampled value may be left unread on the tape.  Returns the first depth where the two differ, or None when all agree.
    """
    if isinstance(program, str):
        program = parse(program)
    project = (lambda c: alpha_key(c.expr)) if values_only else config_key
    lhs = _keyed_exec(program, state, n, state_cap, project)
    rhs: list[dict[Any, Fraction]] = [{} for _ in lhs]
    for st, w in state_step(state, label).items():
        for k, keyed in enumerate(_keyed_exec(program, st, n, state_cap, project)):
            for ck, v in keyed.items():
                rhs[k][ck] = rhs[k].get(ck, Fraction(0)) + w * v
    for k, (a, b) in enumerate(zip(lhs, rhs)):
        if a != b:
            return k
    return None


@dataclass
class MCReport:
    trials: int
    seed: Any
    step_budget: int
    terminated: int
    exhausted: int
    stuck: int
    delta: float = 0.05
    method: str = "hoeffding"

    @property
    def estimate(self) -> float:
        return self.terminated / self.trials

    @property
    def half_width(self) -> float:
        """Two-sided Hoeffding radius sqrt(ln(2/delta) / (2 trials))."""
        return math.sqrt(math.log(2 / self.delta) / (2 * self.trials))

    @property
    def interval(self) -> tuple[float, float]:
        return max(0.0, self.estimate - self.half_width), min(1.0, self.estimate + self.half_width)

    def contains(self, p: float) -> bool:
        lo, hi = self.interval
        return lo <= p <= hi

    def to_json(self) -> dict[str, Any]:
        lo, hi = self.interval
        return {
            "trials": self.trials,
            "seed": self.seed,
            "step_budget": self.step_budget,
            "terminated": self.terminated,
            "budget_exhausted": self.exhausted,
            "stuck": self.stuck,
            "estimate": self.estimate,
            "interval": [lo, hi],
            "confidence": 1 - self.delta,
            "method": self.method,
            "formula": "estimate +/- sqrt(ln(2/delta) / (2 * trials))",
            "advisory": True,
        }


def trial_rng(seed: Any, i: int) -> random.Random:
    """Independent per-trial stream derived from ``(seed, i)``."""
    return random.Random(f"{seed}:{i}")


def mc_estimate(
    program: Expr | str,
    trials: int,
    step_budget: int = 10**5,
    seed: Any = 0,
    init_state: State = EMPTY_STATE,
    delta: float = 0.05,
) -> MCReport:
    """Monte-Carlo termination estimate with a Hoeffding confidence band."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if isinstance(program, str):
        program = parse(program)
    counts = {Terminated: 0, BudgetExhausted: 0, Stuck: 0}
    for i in range(trials):
        out = run_sample(program, step_budget=step_budget, init_state=init_state, rng=trial_rng(seed, i))
        counts[type(out)] += 1
    return MCReport(trials, seed, step_budget, counts[Terminated], counts[BudgetExhausted], counts[Stuck], delta)


@dataclass
class CompareReport:
    crosscheck: CrosscheckReport

    @property
    def verdict(self) -> str:
        return self.crosscheck.verdict

    def curves_csv(self) -> str:
        """Both mass curves side by side; a blank cell means the curve stops earlier."""
        mc, pc = self.crosscheck.model_curve, self.crosscheck.program_curve
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["depth", "model_num", "model_den", "program_num", "program_den"])
        for k in range(max(len(mc), len(pc))):
            row: list[Any] = [k]
            for curve in (mc, pc):
                row += [curve[k].numerator, curve[k].denominator] if k < len(curve) else ["", ""]
            w.writerow(row)
        return buf.getvalue()

    def to_json(self) -> dict[str, Any]:
        return self.crosscheck.to_json()


def compare(
    model: Model,
    start: Any,
    program: Expr | str,
    n: int,
    depth_budget: int = 200,
    init_state: State = EMPTY_STATE,
    state_cap: int = DEFAULT_STATE_CAP,
) -> CompareReport:
    """Witness ``mass(exec_n(model, start)) <= mass(exec_m(program))`` for some ``m``."""
    return CompareReport(soundness_crosscheck(model, start, program, n, depth_budget, init_state, state_cap))


__all__ = [
    "CompareReport",
    "ExactReport",
    "MCReport",
    "compare",
    "erasure_check",
    "exact_exec_model",
    "exact_exec_program",
    "mass_csv",
    "mc_estimate",
    "trial_rng",
]
