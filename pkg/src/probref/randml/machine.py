"""Programs as Markov chains, and a concrete trajectory sampler."""

from __future__ import annotations

import dataclasses
import random
from dataclasses import dataclass
from math import lcm
from typing import Any, Hashable

from ..markov import Model
from .semantics import classify, free_vars, step_distr
from .syntax import EMPTY_STATE, Config, Expr, Match, RecV, State, Tape, Val, Var


class OpenProgramError(ValueError):
    pass


def as_markov(program: Expr, init_state: State = EMPTY_STATE) -> Model:
    """View ``program`` as a Markov chain over configurations."""
    fv = free_vars(program)
    if fv:
        raise OpenProgramError(f"program has free variables: {', '.join(sorted(fv))}")
    return Model(
        step=step_distr,
        is_final=Config.is_final,
        name="program",
        start=Config(program, init_state),
    )


@dataclass(frozen=True)
class Terminated:
    value: Val
    steps: int
    state: State


@dataclass(frozen=True)
class BudgetExhausted:
    steps: int


@dataclass(frozen=True)
class Stuck:
    steps: int
    reason: str
    config: Config


Outcome = Terminated | BudgetExhausted | Stuck


def _sample(dist, rng: random.Random):
    items = dist.raw().items()
    if len(items) == 1:
        return next(iter(items))[0]
    den = lcm(*(w.denominator for _, w in items))
    r = rng.randrange(den)
    acc = 0
    for cfg, w in items:
        acc += w.numerator * (den // w.denominator)
        if r < acc:
            return cfg
    raise AssertionError("step distribution has mass below one")


def run_sample(
    program: Expr | Config,
    seed: Any = 0,
    step_budget: int = 10**5,
    init_state: State = EMPTY_STATE,
    rng: random.Random | None = None,
) -> Outcome:
    """Sample one trajectory; identical seeds give identical trajectories."""
    cfg = program if isinstance(program, Config) else Config(program, init_state)
    fv = free_vars(cfg.expr)
    if fv:
        raise OpenProgramError(f"program has free variables: {', '.join(sorted(fv))}")
    rng = rng or random.Random(seed)
    steps = 0
    while True:
        if cfg.expr.is_value():
            return Terminated(cfg.expr, steps, cfg.state)
        if steps >= step_budget:
            return BudgetExhausted(steps)
        dist = step_distr(cfg)
        if dist.mass == 0:
            return Stuck(steps, classify(cfg), cfg)
        cfg = _sample(dist, rng)
        steps += 1


# Alpha-equivalence keys ---------------------------------------------------------------


def alpha_key(e: Expr, env: tuple[str | None, ...] = ()) -> Hashable:
    """Canonical de Bruijn rendering: bound names are replaced by indices."""
    if isinstance(e, Var):
        for i in range(len(env) - 1, -1, -1):
            if env[i] == e.name:
                return ("var", len(env) - 1 - i)
        return ("free", e.name)
    if isinstance(e, RecV):
        return ("rec", e.f is None, alpha_key(e.body, env + (e.f, e.x)))
    if isinstance(e, Match):
        return (
            "match",
            alpha_key(e.e, env),
            alpha_key(e.left, env + (e.x,)),
            alpha_key(e.right, env + (e.y,)),
        )
    parts: list[Any] = [type(e).__name__]
    for f in dataclasses.fields(e):
        v = getattr(e, f.name)
        parts.append(alpha_key(v, env) if isinstance(v, Expr) else v)
    return tuple(parts)


def config_key(cfg: Config) -> Hashable:
    """Key identifying configurations up to alpha-equivalence of closures."""
    return (
        alpha_key(cfg.expr),
        tuple(alpha_key(v) for v in cfg.state.heap),
        cfg.state.tapes,
    )


def state_with_tape(bound: int, queue: tuple[int, ...] = (), state: State = EMPTY_STATE) -> State:
    return state.with_tapes(Tape(bound, tuple(queue)))


__all__ = [
    "BudgetExhausted",
    "OpenProgramError",
    "Outcome",
    "Stuck",
    "Terminated",
    "alpha_key",
    "as_markov",
    "config_key",
    "run_sample",
    "state_with_tape",
]
