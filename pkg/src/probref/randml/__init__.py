"""RandML: a probabilistic ML-like language with heap and presampling tapes."""

from .machine import (
    BudgetExhausted,
    OpenProgramError,
    Stuck,
    Terminated,
    alpha_key,
    as_markov,
    config_key,
    run_sample,
    state_with_tape,
)
from .parser import ParseError, parse, pretty
from .semantics import (
    classify,
    context_labels,
    decompose,
    fold_state_steps,
    free_vars,
    plug,
    rand_outcomes,
    redex_kind,
    state_step,
    step_distr,
    subst,
    substitute_all,
)
from .syntax import EMPTY_STATE, Config, Expr, State, Tape, Val

__all__ = [
    "BudgetExhausted",
    "Config",
    "EMPTY_STATE",
    "Expr",
    "OpenProgramError",
    "ParseError",
    "State",
    "Stuck",
    "Tape",
    "Terminated",
    "Val",
    "alpha_key",
    "as_markov",
    "classify",
    "config_key",
    "context_labels",
    "decompose",
    "fold_state_steps",
    "free_vars",
    "parse",
    "plug",
    "pretty",
    "rand_outcomes",
    "redex_kind",
    "run_sample",
    "state_step",
    "state_with_tape",
    "step_distr",
    "subst",
    "substitute_all",
]
