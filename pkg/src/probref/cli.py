"""Command-line front end.

Exit codes: 0 accept/success, 1 reject/refuted, 2 inconclusive, 3 usage or
input error.  Rationals are printed as ``"num/den"`` strings.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .analyze import compare, erasure_check, exact_exec_model, exact_exec_program, mc_estimate
from .corpus import CorpusError, corpus_list, load_case
from .coupling import CouplingWitness, max_flow_coupling, witness_violation
from .markov import (
    DEFAULT_STATE_CAP,
    Model,
    ModelError,
    StateCapExceeded,
    finite_model_from_json,
    model_zoo,
    parse_state,
    reachable_states,
    state_from_json,
    state_to_json,
)
from .randml.machine import BudgetExhausted, OpenProgramError, Terminated, run_sample
from .randml.parser import ParseError, parse, pretty
from .randml.semantics import substitute_all
from .randml.syntax import EMPTY_STATE, BoolV, Expr, IntV, LabelV, State, Tape
from .refine import CertificateError, check_certificate, load_certificate
from .rsm import RSMError, check_rsm, rsm_from_json
from .subdist import SubDist, SubDistError, as_prob, fraction_str

ACCEPT, REJECT, INCONCLUSIVE, USAGE = 0, 1, 2, 3
SEED_ENV = "PROBREF_SEED"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(USAGE, f"{self.prog}: error: {message}\n")


def _positive(text: str) -> int:
    try:
        v = int(float(text)) if "e" in text.lower() else int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _natural(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


# Input helpers ---------------------------------------------------------------------------


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc


def _bindings(items: Sequence[str]) -> dict[str, Any]:
    env: dict[str, Any] = {}
    for item in items:
        name, sep, value = item.partition("=")
        if not sep or not name:
            raise UsageError(f"binding {item!r} is not NAME=VALUE")
        if value in ("true", "false"):
            env[name] = BoolV(value == "true")
        elif value.startswith("tape#"):
            env[name] = LabelV(int(value[5:]))
        else:
            try:
                env[name] = IntV(int(value))
            except ValueError:
                raise UsageError(f"binding {item!r}: value must be an integer, boolean or tape#N") from None
    return env


def _init_state(tapes: Sequence[str]) -> State:
    out = []
    for spec in tapes:
        bound, _, queue = spec.partition(":")
        try:
            out.append(Tape(int(bound), tuple(int(x) for x in queue.split(",") if x)))
        except ValueError as exc:
            raise UsageError(f"bad tape {spec!r}: {exc}") from exc
    return EMPTY_STATE.with_tapes(*out) if out else EMPTY_STATE


def _program(args: argparse.Namespace) -> tuple[Expr, State]:
    e = parse(_read(args.program))
    env = _bindings(args.bind)
    if env:
        e = substitute_all(e, env)
    return e, _init_state(args.tape)


def _model(args: argparse.Namespace) -> Model:
    name = args.model
    if name.endswith(".json") or os.sep in name:
        try:
            return finite_model_from_json(_read(name))
        except json.JSONDecodeError as exc:
            raise UsageError(f"{name}: {exc}") from exc
    params = {}
    if getattr(args, "mu", None):
        try:
            params["mu"] = {int(k): v for k, v in json.loads(args.mu).items()}
        except (json.JSONDecodeError, AttributeError, ValueError) as exc:
            raise UsageError(f"--mu must be a JSON object from naturals to 'num/den': {exc}") from exc
    return model_zoo(name, **params)


def _start(args: argparse.Namespace, model: Model) -> Any:
    if args.start is not None:
        return parse_state(args.start)
    if model.start is None:
        raise UsageError("--start is required for this model")
    return model.start


def _subdist(text: str) -> SubDist:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"not JSON: {exc}") from exc
    if isinstance(doc, list):
        return SubDist.from_json(doc)
    if not isinstance(doc, dict):
        raise UsageError("a distribution is a JSON object {outcome: 'num/den'}")
    return SubDist({parse_state(k): as_prob(v) for k, v in doc.items()})


# Output -------------------------------------------------------------------------------------


def _emit(args: argparse.Namespace, doc: dict[str, Any], text: str | None = None, table: str | None = None) -> None:
    fmt = args.format
    if fmt == "csv" and table is not None:
        sys.stdout.write(table)
    elif fmt == "text" and text is not None:
        print(text)
    else:
        print(json.dumps(doc, indent=2, sort_keys=True))


# Subcommands -----------------------------------------------------------------------------------


def cmd_run(args: argparse.Namespace) -> int:
    e, st = _program(args)
    out = run_sample(e, seed=args.seed, step_budget=args.steps, init_state=st)
    doc: dict[str, Any] = {"command": "run", "seed": args.seed, "steps": out.steps}
    if isinstance(out, Terminated):
        doc.update(outcome="terminated", value=pretty(out.value))
        code = ACCEPT
    elif isinstance(out, BudgetExhausted):
        doc["outcome"] = "budget_exhausted"
        code = INCONCLUSIVE
    else:
        doc.update(outcome="stuck", reason=out.reason)
        code = REJECT
    _emit(args, doc, f"{doc['outcome']} after {out.steps} steps" + (f": {doc['value']}" if "value" in doc else ""))
    return code


def cmd_exec(args: argparse.Namespace) -> int:
    n = args.n if args.n is not None else args.depth
    if args.program:
        e, st = _program(args)
        rep = exact_exec_program(e, st, n, state_cap=args.states)
        subject = {"program": args.program}
    elif args.model:
        model = _model(args)
        start = _start(args, model)
        rep = exact_exec_model(model, start, n, state_cap=args.states)
        subject = {"model": model.name, "start": state_to_json(start)}
    else:
        raise UsageError("exec needs --program or --model")
    doc = {"command": "exec", **subject, **rep.to_json()}
    _emit(args, doc, f"mass at depth {rep.depth}: {fraction_str(rep.masses[-1])}", rep.to_csv())
    return ACCEPT


def cmd_estimate(args: argparse.Namespace) -> int:
    e, st = _program(args)
    rep = mc_estimate(e, args.trials, args.steps, args.seed, st, delta=args.delta)
    doc = {"command": "estimate", "program": args.program, **rep.to_json()}
    lo, hi = rep.interval
    _emit(args, doc, f"estimate {rep.estimate:.4f} in [{lo:.4f}, {hi:.4f}] ({rep.method}, advisory)")
    return ACCEPT


def _relation(spec: str):
    if spec == "full":
        return lambda a, b: True
    if spec in ("eq", "equality"):
        return lambda a, b: a == b
    try:
        pairs = json.loads(spec)
        return {(state_from_json(a), state_from_json(b)) for a, b in pairs}
    except (json.JSONDecodeError, TypeError, ValueError) as exc:
        raise UsageError("--rel must be full, eq or a JSON list of [left, right] pairs") from exc


def cmd_coupling(args: argparse.Namespace) -> int:
    mu1, mu2 = _subdist(args.mu1), _subdist(args.mu2)
    R = _relation(args.rel)
    doc: dict[str, Any] = {"command": "coupling", "required": fraction_str(mu1.mass)}
    if args.witness:
        try:
            w = CouplingWitness.from_json(json.loads(_read(args.witness)), decode=state_from_json)
        except (json.JSONDecodeError, KeyError, TypeError, SubDistError) as exc:
            raise UsageError(f"bad witness file: {exc}") from exc
        problem = witness_violation(mu1, mu2, R, w)
        doc.update(mode="check", valid=problem is None, violation=problem)
        _emit(args, doc, "valid witness" if problem is None else f"invalid witness: {problem}")
        return ACCEPT if problem is None else REJECT
    flow = max_flow_coupling(mu1, mu2, R)
    doc.update(mode="solve", exists=flow.feasible, flow=fraction_str(flow.value), deficit=fraction_str(flow.deficit))
    if flow.feasible:
        doc["witness"] = CouplingWitness(flow.joint).to_json(encode=state_to_json)
        text = "coupling exists"
    else:
        doc["hall_set"] = [state_to_json(a) for a in flow.hall_set]
        doc["unmatched"] = [
            {"state": state_to_json(a), "required": fraction_str(r), "available": fraction_str(v)}
            for a, r, v in flow.unmatched
        ]
        text = f"no coupling: deficit {fraction_str(flow.deficit)}"
    _emit(args, doc, text)
    return ACCEPT if flow.feasible else REJECT


_VERDICT_CODE = {"accept": ACCEPT, "reject": REJECT, "inconclusive": INCONCLUSIVE}


def cmd_refine(args: argparse.Namespace) -> int:
    model = _model(args)
    e = parse(_read(args.program))
    cert = load_certificate(args.cert)
    rep = check_certificate(model, e, cert, budget=args.budget, init_state=_init_state(args.tape))
    doc = {"command": "refine", **rep.to_json()}
    text = f"{rep.verdict}: {rep.explored} joint pairs over {len(rep.node_counts)} nodes"
    if rep.failures:
        text += f"; {rep.failures[0].node}: {rep.failures[0].reason}"
    _emit(args, doc, text)
    return _VERDICT_CODE[rep.verdict]


def cmd_rsm(args: argparse.Namespace) -> int:
    model = _model(args)
    try:
        cert = rsm_from_json(_read(args.cert))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{args.cert}: {exc}") from exc
    if args.states_list:
        states = [parse_state(json.dumps(s)) for s in json.loads(args.states_list)]
    elif model.states is not None:
        states = list(model.states)
    else:
        states = reachable_states(model, _start(args, model), args.depth, state_cap=args.states)
    rep = check_rsm(model, cert, states)
    doc = {"command": "rsm", **rep.to_json()}
    _emit(args, doc, doc["verdict"])
    return ACCEPT if rep.verified else REJECT


def cmd_compare(args: argparse.Namespace) -> int:
    model = _model(args)
    start = _start(args, model)
    e, st = _program(args)
    rep = compare(model, start, e, args.n, args.depth, st, args.states)
    doc = {"command": "compare", **rep.to_json()}
    if args.csv_out:
        Path(args.csv_out).write_text(rep.curves_csv(), encoding="utf-8")
    cc = rep.crosscheck
    text = (
        f"witnessed at m={cc.witness_depth}: {fraction_str(cc.model_mass)} <= {fraction_str(cc.program_mass)}"
        if cc.verdict == "accept"
        else f"inconclusive: model mass {fraction_str(cc.model_mass)}, program mass {fraction_str(cc.program_mass)} at depth {args.depth}"
    )
    _emit(args, doc, text, rep.curves_csv())
    return _VERDICT_CODE[rep.verdict]


def run_case(name: str, budget: int, state_cap: int, mc: bool = False, seed: Any = 0) -> dict[str, Any]:
    """Run every check a fixture ships with; the ``verdict`` aggregates them."""
    case = load_case(name)
    checks: list[dict[str, Any]] = []
    model = case.model()
    if case.certificate is not None:
        rep = check_certificate(model, case.source, case.certificate, budget=budget)
        checks.append({"check": "refinement", "verdict": rep.verdict, "explored": rep.explored})
    if case.rsm is not None:
        states = list(model.states) if model.states is not None else reachable_states(model, case.model_start, 10)
        r = check_rsm(model, case.rsm, states)
        checks.append({"check": "rsm", "verdict": "accept" if r.verified else "reject"})
    for n, m in case.compare_points:
        cc = compare(model, case.model_start, case.program(), n, m, state_cap=state_cap).crosscheck
        checks.append(
            {
                "check": "compare",
                "n": n,
                "m": m,
                "verdict": cc.verdict,
                "witness_depth": cc.witness_depth,
                "model_mass": fraction_str(cc.model_mass),
                "program_mass": fraction_str(cc.program_mass),
            }
        )
    er = case.erasure_program()
    if er is not None:
        e, st, label = er
        bad = erasure_check(e, st, label, 25, state_cap=state_cap)
        checks.append({"check": "erasure", "verdict": "accept" if bad is None else "reject", "first_mismatch": bad})
    if mc and "mc" in case.meta:
        rep = mc_estimate(case.program(), case.meta["mc"]["trials"], case.meta["mc"]["step_budget"], seed)
        checks.append({"check": "monte_carlo", "verdict": "accept" if rep.contains(1.0) else "inconclusive", **rep.to_json()})
    verdicts = {c["verdict"] for c in checks}
    overall = "reject" if "reject" in verdicts else "inconclusive" if "inconclusive" in verdicts else "accept"
    return {"case": name, "title": case.title, "model": case.model_name, "verdict": overall, "checks": checks}


def cmd_corpus(args: argparse.Namespace) -> int:
    if args.list or args.name is None:
        doc = {
            "command": "corpus",
            "cases": [
                {"name": c.name, "title": c.title, "model": c.model_name, "compare": [list(p) for p in c.compare_points]}
                for c in corpus_list()
            ],
        }
        _emit(args, doc, "\n".join(f"{c['name']}: {c['title']}" for c in doc["cases"]))
        return ACCEPT
    names = [c.name for c in corpus_list()] if args.name == "all" else [args.name]
    results = [run_case(n, args.budget, args.states, mc=args.mc, seed=args.seed) for n in names]
    doc = {"command": "corpus", "results": results}
    _emit(args, doc, "\n".join(f"{r['case']}: {r['verdict']}" for r in results))
    verdicts = {r["verdict"] for r in results}
    return REJECT if "reject" in verdicts else INCONCLUSIVE if "inconclusive" in verdicts else ACCEPT


# Parser -------------------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "csv", "text"), default="json")
    common.add_argument("--seed", default=os.environ.get(SEED_ENV, "0"), help=f"default from ${SEED_ENV}, else 0")
    common.add_argument("--steps", type=_positive, default=10**5, help="step budget per trajectory")
    common.add_argument("--depth", type=_positive, default=200, help="depth budget for exact execution")
    common.add_argument("--states", type=_positive, default=DEFAULT_STATE_CAP, help="reachable-state cap")

    prog_opts = argparse.ArgumentParser(add_help=False)
    prog_opts.add_argument("--bind", action="append", default=[], metavar="NAME=VALUE", help="bind a free variable")
    prog_opts.add_argument("--tape", action="append", default=[], metavar="BOUND[:Q,...]", help="allocate a tape")

    model_opts = argparse.ArgumentParser(add_help=False)
    model_opts.add_argument("--model", help="zoo model name or path to a JSON model")
    model_opts.add_argument("--mu", help="offspring distribution for gw_walk, e.g. '{\"0\": \"1/2\", \"2\": \"1/2\"}'")
    model_opts.add_argument("--start", help="model start state (JSON or bare identifier)")

    p = _Parser(prog="probref", description="Refinement workbench for probabilistic programs.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("run", parents=[common, prog_opts], help="sample one trajectory")
    s.add_argument("--program", required=True)
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("exec", parents=[common, prog_opts, model_opts], help="exact execution table")
    s.add_argument("--program")
    s.add_argument("--n", type=_natural)
    s.set_defaults(func=cmd_exec)

    s = sub.add_parser("estimate", parents=[common, prog_opts], help="Monte-Carlo termination estimate")
    s.add_argument("--program", required=True)
    s.add_argument("--trials", type=_positive, default=1000)
    s.add_argument("--delta", type=float, default=0.05, help="Hoeffding failure probability")
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("coupling", parents=[common], help="solve or check a coupling instance")
    s.add_argument("--mu1", required=True)
    s.add_argument("--mu2", required=True)
    s.add_argument("--rel", default="eq", help="full, eq, or JSON list of pairs")
    s.add_argument("--witness", help="JSON witness file to check instead of solving")
    s.set_defaults(func=cmd_coupling)

    s = sub.add_parser("refine", parents=[common, prog_opts, model_opts], help="check a refinement certificate")
    s.add_argument("--program", required=True)
    s.add_argument("--cert", required=True)
    s.add_argument("--budget", type=_positive, default=100_000, help="joint pairs to explore")
    s.set_defaults(func=cmd_refine)

    s = sub.add_parser("rsm", parents=[common, model_opts], help="check a ranking supermartingale")
    s.add_argument("--cert", required=True)
    s.add_argument("--states-list", help="JSON list of states to check")
    s.set_defaults(func=cmd_rsm)

    s = sub.add_parser("compare", parents=[common, prog_opts, model_opts], help="model/program mass comparison")
    s.add_argument("--program", required=True)
    s.add_argument("--n", type=_natural, required=True)
    s.add_argument("--csv-out", help="write both mass curves to this CSV file")
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("corpus", parents=[common], help="run a fixture's full suite")
    s.add_argument("name", nargs="?", help="fixture name or 'all'")
    s.add_argument("--list", action="store_true")
    s.add_argument("--budget", type=_positive, default=100_000)
    s.add_argument("--mc", action="store_true", help="include advisory Monte-Carlo checks")
    s.set_defaults(func=cmd_corpus)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command in ("refine", "rsm", "compare") and not args.model:
        parser.error(f"{args.command} needs --model")
    try:
        return args.func(args)
    except (UsageError, ParseError, OpenProgramError, ModelError, CertificateError, RSMError, SubDistError, CorpusError) as exc:
        print(f"probref: error: {exc}", file=sys.stderr)
        return USAGE
    except StateCapExceeded as exc:
        print(f"probref: {exc}", file=sys.stderr)
        return INCONCLUSIVE


if __name__ == "__main__":
    sys.exit(main())
