"""Command-line entry point: ``lrapomdp <subcommand> ...``.

Every subcommand writes one canonical JSON document (sorted keys, 17
significant digits) that embeds the tool version and the effective run
configuration.  Exit codes: 0 success, 64 usage error, 65 input error, 70
numeric failure; ``decide`` returns 0/1/2 for its three verdicts.
"""

import argparse
import os
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__, approx, blind, corpus, jsonio
from .belief import GainPartition
from .blocks import BlockConstructionError
from .chain import SingularSystemError, evaluate
from .model import PomdpError, load_pomdp, parse_belief, render_pomdp, validate
from .simulate import simulate
from .strategy import StrategyError, load_strategy, render_strategy, to_finite_memory

EX_USAGE, EX_DATAERR, EX_SOFTWARE = 64, 65, 70


@dataclass
class RunConfig:
    subcommand: str
    inputs: dict = field(default_factory=dict)
    validation_tol: float = 1e-9
    support_tol: float = 1e-12
    pivot_tol: float = 1e-12
    seed: int = None
    horizon: int = None
    budgets: dict = field(default_factory=dict)
    output: str = None


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parser():
    p = _Parser(prog="lrapomdp", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    def cmd(name, help_):
        c = sub.add_parser(name, help=help_)
        c.add_argument("-o", "--output", help="write the JSON report here instead of stdout")
        return c

    c = cmd("validate", "check a .pomdp.json file")
    c.add_argument("file")

    c = cmd("evaluate", "exact long-run average gain of a strategy")
    c.add_argument("file")
    c.add_argument("--strategy", required=True)
    c.add_argument("--belief", help='e.g. "k1:1/4,k2:3/4" (default: the file\'s initial belief)')

    c = cmd("simulate", "Monte Carlo play of a strategy")
    c.add_argument("file")
    c.add_argument("--strategy", required=True)
    c.add_argument("--horizon", type=int, required=True)
    c.add_argument("--seed", type=int, required=True)
    c.add_argument("--belief")
    c.add_argument("--trace", help="write the per-stage trace as JSON lines to this path")

    c = cmd("search-periodic", "exhaustive eventually periodic search (blind models)")
    c.add_argument("file")
    c.add_argument("--max-prefix", type=int, required=True)
    c.add_argument("--max-period", type=int, required=True)
    c.add_argument("--belief")

    c = cmd("supports", "support / super-support automaton (blind models)")
    c.add_argument("file")
    c.add_argument("--partition", help='blocks separated by "|", states by ",", e.g. "k1|k2"')
    c.add_argument("--belief")
    c.add_argument("--dot", help="also write a DOT rendering to this path")

    c = cmd("approximate", "anytime lower/upper bounds on the value")
    c.add_argument("file")
    c.add_argument("--epsilon", type=float, required=True)
    c.add_argument("--max-memory", type=int)
    c.add_argument("--max-candidates", type=int)
    c.add_argument("--belief")

    c = cmd("decide", "promise problem: value >= x+eps or <= x-eps?")
    c.add_argument("file")
    c.add_argument("--x", type=float, required=True)
    c.add_argument("--epsilon", type=float, required=True)
    c.add_argument("--max-memory", type=int)
    c.add_argument("--max-candidates", type=int)
    c.add_argument("--belief")

    c = cmd("examples", "write a bundled model and its strategies")
    c.add_argument("--name", required=True, choices=sorted(corpus.MODELS))
    c.add_argument("--emit", required=True, metavar="DIR")
    return p


def _belief(pomdp, text):
    if text:
        return parse_belief(pomdp, text)
    if pomdp.initial_belief is None:
        raise ValueError("the model has no initial_belief; pass --belief")
    return np.asarray(pomdp.initial_belief)


def _strategy(path, pomdp):
    sigma = load_strategy(path, pomdp)
    return to_finite_memory(sigma, n_signals=pomdp.n_signals, n_actions=pomdp.n_actions)


def _partition(pomdp, text):
    blocks = [frozenset(pomdp.state_index(k.strip()) for k in part.split(",") if k.strip())
              for part in text.split("|")]
    # gains are only labels here; automata ignore them
    return GainPartition(tuple(blocks), tuple(i / max(len(blocks), 1) for i in range(len(blocks))))


def _belief_json(pomdp, p):
    return {pomdp.states[k]: float(x) for k, x in enumerate(p)}


def run(argv=None, stdout=None):
    """Run one subcommand; returns the process exit code."""
    stdout = sys.stdout if stdout is None else stdout
    try:
        args = _parser().parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EX_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        code, body, config = _dispatch(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EX_USAGE
    except (PomdpError, StrategyError, BlockConstructionError, blind.NotBlindError,
            OSError, KeyError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EX_DATAERR
    except (SingularSystemError, approx.PolicyIterationCycle, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EX_SOFTWARE
    doc = {"tool": "lrapomdp", "version": __version__, "config": asdict(config), "result": body}
    text = jsonio.dumps(doc, indent=2) + "\n"
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return code


def _dispatch(args):
    cfg = RunConfig(args.cmd, output=getattr(args, "output", None))
    if args.cmd == "examples":
        cfg.inputs = {"name": args.name, "emit": args.emit}
        return 0, _emit(args.name, args.emit), cfg
    cfg.inputs["file"] = args.file
    pomdp = load_pomdp(args.file)

    if args.cmd == "validate":
        report = validate(pomdp)
        return (0 if report.ok else EX_DATAERR), {"violations": report.to_json()}, cfg

    p1 = _belief(pomdp, getattr(args, "belief", None))
    cfg.inputs["belief"] = _belief_json(pomdp, p1)

    if args.cmd == "evaluate":
        cfg.inputs["strategy"] = args.strategy
        sigma = _strategy(args.strategy, pomdp)
        result = evaluate(pomdp, p1, sigma)
        return 0, result.to_json(pomdp, sigma.memory_states), cfg

    if args.cmd == "simulate":
        if args.horizon < 1:
            raise UsageError("--horizon must be >= 1")
        cfg.inputs["strategy"] = args.strategy
        cfg.seed, cfg.horizon = args.seed, args.horizon
        sigma = _strategy(args.strategy, pomdp)
        trace, avg = simulate(pomdp, p1, sigma, args.horizon, args.seed,
                              record=bool(args.trace))
        if args.trace:
            cfg.inputs["trace"] = args.trace
            with open(args.trace, "w", encoding="utf-8") as fh:
                for rec in trace.records(pomdp, sigma):
                    fh.write(jsonio.dumps(rec) + "\n")
        return 0, {"empirical_average": avg, "horizon": args.horizon, "seed": args.seed}, cfg

    if args.cmd == "search-periodic":
        cfg.budgets = {"max_prefix": args.max_prefix, "max_period": args.max_period}
        rep = blind.search_periodic(pomdp, p1, args.max_prefix, args.max_period)
        return 0, rep.to_json(pomdp), cfg

    if args.cmd == "supports":
        if args.partition:
            cfg.inputs["partition"] = args.partition
            aut = blind.super_support_automaton(pomdp, _partition(pomdp, args.partition))
        else:
            aut = blind.support_automaton(pomdp, p1)
        if args.dot:
            cfg.inputs["dot"] = args.dot
            with open(args.dot, "w", encoding="utf-8") as fh:
                fh.write(aut.to_dot(pomdp))
        return 0, aut.to_json(pomdp), cfg

    if args.cmd == "approximate":
        cfg.budgets = {"epsilon": args.epsilon, "max_memory": args.max_memory,
                       "max_candidates": args.max_candidates}
        if args.max_memory is None and args.max_candidates is None:
            raise UsageError("give --max-memory and/or --max-candidates (the search is unbounded)")
        rep = approx.anytime_approximate(pomdp, p1, args.epsilon, max_memory=args.max_memory,
                                         max_candidates=args.max_candidates)
        return 0, rep.to_json(pomdp), cfg

    if args.cmd == "decide":
        cfg.budgets = {"x": args.x, "epsilon": args.epsilon, "max_memory": args.max_memory,
                       "max_candidates": args.max_candidates}
        if args.max_memory is None and args.max_candidates is None:
            raise UsageError("give --max-memory and/or --max-candidates (the search is unbounded)")
        query = approx.PromiseQuery(args.x, args.epsilon, args.max_memory, args.max_candidates)
        verdict, rep = approx.decide_promise(pomdp, p1, query, with_report=True)
        return verdict.exit_code, {"verdict": verdict.value, "report": rep.to_json(pomdp)}, cfg

    raise UsageError(f"unknown subcommand {args.cmd}")  # pragma: no cover


def _emit(name, directory):
    os.makedirs(directory, exist_ok=True)
    pomdp = corpus.MODELS[name]()
    written = []
    path = os.path.join(directory, f"{name}.pomdp.json")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(render_pomdp(pomdp))
    written.append(os.path.basename(path))
    for sname, sigma in corpus.strategies_for(name).items():
        path = os.path.join(directory, f"{sname}.strat.json")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(render_strategy(sigma, pomdp))
        written.append(os.path.basename(path))
    return {"written": written}


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
