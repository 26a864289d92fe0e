"""Command-line front end.

Exit codes: 0 positive verdict, 1 negative verdict, 2 unknown or budget
exhausted, 3 usage or input error, 4 resource cap, 5 solver failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

from . import corpus
from .detsynth import DEFAULT_ENUM_CAP, extract_strategy, gfp_det, synth_det_window
from .errors import InputError, LpctlError, ResourceError, SolverError
from .logic import analyze, parse_formula, pretty, pretty_path, require_window
from .mccheck import Checker, check_global_window, measures_report
from .model import (FiniteMemoryStrategy, Mc, Mdp, dump_model, format_rational, induced_mc,
                    load_model, model_to_dict)
from .reals import encode_global_memoryless, encode_window, f_iterates
from .sat import DEFAULT_ACTION_CAP, DEFAULT_STATE_CAP, sat_bounded
from .semi import Budget, No, Refuted, Yes, decide_with_budget, refute_global
from .smt import Sat, Unsat, solve, to_smtlib

EXIT_YES, EXIT_NO, EXIT_UNKNOWN, EXIT_INPUT, EXIT_RESOURCE, EXIT_SOLVER = range(6)
RC_NAME = ".pctlrc"

log = logging.getLogger("lpctl")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def load_rc(paths: Sequence[Path] | None = None) -> Dict[str, Any]:
    """First .pctlrc found in the working directory or home; JSON object."""
    if paths is None:
        paths = [Path.cwd() / RC_NAME, Path.home() / RC_NAME]
    for p in paths:
        if p.is_file():
            try:
                data = json.loads(p.read_text())
            except json.JSONDecodeError as e:
                raise InputError(f"{p}: invalid JSON ({e})") from None
            if not isinstance(data, dict):
                raise InputError(f"{p}: expected a JSON object")
            return data
    return {}


# --------------------------------------------------------------------------
# input helpers


def _read_model(path: str) -> Mdp | Mc:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise InputError(f"cannot read model {path!r}: {e.strerror}") from None
    return load_model(text)


def _read_formula(args) -> tuple:
    inline = getattr(args, "formula", None)
    fpath = getattr(args, "formula_file", None)
    if inline is not None and fpath is not None:
        raise InputError("give either --formula or --formula-file, not both")
    if inline is None and fpath is None:
        raise InputError("a formula is required (--formula or --formula-file)")
    if fpath is None and inline.endswith(".pctl") and Path(inline).is_file():
        fpath = inline
    if fpath is not None:
        try:
            text = Path(fpath).read_text()
        except OSError as e:
            raise InputError(f"cannot read formula {fpath!r}: {e.strerror}") from None
    else:
        text = inline
    phi, glob = parse_formula(text.strip())
    return phi, glob or bool(getattr(args, "global_", False))


def _read_strategy(path: str, mdp: Mdp) -> FiniteMemoryStrategy:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise InputError(f"cannot read strategy {path!r}: {e}") from None
    try:
        return FiniteMemoryStrategy.from_dict(data, mdp)
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise InputError(f"malformed strategy {path!r}: {e}") from None


def _as_mdp(m: Mdp | Mc) -> Mdp:
    return m.as_mdp() if isinstance(m, Mc) else m


def _solver(args, rc) -> Optional[str]:
    return args.solver or os.environ.get("PCTL_SMT_CMD") or rc.get("solver")


def _timeout(args, rc) -> Optional[float]:
    return args.timeout if args.timeout is not None else rc.get("timeout")


def _emit(args, payload: dict, human: str) -> None:
    if args.json:
        print(json.dumps(payload, indent=1, sort_keys=True))
    else:
        print(human)


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# --------------------------------------------------------------------------
# subcommands


def cmd_check(args, rc) -> int:
    m = _read_model(args.model)
    phi, glob = _read_formula(args)
    if isinstance(m, Mdp):
        if not args.strategy:
            raise InputError("checking an MDP needs --strategy")
        m = induced_mc(m, _read_strategy(args.strategy, m))
    checker = Checker(m)
    if glob:
        res = check_global_window(m, phi, checker)
        payload = {"command": "check", "global": True, "holds": res.holds,
                   "counterexample": res.counterexample, "path": list(res.path)}
        human = "AG holds" if res.holds else (
            f"AG fails at {res.counterexample} via {' -> '.join(res.path)}")
        ok = res.holds
    else:
        sat = checker.sat(phi)
        ok = sat[m.initial]
        payload = {"command": "check", "global": False, "holds": ok,
                   "satisfying": [m.states[s] for s in range(m.n_states) if sat[s]]}
        human = f"{'holds' if ok else 'fails'} at {m.states[m.initial]}"
    if args.measures:
        rep = {pretty_path(p): {m.states[s]: format_rational(v[s]) for s in range(m.n_states)}
               for p, v in measures_report(m, phi, checker)}
        payload["measures"] = rep
        human += "".join(f"\n  {k}: {v}" for k, v in rep.items())
    _emit(args, payload, human)
    return EXIT_YES if ok else EXIT_NO


def _strategy_payload(mdp: Mdp, strat: FiniteMemoryStrategy) -> dict:
    return strat.to_dict(mdp)


def cmd_synth(args, rc) -> int:
    mdp = _as_mdp(_read_model(args.model))
    phi, glob = _read_formula(args)
    require_window(phi)
    start = mdp.initial
    cap = args.cap or rc.get("cap", DEFAULT_ENUM_CAP)
    jobs = args.jobs or rc.get("jobs", 1)
    cmd, timeout = _solver(args, rc), _timeout(args, rc)
    mode = "det" if args.det else "memoryless" if args.memoryless else "auto"
    payload: Dict[str, Any] = {"command": "synth", "mode": mode, "global": glob}
    code = EXIT_UNKNOWN
    if mode == "det":
        if glob:
            pf = gfp_det(mdp, phi, cap=cap, jobs=jobs)
            strat = extract_strategy(mdp, pf, start)
            payload["rounds"] = pf.rounds
            if strat is not None:
                res = check_global_window(induced_mc(mdp, strat), phi)
                if not res.holds:
                    raise LpctlError("extracted strategy failed verification")
                payload.update(verdict="yes", lane="det", witness=_strategy_payload(mdp, strat))
                code = EXIT_YES
            else:
                payload.update(verdict="no", reason="no deterministic strategy")
                code = EXIT_NO
        else:
            w = synth_det_window(mdp, start, phi)
            if w is None:
                payload.update(verdict="no", reason="no deterministic window strategy")
                code = EXIT_NO
            else:
                payload.update(verdict="yes", witness=w.to_dict(mdp))
                code = EXIT_YES
    elif mode == "memoryless":
        f = (encode_global_memoryless(mdp, start, phi) if glob
             else encode_window(mdp, start, phi, "memoryless"))
        res = solve(f, True, cmd, timeout)
        payload["solver"] = res.verdict
        if isinstance(res, Sat):
            xs = {v.name: (format_rational(res.model[v.name]) if res.model.get(v.name) is not None
                           else None) for v in f.free if v.name in res.model}
            payload.update(verdict="yes", point=xs, rational=res.rational)
            code = EXIT_YES
        elif isinstance(res, Unsat):
            payload.update(verdict="no", reason="no memoryless strategy")
            code = EXIT_NO
        else:
            payload.update(verdict="unknown", reason=res.reason)
    else:
        if not glob:
            w = synth_det_window(mdp, start, phi)
            if w is not None:
                payload.update(verdict="yes", lane="det", witness=w.to_dict(mdp))
                code = EXIT_YES
            else:
                res = solve(encode_window(mdp, start, phi), True, cmd, timeout)
                payload["solver"] = res.verdict
                if isinstance(res, Sat):
                    payload.update(verdict="yes", lane="window",
                                   point={k: format_rational(v) if v is not None else None
                                          for k, v in sorted(res.model.items()) if k.startswith("x(")})
                    code = EXIT_YES
                elif isinstance(res, Unsat):
                    payload.update(verdict="no")
                    code = EXIT_NO
                else:
                    payload.update(verdict="unknown", reason=res.reason)
        else:
            budget = Budget(args.budget_iters, timeout, cap, jobs, cmd)
            out = decide_with_budget(mdp, start, phi, budget)
            payload["lanes"] = out.notes
            if isinstance(out, Yes):
                payload.update(verdict="yes", lane=out.lane, witness=_strategy_payload(mdp, out.strategy))
                code = EXIT_YES
            elif isinstance(out, No):
                payload.update(verdict="no", lane=out.lane, iteration=out.iteration)
                code = EXIT_NO
            else:
                payload.update(verdict="unknown")
    if args.out_strategy and "witness" in payload:
        Path(args.out_strategy).write_text(json.dumps(payload["witness"], indent=1) + "\n")
    human = f"{payload.get('verdict')}" + (f" (lane {payload['lane']})" if "lane" in payload else "")
    if "reason" in payload:
        human += f": {payload['reason']}"
    _emit(args, payload, human)
    return code


def cmd_encode(args, rc) -> int:
    mdp = _as_mdp(_read_model(args.model))
    phi, _ = _read_formula(args)
    start = mdp.initial
    mode = args.mode
    if mode in ("window", "memoryless"):
        f = encode_window(mdp, start, phi, "general" if mode == "window" else "memoryless",
                          args.deterministic)
    elif mode == "global-memoryless":
        f = encode_global_memoryless(mdp, start, phi)
    elif mode.startswith("fstep:"):
        try:
            n = int(mode.split(":", 1)[1])
        except ValueError:
            raise InputError(f"bad mode {mode!r}; expected fstep:N") from None
        if n < 0:
            raise InputError("fstep:N needs N >= 0")
        f = f_iterates(mdp, phi, n, args.product_form, args.deterministic)[-1][start]
    else:
        raise InputError(f"unknown mode {mode!r}")
    _write(args.out, to_smtlib(f, args.get_model))
    if args.out not in (None, "-"):
        print(f"wrote {args.out} ({f.size()} nodes, {len(f.free)} free variables)", file=sys.stderr)
    return EXIT_YES


def cmd_refute(args, rc) -> int:
    mdp = _as_mdp(_read_model(args.model))
    phi, _ = _read_formula(args)
    res = refute_global(mdp, mdp.initial, phi, args.budget_iters, _timeout(args, rc),
                        _solver(args, rc), args.solver2 or rc.get("solver2"))
    if isinstance(res, Refuted):
        payload = {"command": "refute", "verdict": "refuted", "iteration": res.iteration,
                   "sizes": res.sizes, "unknown_at": res.unknown_at, "rechecked": res.rechecked}
        _emit(args, payload, f"refuted at iteration {res.iteration}")
        return EXIT_NO
    payload = {"command": "refute", "verdict": "not-refuted", "iterations": res.iterations,
               "sizes": res.sizes, "unknown_at": res.unknown_at}
    _emit(args, payload, f"not refuted within {res.iterations} iterations")
    return EXIT_UNKNOWN


def cmd_sat(args, rc) -> int:
    phi, _ = _read_formula(args)
    props = [p for p in (args.props or "").split(",") if p]
    mc = sat_bounded(phi, args.granularity, props,
                     rc.get("state_cap", DEFAULT_STATE_CAP), rc.get("action_cap", DEFAULT_ACTION_CAP),
                     args.cap or rc.get("cap", DEFAULT_ENUM_CAP), args.jobs or rc.get("jobs", 1))
    if mc is None:
        _emit(args, {"command": "sat", "verdict": f"unsat-at-granularity-{args.granularity}"},
              f"unsat-at-granularity-{args.granularity}")
        return EXIT_NO
    if args.out:
        Path(args.out).write_text(dump_model(mc))
    _emit(args, {"command": "sat", "verdict": "sat", "witness": model_to_dict(mc)}, dump_model(mc).rstrip())
    return EXIT_YES


def _write_instance(args, model: Mdp | Mc, phi, glob: bool, extra: dict | None = None) -> int:
    text = pretty(phi, glob)
    if args.out:
        Path(args.out + ".json").write_text(dump_model(model))
        Path(args.out + ".pctl").write_text(text + "\n")
        print(f"wrote {args.out}.json and {args.out}.pctl", file=sys.stderr)
    else:
        print(json.dumps({"model": model_to_dict(model), "formula": text, **(extra or {})},
                         indent=1, sort_keys=True))
    return EXIT_YES


def cmd_gen(args, rc) -> int:
    if args.kind == "minsky":
        try:
            text = Path(args.program).read_text()
        except OSError as e:
            raise InputError(f"cannot read program {args.program!r}: {e.strerror}") from None
        mdp, phi, glob = corpus.compile_minsky(corpus.parse_minsky(text))
        return _write_instance(args, mdp, phi, glob)
    if args.kind == "reach":
        arena = corpus.gen_random_arena(args.seed, args.vertices, args.targets)
        mdp, phi = corpus.gen_reachability_instance(arena)
        return _write_instance(args, mdp, phi, False,
                               {"oracle_winning": corpus.solve_reachability_game(arena)})
    if args.kind == "pni":
        if not args.model or not args.low:
            raise InputError("gen pni needs --model and --low")
        m = _read_model(args.model)
        if not isinstance(m, Mc):
            raise InputError("gen pni needs a Markov chain")
        mc, phi = corpus.gen_noninterference(m, args.low)
        return _write_instance(args, mc, phi, False)
    mdp = corpus.gen_random(args.seed, args.states, args.actions, args.granularity)
    if args.out:
        Path(args.out + ".json").write_text(dump_model(mdp))
    else:
        sys.stdout.write(dump_model(mdp))
    return EXIT_YES


def cmd_analyze(args, rc) -> int:
    phi, glob = _read_formula(args)
    meta = analyze(phi, glob).to_dict()
    payload = {"command": "analyze", "formula": pretty(phi, glob), **meta}
    human = "\n".join(f"{k}: {v}" for k, v in payload.items() if k != "command")
    _emit(args, payload, human)
    return EXIT_YES


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lpctl", description="L-PCTL model checking, window synthesis and refutation.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    def common(sp, model=True, formula=True):
        if model:
            sp.add_argument("--model", required=True, help="model JSON file")
        if formula:
            sp.add_argument("--formula", help="formula text, or a .pctl file")
            sp.add_argument("--formula-file", help="file holding the formula")
        sp.add_argument("--json", action="store_true", help="machine-readable output")

    def solving(sp):
        sp.add_argument("--solver", help="solver command line, {} is the script path")
        sp.add_argument("--timeout", type=float, help="per-query timeout in seconds")

    sp = sub.add_parser("check", help="model-check an MC (or an MDP under --strategy)")
    common(sp)
    sp.add_argument("--global", dest="global_", action="store_true", help="check AG phi")
    sp.add_argument("--strategy", help="finite-memory strategy JSON for MDP input")
    sp.add_argument("--measures", action="store_true", help="also report path measures")
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("synth", help="synthesize a window strategy")
    common(sp)
    solving(sp)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--det", action="store_true")
    g.add_argument("--memoryless", action="store_true")
    g.add_argument("--auto", action="store_true")
    sp.add_argument("--global", dest="global_", action="store_true")
    sp.add_argument("--budget-iters", type=int, default=4)
    sp.add_argument("--cap", type=int, help="window tree enumeration cap")
    sp.add_argument("--jobs", type=int, help="worker threads")
    sp.add_argument("--out-strategy", help="write the witness strategy JSON here")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("encode", help="emit an SMT-LIB encoding")
    common(sp)
    sp.add_argument("--mode", default="window",
                    help="window | memoryless | global-memoryless | fstep:N")
    sp.add_argument("--deterministic", action="store_true", help="0/1 window variables")
    sp.add_argument("--product-form", action="store_true", help="product rendering of f-step disjunctions")
    sp.add_argument("--get-model", action="store_true", help="append (get-model)")
    sp.add_argument("--out", help="output file (default stdout)")
    sp.set_defaults(func=cmd_encode)

    sp = sub.add_parser("refute", help="refutation loop for flat non-strict AG formulas")
    common(sp)
    solving(sp)
    sp.add_argument("--solver2", help="second solver to re-check refutations")
    sp.add_argument("--budget-iters", type=int, default=4)
    sp.set_defaults(func=cmd_refute)

    sp = sub.add_parser("sat", help="bounded-granularity satisfiability")
    common(sp, model=False)
    sp.add_argument("--granularity", type=int, required=True)
    sp.add_argument("--props", help="comma-separated extra propositions")
    sp.add_argument("--cap", type=int)
    sp.add_argument("--jobs", type=int)
    sp.add_argument("--out", help="write the witness MC here")
    sp.set_defaults(func=cmd_sat)

    sp = sub.add_parser("gen", help="generate instances")
    sp.add_argument("kind", choices=("minsky", "reach", "pni", "random"))
    sp.add_argument("--program", help="minsky: program file")
    sp.add_argument("--model", help="pni: Markov chain JSON")
    sp.add_argument("--low", help="pni: low proposition")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--vertices", type=int, default=5)
    sp.add_argument("--targets", type=int, default=2)
    sp.add_argument("--states", type=int, default=3)
    sp.add_argument("--actions", type=int, default=2)
    sp.add_argument("--granularity", type=int, default=2)
    sp.add_argument("--out", help="output prefix (writes PREFIX.json and PREFIX.pctl)")
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("analyze", help="formula metadata")
    common(sp, model=False)
    sp.add_argument("--global", dest="global_", action="store_true")
    sp.set_defaults(func=cmd_analyze)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        rc = load_rc()
        if args.command == "gen" and args.kind == "minsky" and not args.program:
            raise InputError("gen minsky needs --program")
        return args.func(args, rc)
    except ResourceError as e:
        print(f"lpctl: resource cap: {e}", file=sys.stderr)
        return EXIT_RESOURCE
    except SolverError as e:
        print(f"lpctl: solver failure: {e}", file=sys.stderr)
        return EXIT_SOLVER
    except (LpctlError, json.JSONDecodeError, OSError) as e:
        print(f"lpctl: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
