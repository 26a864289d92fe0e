"""Exact L-PCTL model checking and window-strategy synthesis for finite MDPs."""

from .errors import (FormulaClassError, FormulaSyntaxError, InputError, LpctlError, ModelError,
                     NotFlatError, ResourceError, SolverError, StrictComparisonError)
from .logic import analyze, parse_formula, pretty
from .mccheck import Checker, check_global_window, check_state, measure_path
from .model import FiniteMemoryStrategy, Mc, Mdp, induced_mc, load_model, make_mc, make_mdp
from .detsynth import gfp_det, extract_strategy, synth_det_window
from .reals import encode_f_step, encode_global_memoryless, encode_window
from .smt import solve, to_smtlib
from .semi import decide_with_budget, refute_global
from .sat import build_sat_mdp, sat_bounded

__all__ = [
    "Checker", "FiniteMemoryStrategy", "FormulaClassError", "FormulaSyntaxError", "InputError",
    "LpctlError", "Mc", "Mdp", "ModelError", "NotFlatError", "ResourceError", "SolverError",
    "StrictComparisonError", "analyze", "build_sat_mdp", "check_global_window", "check_state",
    "decide_with_budget", "encode_f_step", "encode_global_memoryless", "encode_window",
    "extract_strategy", "gfp_det", "induced_mc", "load_model", "make_mc", "make_mdp",
    "measure_path", "parse_formula", "pretty", "refute_global", "sat_bounded", "solve",
    "synth_det_window", "to_smtlib",
]
