"""Untyped quantum lambda-calculus with measurement, reduced over multidistributions."""

from .gates import DEFAULT_GATES, GateTable
from .program import MultiDistribution, Program, canonicalize, load_program, make_program, mdist_eq, program_eq
from .quantum import Permutation, QuantumState, permute_state
from .rewrite import Mode, Rewriter, find_redexes, is_snf, lift_step, run, snf_mass, step_at
from .syntax import parse_term, print_term, validate

__version__ = "0.1.0"
