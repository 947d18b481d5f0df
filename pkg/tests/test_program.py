import json
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import COIN
from qlambda.gen import gen_program
from qlambda.program import (
    MDistSet,
    MultiDistribution,
    Program,
    ProgramError,
    canonicalize,
    load_program,
    make_program,
    mdist_eq,
    parse_program_text,
    program_eq,
    program_from_json,
    reindex,
    same_multiset,
    state_literal,
)
from qlambda.quantum import Permutation, QuantumState
from qlambda.syntax import ParseError, parse_term

S2 = 1 / np.sqrt(2)


def raw(amp, text):
    return Program(QuantumState(amp, normalize=True), parse_term(text))


def psi_phi():
    psi = QuantumState([0.6, 0.8j])
    phi = QuantumState([S2, -S2])
    return psi, phi


# -- canonical form -----------------------------------------------------------


def test_canonicalize_swaps_product_state():
    # (|psi> (x) |phi>, <r1, r0>) is (|phi> (x) |psi>, <r0, r1>)
    psi, phi = psi_phi()
    got = canonicalize(psi.kron(phi), parse_term("<r1, r0>"))
    assert got.term == parse_term("<r0, r1>")
    assert got.state.allclose(phi.kron(psi))


def test_canonicalize_entangled_example():
    # a|00>+b|01>+c|10>+d|11> with <r1, r0> becomes a|00>+c|01>+b|10>+d|11> with <r0, r1>
    v = np.array([0.1, 0.3 + 0.2j, -0.5, 0.4j])
    v = v / np.linalg.norm(v)
    got = canonicalize(QuantumState(v), parse_term("<r1, r0>"))
    assert got.term == parse_term("<r0, r1>")
    assert np.allclose(got.state.amp, v[[0, 2, 1, 3]])


def test_canonical_program_unchanged():
    p = canonicalize(QuantumState.basis("0"), parse_term("r0"))
    assert p.term == parse_term("r0") and p.state.allclose(QuantumState.basis("0"))


def test_canonicalize_rejects_mismatch():
    with pytest.raises(ProgramError):
        canonicalize(QuantumState.basis("00"), parse_term("r0"))
    with pytest.raises(ProgramError):
        canonicalize(QuantumState.basis("0"), parse_term("<r0, r0>"))
    with pytest.raises(ProgramError):
        canonicalize(QuantumState.empty(), parse_term(r"\x. a"))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**40))
def test_canonicalize_idempotent(seed):
    p = gen_program(12, seed, "quantum-heavy")
    q = canonicalize(p.state, p.term)
    assert q.term == p.term and q.state.allclose(p.state, 0)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**40), st.randoms(use_true_random=False))
def test_reindexing_preserves_program(seed, rnd):
    p = gen_program(12, seed, "quantum-heavy")
    image = list(range(p.state.n))
    rnd.shuffle(image)
    state, term = reindex(p.state, p.term, Permutation(tuple(image)))
    assert program_eq(Program(state, term), p)


# -- equality -----------------------------------------------------------------


def test_program_eq_examples():
    psi, phi = psi_phi()
    a = Program(psi.kron(phi), parse_term("<r0, r1>"))
    b = Program(phi.kron(psi), parse_term("<r1, r0>"))
    assert program_eq(a, b)
    assert not program_eq(raw([1, 0], "r0"), raw([0, 1], "r0"))
    assert program_eq(a, a)


def test_program_eq_entangled_swap():
    v = np.array([0.1, 0.3 + 0.2j, -0.5, 0.4j])
    a = raw(v, "<r0, r1>")
    b = raw(v[[0, 2, 1, 3]], "<r1, r0>")
    assert program_eq(a, b)
    assert not program_eq(a, raw(v, "<r1, r0>"))


def test_program_eq_no_global_phase_quotient():
    assert not program_eq(raw([1, 0], "r0"), raw([-1, 0], "r0"))


def test_program_eq_is_equivalence_on_generated():
    progs = [gen_program(10, s, "quantum-heavy") for s in range(1000)]
    # each program against a re-indexed copy, and a small cluster for transitivity
    for p in progs:
        assert program_eq(p, p)
        n = p.state.n
        if n >= 2:
            q = Program(*reindex(p.state, p.term, Permutation(tuple(reversed(range(n))))))
            r = Program(*reindex(q.state, q.term, Permutation.swap(n, 0, n - 1)))
            assert program_eq(p, q) and program_eq(q, p)
            assert program_eq(q, r) and program_eq(p, r)
    # symmetry of inequality across the corpus
    for a, b in zip(progs, progs[1:]):
        assert program_eq(a, b) == program_eq(b, a)


def test_program_eq_within_tolerance():
    p = raw([1, 0], "r0")
    near = Program(QuantumState([1, 4e-10], check=False), parse_term("r0"))
    far = Program(QuantumState([1, 4e-9], check=False), parse_term("r0"))
    assert program_eq(p, near) and not program_eq(p, far)


# -- multidistributions -------------------------------------------------------


E = make_program(None, parse_term(r"\x. x"))
F = make_program(None, parse_term(COIN))


def test_mdist_validation():
    with pytest.raises(ProgramError):
        MultiDistribution([(0.0, E)])
    with pytest.raises(ProgramError):
        MultiDistribution([(0.7, E), (0.6, F)])
    with pytest.raises(AttributeError):
        MultiDistribution.unit(E).entries = ()


def test_mdist_eq_examples():
    assert mdist_eq(MultiDistribution.unit(E), MultiDistribution.unit(E))
    assert mdist_eq(MultiDistribution([(0.5, E), (0.5, F)]), MultiDistribution([(0.5, F), (0.5, E)]))
    # coalescing merges the two quarter weights
    assert mdist_eq(MultiDistribution([(0.25, E), (0.25, E), (0.5, F)]), MultiDistribution([(0.5, E), (0.5, F)]))
    assert not same_multiset(
        MultiDistribution([(0.25, E), (0.25, E), (0.5, F)]), MultiDistribution([(0.5, E), (0.5, F)])
    )
    assert not mdist_eq(MultiDistribution([(0.5, E), (0.5, F)]), MultiDistribution([(0.4, E), (0.6, F)]))


def test_coalesce_keeps_mass_and_distinguishes_states():
    a, b = raw([1, 0], "r0"), raw([0, 1], "r0")
    m = MultiDistribution([(0.25, a), (0.25, b), (0.5, a)])
    c = m.coalesce()
    assert len(c) == 2 and abs(c.mass() - m.mass()) < 1e-12


def test_scale_and_sum():
    m = MultiDistribution.unit(E).scale(0.5) + MultiDistribution.unit(F).scale(0.5)
    assert len(m) == 2 and abs(m.mass() - 1) < 1e-12


def test_mdist_set_dedup():
    s = MDistSet()
    assert s.add(MultiDistribution([(0.5, E), (0.5, E)]))
    assert not s.add(MultiDistribution.unit(E))
    assert MultiDistribution.unit(E) in s
    exact = MDistSet(coalesced=False)
    exact.add(MultiDistribution([(0.5, E), (0.5, E)]))
    assert exact.add(MultiDistribution.unit(E))
    assert len(exact) == 2


# -- files and JSON -----------------------------------------------------------


def test_program_file_with_state():
    state, term = parse_program_text("state: [0,0; 1,0]\n# one qubit in |1>\nr0\n")
    assert state.allclose(QuantumState.basis("1")) and term == parse_term("r0")


def test_program_file_errors_keep_line_numbers():
    with pytest.raises(ParseError) as exc:
        parse_program_text("state: [1,0]\n\n(a")
    assert exc.value.line == 3
    with pytest.raises(ParseError):
        parse_program_text("state: [1,0; 2]\nr0")
    with pytest.raises(ParseError):
        parse_program_text("state: [1,0; 1,0]\nr0")


def test_state_literal_roundtrip():
    p = gen_program(8, 4, "quantum-heavy")
    text = state_literal(p.state) + "\n" + str(p.term)
    assert program_eq(load_program(text), p)


def test_json_roundtrip():
    rng = random.Random(1)
    for _ in range(50):
        p = gen_program(12, rng.getrandbits(32), "quantum-heavy")
        q = program_from_json(json.dumps(p.to_json()))
        assert program_eq(p, q)
