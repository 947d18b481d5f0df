"""Programs modulo register re-indexing, and multidistributions of programs."""

from __future__ import annotations

import json
import re
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .gates import GateTable
from .quantum import EPS, Permutation, QuantumState, permute_state
from .syntax import (
    ParseError,
    Term,
    map_registers,
    parse_term,
    print_term,
    register_occurrences,
    register_order,
    validate,
)


class ProgramError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Program:
    state: QuantumState
    term: Term
    canonical: bool = False

    def __str__(self):
        return f"<{self.state.ket()}, {print_term(self.term)}>"

    def to_json(self) -> dict:
        return {"state": self.state.to_pairs(), "term": print_term(self.term)}


def check_raw(state: QuantumState, term: Term) -> None:
    report = validate(term)
    if not report.ok:
        raise ProgramError(str(report))
    regs = register_occurrences(term)
    if set(regs) != set(range(state.n)):
        raise ProgramError(
            f"registers {sorted(regs)} do not match a memory of {state.n} qubits"
        )


def reindex(state: QuantumState, term: Term, sigma: Permutation) -> tuple[QuantumState, Term]:
    """Rename r_i to r_sigma(i) and move the qubits along with their registers."""
    return permute_state(state, sigma.inverse()), map_registers(term, sigma)


def canonicalize(state: QuantumState, term: Term, check: bool = True) -> Program:
    """Representative whose k-th register in preorder is r_k."""
    if check:
        check_raw(state, term)
    order = register_order(term)
    if order == list(range(len(order))):
        return Program(state, term, canonical=True)
    sigma = Permutation(tuple(order))
    # qubit order[k] becomes qubit k
    new_state = permute_state(state, sigma)
    rename = sigma.inverse()
    return Program(new_state, map_registers(term, rename), canonical=True)


def canonical(p: Program) -> Program:
    return p if p.canonical else canonicalize(p.state, p.term)


def program_eq(a: Program, b: Program, tol: float = EPS) -> bool:
    a, b = canonical(a), canonical(b)
    return a.term == b.term and a.state.allclose(b.state, tol)


def make_program(state: QuantumState | None, term: Term) -> Program:
    return canonicalize(state or QuantumState.empty(), term)


# ---------------------------------------------------------------------------
# multidistributions


class MultiDistribution:
    """Finite multiset of weighted programs with total weight at most 1."""

    __slots__ = ("entries",)

    def __init__(self, entries: Iterable[tuple[float, Program]] = (), check: bool = True):
        entries = tuple((float(w), p) for w, p in entries)
        if check:
            for w, _ in entries:
                if not 0 < w <= 1 + EPS:
                    raise ProgramError(f"weight {w} outside (0, 1]")
            if sum(w for w, _ in entries) > 1 + EPS:
                raise ProgramError("multidistribution mass exceeds 1")
        object.__setattr__(self, "entries", entries)

    def __setattr__(self, name, value):
        raise AttributeError("MultiDistribution is immutable")

    @classmethod
    def unit(cls, p: Program) -> "MultiDistribution":
        return cls([(1.0, p)])

    def __iter__(self) -> Iterator[tuple[float, Program]]:
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def __add__(self, other: "MultiDistribution") -> "MultiDistribution":
        return MultiDistribution(self.entries + other.entries)

    def scale(self, q: float) -> "MultiDistribution":
        return MultiDistribution([(q * w, p) for w, p in self.entries])

    def mass(self) -> float:
        return sum(w for w, _ in self.entries)

    def coalesce(self) -> "MultiDistribution":
        """Merge entries holding equal programs, summing their weights."""
        groups: dict[Term, list[list]] = defaultdict(list)
        order: list[list] = []
        for w, p in self.entries:
            p = canonical(p)
            for cell in groups[p.term]:
                if cell[1].state.allclose(p.state):
                    cell[0] += w
                    break
            else:
                cell = [w, p]
                groups[p.term].append(cell)
                order.append(cell)
        return MultiDistribution([(w, p) for w, p in order], check=False)

    def term_signature(self) -> frozenset:
        """Hashable multiset of terms; equal multidistributions share it."""
        return frozenset(Counter(canonical(p).term for _, p in self.entries).items())

    def __str__(self):
        return "[" + ", ".join(f"{w:.6g} {p}" for w, p in self.entries) + "]"

    __repr__ = __str__

    def to_json(self) -> list[dict]:
        return [{"weight": w, **p.to_json()} for w, p in self.entries]


def _match(a: list, b: list, tol: float) -> bool:
    if len(a) != len(b):
        return False
    used = [False] * len(b)
    for wa, pa in a:
        for k, (wb, pb) in enumerate(b):
            if not used[k] and abs(wa - wb) <= tol and program_eq(pa, pb, tol):
                used[k] = True
                break
        else:
            return False
    return True


def mdist_eq(a: MultiDistribution, b: MultiDistribution, tol: float = EPS) -> bool:
    """Equality after coalescing equal programs on both sides."""
    return _match(list(a.coalesce()), list(b.coalesce()), tol)


def same_multiset(a: MultiDistribution, b: MultiDistribution, tol: float = EPS) -> bool:
    """Entry-by-entry equality without coalescing."""
    return _match(list(a), list(b), tol)


class MDistSet:
    """Collection of multidistributions deduplicated up to a tolerance-based equality."""

    def __init__(self, coalesced: bool = True):
        self.coalesced = coalesced
        self._buckets: dict[frozenset, list[MultiDistribution]] = defaultdict(list)
        self._items: list[MultiDistribution] = []

    def add(self, m: MultiDistribution) -> bool:
        if self.coalesced:
            m = m.coalesce()
        bucket = self._buckets[m.term_signature()]
        eq = mdist_eq if self.coalesced else same_multiset
        for other in bucket:
            if eq(m, other):
                return False
        bucket.append(m)
        self._items.append(m)
        return True

    def __contains__(self, m: MultiDistribution) -> bool:
        if self.coalesced:
            m = m.coalesce()
        eq = mdist_eq if self.coalesced else same_multiset
        return any(eq(m, other) for other in self._buckets.get(m.term_signature(), ()))

    def __iter__(self):
        return iter(self._items)

    def __len__(self):
        return len(self._items)


# ---------------------------------------------------------------------------
# program files

_STATE_RE = re.compile(r"^\s*state\s*:\s*\[(?P<body>[^\]]*)\]", re.MULTILINE)


def parse_state_literal(body: str) -> QuantumState:
    amps = []
    for chunk in body.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = [x.strip() for x in chunk.split(",")]
        if len(parts) != 2:
            raise ParseError(f"state entry {chunk!r} must be 're,im'")
        try:
            amps.append(complex(float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise ParseError(f"bad number in state entry {chunk!r}") from exc
    try:
        return QuantumState(amps)
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def parse_program_text(text: str, gates: GateTable | None = None) -> tuple[QuantumState, Term]:
    """Split a program file into its (optional) state literal and its term."""
    state = QuantumState.empty()
    m = _STATE_RE.search(text)
    if m:
        state = parse_state_literal(m.group("body"))
        # keep line numbers stable for term parse errors
        blank = re.sub(r"[^\n]", " ", m.group(0))
        text = text[: m.start()] + blank + text[m.end():]
    return state, parse_term(text, gates)


def load_program(text: str, gates: GateTable | None = None) -> Program:
    state, term = parse_program_text(text, gates)
    return canonicalize(state, term)


def program_from_json(data: dict | str, gates: GateTable | None = None) -> Program:
    if isinstance(data, str):
        data = json.loads(data)
    state = QuantumState.from_pairs(data["state"]) if data.get("state") else QuantumState.empty()
    return canonicalize(state, parse_term(data["term"], gates))


def state_literal(q: QuantumState) -> str:
    return "state: [" + "; ".join(f"{float(z.real)!r},{float(z.imag)!r}" for z in np.asarray(q.amp)) + "]"
