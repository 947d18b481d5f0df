"""Reduction of programs and of multidistributions of programs.

Beta steps fire in any context; quantum steps (new, gates, meas) only at
surface positions. A step on a multidistribution is given by a schedule:
one ``None`` (skip) or one redex occurrence per entry.
"""

from __future__ import annotations

import enum
import functools
import json
import random
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

from .gates import DEFAULT_GATES, GateTable
from .program import MultiDistribution, Program, canonicalize
from .quantum import (
    DEFAULT_MAX_QUBITS,
    EPS,
    apply_binary,
    apply_unary,
    measure,
    new_qubit,
)
from .syntax import (
    App,
    Bang,
    BangLam,
    Gate,
    LinLam,
    Meas,
    New,
    Position,
    Reg,
    Term,
    instantiate,
    map_registers,
    match_pair,
    occurrences,
    replace_at,
    subterm_at,
)


class RewriteError(ValueError):
    pass


class ScheduleError(RewriteError):
    pass


class ResourceLimit(RuntimeError):
    """A configured size guard (entries, qubits, search nodes) was hit."""


class RedexKind(enum.Enum):
    BETA_LIN = "BetaLin"
    BETA_BANG = "BetaBang"
    Q_NEW = "QNew"
    Q_UNARY = "QUnary"
    Q_BINARY = "QBinary"
    Q_MEAS = "QMeas"

    @property
    def is_quantum(self) -> bool:
        return self not in (RedexKind.BETA_LIN, RedexKind.BETA_BANG)


class Mode(enum.Enum):
    GENERAL = "general"
    SURFACE = "surface"
    STRICT = "strict"


@dataclass(frozen=True)
class RedexOccurrence:
    pos: Position
    kind: RedexKind
    is_surface: bool

    def to_json(self) -> dict:
        return {"pos": list(self.pos), "kind": self.kind.value, "surface": self.is_surface}


Schedule = Sequence[Optional[RedexOccurrence]]


class Rewriter:
    """Reduction engine bound to a gate table and a qubit cap."""

    def __init__(self, gates: GateTable | None = None, max_qubits: int = DEFAULT_MAX_QUBITS):
        self.gates = gates or DEFAULT_GATES
        self.max_qubits = max_qubits
        self._term_redexes = functools.lru_cache(maxsize=1 << 16)(self._compute_redexes)

    # -- redexes ------------------------------------------------------------

    def redex_kind(self, t: Term) -> RedexKind | None:
        """Rule whose left-hand side matches ``t`` at its root, if any."""
        if isinstance(t, New):
            return RedexKind.Q_NEW
        if isinstance(t, Meas):
            return RedexKind.Q_MEAS if isinstance(t.subject, Reg) else None
        if not isinstance(t, App):
            return None
        fun, arg = t.fun, t.arg
        if isinstance(fun, LinLam):
            return RedexKind.BETA_LIN
        if isinstance(fun, BangLam):
            return RedexKind.BETA_BANG if isinstance(arg, Bang) else None
        if isinstance(fun, Gate) and fun.name in self.gates:
            arity = self.gates.arity(fun.name)
            if arity == 1 and isinstance(arg, Reg):
                return RedexKind.Q_UNARY
            if arity == 2:
                pair = match_pair(arg)
                if pair and isinstance(pair[0], Reg) and isinstance(pair[1], Reg):
                    return RedexKind.Q_BINARY
        return None

    def _compute_redexes(self, term: Term) -> tuple[RedexOccurrence, ...]:
        found = []
        for pos, sub, surface in occurrences(term):
            kind = self.redex_kind(sub)
            if kind is None or (kind.is_quantum and not surface):
                continue
            found.append(RedexOccurrence(pos, kind, surface))
        return tuple(found)

    def find_redexes(self, p: Program | Term) -> list[RedexOccurrence]:
        term = p.term if isinstance(p, Program) else p
        return list(self._term_redexes(term))

    def surface_redexes(self, p: Program | Term) -> list[RedexOccurrence]:
        return [r for r in self.find_redexes(p) if r.is_surface]

    def is_snf(self, p: Program | Term) -> bool:
        return not self.surface_redexes(p)

    def allowed_redexes(self, p: Program, mode: Mode) -> list[RedexOccurrence]:
        if mode is Mode.GENERAL:
            return self.find_redexes(p)
        return self.surface_redexes(p)

    # -- steps ----------------------------------------------------------------

    def step_at(self, p: Program, r: RedexOccurrence) -> MultiDistribution:
        """Fire ``r`` inside its context; results are canonical programs."""
        try:
            sub = subterm_at(p.term, r.pos)
        except KeyError as exc:
            raise RewriteError(f"no subterm at {r.pos}") from exc
        kind = self.redex_kind(sub)
        if kind is not r.kind:
            raise RewriteError(f"no {r.kind.value} redex at {r.pos} (found {kind})")
        if kind.is_quantum and r not in self._term_redexes(p.term):
            raise RewriteError(f"quantum redex at {r.pos} is not surface")
        state, term = p.state, p.term
        if kind is RedexKind.BETA_LIN:
            results = [(1.0, state, instantiate(sub.fun.body, sub.arg))]
        elif kind is RedexKind.BETA_BANG:
            results = [(1.0, state, instantiate(sub.fun.body, sub.arg.body))]
        elif kind is RedexKind.Q_NEW:
            results = [(1.0, new_qubit(state, self.max_qubits), Reg(state.n))]
        elif kind is RedexKind.Q_UNARY:
            gate = self.gates[sub.fun.name].matrix
            results = [(1.0, apply_unary(state, gate, sub.arg.index), sub.arg)]
        elif kind is RedexKind.Q_BINARY:
            gate = self.gates[sub.fun.name].matrix
            a, b = match_pair(sub.arg)
            results = [(1.0, apply_binary(state, gate, a.index, b.index), sub.arg)]
        else:
            i = sub.subject.index
            results = []
            for bit, prob, post in measure(state, i):
                branch = sub.branch0 if bit == 0 else sub.branch1
                t = replace_at(term, r.pos, branch)
                # measured qubit is garbage collected
                t = map_registers(t, lambda k: k - 1 if k > i else k)
                results.append((prob, post, t, True))
            return MultiDistribution(
                [(w, canonicalize(q, t, check=False)) for w, q, t, _ in results], check=False
            )
        return MultiDistribution(
            [(w, canonicalize(q, replace_at(term, r.pos, new), check=False)) for w, q, new in results],
            check=False,
        )

    def root_step(self, p: Program) -> MultiDistribution:
        kind = self.redex_kind(p.term)
        if kind is None:
            raise RewriteError("term is not a redex")
        return self.step_at(p, RedexOccurrence((), kind, True))

    def program_step(self, p: Program, r: RedexOccurrence | None) -> MultiDistribution:
        if r is None:
            return MultiDistribution.unit(p)
        return self.step_at(p, r)

    # -- lifting ----------------------------------------------------------------

    def check_schedule(self, m: MultiDistribution, s: Schedule, mode: Mode) -> None:
        if len(s) != len(m):
            raise ScheduleError(f"schedule has {len(s)} choices for {len(m)} entries")
        for k, ((_, p), r) in enumerate(zip(m, s)):
            if r is None:
                if mode is Mode.STRICT and not self.is_snf(p):
                    raise ScheduleError(f"entry {k} is not in snf and must fire under strict lifting")
                continue
            if r not in self._term_redexes(p.term):
                raise ScheduleError(f"entry {k}: {r} is not a redex of the program")
            if mode is not Mode.GENERAL and not r.is_surface:
                raise ScheduleError(f"entry {k}: non-surface redex under {mode.value} lifting")

    def lift_step(self, m: MultiDistribution, s: Schedule, mode: Mode = Mode.STRICT) -> MultiDistribution:
        self.check_schedule(m, s, mode)
        out = []
        for (w, p), r in zip(m, s):
            out.extend((w * v, q) for v, q in self.program_step(p, r))
        return MultiDistribution(out, check=False)

    def successors(self, m: MultiDistribution, mode: Mode, limit: int | None = None) -> Iterable[tuple[tuple, MultiDistribution]]:
        """Every (schedule, result) one lifted step away.

        The all-skip schedule is left out unless nothing can fire.
        """
        choices = []
        for _, p in m:
            allowed = self.allowed_redexes(p, mode)
            if mode is Mode.STRICT:
                choices.append(allowed or [None])
            else:
                choices.append([None] + allowed)
        total = 1
        for c in choices:
            total *= len(c)
        if limit is not None and total > limit:
            raise ResourceLimit(f"{total} schedules exceed the branching guard of {limit}")
        # per entry, the step results are shared between schedules
        per_entry = []
        for (w, p), opts in zip(m, choices):
            per_entry.append([(r, [(w * v, q) for v, q in self.program_step(p, r)]) for r in opts])
        movable = any(any(r is not None for r in opts) for opts in choices)

        def rec(k, sched, acc):
            if k == len(per_entry):
                if movable and all(r is None for r in sched):
                    return
                yield tuple(sched), MultiDistribution(acc, check=False)
                return
            for r, res in per_entry[k]:
                yield from rec(k + 1, sched + [r], acc + res)

        yield from rec(0, [], [])

    def can_move(self, m: MultiDistribution, mode: Mode) -> bool:
        return any(self.allowed_redexes(p, mode) for _, p in m)


DEFAULT = Rewriter()


def find_redexes(p) -> list[RedexOccurrence]:
    return DEFAULT.find_redexes(p)


def step_at(p: Program, r: RedexOccurrence) -> MultiDistribution:
    return DEFAULT.step_at(p, r)


def root_step(p: Program) -> MultiDistribution:
    return DEFAULT.root_step(p)


def is_snf(p) -> bool:
    return DEFAULT.is_snf(p)


def lift_step(m: MultiDistribution, s: Schedule, mode: Mode = Mode.STRICT) -> MultiDistribution:
    return DEFAULT.lift_step(m, s, mode)


def snf_mass(m: MultiDistribution, rewriter: Rewriter | None = None) -> float:
    """Total weight of the entries in surface normal form."""
    rw = rewriter or DEFAULT
    return float(sum(w for w, p in m if rw.is_snf(p)))


# ---------------------------------------------------------------------------
# schedulers

Scheduler = Callable[[Rewriter, MultiDistribution, Mode], Optional[list]]


def leftmost(rw: Rewriter, m: MultiDistribution, mode: Mode) -> list:
    out = []
    for _, p in m:
        allowed = rw.allowed_redexes(p, mode)
        out.append(allowed[0] if allowed else None)
    return out


def rightmost(rw: Rewriter, m: MultiDistribution, mode: Mode) -> list:
    out = []
    for _, p in m:
        allowed = rw.allowed_redexes(p, mode)
        out.append(allowed[-1] if allowed else None)
    return out


def random_scheduler(seed: int | None = None) -> Scheduler:
    rng = random.Random(seed)

    def choose(rw: Rewriter, m: MultiDistribution, mode: Mode) -> list:
        allowed = [rw.allowed_redexes(p, mode) for _, p in m]
        if mode is Mode.STRICT:
            return [rng.choice(a) if a else None for a in allowed]
        out = [rng.choice([None] + a) if a else None for a in allowed]
        if all(r is None for r in out):
            movable = [k for k, a in enumerate(allowed) if a]
            if movable:
                k = rng.choice(movable)
                out[k] = rng.choice(allowed[k])
        return out

    return choose


def scripted(schedules: Sequence[Schedule]) -> Scheduler:
    it = iter(schedules)

    def choose(rw, m, mode):
        return list(next(it, None) or []) or None

    return choose


SCHEDULERS = {"leftmost": lambda seed=None: leftmost, "rightmost": lambda seed=None: rightmost, "random": random_scheduler}


# ---------------------------------------------------------------------------
# runs


@dataclass
class Trace:
    mode: Mode
    steps: list[MultiDistribution]
    schedules: list[Optional[tuple]] = field(default_factory=list)
    pr: list[float] = field(default_factory=list)
    stop_reason: str = ""

    @property
    def final(self) -> MultiDistribution:
        return self.steps[-1]

    def jsonl_records(self, rewriter: Rewriter | None = None) -> Iterable[dict]:
        rw = rewriter or DEFAULT
        for k, m in enumerate(self.steps):
            sched = self.schedules[k]
            yield {
                "step": k,
                "mode": self.mode.value,
                "schedule": None if sched is None else [None if r is None else r.to_json() for r in sched],
                "entries": [{**e, "snf": rw.is_snf(p)} for e, (_, p) in zip(m.to_json(), m)],
                "pr_snf": self.pr[k],
            }

    def write_jsonl(self, fh, rewriter: Rewriter | None = None) -> None:
        for rec in self.jsonl_records(rewriter):
            fh.write(json.dumps(rec) + "\n")


def run(
    m0: MultiDistribution | Program,
    mode: Mode = Mode.STRICT,
    scheduler: Scheduler = leftmost,
    max_steps: int = 1000,
    delta: float = 1e-9,
    window: int = 8,
    rewriter: Rewriter | None = None,
    max_entries: int = 4096,
) -> Trace:
    """Reduce until nothing can fire, ``max_steps`` is reached, or Pr plateaus.

    The plateau test stops once Pr(m_k) - Pr(m_{k-window}) < delta, but only
    after some mass has reached surface normal form.
    """
    rw = rewriter or DEFAULT
    if isinstance(m0, Program):
        m0 = MultiDistribution.unit(m0)
    if max_steps < 1:
        raise ValueError("max_steps must be at least 1")
    trace = Trace(mode, [m0], [None], [snf_mass(m0, rw)])
    m = m0
    for k in range(1, max_steps + 1):
        if not rw.can_move(m, mode):
            trace.stop_reason = "normal"
            return trace
        sched = scheduler(rw, m, mode)
        if sched is None:
            trace.stop_reason = "script-exhausted"
            return trace
        m = rw.lift_step(m, sched, mode)
        if len(m) > max_entries:
            raise ResourceLimit(f"multidistribution grew past {max_entries} entries")
        trace.steps.append(m)
        trace.schedules.append(tuple(sched))
        trace.pr.append(snf_mass(m, rw))
        if k >= window and trace.pr[-1] > 0 and trace.pr[-1] - trace.pr[-1 - window] < delta:
            trace.stop_reason = "stable"
            return trace
    trace.stop_reason = "max-steps"
    return trace


__all__ = [
    "EPS",
    "Mode",
    "RedexKind",
    "RedexOccurrence",
    "ResourceLimit",
    "RewriteError",
    "Rewriter",
    "ScheduleError",
    "Trace",
    "find_redexes",
    "is_snf",
    "leftmost",
    "lift_step",
    "random_scheduler",
    "rightmost",
    "root_step",
    "run",
    "scripted",
    "snf_mass",
    "step_at",
]
