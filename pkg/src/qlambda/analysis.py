"""Termination probabilities, a brute-force reachability oracle, and
executable checks of the confluence and normalization properties.

Every check returns a :class:`PropertyVerdict`; suite runners add verdicts
over generated instances.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .gen import gen_program
from .program import (
    MDistSet,
    MultiDistribution,
    Program,
    check_raw,
    mdist_eq,
)
from .quantum import (
    EPS,
    QuantumState,
    apply_binary,
    apply_unary,
    new_qubit,
    outcome_probability,
    project,
)
from .rewrite import (
    DEFAULT,
    Mode,
    RedexKind,
    ResourceLimit,
    Rewriter,
    leftmost,
    run,
    snf_mass,
)
from .syntax import instantiate, print_term, replace_at, size, subterm_at

# ---------------------------------------------------------------------------
# limits


@dataclass
class ConvergenceReport:
    pr_curve: list[tuple[int, float]]
    limit_estimate: float
    stable: bool
    stop_reason: str = ""

    def to_csv(self) -> str:
        return "step,pr\n" + "".join(f"{k},{pr!r}\n" for k, pr in self.pr_curve)


def estimate_limit(
    p: Program | MultiDistribution,
    mode: Mode = Mode.STRICT,
    max_steps: int = 200,
    delta: float = 1e-9,
    window: int = 8,
    scheduler=leftmost,
    rewriter: Rewriter | None = None,
) -> ConvergenceReport:
    """Run a strategy and report its Pr curve with a plateau estimate of the limit."""
    trace = run(p, mode, scheduler, max_steps, delta, window, rewriter)
    curve = list(enumerate(trace.pr))
    return ConvergenceReport(
        curve, trace.pr[-1], trace.stop_reason in ("normal", "stable"), trace.stop_reason
    )


# ---------------------------------------------------------------------------
# oracle


@dataclass(frozen=True)
class Guards:
    max_depth: int = 8
    max_term_size: int = 200
    max_level: int = 20000  # distinct multidistributions per depth
    max_branching: int = 4096  # schedules out of one multidistribution
    max_entries: int = 256


DEFAULT_GUARDS = Guards()


def _as_mdist(p: Program | MultiDistribution) -> MultiDistribution:
    return MultiDistribution.unit(p) if isinstance(p, Program) else p


def _guard_entries(m: MultiDistribution, g: Guards) -> None:
    if len(m) > g.max_entries:
        raise ResourceLimit(f"multidistribution with {len(m)} entries exceeds guard {g.max_entries}")
    for _, p in m:
        if size(p.term) > g.max_term_size:
            raise ResourceLimit(f"term of size {size(p.term)} exceeds guard {g.max_term_size}")


def oracle_levels(
    p: Program | MultiDistribution,
    depth: int,
    mode: Mode,
    rewriter: Rewriter | None = None,
    guards: Guards = DEFAULT_GUARDS,
) -> list[list[MultiDistribution]]:
    """Exact (uncoalesced) frontier of every depth 0..``depth``.

    Each depth holds the distinct multidistributions reachable by exactly that
    many lifted steps. The all-skip schedule is only taken when nothing can
    fire, so stuck multidistributions are carried forward unchanged.
    """
    rw = rewriter or DEFAULT
    if depth > guards.max_depth:
        raise ResourceLimit(f"depth {depth} exceeds guard {guards.max_depth}")
    m0 = _as_mdist(p)
    _guard_entries(m0, guards)
    levels = [[m0]]
    for _ in range(depth):
        seen = MDistSet(coalesced=False)
        for m in levels[-1]:
            for _, nxt in rw.successors(m, mode, guards.max_branching):
                if seen.add(nxt):
                    _guard_entries(nxt, guards)
                    if len(seen) > guards.max_level:
                        raise ResourceLimit(f"more than {guards.max_level} multidistributions at one depth")
        levels.append(list(seen))
    return levels


def oracle_tree(
    p: Program | MultiDistribution,
    depth: int,
    mode: Mode,
    rewriter: Rewriter | None = None,
    guards: Guards = DEFAULT_GUARDS,
) -> list[MDistSet]:
    """Reachable multidistributions per depth, coalesced and deduplicated."""
    out = []
    for level in oracle_levels(p, depth, mode, rewriter, guards):
        s = MDistSet(coalesced=True)
        for m in level:
            s.add(m)
        out.append(s)
    return out


# ---------------------------------------------------------------------------
# verdicts


@dataclass
class PropertyVerdict:
    property: str
    tried: int = 0
    passed: int = 0
    failed: int = 0
    inconclusive: int = 0
    skipped: int = 0
    counterexamples: list[dict] = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    @classmethod
    def one(cls, prop: str, outcome: str, detail: dict | None = None) -> "PropertyVerdict":
        v = cls(prop, tried=1)
        setattr(v, outcome, 1)
        if outcome in ("failed", "inconclusive") and detail is not None:
            v.counterexamples.append({"outcome": outcome, **detail})
        return v

    @property
    def ok(self) -> bool:
        return self.failed == 0

    @property
    def outcome(self) -> str:
        for name in ("failed", "inconclusive", "skipped"):
            if getattr(self, name):
                return name
        return "passed"

    def __add__(self, other: "PropertyVerdict") -> "PropertyVerdict":
        notes = dict(self.notes)
        for k, v in other.notes.items():
            notes[k] = notes.get(k, 0) + v if isinstance(v, (int, float)) else v
        return PropertyVerdict(
            self.property,
            self.tried + other.tried,
            self.passed + other.passed,
            self.failed + other.failed,
            self.inconclusive + other.inconclusive,
            self.skipped + other.skipped,
            self.counterexamples + other.counterexamples,
            notes,
        )

    def to_json(self) -> dict:
        return {
            "property": self.property,
            "tried": self.tried,
            "passed": self.passed,
            "failed": self.failed,
            "inconclusive": self.inconclusive,
            "skipped": self.skipped,
            "counterexamples": self.counterexamples,
            **({"notes": self.notes} if self.notes else {}),
        }

    def summary(self) -> str:
        return (
            f"{self.property}: tried={self.tried} passed={self.passed} failed={self.failed} "
            f"inconclusive={self.inconclusive} skipped={self.skipped}"
        )


def _describe(p: Program | MultiDistribution) -> dict:
    if isinstance(p, Program):
        return {"program": str(p), "state": p.state.to_pairs(), "term": print_term(p.term)}
    return {"mdist": str(p)}


def _sched_json(s) -> list:
    return [None if r is None else r.to_json() for r in s]


# ---------------------------------------------------------------------------
# pointed diamond


def check_pointed_diamond(
    p: Program, rewriter: Rewriter | None = None, guards: Guards = DEFAULT_GUARDS
) -> PropertyVerdict:
    """Every two surface redexes give results that are not in snf and join in one strict step."""
    name = "diamond"
    rw = rewriter or DEFAULT
    reds = rw.surface_redexes(p)
    if len(reds) < 2:
        return PropertyVerdict.one(name, "skipped")
    try:
        results = [rw.step_at(p, r) for r in reds]
        for a in range(len(reds)):
            for b in range(a + 1, len(reds)):
                m1, m2 = results[a], results[b]
                detail = {**_describe(p), "redexes": [reds[a].to_json(), reds[b].to_json()]}
                if any(rw.is_snf(q) for _, q in m1) or any(rw.is_snf(q) for _, q in m2):
                    return PropertyVerdict.one(name, "failed", {**detail, "reason": "snf entry after one step"})
                joins = MDistSet()
                for _, n in rw.successors(m1, Mode.STRICT, guards.max_branching):
                    joins.add(n)
                if not any(n in joins for _, n in rw.successors(m2, Mode.STRICT, guards.max_branching)):
                    return PropertyVerdict.one(
                        name, "failed", {**detail, "reason": "no one-step join", "m1": str(m1), "m2": str(m2)}
                    )
    except ResourceLimit as exc:
        return PropertyVerdict.one(name, "inconclusive", {**_describe(p), "reason": str(exc)})
    return PropertyVerdict.one(name, "passed")


# ---------------------------------------------------------------------------
# random descent


def _snf_part(m: MultiDistribution, rw: Rewriter) -> MultiDistribution:
    return MultiDistribution([(w, q) for w, q in m if rw.is_snf(q)], check=False)


def check_random_descent(
    p: Program | MultiDistribution,
    depth: int = 6,
    rewriter: Rewriter | None = None,
    guards: Guards = DEFAULT_GUARDS,
    completion_steps: int = 40,
) -> PropertyVerdict:
    """All strict runs agree, checked exhaustively up to ``depth``.

    At every depth the reachable multidistributions must share the same Pr
    and the same (coalesced) snf part. Leaves are also completed with
    leftmost strict steps; when every completion reaches a normal
    multidistribution, the normal forms must coincide.
    Literal equality of the depth-``depth`` leaves is recorded in the notes.
    """
    name = "random-descent"
    rw = rewriter or DEFAULT
    try:
        levels = oracle_levels(p, depth, Mode.STRICT, rw, guards)
    except ResourceLimit as exc:
        return PropertyVerdict.one(name, "inconclusive", {**_describe(p), "reason": str(exc)})
    for k, level in enumerate(levels):
        prs = [snf_mass(m, rw) for m in level]
        if max(prs) - min(prs) > EPS:
            return PropertyVerdict.one(name, "failed", {**_describe(p), "reason": f"Pr differs at depth {k}", "pr": prs})
        parts = [_snf_part(m, rw) for m in level]
        for other in parts[1:]:
            if not mdist_eq(parts[0], other):
                return PropertyVerdict.one(
                    name, "failed", {**_describe(p), "reason": f"snf parts differ at depth {k}", "a": str(parts[0]), "b": str(other)}
                )
    leaves = levels[-1]
    coalesced = MDistSet()
    for m in leaves:
        coalesced.add(m)
    notes = {"leaf_sets_equal": int(len(coalesced) == 1), "leaf_sets_differ": int(len(coalesced) > 1)}
    finals = []
    try:
        for m in coalesced:
            t = run(m, Mode.STRICT, leftmost, completion_steps, delta=0.0, rewriter=rw, max_entries=guards.max_entries)
            if t.stop_reason != "normal":
                finals = None
                break
            finals.append(t.final)
    except ResourceLimit:
        finals = None
    if finals:
        for other in finals[1:]:
            if not mdist_eq(finals[0], other):
                return PropertyVerdict.one(
                    name, "failed", {**_describe(p), "reason": "normal forms differ", "a": str(finals[0]), "b": str(other)}
                )
        notes["normal_forms_compared"] = 1
    v = PropertyVerdict.one(name, "passed")
    v.notes = notes
    return v


# ---------------------------------------------------------------------------
# factorization


def random_general_sequence(p: Program, k: int, rng: random.Random, rewriter: Rewriter | None = None, nonsurface_bias: float = 0.5):
    """A random sequence of ``k`` general lifted steps, favouring non-surface redexes."""
    rw = rewriter or DEFAULT
    m = MultiDistribution.unit(p)
    schedules = []
    for _ in range(k):
        if not rw.can_move(m, Mode.GENERAL):
            break
        sched = []
        for _, q in m:
            allowed = rw.find_redexes(q)
            deep = [r for r in allowed if not r.is_surface]
            top = [r for r in allowed if r.is_surface]
            x = rng.random()
            if deep and x < nonsurface_bias:
                sched.append(rng.choice(deep))
            elif top and x < nonsurface_bias + (1 - nonsurface_bias) * 0.7:
                sched.append(rng.choice(top))
            else:
                sched.append(None)
        if all(r is None for r in sched):
            movable = [j for j, (_, q) in enumerate(m) if rw.find_redexes(q)]
            j = rng.choice(movable)
            sched[j] = rng.choice(rw.find_redexes(m.entries[j][1]))
        schedules.append(tuple(sched))
        m = rw.lift_step(m, sched, Mode.GENERAL)
    return schedules, m


def _nonsurface_closure(term, budget: int, rw: Rewriter, cap: int) -> set:
    """Terms reachable with at most ``budget`` non-surface beta steps."""
    seen = {term}
    frontier = [term]
    for _ in range(budget):
        nxt = []
        for t in frontier:
            for r in rw.find_redexes(t):
                if r.is_surface:
                    continue
                sub = subterm_at(t, r.pos)
                arg = sub.arg if r.kind is RedexKind.BETA_LIN else sub.arg.body
                u = replace_at(t, r.pos, instantiate(sub.fun.body, arg))
                if u not in seen:
                    seen.add(u)
                    nxt.append(u)
                    if len(seen) > cap:
                        raise ResourceLimit(f"non-surface closure exceeds {cap} terms")
        frontier = nxt
        if not frontier:
            break
    return seen


def _bipartite(adj: list[list[int]], n_right: int) -> bool:
    match = [-1] * n_right

    def augment(u, seen):
        for v in adj[u]:
            if v in seen:
                continue
            seen.add(v)
            if match[v] < 0 or augment(match[v], seen):
                match[v] = u
                return True
        return False

    return all(augment(u, set()) for u in range(len(adj)))


def nonsurface_reaches(u: MultiDistribution, target: MultiDistribution, budget: int, rw: Rewriter, cap: int = 5000) -> bool:
    """Whether ``u`` rewrites to ``target`` by at most ``budget`` non-surface lifted steps.

    Non-surface steps keep weights and states and act entrywise, so this is a
    matching problem between the entries.
    """
    if len(u) != len(target):
        return False
    adj = []
    for w, p in u:
        closure = None
        row = []
        for j, (v, q) in enumerate(target):
            if abs(w - v) > EPS or not p.state.allclose(q.state):
                continue
            if closure is None:
                closure = _nonsurface_closure(p.term, budget, rw, cap)
            if q.term in closure:
                row.append(j)
        if not row:
            return False
        adj.append(row)
    return _bipartite(adj, len(target))


def check_factorization(
    p: Program,
    k: int = 3,
    seed: int = 0,
    rewriter: Rewriter | None = None,
    guards: Guards = DEFAULT_GUARDS,
    bound: int | None = None,
) -> PropertyVerdict:
    """A random general ``k``-step sequence can be reordered as surface steps then non-surface steps.

    The surface phase is searched breadth-first up to ``2k + 4`` steps; the
    non-surface phase is matched entrywise within the remaining budget.
    A miss is inconclusive when a guard was hit and a failure otherwise.
    """
    name = "factorization"
    rw = rewriter or DEFAULT
    rng = random.Random(seed)
    L = 2 * k + 4 if bound is None else bound
    schedules, target = random_general_sequence(p, k, rng, rw)
    detail = {**_describe(p), "schedules": [_sched_json(s) for s in schedules], "target": str(target)}
    if not schedules:
        return PropertyVerdict.one(name, "skipped")
    m0 = MultiDistribution.unit(p)
    visited = MDistSet(coalesced=False)
    visited.add(m0)
    frontier = [m0]
    truncated = False
    try:
        for d in range(L + 1):
            for u in frontier:
                if nonsurface_reaches(u, target, L - d, rw):
                    v = PropertyVerdict.one(name, "passed")
                    v.notes = {"surface_steps": d}
                    return v
            if d == L:
                break
            nxt = []
            for u in frontier:
                for _, w in rw.successors(u, Mode.SURFACE, guards.max_branching):
                    # surface steps never shrink the entry count
                    if len(w) > len(target):
                        continue
                    if visited.add(w):
                        nxt.append(w)
                if len(visited) > guards.max_level:
                    raise ResourceLimit(f"surface search exceeded {guards.max_level} nodes")
            frontier = nxt
            if not frontier:
                break
    except ResourceLimit as exc:
        truncated = True
        detail["reason"] = str(exc)
    if truncated:
        return PropertyVerdict.one(name, "inconclusive", detail)
    detail["reason"] = f"no factorization within {L} steps"
    # the bound itself is a guard: a miss at the bound is inconclusive
    return PropertyVerdict.one(name, "inconclusive" if frontier else "failed", detail)


# ---------------------------------------------------------------------------
# asymptotic completeness


def general_max_pr(p, d: int, rewriter: Rewriter | None = None, guards: Guards = DEFAULT_GUARDS) -> float:
    rw = rewriter or DEFAULT
    return max(snf_mass(m, rw) for level in oracle_levels(p, d, Mode.GENERAL, rw, guards) for m in level)


def strict_pr(p, D: int, rewriter: Rewriter | None = None, max_entries: int = 4096) -> float:
    rw = rewriter or DEFAULT
    if D == 0:
        return snf_mass(_as_mdist(p), rw)
    return run(p, Mode.STRICT, leftmost, D, delta=0.0, rewriter=rw, max_entries=max_entries).pr[-1]


def check_asymptotic_completeness(
    p: Program | MultiDistribution,
    d: int = 3,
    D: int = 9,
    rewriter: Rewriter | None = None,
    guards: Guards = DEFAULT_GUARDS,
) -> PropertyVerdict:
    """Leftmost strict reduction for ``D`` steps reaches at least the best Pr of any general run of depth ``d``."""
    name = "completeness"
    if D < d:
        raise ValueError("D must be at least d")
    rw = rewriter or DEFAULT
    try:
        gen = general_max_pr(p, d, rw, guards)
        strict = strict_pr(p, D, rw)
    except ResourceLimit as exc:
        return PropertyVerdict.one(name, "inconclusive", {**_describe(p), "reason": str(exc)})
    if strict < gen - EPS:
        return PropertyVerdict.one(name, "failed", {**_describe(p), "general_max": gen, "strict": strict})
    v = PropertyVerdict.one(name, "passed")
    v.notes = {"strict_gt_general": int(strict > gen + EPS)}
    return v


# ---------------------------------------------------------------------------
# invariants over random step sequences


def _random_walk(p: Program, steps: int, rng: random.Random, rw: Rewriter):
    """Yield (program, redex, result) for single-program steps along a random path."""
    q = p
    for _ in range(steps):
        reds = rw.find_redexes(q)
        if not reds:
            return
        deep = [r for r in reds if not r.is_surface]
        r = rng.choice(deep) if deep and rng.random() < 0.5 else rng.choice(reds)
        res = rw.step_at(q, r)
        yield q, r, res
        q = rng.choices([x for _, x in res], weights=[w for w, _ in res])[0]


_STEP_PROPS = ("norm", "validity", "nonsurface-state", "shape")


def check_step_invariants(p: Program, seed: int = 0, steps: int = 8, rewriter: Rewriter | None = None) -> dict[str, PropertyVerdict]:
    """Norm, validity, and what non-surface steps leave alone, along one random path."""
    rw = rewriter or DEFAULT
    rng = random.Random(seed)
    fails: dict[str, dict] = {}
    deep_steps = 0
    try:
        for q, r, res in _random_walk(p, steps, rng, rw):
            for _, x in res:
                if abs(x.state.norm() - 1) > EPS and "norm" not in fails:
                    fails["norm"] = {**_describe(q), "redex": r.to_json(), "norm": x.state.norm()}
                try:
                    check_raw(x.state, x.term)
                except ValueError as exc:
                    fails.setdefault("validity", {**_describe(q), "redex": r.to_json(), "reason": str(exc)})
            if not r.is_surface:
                deep_steps += 1
                (_, x), = res.entries
                if not np.array_equal(x.state.amp, q.state.amp):
                    fails.setdefault("nonsurface-state", {**_describe(q), "redex": r.to_json()})
                same_top = type(x.term) is type(q.term)
                same_root = (rw.redex_kind(x.term) is None) == (rw.redex_kind(q.term) is None)
                if not (same_top and same_root):
                    fails.setdefault("shape", {**_describe(q), "redex": r.to_json()})
    except ResourceLimit as exc:
        return {k: PropertyVerdict.one(k, "inconclusive", {**_describe(p), "reason": str(exc)}) for k in _STEP_PROPS}
    out = {
        k: PropertyVerdict.one(k, "failed", fails[k]) if k in fails else PropertyVerdict.one(k, "passed")
        for k in _STEP_PROPS
    }
    out["nonsurface-state"].notes["nonsurface_steps"] = deep_steps
    return out


def check_mass(p: Program, seed: int = 0, steps: int = 6, rewriter: Rewriter | None = None) -> PropertyVerdict:
    """Lifted steps under random schedules in every mode keep the total weight."""
    from .rewrite import random_scheduler

    rw = rewriter or DEFAULT
    rng = random.Random(seed)
    mode = rng.choice(list(Mode))
    sched = random_scheduler(rng.getrandbits(32))
    m = MultiDistribution.unit(p)
    try:
        for _ in range(steps):
            if not rw.can_move(m, mode):
                break
            before = m.mass()
            m = rw.lift_step(m, sched(rw, m, mode), mode)
            if abs(m.mass() - before) > EPS:
                return PropertyVerdict.one("mass", "failed", {**_describe(p), "mode": mode.value, "mass": m.mass()})
    except ResourceLimit as exc:
        return PropertyVerdict.one("mass", "inconclusive", {**_describe(p), "reason": str(exc)})
    return PropertyVerdict.one("mass", "passed")


# ---------------------------------------------------------------------------
# commutation of quantum operations


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def _after_removal(j: int, i: int) -> int:
    """Index of qubit ``j`` once qubit ``i`` has been deleted."""
    return j - 1 if j > i else j


def _pi(q: QuantumState, i: int, b: int) -> QuantumState:
    return project(q, i, b)


def _rho(q: QuantumState, i: int, b: int) -> float:
    return outcome_probability(q, i, b)


def _nu(q: QuantumState) -> QuantumState:
    return new_qubit(q, max_qubits=64)


# identity name -> (minimum qubits, checker(rng, state) -> max deviation)
def _commutation_cases():
    def distinct(rng, n, k):
        return rng.sample(range(n), k)

    def u1(rng, n, nq):
        return random_unitary(2, nq)

    def u2(rng, n, nq):
        return random_unitary(4, nq)

    def nu_unary(rng, q, nq):
        (i,) = distinct(rng, q.n, 1)
        A = u1(rng, q.n, nq)
        return _diff(_nu(apply_unary(q, A, i)), apply_unary(_nu(q), A, i))

    def nu_binary(rng, q, nq):
        i, j = distinct(rng, q.n, 2)
        B = u2(rng, q.n, nq)
        return _diff(_nu(apply_binary(q, B, i, j)), apply_binary(_nu(q), B, i, j))

    def nu_proj(rng, q, nq):
        (i,) = distinct(rng, q.n, 1)
        b = rng.randint(0, 1)
        return _diff(_nu(_pi(q, i, b)), _pi(_nu(q), i, b))

    def unary_unary(rng, q, nq):
        i, j = distinct(rng, q.n, 2)
        A, B = u1(rng, q.n, nq), u1(rng, q.n, nq)
        return _diff(apply_unary(apply_unary(q, B, j), A, i), apply_unary(apply_unary(q, A, i), B, j))

    def unary_binary(rng, q, nq):
        k, i, j = distinct(rng, q.n, 3)
        A, B = u1(rng, q.n, nq), u2(rng, q.n, nq)
        return _diff(apply_unary(apply_binary(q, B, i, j), A, k), apply_binary(apply_unary(q, A, k), B, i, j))

    def binary_binary(rng, q, nq):
        k, l, i, j = distinct(rng, q.n, 4)
        A, B = u2(rng, q.n, nq), u2(rng, q.n, nq)
        return _diff(
            apply_binary(apply_binary(q, B, i, j), A, k, l), apply_binary(apply_binary(q, A, k, l), B, i, j)
        )

    def unary_proj(rng, q, nq):
        i, j = distinct(rng, q.n, 2)
        A, b = u1(rng, q.n, nq), rng.randint(0, 1)
        lhs = apply_unary(_pi(q, j, b), A, _after_removal(i, j))
        rhs = _pi(apply_unary(q, A, i), j, b)
        return _diff(lhs, rhs)

    def binary_proj(rng, q, nq):
        k, l, j = distinct(rng, q.n, 3)
        A, b = u2(rng, q.n, nq), rng.randint(0, 1)
        lhs = apply_binary(_pi(q, j, b), A, _after_removal(k, j), _after_removal(l, j))
        rhs = _pi(apply_binary(q, A, k, l), j, b)
        return _diff(lhs, rhs)

    def proj_proj(rng, q, nq):
        i, j = distinct(rng, q.n, 2)
        b, c = rng.randint(0, 1), rng.randint(0, 1)
        lhs = _pi(_pi(q, j, c), _after_removal(i, j), b)
        rhs = _pi(_pi(q, i, b), _after_removal(j, i), c)
        return _diff(lhs, rhs)

    def rho_nu(rng, q, nq):
        (i,) = distinct(rng, q.n, 1)
        b = rng.randint(0, 1)
        return abs(_rho(_nu(q), i, b) - _rho(q, i, b))

    def rho_unary(rng, q, nq):
        i, j = distinct(rng, q.n, 2)
        b = rng.randint(0, 1)
        return abs(_rho(apply_unary(q, u1(rng, q.n, nq), j), i, b) - _rho(q, i, b))

    def rho_binary(rng, q, nq):
        i, j, k = distinct(rng, q.n, 3)
        b = rng.randint(0, 1)
        return abs(_rho(apply_binary(q, u2(rng, q.n, nq), j, k), i, b) - _rho(q, i, b))

    def rho_exchange(rng, q, nq):
        i, j = distinct(rng, q.n, 2)
        b, c = rng.randint(0, 1), rng.randint(0, 1)
        lhs = _rho(q, j, c) * _rho(_pi(q, j, c), _after_removal(i, j), b)
        rhs = _rho(_pi(q, i, b), _after_removal(j, i), c) * _rho(q, i, b)
        return abs(lhs - rhs)

    return {
        "new/unary": (1, nu_unary),
        "new/binary": (2, nu_binary),
        "new/measure": (1, nu_proj),
        "unary/unary": (2, unary_unary),
        "unary/binary": (3, unary_binary),
        "binary/binary": (4, binary_binary),
        "unary/measure": (2, unary_proj),
        "binary/measure": (3, binary_proj),
        "measure/measure": (2, proj_proj),
        "prob/new": (1, rho_nu),
        "prob/unary": (2, rho_unary),
        "prob/binary": (3, rho_binary),
        "prob/exchange": (2, rho_exchange),
    }


def _diff(a: QuantumState, b: QuantumState) -> float:
    if a.n != b.n:
        return float("inf")
    return float(np.max(np.abs(a.amp - b.amp)))


COMMUTATION_IDENTITIES = _commutation_cases()


def check_commutation(name: str, seed: int, max_n: int = 5) -> PropertyVerdict:
    """One random instance of a commutation identity between quantum operations."""
    min_n, fn = COMMUTATION_IDENTITIES[name]
    rng = random.Random(seed)
    nq = np.random.default_rng(rng.getrandbits(64))
    q = QuantumState.random(rng.randint(min_n, max_n), nq)
    dev = fn(rng, q, nq)
    prop = f"commute:{name}"
    if dev > EPS:
        return PropertyVerdict.one(prop, "failed", {"seed": seed, "n": q.n, "deviation": dev})
    return PropertyVerdict.one(prop, "passed")


# ---------------------------------------------------------------------------
# suites

SUITE_PROFILES = ("default", "quantum-heavy", "beta-heavy", "nonsurface")


def instances(count: int, size_: int, seed: int, accept=None, profiles: Sequence[str] = SUITE_PROFILES, max_tries: int = 200):
    """``count`` generated programs (seed, size, profile, program) cycling through the profiles."""
    master = random.Random(seed)
    out = []
    misses = 0
    while len(out) < count:
        s = master.getrandbits(48)
        sz = master.randint(1, size_)
        prof = profiles[len(out) % len(profiles)]
        p = gen_program(sz, s, prof)
        if accept is None or accept(p):
            out.append((s, sz, prof, p))
            misses = 0
        else:
            misses += 1
            if misses > max_tries * 50:
                raise RuntimeError("generator could not satisfy the acceptance predicate")
    return out


def _shrink(check: Callable[[Program], PropertyVerdict], seed: int, sz: int, prof: str, accept) -> dict | None:
    """Smallest regenerated instance (same seed, smaller size) that still fails."""
    best = None
    for smaller in range(1, sz):
        p = gen_program(smaller, seed, prof)
        if accept is not None and not accept(p):
            continue
        v = check(p)
        if v.failed:
            best = v.counterexamples[0]
            break
    return best


def _run_instances(name: str, items, check, accept=None, shrink: bool = True) -> PropertyVerdict:
    total = PropertyVerdict(name)
    for seed, sz, prof, p in items:
        v = check(p, seed)
        v.property = name
        for cx in v.counterexamples:
            cx.update(seed=seed, size=sz, profile=prof)
            if shrink and cx["outcome"] == "failed":
                small = _shrink(lambda q: check(q, seed), seed, sz, prof, accept)
                if small is not None:
                    cx["shrunk"] = small
        total = total + v
    return total


def suite_diamond(count: int = 1000, size_: int = 12, seed: int = 0, rewriter: Rewriter | None = None) -> PropertyVerdict:
    rw = rewriter or DEFAULT

    def accept(p):
        return len(rw.surface_redexes(p)) >= 2

    items = instances(count, size_, seed, accept)
    return _run_instances("diamond", items, lambda p, s: check_pointed_diamond(p, rw), accept)


def suite_random_descent(count: int = 300, size_: int = 12, seed: int = 0, depth: int = 6, rewriter: Rewriter | None = None) -> PropertyVerdict:
    rw = rewriter or DEFAULT

    def accept(p):
        # a genuine choice at the first step
        return len(rw.surface_redexes(p)) >= 2

    items = instances(count, size_, seed, accept)
    return _run_instances("random-descent", items, lambda p, s: check_random_descent(p, depth, rw), accept)


def suite_factorization(count: int = 200, size_: int = 12, seed: int = 0, max_k: int = 4, rewriter: Rewriter | None = None) -> PropertyVerdict:
    rw = rewriter or DEFAULT

    def accept(p):
        reds = rw.find_redexes(p)
        return any(not r.is_surface for r in reds) and any(r.is_surface for r in reds)

    items = instances(count, size_, seed, accept)
    return _run_instances(
        "factorization", items, lambda p, s: check_factorization(p, 1 + s % max_k, s, rw), accept
    )


def suite_completeness(count: int = 200, size_: int = 12, seed: int = 0, d: int = 3, D: int = 9, rewriter: Rewriter | None = None) -> PropertyVerdict:
    rw = rewriter or DEFAULT
    items = instances(count, size_, seed)
    return _run_instances("completeness", items, lambda p, s: check_asymptotic_completeness(p, d, D, rw))


def suite_invariants(count: int = 1000, size_: int = 12, seed: int = 0, rewriter: Rewriter | None = None) -> list[PropertyVerdict]:
    rw = rewriter or DEFAULT
    totals = {k: PropertyVerdict(k) for k in ("mass",) + _STEP_PROPS}
    items = instances(count, size_, seed, accept=lambda p: bool(rw.find_redexes(p)))
    # a second batch where a non-surface step is always available
    deep = instances(
        count, size_, seed + 1, accept=lambda p: any(not r.is_surface for r in rw.find_redexes(p))
    )
    for batch, props in ((items, ("norm", "validity")), (deep, ("nonsurface-state", "shape"))):
        for s, sz, prof, p in batch:
            for k, v in check_step_invariants(p, s, rewriter=rw).items():
                if k not in props:
                    continue
                for cx in v.counterexamples:
                    cx.update(seed=s, size=sz, profile=prof)
                totals[k] = totals[k] + v
    for s, sz, prof, p in items:
        totals["mass"] = totals["mass"] + check_mass(p, s, rewriter=rw)
    out = list(totals.values())
    master = random.Random(seed)
    for name in COMMUTATION_IDENTITIES:
        v = PropertyVerdict(f"commute:{name}")
        for _ in range(count):
            v = v + check_commutation(name, master.getrandbits(48))
        out.append(v)
    return out


SUITES = {
    "diamond": suite_diamond,
    "random-descent": suite_random_descent,
    "factorization": suite_factorization,
    "completeness": suite_completeness,
    "invariants": suite_invariants,
}


def run_suite(name: str, count: int | None = None, size_: int = 12, seed: int = 0, **kw) -> list[PropertyVerdict]:
    fn = SUITES[name]
    args = {"size_": size_, "seed": seed, **kw}
    if count is not None:
        args["count"] = count
    out = fn(**args)
    return out if isinstance(out, list) else [out]


__all__ = [
    "COMMUTATION_IDENTITIES",
    "ConvergenceReport",
    "Guards",
    "PropertyVerdict",
    "SUITES",
    "check_asymptotic_completeness",
    "check_commutation",
    "check_factorization",
    "check_mass",
    "check_pointed_diamond",
    "check_random_descent",
    "check_step_invariants",
    "estimate_limit",
    "general_max_pr",
    "instances",
    "oracle_levels",
    "oracle_tree",
    "run_suite",
    "snf_mass",
    "strict_pr",
]
