"""Random valid programs for property checks.

Terms are built so that validity holds by construction: each linear binder
is consumed exactly once at a surface position of its body, registers are
fresh and only placed at absolute surface positions, and bang bodies never
see linear variables or registers.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np

from .program import Program, canonicalize
from .quantum import QuantumState
from .syntax import (
    NEW,
    App,
    Bang,
    BangLam,
    BVar,
    Gate,
    LinLam,
    Meas,
    Reg,
    Term,
    Var,
    make_pair,
)

FREE_NAMES = ("a", "b", "c")


@dataclass(frozen=True)
class Profile:
    lam: float = 1.0
    banglam: float = 0.6
    app: float = 1.5
    bang: float = 0.8
    meas: float = 0.5
    beta: float = 1.2
    bang_beta: float = 0.8
    unary: float = 0.6
    binary: float = 0.3
    pair: float = 0.4
    leaf_new: float = 0.6
    leaf_reg: float = 0.4
    leaf_free: float = 1.0
    leaf_gate: float = 0.1
    qmeas: float = 0.5
    qgate: float = 0.5
    max_registers: int = 3


PROFILES = {
    "default": Profile(),
    "quantum-heavy": Profile(qmeas=2.0, qgate=1.5, meas=1.0, unary=1.2, binary=0.8, leaf_new=1.5, leaf_reg=0.8, banglam=0.3, bang_beta=0.4),
    "beta-heavy": Profile(meas=0.15, unary=0.2, binary=0.1, leaf_new=0.2, leaf_reg=0.1, bang=1.6, bang_beta=1.6, beta=1.6),
    "nonsurface": Profile(bang=2.0, bang_beta=1.8, beta=1.8, meas=0.3, unary=0.3, binary=0.1),
}


def _min_size(n_lin: int) -> int:
    return max(1, 2 * n_lin - 1)


@dataclass(frozen=True)
class _Child:
    takes_lin: bool = True
    binds: str | None = None  # "lin" or "bang"
    surface: bool = True  # False for bang bodies and meas branches


# production -> (node overhead, children)
_PRODUCTIONS = {
    "lam": (1, [_Child(binds="lin")]),
    "banglam": (1, [_Child(binds="bang")]),
    "unary": (2, [_Child()]),
    "app": (1, [_Child(), _Child()]),
    "bang": (1, [_Child(takes_lin=False, surface=False)]),
    "meas": (1, [_Child(), _Child(takes_lin=False, surface=False), _Child(takes_lin=False, surface=False)]),
    "beta": (2, [_Child(binds="lin"), _Child()]),
    "bang_beta": (3, [_Child(binds="bang"), _Child(takes_lin=False, surface=False)]),
    "pair": (4, [_Child(), _Child()]),
    "binary": (6, [_Child(), _Child()]),
    "qmeas": (2, [_Child(takes_lin=False, surface=False), _Child(takes_lin=False, surface=False)]),
    "qgate": (3, []),
}


class _TermGen:
    def __init__(self, rng: random.Random, profile: Profile):
        self.rng = rng
        self.p = profile
        self.nregs = 0

    def pick(self, options: list[tuple[float, str]]) -> str:
        total = sum(w for w, _ in options)
        x = self.rng.random() * total
        for w, name in options:
            x -= w
            if x <= 0:
                return name
        return options[-1][1]

    def allocate(self, total: int, mins: list[int]) -> list[int] | None:
        extra = total - sum(mins)
        if extra < 0:
            return None
        cuts = sorted(self.rng.randint(0, extra) for _ in range(len(mins) - 1))
        bounds = [0] + cuts + [extra]
        return [m + bounds[k + 1] - bounds[k] for k, m in enumerate(mins)]

    def plan(self, kind: str, s: int, lin: list[int], surface: bool):
        """Assign linear variables and sizes to the children of a production."""
        overhead, kids = _PRODUCTIONS[kind]
        takers = [k for k, c in enumerate(kids) if c.takes_lin]
        if lin and not takers:
            return None
        for attempt in range(7):
            assign = [[] for _ in kids]
            for k, v in enumerate(lin):
                # last attempt spreads the variables round-robin
                slot = takers[k % len(takers)] if attempt == 6 else self.rng.choice(takers)
                assign[slot].append(v)
            mins = [_min_size(len(a) + (c.binds == "lin")) for a, c in zip(assign, kids)]
            sizes = self.allocate(s - overhead, mins)
            if sizes is not None:
                return assign, sizes
        return None

    def leaf(self, depth: int, lin: list[int], bvars: list[int], surface: bool) -> Term:
        if lin:
            (v,) = lin
            return BVar(depth - 1 - v)
        opts = [(self.p.leaf_free, "free"), (self.p.leaf_new, "new"), (self.p.leaf_gate, "gate")]
        if bvars:
            opts.append((1.5, "bvar"))
        if surface and self.nregs < self.p.max_registers:
            opts.append((self.p.leaf_reg, "reg"))
        kind = self.pick(opts)
        if kind == "free":
            return Var(self.rng.choice(FREE_NAMES))
        if kind == "new":
            return NEW
        if kind == "gate":
            return Gate(self.rng.choice(("H", "NOT", "CNOT")))
        if kind == "bvar":
            return BVar(depth - 1 - self.rng.choice(bvars))
        return self.fresh_reg()

    def reg_or_new(self) -> Term:
        if self.nregs < self.p.max_registers and self.rng.random() < 0.6:
            return self.fresh_reg()
        return NEW

    def fresh_reg(self) -> Term:
        self.nregs += 1
        return Reg(self.nregs - 1)

    def term(self, s: int, depth: int, lin: list[int], bvars: list[int], surface: bool) -> Term:
        n = len(lin)
        if s <= 1 or (n == 1 and self.rng.random() < 0.2):
            return self.leaf(depth, lin, bvars, surface)
        weights = {
            "lam": self.p.lam,
            "banglam": self.p.banglam,
            "app": self.p.app,
            "bang": self.p.bang if not lin else 0,
            "meas": self.p.meas,
            "beta": self.p.beta,
            "bang_beta": self.p.bang_beta,
            "pair": self.p.pair,
            "unary": self.p.unary if surface else 0,
            "binary": self.p.binary if surface else 0,
            "qmeas": self.p.qmeas if surface and not lin else 0,
            "qgate": self.p.qgate if surface and not lin and s == 3 else 0,
        }
        options = [(w, k) for k, w in weights.items() if w > 0]
        while options:
            kind = self.pick(options)
            options = [o for o in options if o[1] != kind]
            planned = self.plan(kind, s, lin, surface)
            if planned is not None:
                return self.build(kind, planned, depth, lin, bvars, surface)
        return self.leaf(depth, lin, bvars, surface)

    def build(self, kind, planned, depth, lin, bvars, surface) -> Term:
        assign, sizes = planned
        _, kids = _PRODUCTIONS[kind]
        built = []
        for a, sz, c in zip(assign, sizes, kids):
            d, l, b = depth, a, bvars
            if c.binds == "lin":
                d, l = depth + 1, a + [depth]
            elif c.binds == "bang":
                d, b = depth + 1, bvars + [depth]
            if kind == "binary" and not l and self.nregs < self.p.max_registers and self.rng.random() < 0.4:
                built.append(self.fresh_reg() if self.rng.random() < 0.5 else NEW)
                continue
            built.append(self.term(sz, d, l, b, surface and c.surface))
        if kind == "qmeas":
            return Meas(self.reg_or_new(), built[0], built[1])
        if kind == "qgate":
            return App(Gate("H" if self.rng.random() < 0.7 else "NOT"), self.reg_or_new())
        if kind == "lam":
            return LinLam("x", built[0])
        if kind == "banglam":
            return BangLam("y", built[0])
        if kind == "unary":
            return App(Gate("H" if self.rng.random() < 0.7 else "NOT"), built[0])
        if kind == "app":
            return App(built[0], built[1])
        if kind == "bang":
            return Bang(built[0])
        if kind == "meas":
            return Meas(*built)
        if kind == "beta":
            return App(LinLam("x", built[0]), built[1])
        if kind == "bang_beta":
            return App(BangLam("y", built[0]), Bang(built[1]))
        if kind == "pair":
            return make_pair(built[0], built[1])
        return App(Gate("CNOT"), make_pair(built[0], built[1]))


def gen_term(size: int, rng: random.Random, profile: str | Profile = "default") -> tuple[Term, int]:
    """A valid term of at most ``size`` nodes and the number of registers it uses."""
    prof = PROFILES[profile] if isinstance(profile, str) else profile
    g = _TermGen(rng, prof)
    t = g.term(max(1, size), 0, [], [], True)
    return t, g.nregs


def gen_program(size: int, seed: int, profile: str | Profile = "default") -> Program:
    """A valid program with a random (complex Gaussian, normalized) memory."""
    rng = random.Random(seed)
    term, nregs = gen_term(size, rng, profile)
    nprng = np.random.default_rng(rng.getrandbits(64))
    state = QuantumState.random(nregs, nprng) if nregs else QuantumState.empty()
    return canonicalize(state, term)


def gen_programs(count: int, size: int, seed: int, profile: str | Profile = "default", accept=None, max_tries: int = 200):
    """``count`` generated programs satisfying ``accept``, one derived seed each."""
    master = random.Random(seed)
    out = []
    tries = 0
    while len(out) < count:
        s = master.getrandbits(48)
        p = gen_program(master.randint(1, size), s, profile)
        tries += 1
        if accept is None or accept(p):
            out.append((s, p))
            tries = 0
        elif tries > max_tries * max(1, count):
            raise RuntimeError("generator could not satisfy the acceptance predicate")
    return out
