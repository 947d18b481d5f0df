"""Terms of the untyped quantum lambda-calculus.

Bound variables are de Bruijn indices, so alpha-equivalent terms are equal
as Python values. Binder names survive only as printing hints and do not
take part in equality or hashing.

A position is a tuple of child selectors from the root:
``"fun"``/``"arg"`` for applications, ``"body"`` for abstractions and bangs,
``"subject"``/``"branch0"``/``"branch1"`` for measurements.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterator

from .gates import DEFAULT_GATES, GateTable

Position = tuple


class Term:
    __slots__ = ()

    def __str__(self):
        return print_term(self)


@dataclass(frozen=True, slots=True)
class Var(Term):
    """Free variable, referenced by name."""

    name: str


@dataclass(frozen=True, slots=True)
class BVar(Term):
    """Bound variable as a de Bruijn index (0 = innermost binder)."""

    index: int
    hint: str = field(default="x", compare=False)


@dataclass(frozen=True, slots=True)
class Bang(Term):
    body: Term


@dataclass(frozen=True, slots=True)
class LinLam(Term):
    hint: str = field(compare=False)
    body: Term


@dataclass(frozen=True, slots=True)
class BangLam(Term):
    hint: str = field(compare=False)
    body: Term


@dataclass(frozen=True, slots=True)
class App(Term):
    fun: Term
    arg: Term


@dataclass(frozen=True, slots=True)
class Reg(Term):
    index: int


@dataclass(frozen=True, slots=True)
class Gate(Term):
    name: str


@dataclass(frozen=True, slots=True)
class New(Term):
    pass


@dataclass(frozen=True, slots=True)
class Meas(Term):
    subject: Term
    branch0: Term
    branch1: Term


NEW = New()

# selector -> whether entering it leaves the surface
NONSURFACE_SELECTORS = {"branch0", "branch1"}


def children(t: Term) -> list[tuple[str, Term]]:
    if isinstance(t, App):
        return [("fun", t.fun), ("arg", t.arg)]
    if isinstance(t, (LinLam, BangLam, Bang)):
        return [("body", t.body)]
    if isinstance(t, Meas):
        return [("subject", t.subject), ("branch0", t.branch0), ("branch1", t.branch1)]
    return []


def enters_surface(parent: Term, selector: str) -> bool:
    """Whether descending from ``parent`` through ``selector`` stays on the surface."""
    if isinstance(parent, Bang):
        return False
    return selector not in NONSURFACE_SELECTORS


def binds(t: Term) -> bool:
    return isinstance(t, (LinLam, BangLam))


def _rebuild(t: Term, kids: list[Term]) -> Term:
    if isinstance(t, App):
        return App(kids[0], kids[1])
    if isinstance(t, LinLam):
        return LinLam(t.hint, kids[0])
    if isinstance(t, BangLam):
        return BangLam(t.hint, kids[0])
    if isinstance(t, Bang):
        return Bang(kids[0])
    if isinstance(t, Meas):
        return Meas(kids[0], kids[1], kids[2])
    return t


def subterm_at(t: Term, pos: Position) -> Term:
    for sel in pos:
        for name, child in children(t):
            if name == sel:
                t = child
                break
        else:
            raise KeyError(f"invalid position {pos!r}")
    return t


def replace_at(t: Term, pos: Position, new: Term) -> Term:
    """Plug ``new`` into the hole at ``pos``; ``new`` lives in the hole's binder scope."""
    if not pos:
        return new
    sel, rest = pos[0], pos[1:]
    kids = []
    found = False
    for name, child in children(t):
        if name == sel:
            child = replace_at(child, rest, new)
            found = True
        kids.append(child)
    if not found:
        raise KeyError(f"invalid position selector {sel!r}")
    return _rebuild(t, kids)


def is_surface_position(t: Term, pos: Position) -> bool:
    for sel in pos:
        if not enters_surface(t, sel):
            return False
        t = subterm_at(t, (sel,))
    return True


def occurrences(t: Term, pos: Position = (), surface: bool = True) -> Iterator[tuple[Position, Term, bool]]:
    yield pos, t, surface
    for sel, child in children(t):
        yield from occurrences(child, pos + (sel,), surface and enters_surface(t, sel))


def enumerate_occurrences(t: Term) -> list[tuple[Position, Term, bool]]:
    """Every subterm with its position and surface flag, in preorder."""
    return list(occurrences(t))


# ---------------------------------------------------------------------------
# de Bruijn plumbing


def shift(t: Term, d: int, cutoff: int = 0) -> Term:
    if d == 0:
        return t
    if isinstance(t, BVar):
        if t.index >= cutoff:
            if t.index + d < 0:
                raise ValueError("negative de Bruijn index after shift")
            return BVar(t.index + d, t.hint)
        return t
    if isinstance(t, (LinLam, BangLam)):
        return _rebuild(t, [shift(t.body, d, cutoff + 1)])
    kids = children(t)
    if not kids:
        return t
    return _rebuild(t, [shift(c, d, cutoff) for _, c in kids])


def _subst_index(t: Term, j: int, s: Term) -> Term:
    if isinstance(t, BVar):
        return s if t.index == j else t
    if isinstance(t, (LinLam, BangLam)):
        return _rebuild(t, [_subst_index(t.body, j + 1, shift(s, 1))])
    kids = children(t)
    if not kids:
        return t
    return _rebuild(t, [_subst_index(c, j, s) for _, c in kids])


def instantiate(body: Term, arg: Term) -> Term:
    """Substitute ``arg`` for the binder of ``body`` (the body of an abstraction)."""
    return shift(_subst_index(body, 0, shift(arg, 1)), -1)


def has_loose_index(t: Term, j: int = 0) -> bool:
    if isinstance(t, BVar):
        return t.index == j
    if isinstance(t, (LinLam, BangLam)):
        return has_loose_index(t.body, j + 1)
    return any(has_loose_index(c, j) for _, c in children(t))


def subst(body: Term, var: str, arg: Term) -> Term:
    """Capture-avoiding substitution of ``arg`` for the free variable ``var``."""
    if isinstance(body, Var):
        return arg if body.name == var else body
    if isinstance(body, (LinLam, BangLam)):
        return _rebuild(body, [_subst_under(body.body, var, arg, 1)])
    kids = children(body)
    if not kids:
        return body
    return _rebuild(body, [subst(c, var, arg) for _, c in kids])


def _subst_under(body: Term, var: str, arg: Term, depth: int) -> Term:
    if isinstance(body, Var):
        return shift(arg, depth) if body.name == var else body
    if isinstance(body, (LinLam, BangLam)):
        return _rebuild(body, [_subst_under(body.body, var, arg, depth + 1)])
    kids = children(body)
    if not kids:
        return body
    return _rebuild(body, [_subst_under(c, var, arg, depth) for _, c in kids])


def map_registers(t: Term, f: Callable[[int], int]) -> Term:
    if isinstance(t, Reg):
        return Reg(f(t.index))
    kids = children(t)
    if not kids:
        return t
    return _rebuild(t, [map_registers(c, f) for _, c in kids])


def free_var_occurrences(t: Term) -> Counter:
    return Counter(s.name for _, s, _ in occurrences(t) if isinstance(s, Var))


def free_vars(t: Term) -> set[str]:
    return set(free_var_occurrences(t))


def register_occurrences(t: Term) -> Counter:
    return Counter(s.index for _, s, _ in occurrences(t) if isinstance(s, Reg))


def registers(t: Term) -> set[int]:
    return set(register_occurrences(t))


def register_order(t: Term) -> list[int]:
    """Register indices in preorder of occurrence."""
    return [s.index for _, s, _ in occurrences(t) if isinstance(s, Reg)]


def size(t: Term) -> int:
    return sum(1 for _ in occurrences(t))


# ---------------------------------------------------------------------------
# pairs


def make_pair(a: Term, b: Term, hint: str = "f") -> Term:
    """``<a, b>`` as ``\\f. f a b`` with ``f`` fresh and linear."""
    return LinLam(hint, App(App(BVar(0, hint), shift(a, 1)), shift(b, 1)))


def make_tuple(items: list[Term]) -> Term:
    if len(items) < 2:
        raise ValueError("tuples need at least two components")
    if len(items) == 2:
        return make_pair(items[0], items[1])
    return make_pair(items[0], make_tuple(items[1:]))


def match_pair(t: Term) -> tuple[Term, Term] | None:
    """Components of an expanded pair, or None if ``t`` is not one."""
    if not isinstance(t, LinLam):
        return None
    body = t.body
    if not (isinstance(body, App) and isinstance(body.fun, App)):
        return None
    head = body.fun.fun
    if not (isinstance(head, BVar) and head.index == 0):
        return None
    a, b = body.fun.arg, body.arg
    if has_loose_index(a) or has_loose_index(b):
        return None
    return shift(a, -1), shift(b, -1)


# ---------------------------------------------------------------------------
# validity


@dataclass(frozen=True)
class Violation:
    kind: str
    position: Position
    detail: str


@dataclass
class ValidityReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def __str__(self):
        if self.ok:
            return "valid"
        lines = ["invalid:"]
        for v in self.violations:
            where = "/".join(v.position) or "<root>"
            lines.append(f"  {v.kind} at {where}: {v.detail}")
        return "\n".join(lines)


def _bound_occurrences(body: Term, depth: int = 0, pos: Position = (), surface: bool = True):
    """Occurrences (position, surface) of the variable bound just above ``body``."""
    if isinstance(body, BVar):
        if body.index == depth:
            yield pos, surface
        return
    for sel, child in children(body):
        d = depth + 1 if binds(body) else depth
        yield from _bound_occurrences(child, d, pos + (sel,), surface and enters_surface(body, sel))


def validate(t: Term) -> ValidityReport:
    """Check no-cloning of registers and linearity of linear binders."""
    report = ValidityReport()
    seen: dict[int, Position] = {}
    for pos, sub, surface in occurrences(t):
        if isinstance(sub, Reg):
            if sub.index in seen:
                report.violations.append(
                    Violation("duplicate-register", pos, f"r{sub.index} already occurs at {'/'.join(seen[sub.index]) or '<root>'}")
                )
            else:
                seen[sub.index] = pos
            if not surface:
                report.violations.append(Violation("nonsurface-register", pos, f"r{sub.index} is under a bang or in a meas branch"))
        elif isinstance(sub, LinLam):
            occ = list(_bound_occurrences(sub.body))
            if len(occ) != 1:
                report.violations.append(
                    Violation("nonlinear-binder", pos, f"linear variable {sub.hint} occurs {len(occ)} times")
                )
            elif not occ[0][1]:
                report.violations.append(
                    Violation("nonsurface-linear-variable", pos + ("body",) + occ[0][0], f"linear variable {sub.hint} is not at a surface position")
                )
    return report


def is_valid(t: Term) -> bool:
    return validate(t).ok


# ---------------------------------------------------------------------------
# concrete syntax

KEYWORDS = {"new", "meas", "let", "in"}
_REG_RE = re.compile(r"r\d+$")

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<gate>U\[(?P<gname>[A-Za-z_][A-Za-z0-9_]*)\])
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<sym>[\\λ!.()<>,=])
    """,
    re.VERBOSE,
)


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {message}" if line else message)
        self.message = message
        self.line = line
        self.col = col


@dataclass
class _Tok:
    kind: str
    value: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    i, line, line_start = 0, 1, 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if not m:
            raise ParseError(f"unexpected character {text[i]!r}", line, i - line_start + 1)
        kind = m.lastgroup if m.lastgroup != "gname" else "gate"
        col = i - line_start + 1
        if kind == "gate":
            toks.append(_Tok("gate", m.group("gname"), line, col))
        elif kind == "ident":
            word = m.group("ident")
            if word in KEYWORDS:
                toks.append(_Tok(word, word, line, col))
            elif _REG_RE.match(word):
                toks.append(_Tok("reg", word[1:], line, col))
            else:
                toks.append(_Tok("ident", word, line, col))
        elif kind == "sym":
            s = m.group("sym")
            toks.append(_Tok("\\" if s == "λ" else s, s, line, col))
        chunk = m.group(0)
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = i + chunk.rfind("\n") + 1
        i = m.end()
    toks.append(_Tok("eof", "", line, i - line_start + 1))
    return toks


_ATOM_START = {"ident", "reg", "gate", "new", "meas", "(", "<", "!"}


class _Parser:
    def __init__(self, text: str, gates: GateTable):
        self.toks = _tokenize(text)
        self.i = 0
        self.gates = gates

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg, tok=None):
        tok = tok or self.tok
        return ParseError(msg, tok.line, tok.col)

    def expect(self, kind) -> _Tok:
        tok = self.tok
        if tok.kind != kind:
            shown = tok.value or tok.kind
            raise self.error(f"expected {kind!r}, found {shown!r}")
        self.i += 1
        return tok

    def parse(self) -> Term:
        t = self.term([])
        if self.tok.kind != "eof":
            raise self.error(f"unexpected {self.tok.value!r}")
        return t

    def term(self, scope: list[str]) -> Term:
        if self.tok.kind == "\\":
            return self.lam(scope)
        if self.tok.kind == "let":
            return self.let(scope)
        return self.app(scope)

    def lam(self, scope):
        self.expect("\\")
        if self.tok.kind == "!":
            self.i += 1
            name = self.expect("ident").value
            self.expect(".")
            return BangLam(name, self.term(scope + [name]))
        names = [self.expect("ident").value]
        while self.tok.kind == "ident":
            names.append(self.expect("ident").value)
        self.expect(".")
        body = self.term(scope + names)
        for name in reversed(names):
            body = LinLam(name, body)
        return body

    def let(self, scope):
        self.expect("let")
        self.expect("<")
        x = self.expect("ident").value
        self.expect(",")
        y = self.expect("ident").value
        self.expect(">")
        self.expect("=")
        bound = self.term(scope)
        self.expect("in")
        body = self.term(scope + [x, y])
        return App(bound, LinLam(x, LinLam(y, body)))

    def app(self, scope):
        if self.tok.kind not in _ATOM_START:
            shown = self.tok.value or self.tok.kind
            raise self.error(f"expected a term, found {shown!r}")
        t = self.atom(scope)
        while True:
            if self.tok.kind in _ATOM_START:
                t = App(t, self.atom(scope))
            elif self.tok.kind in ("\\", "let"):
                t = App(t, self.term(scope))
                return t
            else:
                return t

    def atom(self, scope):
        tok = self.tok
        if tok.kind == "ident":
            self.i += 1
            for depth, name in enumerate(reversed(scope)):
                if name == tok.value:
                    return BVar(depth, name)
            return Var(tok.value)
        if tok.kind == "reg":
            self.i += 1
            return Reg(int(tok.value))
        if tok.kind == "gate":
            self.i += 1
            if tok.value not in self.gates:
                raise self.error(f"unknown gate {tok.value!r}", tok)
            return Gate(tok.value)
        if tok.kind == "new":
            self.i += 1
            return NEW
        if tok.kind == "!":
            self.i += 1
            if self.tok.kind not in _ATOM_START:
                raise self.error("'!' must be followed by an atom")
            return Bang(self.atom(scope))
        if tok.kind == "meas":
            self.i += 1
            self.expect("(")
            p = self.term(scope)
            self.expect(",")
            m = self.term(scope)
            self.expect(",")
            n = self.term(scope)
            self.expect(")")
            return Meas(p, m, n)
        if tok.kind == "(":
            self.i += 1
            t = self.term(scope)
            self.expect(")")
            return t
        if tok.kind == "<":
            self.i += 1
            items = [self.term(scope)]
            while self.tok.kind == ",":
                self.i += 1
                items.append(self.term(scope))
            self.expect(">")
            if len(items) < 2:
                raise self.error("a tuple needs at least two components", tok)
            return make_tuple(items)
        raise self.error(f"unexpected {tok.value!r}")


def parse_term(text: str, gates: GateTable | None = None) -> Term:
    """Parse concrete syntax into a term."""
    return _Parser(text, gates or DEFAULT_GATES).parse()


def _fresh(hint: str, taken: set[str]) -> str:
    ok = bool(re.fullmatch(r"[A-Za-z_][A-Za-z0-9_']*", hint or "")) and hint not in KEYWORDS
    base = hint if ok and not _REG_RE.match(hint) else "x"
    if base not in taken:
        return base
    stem = base.rstrip("0123456789") or "x"
    if stem == "r":
        stem = "r_"
    k = 1
    while f"{stem}{k}" in taken:
        k += 1
    return f"{stem}{k}"


class _Printer:
    def __init__(self, t: Term):
        self.free = free_vars(t)

    def term(self, t: Term, scope: list[str]) -> str:
        pair = match_pair(t)
        if pair is not None:
            return f"<{self.term(pair[0], scope)}, {self.term(pair[1], scope)}>"
        if isinstance(t, (LinLam, BangLam)):
            name = _fresh(t.hint, self.free | set(scope))
            bang = "!" if isinstance(t, BangLam) else ""
            return f"\\{bang}{name}. {self.term(t.body, scope + [name])}"
        if isinstance(t, App):
            fun = self.term(t.fun, scope)
            if isinstance(t.fun, (LinLam, BangLam)) and match_pair(t.fun) is None:
                fun = f"({fun})"
            return f"{fun} {self.atom(t.arg, scope)}"
        return self.atom(t, scope)

    def atom(self, t: Term, scope: list[str]) -> str:
        if isinstance(t, Var):
            return t.name
        if isinstance(t, BVar):
            if t.index >= len(scope):
                return f"?{t.index}"
            return scope[len(scope) - 1 - t.index]
        if isinstance(t, Reg):
            return f"r{t.index}"
        if isinstance(t, Gate):
            return f"U[{t.name}]"
        if isinstance(t, New):
            return "new"
        if isinstance(t, Bang):
            return "!" + self.atom(t.body, scope)
        if isinstance(t, Meas):
            return f"meas({self.term(t.subject, scope)}, {self.term(t.branch0, scope)}, {self.term(t.branch1, scope)})"
        if match_pair(t) is not None:
            return self.term(t, scope)
        return f"({self.term(t, scope)})"


def print_term(t: Term) -> str:
    """Concrete syntax for ``t``; pairs are re-sugared."""
    return _Printer(t).term(t, [])
