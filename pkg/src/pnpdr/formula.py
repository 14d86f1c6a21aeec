"""Linear constraints over place variables.

Variables are strings. Place variables use the place name; quantified
parameters start with ``#`` so they can never collide with a place. Every
quantified parameter ranges over the naturals.

Textual grammar accepted by :func:`parse_predicate`::

    predicate  ::= disj
    disj       ::= conj ("or" conj)*
    conj       ::= unary ("and" unary)*
    unary      ::= "not" unary | quant | "true" | "false"
                 | "(" predicate ")" | comparison
    quant      ::= ("forall" | "exists") IDENT "." unary
    comparison ::= expr REL expr
    REL        ::= "<=" | ">=" | "=" | "==" | "<" | ">" | "!="
    expr       ::= ["-"] term (("+" | "-") term)*
    term       ::= factor ("*" factor)*      (at most one non-constant factor)
    factor     ::= INT | IDENT | "(" expr ")"
    IDENT      ::= [A-Za-z_][A-Za-z0-9_.]* | "|" any-chars-but-bar "|"
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

PARAM_PREFIX = "#"
DEFAULT_DNF_BUDGET = 4096
DEFAULT_K_BOUND = 1000


class FormulaError(ValueError):
    pass


class PredicateSyntaxError(FormulaError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class DnfBudgetExceeded(FormulaError):
    pass


def is_param(var: str) -> bool:
    return var.startswith(PARAM_PREFIX)


def _var_key(var: str):
    return (is_param(var), var)


# ---------------------------------------------------------------------------
# Linear expressions


@dataclass(frozen=True)
class LinearExpr:
    coeffs: tuple[tuple[str, int], ...] = ()
    const: int = 0

    @staticmethod
    def build(coeffs: Mapping[str, int], const: int = 0) -> "LinearExpr":
        items = sorted(((v, c) for v, c in coeffs.items() if c), key=lambda vc: _var_key(vc[0]))
        return LinearExpr(tuple(items), const)

    @staticmethod
    def var(name: str, coeff: int = 1) -> "LinearExpr":
        return LinearExpr.build({name: coeff})

    @staticmethod
    def constant(value: int) -> "LinearExpr":
        return LinearExpr((), value)

    def as_dict(self) -> dict[str, int]:
        return dict(self.coeffs)

    def variables(self) -> set[str]:
        return {v for v, _ in self.coeffs}

    def coeff(self, var: str) -> int:
        return dict(self.coeffs).get(var, 0)

    def __add__(self, other: "LinearExpr | int") -> "LinearExpr":
        if isinstance(other, int):
            return LinearExpr(self.coeffs, self.const + other)
        d = self.as_dict()
        for v, c in other.coeffs:
            d[v] = d.get(v, 0) + c
        return LinearExpr.build(d, self.const + other.const)

    def __neg__(self) -> "LinearExpr":
        return self.scale(-1)

    def __sub__(self, other: "LinearExpr | int") -> "LinearExpr":
        return self + (-other)

    def scale(self, factor: int) -> "LinearExpr":
        return LinearExpr.build({v: c * factor for v, c in self.coeffs}, self.const * factor)

    def evaluate(self, env: Mapping[str, int]) -> int:
        try:
            return self.const + sum(c * env[v] for v, c in self.coeffs)
        except KeyError as exc:
            raise FormulaError(f"no value for variable {exc.args[0]!r}") from None

    def substitute(self, mapping: Mapping[str, "LinearExpr"]) -> "LinearExpr":
        out = LinearExpr.constant(self.const)
        for v, c in self.coeffs:
            out = out + (mapping[v].scale(c) if v in mapping else LinearExpr.var(v, c))
        return out


# ---------------------------------------------------------------------------
# Predicates


class Predicate:
    """Base class of the predicate AST (all nodes are immutable)."""

    def __and__(self, other: "Predicate") -> "Predicate":
        return conjoin([self, other])

    def __or__(self, other: "Predicate") -> "Predicate":
        return disjoin([self, other])

    def __invert__(self) -> "Predicate":
        return negate(self)

    def __str__(self) -> str:
        return format_predicate(self)


@dataclass(frozen=True)
class Atom(Predicate):
    """``expr rel bound`` with ``rel`` one of ``<=``, ``>=``, ``=``."""

    expr: LinearExpr
    rel: str
    bound: int

    def evaluate(self, env: Mapping[str, int]) -> bool:
        v = self.expr.evaluate(env)
        if self.rel == "<=":
            return v <= self.bound
        if self.rel == ">=":
            return v >= self.bound
        return v == self.bound

    def variables(self) -> set[str]:
        return self.expr.variables()

    def __str__(self) -> str:
        return format_predicate(self)


@dataclass(frozen=True)
class And(Predicate):
    args: tuple[Predicate, ...]

    def __str__(self) -> str:
        return format_predicate(self)


@dataclass(frozen=True)
class Or(Predicate):
    args: tuple[Predicate, ...]

    def __str__(self) -> str:
        return format_predicate(self)


@dataclass(frozen=True)
class Not(Predicate):
    arg: Predicate

    def __str__(self) -> str:
        return format_predicate(self)


@dataclass(frozen=True)
class Exists(Predicate):
    var: str
    body: Predicate

    def __str__(self) -> str:
        return format_predicate(self)


@dataclass(frozen=True)
class Forall(Predicate):
    var: str
    body: Predicate

    def __str__(self) -> str:
        return format_predicate(self)


TRUE = And(())
FALSE = Or(())


def _atom_key(a: Atom):
    return (tuple((_var_key(v), c) for v, c in a.expr.coeffs), a.rel, a.bound)


@dataclass(frozen=True)
class Cube(Predicate):
    """Conjunction of atoms, optionally under ``exists param in N``."""

    atoms: tuple[Atom, ...]
    param: str | None = None

    def __post_init__(self):
        atoms = tuple(sorted(set(self.atoms), key=_atom_key))
        object.__setattr__(self, "atoms", atoms)
        if self.param is not None and not any(self.param in a.variables() for a in atoms):
            object.__setattr__(self, "param", None)

    @property
    def quantified(self) -> bool:
        return self.param is not None

    def negate(self) -> "Clause":
        return Clause(self)

    def __str__(self) -> str:
        return format_predicate(self)


@dataclass(frozen=True)
class Clause(Predicate):
    """Negation of a cube: ``forall param in N. not (a1 and ... and an)``."""

    cube: Cube

    @property
    def quantified(self) -> bool:
        return self.cube.quantified

    def negate(self) -> Cube:
        return self.cube

    def __str__(self) -> str:
        return format_predicate(self)


def conjoin(preds: Iterable[Predicate]) -> Predicate:
    out: list[Predicate] = []
    for p in preds:
        if isinstance(p, And):
            out.extend(p.args)
        else:
            out.append(p)
    if any(p == FALSE for p in out):
        return FALSE
    out = list(dict.fromkeys(out))
    return out[0] if len(out) == 1 else And(tuple(out))


def disjoin(preds: Iterable[Predicate]) -> Predicate:
    out: list[Predicate] = []
    for p in preds:
        if isinstance(p, Or):
            out.extend(p.args)
        else:
            out.append(p)
    if any(p == TRUE for p in out):
        return TRUE
    out = list(dict.fromkeys(out))
    return out[0] if len(out) == 1 else Or(tuple(out))


def make_atom(lhs: LinearExpr | int, rel: str, rhs: LinearExpr | int = 0) -> Predicate:
    """Normalize ``lhs rel rhs`` into an :class:`Atom`, TRUE, FALSE or a disjunction.

    Strict relations and ``!=`` are rewritten over the integers. The leading
    coefficient is made positive and coefficients are divided by their gcd.
    """
    if isinstance(lhs, int):
        lhs = LinearExpr.constant(lhs)
    if isinstance(rhs, int):
        rhs = LinearExpr.constant(rhs)
    e = lhs - rhs
    bound = -e.const
    expr = LinearExpr(e.coeffs, 0)
    if rel == "==":
        rel = "="
    if rel == "<":
        rel, bound = "<=", bound - 1
    elif rel == ">":
        rel, bound = ">=", bound + 1
    elif rel == "!=":
        return disjoin([make_atom(expr, "<=", bound - 1), make_atom(expr, ">=", bound + 1)])
    if rel not in ("<=", ">=", "="):
        raise FormulaError(f"unknown relation {rel!r}")
    if not expr.coeffs:
        holds = {"<=": 0 <= bound, ">=": 0 >= bound, "=": bound == 0}[rel]
        return TRUE if holds else FALSE
    if expr.coeffs[0][1] < 0:
        expr, bound = -expr, -bound
        rel = {"<=": ">=", ">=": "<=", "=": "="}[rel]
    g = 0
    for _, c in expr.coeffs:
        g = math.gcd(g, c)
    if g > 1:
        expr = LinearExpr(tuple((v, c // g) for v, c in expr.coeffs), 0)
        if rel == "<=":
            bound = bound // g
        elif rel == ">=":
            bound = -((-bound) // g)
        elif bound % g:
            return FALSE
        else:
            bound //= g
    return Atom(expr, rel, bound)


def atom(coeffs: Mapping[str, int], rel: str, bound: int) -> Atom:
    """Shorthand for a normalized atom that must not collapse to a constant."""
    a = make_atom(LinearExpr.build(coeffs), rel, bound)
    if not isinstance(a, Atom):
        raise FormulaError(f"atom collapses to constant {a}")
    return a


def negate_atom(a: Atom) -> Predicate:
    if a.rel == "<=":
        return Atom(a.expr, ">=", a.bound + 1)
    if a.rel == ">=":
        return Atom(a.expr, "<=", a.bound - 1)
    return Or((Atom(a.expr, "<=", a.bound - 1), Atom(a.expr, ">=", a.bound + 1)))


def expand(pred: Predicate) -> Predicate:
    """Rewrite Cube/Clause nodes into plain and/or/not/quantifier trees."""
    if isinstance(pred, Cube):
        body = And(pred.atoms) if len(pred.atoms) != 1 else pred.atoms[0]
        return Exists(pred.param, body) if pred.param else body
    if isinstance(pred, Clause):
        return negate(expand(pred.cube))
    if isinstance(pred, And):
        return And(tuple(expand(a) for a in pred.args))
    if isinstance(pred, Or):
        return Or(tuple(expand(a) for a in pred.args))
    if isinstance(pred, Not):
        return Not(expand(pred.arg))
    if isinstance(pred, Exists):
        return Exists(pred.var, expand(pred.body))
    if isinstance(pred, Forall):
        return Forall(pred.var, expand(pred.body))
    return pred


def negate(pred: Predicate) -> Predicate:
    """Negation pushed down to the atoms (negation normal form)."""
    if isinstance(pred, Atom):
        return negate_atom(pred)
    if isinstance(pred, And):
        return disjoin(negate(a) for a in pred.args) if pred.args else FALSE
    if isinstance(pred, Or):
        return conjoin(negate(a) for a in pred.args) if pred.args else TRUE
    if isinstance(pred, Not):
        return nnf(pred.arg)
    if isinstance(pred, Exists):
        return Forall(pred.var, negate(pred.body))
    if isinstance(pred, Forall):
        return Exists(pred.var, negate(pred.body))
    if isinstance(pred, (Cube, Clause)):
        return negate(expand(pred))
    raise TypeError(f"not a predicate: {pred!r}")


def nnf(pred: Predicate) -> Predicate:
    if isinstance(pred, Atom):
        return pred
    if isinstance(pred, And):
        return conjoin(nnf(a) for a in pred.args) if pred.args else TRUE
    if isinstance(pred, Or):
        return disjoin(nnf(a) for a in pred.args) if pred.args else FALSE
    if isinstance(pred, Not):
        return negate(pred.arg)
    if isinstance(pred, Exists):
        return Exists(pred.var, nnf(pred.body))
    if isinstance(pred, Forall):
        return Forall(pred.var, nnf(pred.body))
    return nnf(expand(pred))


def is_quantified(pred: Predicate) -> bool:
    if isinstance(pred, (Exists, Forall)):
        return True
    if isinstance(pred, (Cube, Clause)):
        return pred.quantified
    if isinstance(pred, (And, Or)):
        return any(is_quantified(a) for a in pred.args)
    if isinstance(pred, Not):
        return is_quantified(pred.arg)
    return False


def variables(pred: Predicate) -> set[str]:
    """Free variables of ``pred``."""
    if isinstance(pred, Atom):
        return pred.variables()
    if isinstance(pred, (And, Or)):
        return set().union(*(variables(a) for a in pred.args))
    if isinstance(pred, Not):
        return variables(pred.arg)
    if isinstance(pred, (Exists, Forall)):
        return variables(pred.body) - {pred.var}
    if isinstance(pred, Cube):
        vs = set().union(*(a.variables() for a in pred.atoms))
        return vs - {pred.param}
    if isinstance(pred, Clause):
        return variables(pred.cube)
    raise TypeError(f"not a predicate: {pred!r}")


def to_dnf(pred: Predicate, budget: int = DEFAULT_DNF_BUDGET) -> list[Cube]:
    """Disjunctive normal form of a quantifier-free predicate as a cube list."""
    if is_quantified(pred):
        raise FormulaError("to_dnf requires a quantifier-free predicate")

    def walk(p: Predicate) -> list[frozenset[Atom]]:
        if isinstance(p, Atom):
            return [frozenset([p])]
        if isinstance(p, Or):
            out: list[frozenset[Atom]] = []
            for a in p.args:
                out.extend(walk(a))
                if len(out) > budget:
                    raise DnfBudgetExceeded(f"DNF exceeds {budget} cubes")
            return out
        if isinstance(p, And):
            acc = [frozenset()]
            for a in p.args:
                sub = walk(a)
                if len(acc) * len(sub) > budget:
                    raise DnfBudgetExceeded(f"DNF exceeds {budget} cubes")
                acc = [x | y for x in acc for y in sub]
            return acc
        raise TypeError(f"unexpected node {p!r}")

    seen: dict[Cube, None] = {}
    for atoms in walk(nnf(pred)):
        seen.setdefault(Cube(tuple(atoms)), None)
    return list(seen)


# ---------------------------------------------------------------------------
# Evaluation


def _param_interval(atoms: Sequence[Atom], var: str, env: Mapping[str, int]):
    """Interval [lo, hi] (hi may be None) of naturals k satisfying all atoms."""
    lo, hi = 0, None
    for a in atoms:
        c = a.expr.coeff(var)
        rest = LinearExpr(tuple((v, x) for v, x in a.expr.coeffs if v != var), 0).evaluate(env)
        target = a.bound - rest
        if c == 0:
            if not a.evaluate({**env, var: 0}):
                return None
            continue
        rels = ["<=", ">="] if a.rel == "=" else [a.rel]
        for rel in rels:
            if c < 0:
                rel2, cc, tt = ("<=" if rel == ">=" else ">="), -c, -target
            else:
                rel2, cc, tt = rel, c, target
            if rel2 == "<=":
                ub = tt // cc
                hi = ub if hi is None else min(hi, ub)
            else:
                lb = -((-tt) // cc)
                lo = max(lo, lb)
    if hi is not None and lo > hi:
        return None
    return lo, hi


def solve_param(atoms: Sequence[Atom], var: str, env: Mapping[str, int]) -> int | None:
    """Least natural value of ``var`` satisfying every atom under ``env``, or None."""
    iv = _param_interval(atoms, var, env)
    return None if iv is None else iv[0]


def _atoms_of(body: Predicate) -> list[Atom] | None:
    if isinstance(body, Atom):
        return [body]
    if isinstance(body, And) and all(isinstance(a, Atom) for a in body.args):
        return list(body.args)
    if isinstance(body, Cube) and body.param is None:
        return list(body.atoms)
    return None


def evaluate(pred: Predicate, env: Mapping[str, int], k_bound: int = DEFAULT_K_BOUND) -> bool:
    """Truth value of ``pred`` under ``env`` (place -> tokens).

    Quantifiers over a conjunction of atoms are decided exactly; other
    quantified bodies are searched for witnesses ``0 <= k <= k_bound``.
    """
    if isinstance(pred, Atom):
        return pred.evaluate(env)
    if isinstance(pred, And):
        return all(evaluate(a, env, k_bound) for a in pred.args)
    if isinstance(pred, Or):
        return any(evaluate(a, env, k_bound) for a in pred.args)
    if isinstance(pred, Not):
        return not evaluate(pred.arg, env, k_bound)
    if isinstance(pred, Cube):
        if pred.param is None:
            return all(a.evaluate(env) for a in pred.atoms)
        return solve_param(pred.atoms, pred.param, env) is not None
    if isinstance(pred, Clause):
        return not evaluate(pred.cube, env, k_bound)
    if isinstance(pred, Exists):
        atoms = _atoms_of(pred.body)
        if atoms is not None:
            return solve_param(atoms, pred.var, env) is not None
        return any(evaluate(pred.body, {**env, pred.var: k}, k_bound) for k in range(k_bound + 1))
    if isinstance(pred, Forall):
        return not evaluate(Exists(pred.var, negate(pred.body)), env, k_bound)
    raise TypeError(f"not a predicate: {pred!r}")


# ---------------------------------------------------------------------------
# Substitution and classification


def substitute(pred: Predicate, mapping: Mapping[str, LinearExpr]) -> Predicate:
    """Replace each variable ``v`` in ``mapping`` by ``mapping[v]``."""
    if isinstance(pred, Atom):
        return make_atom(pred.expr.substitute(mapping), pred.rel, pred.bound)
    if isinstance(pred, And):
        return conjoin(substitute(a, mapping) for a in pred.args) if pred.args else TRUE
    if isinstance(pred, Or):
        return disjoin(substitute(a, mapping) for a in pred.args) if pred.args else FALSE
    if isinstance(pred, Not):
        return Not(substitute(pred.arg, mapping))
    if isinstance(pred, (Exists, Forall)):
        inner = {v: e for v, e in mapping.items() if v != pred.var}
        return type(pred)(pred.var, substitute(pred.body, inner))
    if isinstance(pred, Cube):
        inner = {v: e for v, e in mapping.items() if v != pred.param}
        out = cube_of(substitute(a, inner) for a in pred.atoms)
        if out is None:
            return FALSE
        return Cube(out.atoms, pred.param)
    if isinstance(pred, Clause):
        c = substitute(pred.cube, mapping)
        return TRUE if c == FALSE else Clause(c)
    raise TypeError(f"not a predicate: {pred!r}")


def cube_of(parts: Iterable[Predicate], param: str | None = None) -> Cube | None:
    """Cube of the non-trivial atoms in ``parts``; None when one of them is FALSE."""
    atoms = []
    for p in parts:
        if p == TRUE:
            continue
        if p == FALSE:
            return None
        if not isinstance(p, Atom):
            raise FormulaError(f"not an atom: {p}")
        atoms.append(p)
    return Cube(tuple(atoms), param)


def substitute_shift(c: Cube, d: Mapping[str, int | LinearExpr]) -> Cube | Predicate:
    """Replace every place ``p`` by ``p + d[p]`` and fold constants.

    Returns FALSE if a shifted atom becomes unsatisfiable.
    """
    mapping = {}
    for p, x in d.items():
        shift = LinearExpr.constant(x) if isinstance(x, int) else x
        mapping[p] = LinearExpr.var(p) + shift
    return substitute(c, mapping)


def is_monotonic(pred: Predicate) -> bool:
    """Syntactic upward-closure test: a positive and/or of ``sum a_i p_i >= c`` with a_i >= 0."""
    p = nnf(pred)

    def walk(q: Predicate) -> bool:
        if isinstance(q, Atom):
            return q.rel == ">=" and all(c >= 0 for _, c in q.expr.coeffs)
        if isinstance(q, (And, Or)):
            return all(walk(a) for a in q.args)
        return False

    return walk(p)


def is_vacuous(a: Atom) -> bool:
    """True for atoms valid over the naturals, such as ``p >= 0``."""
    return a.rel == ">=" and a.bound <= 0 and all(c >= 0 for _, c in a.expr.coeffs)


def simplify_cube(c: Cube) -> Cube | None:
    """Merge bounds on identical expressions; None if the cube is contradictory.

    ``e >= a`` and ``e <= a`` become ``e = a``; the tightest bound of each
    direction is kept and vacuous lower bounds are dropped.
    """
    lower: dict[LinearExpr, int] = {}
    upper: dict[LinearExpr, int] = {}
    for a in c.atoms:
        if a.rel in (">=", "="):
            lower[a.expr] = max(lower.get(a.expr, a.bound), a.bound)
        if a.rel in ("<=", "="):
            upper[a.expr] = min(upper.get(a.expr, a.bound), a.bound)
    atoms = []
    for e in dict.fromkeys(a.expr for a in c.atoms):
        lo, hi = lower.get(e), upper.get(e)
        if lo is not None and hi is not None:
            if lo > hi:
                return None
            if lo == hi:
                atoms.append(Atom(e, "=", lo))
                continue
        if lo is not None:
            a = Atom(e, ">=", lo)
            if not is_vacuous(a):
                atoms.append(a)
        if hi is not None:
            atoms.append(Atom(e, "<=", hi))
    return Cube(tuple(atoms), c.param)


# ---------------------------------------------------------------------------
# Printing


def _name(v: str, rename: Mapping[str, str]) -> str:
    v = rename.get(v, v)
    return v if re.fullmatch(r"[A-Za-z_][A-Za-z0-9_.]*", v) and v not in _KEYWORDS else f"|{v}|"


def format_expr(e: LinearExpr, rename: Mapping[str, str] = {}) -> str:
    parts = []
    for v, c in e.coeffs:
        name = _name(v, rename)
        mag = abs(c)
        term = name if mag == 1 else f"{mag}*{name}"
        parts.append((c < 0, term))
    if e.const or not parts:
        parts.append((e.const < 0, str(abs(e.const))))
    out = ("-" if parts[0][0] else "") + parts[0][1]
    for neg, term in parts[1:]:
        out += (" - " if neg else " + ") + term
    return out


def format_predicate(pred: Predicate, rename: Mapping[str, str] | None = None) -> str:
    """Render ``pred`` in the textual grammar (re-parseable by parse_predicate)."""
    rename = dict(rename or {})
    counter = itertools.count(1)

    def fresh(var: str) -> str:
        taken = set(rename.values())
        while True:
            name = f"k{next(counter)}"
            if name not in taken:
                return name

    def walk(p: Predicate, ren: dict[str, str]) -> str:
        if isinstance(p, Atom):
            return f"({format_expr(p.expr, ren)} {p.rel} {p.bound})"
        if p == TRUE:
            return "true"
        if p == FALSE:
            return "false"
        if isinstance(p, And):
            return "(" + " and ".join(walk(a, ren) for a in p.args) + ")"
        if isinstance(p, Or):
            return "(" + " or ".join(walk(a, ren) for a in p.args) + ")"
        if isinstance(p, Not):
            return f"(not {walk(p.arg, ren)})"
        if isinstance(p, (Exists, Forall)):
            name = fresh(p.var)
            inner = {**ren, p.var: name}
            q = "exists" if isinstance(p, Exists) else "forall"
            return f"({q} {name} . {walk(p.body, inner)})"
        if isinstance(p, Cube):
            body = And(p.atoms) if len(p.atoms) != 1 else p.atoms[0]
            return walk(Exists(p.param, body) if p.param else body, ren)
        if isinstance(p, Clause):
            c = p.cube
            body = And(c.atoms) if len(c.atoms) != 1 else c.atoms[0]
            if c.param:
                return walk(Forall(c.param, Not(body)), ren)
            return walk(Not(body), ren)
        raise TypeError(f"not a predicate: {p!r}")

    return walk(pred, rename)


# ---------------------------------------------------------------------------
# Parsing

_KEYWORDS = {"and", "or", "not", "true", "false", "forall", "exists"}
_TOKEN_RE = re.compile(
    r"\s*(?:(?P<int>\d+)|(?P<ident>[A-Za-z_][A-Za-z0-9_.]*|\|[^|\\]*\|)"
    r"|(?P<op><=|>=|==|!=|<|>|=|\(|\)|\+|-|\*|\.))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            raise PredicateSyntaxError(f"unexpected character {text[pos]!r}", pos)
        start = m.start(m.lastgroup)
        kind, value = m.lastgroup, m.group(m.lastgroup)
        if kind == "ident" and value.startswith("|"):
            value = value[1:-1]
        elif kind == "ident" and value in _KEYWORDS:
            kind = "kw"
        tokens.append((kind, value, start))
        pos = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, places: set[str] | None):
        self.toks = _tokenize(text)
        self.i = 0
        self.places = places
        self.bound: list[str] = []

    def peek(self, offset: int = 0):
        return self.toks[min(self.i + offset, len(self.toks) - 1)]

    def next(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, v, pos = self.next()
        if v != value or kind == "ident":
            raise PredicateSyntaxError(f"expected {value!r}, got {v or 'end of input'!r}", pos)

    def error(self, msg: str):
        raise PredicateSyntaxError(msg, self.peek()[2])

    def parse(self) -> Predicate:
        p = self.disj()
        if self.peek()[0] != "eof":
            self.error(f"unexpected token {self.peek()[1]!r}")
        return p

    def disj(self) -> Predicate:
        parts = [self.conj()]
        while self.peek()[:2] == ("kw", "or"):
            self.next()
            parts.append(self.conj())
        return disjoin(parts) if len(parts) > 1 else parts[0]

    def conj(self) -> Predicate:
        parts = [self.unary()]
        while self.peek()[:2] == ("kw", "and"):
            self.next()
            parts.append(self.unary())
        return conjoin(parts) if len(parts) > 1 else parts[0]

    def unary(self) -> Predicate:
        kind, v, pos = self.peek()
        if kind == "kw" and v == "not":
            self.next()
            return Not(self.unary())
        if kind == "kw" and v in ("true", "false"):
            self.next()
            return TRUE if v == "true" else FALSE
        if kind == "kw" and v in ("forall", "exists"):
            self.next()
            k2, name, p2 = self.next()
            if k2 != "ident":
                raise PredicateSyntaxError("expected a variable name", p2)
            if self.places is not None and name in self.places:
                raise PredicateSyntaxError(f"bound variable {name!r} shadows a place", p2)
            var = PARAM_PREFIX + name
            if var in self.bound:
                raise PredicateSyntaxError(f"nested quantifiers reuse {name!r}", p2)
            self.expect(".")
            self.bound.append(var)
            body = self.unary()
            self.bound.pop()
            return (Forall if v == "forall" else Exists)(var, body)
        if v == "(" and kind == "op":
            save = self.i
            try:
                return self.comparison()
            except PredicateSyntaxError:
                self.i = save
            self.next()
            p = self.disj()
            self.expect(")")
            return p
        return self.comparison()

    def comparison(self) -> Predicate:
        lhs = self.expr()
        kind, rel, pos = self.next()
        if kind != "op" or rel not in ("<=", ">=", "==", "!=", "<", ">", "="):
            raise PredicateSyntaxError(f"expected a relation, got {rel or 'end of input'!r}", pos)
        rhs = self.expr()
        return make_atom(lhs, rel, rhs)

    def expr(self) -> LinearExpr:
        neg = False
        if self.peek()[:2] == ("op", "-"):
            self.next()
            neg = True
        e = self.term()
        if neg:
            e = -e
        while self.peek()[0] == "op" and self.peek()[1] in ("+", "-"):
            op = self.next()[1]
            t = self.term()
            e = e + t if op == "+" else e - t
        return e

    def term(self) -> LinearExpr:
        e = self.factor()
        while self.peek()[:2] == ("op", "*"):
            pos = self.next()[2]
            f = self.factor()
            if e.coeffs and f.coeffs:
                raise PredicateSyntaxError("non-linear product", pos)
            e = f.scale(e.const) if not e.coeffs else e.scale(f.const)
        return e

    def factor(self) -> LinearExpr:
        kind, v, pos = self.next()
        if kind == "int":
            return LinearExpr.constant(int(v))
        if kind == "ident":
            var = PARAM_PREFIX + v
            if var in self.bound:
                return LinearExpr.var(var)
            if self.places is not None and v not in self.places:
                raise PredicateSyntaxError(f"unknown place {v!r}", pos)
            return LinearExpr.var(v)
        if kind == "op" and v == "(":
            e = self.expr()
            self.expect(")")
            return e
        raise PredicateSyntaxError(f"unexpected token {v or 'end of input'!r}", pos)


def parse_predicate(text: str, net=None, places: Iterable[str] | None = None) -> Predicate:
    """Parse ``text``; variables must name places of ``net`` (or ``places``) when given."""
    if net is not None:
        places = net.places
    return _Parser(text, set(places) if places is not None else None).parse()
