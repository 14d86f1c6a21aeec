"""Linear predicates describing markings, transitions and witness generalizations.

Unprimed variables are place names; the primed copy of place ``p`` is the
variable ``p'``. Place names cannot contain a quote, so both namespaces are
disjoint.
"""

from __future__ import annotations

from typing import Mapping, Sequence

from .formula import (
    FALSE,
    PARAM_PREFIX,
    Atom,
    Cube,
    LinearExpr,
    Predicate,
    conjoin,
    disjoin,
    is_param,
    make_atom,
    substitute,
    substitute_shift,
)
from .petri import Net, displacement, hurdle, positive_part

PRIME = "'"


def primed(place: str) -> str:
    return place + PRIME


def prime(pred: Predicate, net: Net) -> Predicate:
    """Rename every place variable ``p`` to ``p'``."""
    return substitute(pred, {p: LinearExpr.var(primed(p)) for p in net.places})


class VarSpace:
    """Maps formula variables to SMT-LIB symbols.

    Places become ``|p|``, primed places ``|p'|`` and parameters ``|#k|``.
    """

    def __init__(self, net: Net):
        self.net = net
        self.places = set(net.places)

    def symbol(self, var: str) -> str:
        if var in self.places or is_param(var):
            return f"|{var}|"
        if var.endswith(PRIME) and var[:-1] in self.places:
            return f"|{var}|"
        raise KeyError(f"variable {var!r} is not part of this net's variable space")

    def unprimed_symbols(self) -> list[str]:
        return [self.symbol(p) for p in self.net.places]

    def primed_symbols(self) -> list[str]:
        return [self.symbol(primed(p)) for p in self.net.places]


def _ge(var: str, bound: int) -> Predicate:
    return make_atom(LinearExpr.var(var), ">=", bound)


def geq_marking(net: Net, m: Sequence[int]) -> Predicate:
    """Conjunction ``p_i >= m(p_i)`` over every place."""
    return conjoin(_ge(p, x) for p, x in zip(net.places, m))


def enbl(net: Net, t: str) -> Predicate:
    """Enabling condition of ``t``; atoms ``p >= 0`` are omitted."""
    return conjoin(_ge(p, x) for p, x in zip(net.places, net.pre[t]) if x > 0)


def delta_rel(net: Net, t: str) -> Predicate:
    """``p' = p + delta(t)(p)`` for every place."""
    d = net.delta(t)
    return conjoin(
        make_atom(LinearExpr.var(primed(p)), "=", LinearExpr.var(p) + x) for p, x in zip(net.places, d)
    )


def eq_rel(net: Net) -> Predicate:
    return conjoin(make_atom(LinearExpr.var(primed(p)), "=", LinearExpr.var(p)) for p in net.places)


def fire_rel(net: Net, t: str) -> Predicate:
    net.check_transition(t)
    return disjoin([eq_rel(net), conjoin([enbl(net, t), delta_rel(net, t)])])


def trans_rel(net: Net) -> Predicate:
    """At most one transition fires: EQ or some enabled t with its displacement."""
    return disjoin([eq_rel(net)] + [conjoin([enbl(net, t), delta_rel(net, t)]) for t in net.transitions])


def gen_state(net: Net, m: Sequence[int]) -> Cube:
    """Upward closure of ``m`` as a cube; zero bounds are dropped."""
    return Cube(tuple(_ge(p, x) for p, x in zip(net.places, m) if x > 0))


def _cube_or_false(parts: list[Predicate], param: str | None = None) -> Cube | Predicate:
    atoms = []
    for a in parts:
        if a == FALSE:
            return FALSE
        if isinstance(a, Atom):
            atoms.append(a)
        elif isinstance(a, Cube):
            atoms.extend(a.atoms)
    return Cube(tuple(atoms), param)


def gen_hurdle(net: Net, sigma: Sequence[str], s: Cube) -> Cube | Predicate:
    """``GEQ_H(sigma)`` conjoined with ``s`` shifted by the displacement of sigma."""
    h = hurdle(net, sigma)
    d = displacement(net, sigma)
    shifted = substitute_shift(s, dict(zip(net.places, d)))
    parts: list[Predicate] = [_ge(p, x) for p, x in zip(net.places, h) if x > 0]
    parts.append(shifted)
    return _cube_or_false(parts, s.param)


def gen_saturated(net: Net, sigma: Sequence[str], s: Cube, param: str = PARAM_PREFIX + "k") -> Cube | Predicate:
    """``exists k >= 0. GEQ_{H + k.b} and s(p + (k+1).D)`` with ``b = (-D)+``.

    The result is a cube quantified over ``param``.
    """
    if s.param is not None:
        raise ValueError("cannot saturate an already quantified cube")
    h = hurdle(net, sigma)
    d = displacement(net, sigma)
    b = positive_part(-x for x in d)
    k = LinearExpr.var(param)
    parts: list[Predicate] = []
    for p, a, bb in zip(net.places, h, b):
        if a or bb:
            parts.append(make_atom(LinearExpr.var(p) - k.scale(bb), ">=", a))
    shift: Mapping[str, LinearExpr] = {p: k.scale(x) + x for p, x in zip(net.places, d)}
    parts.append(substitute_shift(s, shift))
    return _cube_or_false(parts, param)
