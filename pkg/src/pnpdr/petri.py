"""Place/transition nets and the firing-sequence algebra.

Markings and displacements are plain tuples of Python ints indexed by the
net's place order, so arithmetic never overflows.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

Marking = tuple[int, ...]
Delta = tuple[int, ...]

NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_.\-]*\Z")


class NetError(ValueError):
    """Malformed net or reference to an unknown place/transition."""


@dataclass(frozen=True)
class Net:
    places: tuple[str, ...]
    transitions: tuple[str, ...]
    pre: Mapping[str, Marking]
    post: Mapping[str, Marking]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "places", tuple(self.places))
        object.__setattr__(self, "transitions", tuple(self.transitions))
        names = self.places + self.transitions
        if len(set(names)) != len(names):
            raise NetError("place and transition names must be distinct")
        for name in names:
            if not NAME_RE.match(name):
                raise NetError(f"invalid name {name!r}")
        n = len(self.places)
        pre, post = {}, {}
        for t in self.transitions:
            for flow, out in ((self.pre, pre), (self.post, post)):
                if t not in flow:
                    raise NetError(f"missing flow for transition {t!r}")
                vec = tuple(int(x) for x in flow[t])
                if len(vec) != n or any(x < 0 for x in vec):
                    raise NetError(f"bad flow vector for transition {t!r}")
                out[t] = vec
        if set(self.pre) - set(self.transitions) or set(self.post) - set(self.transitions):
            raise NetError("flow defined for unknown transition")
        object.__setattr__(self, "pre", pre)
        object.__setattr__(self, "post", post)
        object.__setattr__(self, "_index", {p: i for i, p in enumerate(self.places)})

    @classmethod
    def from_arcs(cls, places: Sequence[str], arcs: Mapping[str, tuple[Mapping[str, int], Mapping[str, int]]]) -> "Net":
        """Build a net from ``{transition: (inputs, outputs)}`` weight maps."""
        index = {p: i for i, p in enumerate(places)}
        pre, post = {}, {}
        for t, (ins, outs) in arcs.items():
            for weights, target in ((ins, pre), (outs, post)):
                vec = [0] * len(places)
                for p, w in weights.items():
                    if p not in index:
                        raise NetError(f"unknown place {p!r} in transition {t!r}")
                    vec[index[p]] += w
                target[t] = tuple(vec)
        return cls(tuple(places), tuple(arcs), pre, post)

    def place_index(self, place: str) -> int:
        try:
            return self._index[place]
        except KeyError:
            raise NetError(f"unknown place {place!r}") from None

    def check_transition(self, t: str) -> None:
        if t not in self.pre:
            raise NetError(f"unknown transition {t!r}")

    def delta(self, t: str) -> Delta:
        self.check_transition(t)
        return tuple(b - a for a, b in zip(self.pre[t], self.post[t]))

    def marking(self, values: Mapping[str, int] | Iterable[int]) -> Marking:
        """Coerce a place->tokens map (missing places are 0) or a vector."""
        if isinstance(values, Mapping):
            for p in values:
                self.place_index(p)
            m = tuple(int(values.get(p, 0)) for p in self.places)
        else:
            m = tuple(int(x) for x in values)
        if len(m) != len(self.places) or any(x < 0 for x in m):
            raise NetError(f"not a marking of this net: {m}")
        return m

    def env(self, m: Sequence[int]) -> dict[str, int]:
        return dict(zip(self.places, m))


def _check_sequence(net: Net, sigma: Sequence[str]) -> None:
    for t in sigma:
        net.check_transition(t)


def enabled(net: Net, m: Marking, t: str) -> bool:
    net.check_transition(t)
    return all(x >= h for x, h in zip(m, net.pre[t]))


def fire(net: Net, m: Marking, sigma: Sequence[str] | str) -> Marking | None:
    """Fire ``sigma`` step by step from ``m``; None as soon as a step is disabled."""
    if isinstance(sigma, str):
        sigma = (sigma,)
    _check_sequence(net, sigma)
    cur = tuple(m)
    for t in sigma:
        if not enabled(net, cur, t):
            return None
        cur = tuple(x - a + b for x, a, b in zip(cur, net.pre[t], net.post[t]))
    return cur


def displacement(net: Net, sigma: Sequence[str]) -> Delta:
    _check_sequence(net, sigma)
    total = [0] * len(net.places)
    for t in sigma:
        for i, d in enumerate(net.delta(t)):
            total[i] += d
    return tuple(total)


def hurdle(net: Net, sigma: Sequence[str]) -> Marking:
    """Least marking from which ``sigma`` is fireable.

    Folds H(s1.s2) = max(H(s1), H(s2) - D(s1)) left to right, one transition
    at a time, with H(t) = pre(t).
    """
    if len(sigma) == 0:
        raise NetError("hurdle of the empty sequence is undefined")
    _check_sequence(net, sigma)
    h = list(net.pre[sigma[0]])
    d = list(net.delta(sigma[0]))
    for t in sigma[1:]:
        for i, need in enumerate(net.pre[t]):
            h[i] = max(h[i], need - d[i])
        for i, x in enumerate(net.delta(t)):
            d[i] += x
    return tuple(h)


def positive_part(v: Sequence[int]) -> tuple[int, ...]:
    return tuple(x if x > 0 else 0 for x in v)


def saturated_hurdle(net: Net, sigma: Sequence[str], k: int) -> Marking:
    """Hurdle of ``sigma`` repeated ``k + 1`` times: H(sigma) + k * (-D(sigma))+."""
    if k < 0:
        raise ValueError("k must be a natural number")
    h = hurdle(net, sigma)
    b = positive_part(-x for x in displacement(net, sigma))
    return tuple(x + k * y for x, y in zip(h, b))


def primitive_root(sigma: Sequence[str]) -> tuple[tuple[str, ...], int]:
    """Return (rho, j) with sigma == rho * j and rho as short as possible."""
    seq = tuple(sigma)
    n = len(seq)
    for size in range(1, n + 1):
        if n % size == 0 and seq[:size] * (n // size) == seq:
            return seq[:size], n // size
    return seq, 1
