"""Random bounded problems for differential testing and fixture generation."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .formula import LinearExpr, Predicate, conjoin, disjoin, make_atom, negate
from .oracle import ExploreBounds, reachable_set
from .petri import Marking, Net


@dataclass(frozen=True)
class RandomProblem:
    net: Net
    m0: Marking
    prop: Predicate
    states: int


def random_net(rng: random.Random, max_places: int = 4, max_transitions: int = 4, max_weight: int = 3) -> Net:
    n = rng.randint(1, max_places)
    places = [f"p{i}" for i in range(n)]
    arcs = {}
    for j in range(rng.randint(1, max_transitions)):
        ins, outs = {}, {}
        for p in places:
            r = rng.random()
            if r < 0.35:
                ins[p] = rng.randint(1, max_weight)
            elif r < 0.65:
                outs[p] = rng.randint(1, max_weight)
        arcs[f"t{j}"] = (ins, outs)
    return Net.from_arcs(places, arcs)


def random_atom(rng: random.Random, net: Net, monotonic: bool = False) -> Predicate:
    while True:
        coeffs = {}
        for p in rng.sample(net.places, rng.randint(1, min(2, len(net.places)))):
            coeffs[p] = rng.randint(1, 2) if monotonic else rng.choice([-2, -1, 1, 1, 2])
        rel = ">=" if monotonic else rng.choice(["<=", ">=", "=", "<=", ">="])
        a = make_atom(LinearExpr.build(coeffs), rel, rng.randint(0, 4) if not monotonic else rng.randint(1, 4))
        if a not in (conjoin([]), disjoin([])):
            return a


def random_predicate(rng: random.Random, net: Net, max_atoms: int = 3, monotonic: bool = False) -> Predicate:
    """Random and/or combination of at most ``max_atoms`` linear atoms."""
    atoms = [random_atom(rng, net, monotonic) for _ in range(rng.randint(1, max_atoms))]
    pred = atoms[0]
    for a in atoms[1:]:
        pred = conjoin([pred, a]) if rng.random() < 0.5 else disjoin([pred, a])
    return pred


def random_problem(
    rng: random.Random,
    max_places: int = 4,
    max_transitions: int = 4,
    max_weight: int = 3,
    max_atoms: int = 3,
    max_states: int = 2_000,
    monotonic: bool = False,
) -> RandomProblem:
    """A net with a finite reachable set of at most ``max_states`` markings.

    With ``monotonic`` the feared predicate (the negated property) is
    upward closed.
    """
    bounds = ExploreBounds(max_states=max_states, max_tokens=50)
    while True:
        net = random_net(rng, max_places, max_transitions, max_weight)
        m0 = tuple(rng.randint(0, 3) for _ in net.places)
        reach = reachable_set(net, m0, bounds)
        if reach is None:
            continue
        pred = random_predicate(rng, net, max_atoms, monotonic)
        prop = negate(pred) if monotonic else pred
        return RandomProblem(net, m0, prop, len(reach))
