"""Explicit-state ground truth for small nets."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Sequence

from .formula import Predicate, evaluate
from .petri import Marking, Net, NetError, fire


@dataclass(frozen=True)
class ExploreBounds:
    max_states: int = 10_000
    max_depth: int = 1_000_000
    max_tokens: int = 1_000

    def __post_init__(self):
        if min(self.max_states, self.max_depth, self.max_tokens) <= 0:
            raise ValueError("exploration bounds must be positive")


@dataclass(frozen=True)
class OracleReachable:
    trace: tuple[str, ...]
    final: Marking


@dataclass(frozen=True)
class OracleUnreachable:
    states: int
    exhausted: bool = True


@dataclass(frozen=True)
class OracleInconclusive:
    reason: str
    states: int


def successors(net: Net, m: Marking) -> list[tuple[Marking, str]]:
    """Distinct one-step successors in lexicographic marking order."""
    out: dict[Marking, str] = {}
    for t in net.transitions:
        m2 = fire(net, m, t)
        if m2 is not None and m2 not in out:
            out[m2] = t
    return sorted(out.items())


def explore(net: Net, m0: Marking, bounds: ExploreBounds = ExploreBounds(), target: Predicate | None = None):
    """Breadth-first search; returns (parents, hit, clipped_reason).

    ``parents`` maps each visited marking to (predecessor, transition).
    ``hit`` is the first visited marking satisfying ``target``.
    """
    m0 = tuple(m0)
    parents: dict[Marking, tuple[Marking, str] | None] = {m0: None}
    depth = {m0: 0}
    frontier = deque([m0])
    clipped = None
    if target is not None and evaluate(target, net.env(m0)):
        return parents, m0, None
    if max(m0, default=0) > bounds.max_tokens:
        return parents, None, "token bound"
    while frontier:
        m = frontier.popleft()
        if depth[m] >= bounds.max_depth:
            clipped = clipped or "depth bound"
            continue
        for m2, t in successors(net, m):
            if m2 in parents:
                continue
            if max(m2, default=0) > bounds.max_tokens:
                clipped = clipped or "token bound"
                continue
            if len(parents) >= bounds.max_states:
                return parents, None, "state bound"
            parents[m2] = (m, t)
            depth[m2] = depth[m] + 1
            if target is not None and evaluate(target, net.env(m2)):
                return parents, m2, None
            frontier.append(m2)
    return parents, None, clipped


def _trace_to(parents, m: Marking) -> tuple[str, ...]:
    trace = []
    while parents[m] is not None:
        m, t = parents[m]
        trace.append(t)
    return tuple(reversed(trace))


def bfs_reach(net: Net, m0: Sequence[int], target: Predicate, bounds: ExploreBounds = ExploreBounds()):
    """Search for a marking satisfying ``target``.

    Unreachable is only reported when the reachable set was fully
    enumerated without touching any bound.
    """
    parents, hit, clipped = explore(net, tuple(m0), bounds, target)
    if hit is not None:
        return OracleReachable(_trace_to(parents, hit), hit)
    if clipped:
        return OracleInconclusive(clipped, len(parents))
    return OracleUnreachable(len(parents))


def reachable_set(net: Net, m0: Sequence[int], bounds: ExploreBounds = ExploreBounds()) -> set[Marking] | None:
    """All reachable markings, or None when a bound tripped."""
    parents, _, clipped = explore(net, tuple(m0), bounds)
    return None if clipped else set(parents)


def min_firing_marking(net: Net, sigma: Sequence[str], bounds: ExploreBounds | None = None) -> Marking:
    """Least marking enabling ``sigma``, one place at a time.

    Every component can be minimized separately because adding tokens never
    disables a fireable sequence.
    """
    if not sigma:
        raise NetError("empty firing sequence")
    top = [sum(net.pre[t][i] for t in sigma) for i in range(len(net.places))]
    if bounds is not None and max(top, default=0) > bounds.max_tokens:
        raise ValueError("firing sequence needs more tokens than the bound allows")
    if fire(net, tuple(top), sigma) is None:
        raise AssertionError("sequence not fireable from its total demand")
    result = []
    for i in range(len(net.places)):
        probe = list(top)
        for x in range(top[i] + 1):
            probe[i] = x
            if fire(net, tuple(probe), sigma) is not None:
                result.append(x)
                break
    return tuple(result)
