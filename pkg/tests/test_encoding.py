"""Transition relation and the three witness generalizations."""

import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pnpdr.encoding import (
    VarSpace,
    enbl,
    eq_rel,
    fire_rel,
    gen_hurdle,
    gen_saturated,
    gen_state,
    geq_marking,
    prime,
    primed,
    trans_rel,
)
from pnpdr.formula import Cube, atom, cube_of, evaluate, parse_predicate, simplify_cube, substitute
from pnpdr.formula import LinearExpr
from pnpdr.oracle import successors
from pnpdr.petri import Net, fire

from .strategies import net_and_sequence


def pair_env(net, m, m2):
    env = net.env(m)
    env.update({primed(p): v for p, v in zip(net.places, m2)})
    return env


def instantiate(cube, k):
    """The quantifier-free body of a saturated cube at ``k``."""
    body = substitute(Cube(cube.atoms), {cube.param: LinearExpr.constant(k)})
    return body


class TestTransitionRelation:
    def test_parity_one_step(self, parity):
        # successor sets enumerated by the explicit-state oracle
        t = trans_rel(parity)
        for m in range(8):
            allowed = {m} | {s[0] for s, _ in successors(parity, (m,))}
            for m2 in range(12):
                assert evaluate(t, pair_env(parity, (m,), (m2,))) == (m2 in allowed)

    def test_parity_successors_of_one(self, parity):
        t = trans_rel(parity)
        assert [v for v in range(6) if evaluate(t, pair_env(parity, (1,), (v,)))] == [1, 3]

    def test_stutter_always_allowed(self, two_places):
        t = trans_rel(two_places)
        for m in itertools.product(range(4), repeat=2):
            assert evaluate(t, pair_env(two_places, m, m))
            assert evaluate(eq_rel(two_places), pair_env(two_places, m, m))

    def test_fire_rel_matches_semantics(self, two_places):
        for t in two_places.transitions:
            rel = fire_rel(two_places, t)
            for m in itertools.product(range(4), repeat=2):
                after = fire(two_places, m, [t])
                for m2 in itertools.product(range(5), repeat=2):
                    expected = m2 == m or m2 == after
                    assert evaluate(rel, pair_env(two_places, m, m2)) == expected

    def test_enbl_drops_zero_bounds(self, two_places):
        assert enbl(two_places, "move") == atom({"p1": 1}, ">=", 1)

    @given(net_and_sequence(max_len=1))
    @settings(max_examples=60, deadline=None)
    def test_soundness_on_random_nets(self, ns):
        net, _ = ns
        t = trans_rel(net)
        for m in itertools.product(range(3), repeat=len(net.places)):
            succ = {m} | {s for s, _ in successors(net, m)}
            for m2 in itertools.product(range(4), repeat=len(net.places)):
                assert evaluate(t, pair_env(net, m, m2)) == (m2 in succ)


class TestGeqMarking:
    def test_parity(self, parity):
        assert evaluate(geq_marking(parity, (2,)), {"p": 2})
        assert not evaluate(geq_marking(parity, (2,)), {"p": 1})

    def test_zero_marking_is_valid(self, two_places):
        for m in itertools.product(range(3), repeat=2):
            assert evaluate(geq_marking(two_places, (0, 0)), two_places.env(m))

    def test_dominance(self, two_places):
        for m in itertools.product(range(3), repeat=2):
            for m2 in itertools.product(range(3), repeat=2):
                dominated = all(a >= b for a, b in zip(m2, m))
                assert evaluate(geq_marking(two_places, m), two_places.env(m2)) == dominated


class TestGeneralizations:
    def test_state(self):
        net = Net.from_arcs(["p1", "p2", "p3"], {})
        assert gen_state(net, (1, 0, 2)) == Cube((atom({"p1": 1}, ">=", 1), atom({"p3": 1}, ">=", 2)))

    def test_hurdle_parity(self, parity):
        s = cube_of([parse_predicate("p = 0")])
        g = gen_hurdle(parity, ["t_dec"], s)
        assert g == Cube((atom({"p": 1}, ">=", 2), atom({"p": 1}, "=", 2)))
        assert simplify_cube(g) == Cube((atom({"p": 1}, "=", 2),))

    def test_hurdle_zero_displacement(self):
        net = Net.from_arcs(["p"], {"loop": ({"p": 3}, {"p": 3})})
        assert gen_hurdle(net, ["loop"], Cube(())) == Cube((atom({"p": 1}, ">=", 3),))

    def test_saturated_parity(self, parity):
        s = cube_of([parse_predicate("p = 0")])
        g = gen_saturated(parity, ["t_dec"], s)
        assert g.param is not None
        models = [v for v in range(12) if evaluate(g, {"p": v})]
        assert models == [2, 4, 6, 8, 10]

    def test_saturated_at_zero_is_hurdle(self, parity):
        s = cube_of([parse_predicate("p = 0")])
        g = gen_saturated(parity, ["t_dec"], s)
        h = gen_hurdle(parity, ["t_dec"], s)
        for v in range(12):
            assert evaluate(instantiate(g, 0), {"p": v}) == evaluate(h, {"p": v})

    @given(net_and_sequence(max_len=3), st.data())
    @settings(max_examples=80, deadline=None)
    def test_hurdle_models_replay(self, ns, data):
        net, sigma = ns
        s = cube_of([data.draw(st.sampled_from([parse_predicate(f"{p} <= 1", net) for p in net.places]))])
        g = gen_hurdle(net, sigma, s)
        for m in itertools.product(range(5), repeat=len(net.places)):
            if evaluate(g, net.env(m)):
                after = fire(net, m, sigma)
                assert after is not None
                assert evaluate(s, net.env(after))

    @given(net_and_sequence(max_len=2), st.data())
    @settings(max_examples=60, deadline=None)
    def test_saturated_instances_replay(self, ns, data):
        net, sigma = ns
        s = cube_of([data.draw(st.sampled_from([parse_predicate(f"{p} <= 2", net) for p in net.places]))])
        g = gen_saturated(net, sigma, s)
        h = gen_hurdle(net, sigma, s)
        for m in itertools.product(range(6), repeat=len(net.places)):
            env = net.env(m)
            if evaluate(h, env):
                assert evaluate(g, env)
            for j in range(4):
                if g.param is not None and evaluate(instantiate(g, j), env):
                    after = fire(net, m, sigma * (j + 1))
                    assert after is not None
                    assert evaluate(s, net.env(after))


class TestVarSpace:
    def test_symbols(self, parity):
        space = VarSpace(parity)
        assert space.unprimed_symbols() == ["|p|"]
        assert space.primed_symbols() == ["|p'|"]
        assert space.symbol("#k") == "|#k|"
        with pytest.raises(KeyError):
            space.symbol("q")

    def test_prime(self, parity):
        assert prime(parse_predicate("p >= 1"), parity) == atom({"p'": 1}, ">=", 1)
