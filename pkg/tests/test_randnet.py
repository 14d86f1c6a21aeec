"""Random problem generator."""

import random

from pnpdr.formula import is_monotonic, negate, variables
from pnpdr.oracle import ExploreBounds, reachable_set
from pnpdr.randnet import random_net, random_problem


class TestRandomNet:
    def test_shape_limits(self):
        rng = random.Random(3)
        for _ in range(200):
            net = random_net(rng)
            assert 1 <= len(net.places) <= 4
            assert 1 <= len(net.transitions) <= 4
            for t in net.transitions:
                assert max(net.pre[t] + net.post[t]) <= 3

    def test_seeded(self):
        assert random_net(random.Random(9)) == random_net(random.Random(9))


class TestRandomProblem:
    def test_bounded_state_space(self):
        rng = random.Random(4)
        for _ in range(30):
            pr = random_problem(rng, max_states=500)
            reach = reachable_set(pr.net, pr.m0, ExploreBounds(max_states=500, max_tokens=50))
            assert reach is not None and len(reach) == pr.states <= 500
            assert variables(pr.prop) <= set(pr.net.places)

    def test_monotonic_feared_predicate(self):
        rng = random.Random(5)
        for _ in range(30):
            pr = random_problem(rng, monotonic=True)
            assert is_monotonic(negate(pr.prop))
