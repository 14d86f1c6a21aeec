"""Net, property and certificate files."""

import shlex
import subprocess

import pytest
from hypothesis import given, settings

from pnpdr.formula import evaluate, format_predicate, negate, parse_predicate
from pnpdr.io import (
    ParseError,
    Problem,
    load_net,
    load_problem,
    parse_net_text,
    parse_pnml,
    parse_property,
    print_net_text,
    read_certificate,
    write_certificate,
    write_certificate_script,
    write_trace,
)
from pnpdr.smt import quantified_check

from .conftest import FIXTURES, PARITY_TEXT, QUANTIFIED_SOLVERS, Z3
from .strategies import nets

PARITY_CERT = "(p >= 1) and (forall k . (p < 2*k + 2 or p >= 2*k + 3))"

PNML_HEAD = '<pnml xmlns="http://www.pnml.org/version-2009/grammar/pnml"><net id="n" type="http://www.pnml.org/version-2009/grammar/ptnet"><page id="g">'
PNML_TAIL = "</page></net></pnml>"


def pnml(body: str) -> str:
    return PNML_HEAD + body + PNML_TAIL


class TestNetText:
    def test_parity(self, parity):
        net, m0 = parse_net_text(PARITY_TEXT)
        assert m0 == (1,)
        assert net.places == ("p",)
        assert net.transitions == ("t_inc", "t_dec")
        assert net.pre["t_dec"] == (2,) and net.post["t_inc"] == (2,)

    def test_empty(self):
        net, m0 = parse_net_text("")
        assert net.places == () and net.transitions == () and m0 == ()

    def test_comments_and_default_weight(self):
        net, m0 = parse_net_text("# header\npl a\npl b 2  # two tokens\ntr t a b -> a\n")
        assert m0 == (0, 2)
        assert net.pre["t"] == (1, 1)

    @pytest.mark.parametrize(
        "text, line",
        [
            ("pl p 1\npl p 2\n", 2),
            ("pl p 1\ntr t q -> p\n", 2),
            ("pl p 1\ntr t p*-1 ->\n", 2),
            ("pl p x\n", 1),
            ("pl p 1\n\nnode n\n", 3),
            ("pl p 1\ntr t p\n", 2),
        ],
    )
    def test_errors_carry_line_numbers(self, text, line):
        with pytest.raises(ParseError) as info:
            parse_net_text(text)
        assert info.value.line == line

    @given(nets())
    @settings(max_examples=100, deadline=None)
    def test_round_trip(self, net):
        m0 = tuple(range(len(net.places)))
        assert parse_net_text(print_net_text(net, m0)) == (net, m0)


class TestPnml:
    def test_parity_fixture_matches_text(self):
        assert load_net(FIXTURES / "parity.pnml") == load_net(FIXTURES / "parity.net")

    def test_no_arcs(self):
        net, m0 = parse_pnml(pnml('<place id="a"/><transition id="t"/>'))
        assert net.pre["t"] == (0,) and net.post["t"] == (0,)
        assert m0 == (0,)

    def test_default_weight(self):
        net, _ = parse_pnml(pnml('<place id="a"/><transition id="t"/><arc id="x" source="a" target="t"/>'))
        assert net.pre["t"] == (1,)

    @pytest.mark.parametrize(
        "body",
        [
            '<place id="a"/><transition id="t"/><arc id="x" source="a" target="zz"/>',
            '<place id="a"/><place id="b"/><arc id="x" source="a" target="b"/>',
            '<place id="a"/><transition id="t"/>'
            '<arc id="x" source="a" target="t"><inscription><text>-2</text></inscription></arc>',
        ],
    )
    def test_rejected(self, body):
        with pytest.raises(ParseError):
            parse_pnml(pnml(body))

    def test_malformed_xml(self):
        with pytest.raises(ParseError):
            parse_pnml("<pnml><net>")

    def test_colored_nets_rejected(self):
        text = pnml('<place id="a"/>').replace("ptnet", "symmetricnet")
        with pytest.raises(ParseError):
            parse_pnml(text)


class TestProperties:
    def test_headers(self):
        headers, text = parse_property("goal: reachable\nnet: x.net\n# note\np = 0\n")
        assert headers == {"goal": "reachable", "net": "x.net"}
        assert text == "p = 0"

    def test_bad_goal(self):
        with pytest.raises(ParseError):
            parse_property("goal: sometimes\np = 0\n")

    def test_load_fixture(self):
        prob = load_problem(FIXTURES / "parity_even.prop")
        assert prob.expect == "INVARIANT"
        assert prob.m0 == (1,)
        assert format_predicate(prob.invariant) == "(p >= 1)"

    def test_reachable_goal_is_negated(self, parity):
        pred = parse_predicate("p = 0", parity)
        prob = Problem(parity, (1,), "reachable", pred)
        assert prob.invariant == negate(pred)


class TestOutput:
    def test_trace(self, parity):
        text = write_trace(["t_dec"], parity, (2,), (0,))
        assert "trace: t_dec" in text
        assert "final: p=0" in text

    def test_empty_trace(self, parity):
        text = write_trace([], parity, (0,), (0,))
        assert "initial marking is already a counterexample" in text

    def test_certificate_format(self, parity):
        text = write_certificate(parse_predicate(PARITY_CERT, parity))
        lines = text.splitlines()
        assert lines[0] == "[PDR] Certificate of invariance"
        assert lines[1:] == ["# (p >= 1)", "# (forall k1 . ((p - 2*k1 <= 1) or (p - 2*k1 >= 3)))"]

    def test_certificate_round_trip(self, parity):
        cert = parse_predicate(PARITY_CERT, parity)
        back = read_certificate(write_certificate(cert), parity)
        for v in range(20):
            assert evaluate(back, {"p": v}) == evaluate(cert, {"p": v})

    def test_corrupted_certificate(self, parity):
        with pytest.raises(ParseError):
            read_certificate("[PDR] Certificate of invariance\n# (p >= \n", parity)
        with pytest.raises(ParseError):
            read_certificate("", parity)


def run_script(solver: str, script: str) -> list[str]:
    out = subprocess.run(shlex.split(solver), input=script, capture_output=True, text=True, timeout=120)
    # cvc5 echoes string literals with their quotes, z3 without
    return [line.strip().strip("\"") for line in out.stdout.splitlines() if line.strip()]


@pytest.mark.parametrize("solver", QUANTIFIED_SOLVERS)
class TestCertificateScript:
    def check_command(self, solver):
        return quantified_check(shlex.split(solver)) if solver == Z3 else "(check-sat)"

    def test_parity_script_all_unsat(self, solver, parity):
        prop = parse_predicate("p >= 1", parity)
        cert = parse_predicate(PARITY_CERT, parity)
        script = write_certificate_script(parity, (1,), prop, cert, self.check_command(solver))
        assert run_script(solver, script) == ["initial", "unsat", "inductive", "unsat", "entails", "unsat"]

    def test_wrong_certificate_is_caught(self, solver, parity):
        prop = parse_predicate("p >= 1", parity)
        cert = parse_predicate("p >= 1", parity)
        script = write_certificate_script(parity, (1,), prop, cert, self.check_command(solver))
        out = run_script(solver, script)
        assert out[out.index("inductive") + 1] == "sat"
