import importlib.util
import shutil
import sys
from pathlib import Path

import pytest

from pnpdr.io import parse_net_text
from pnpdr.petri import Net

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"
CVC5_SHIM = Path(__file__).resolve().parent / "tools" / "cvc5_smt2.py"

PARITY_TEXT = "pl p 1\ntr t_inc -> p*2\ntr t_dec p*2 ->\n"


def _have_cvc5() -> bool:
    return importlib.util.find_spec("cvc5") is not None


Z3 = "z3 -in"
CVC5 = f"{sys.executable} {CVC5_SHIM}"
YICES = "yices-smt2 --incremental"

# solvers able to decide quantified LIA queries
QUANTIFIED_SOLVERS = [
    pytest.param(Z3, id="z3", marks=pytest.mark.skipif(shutil.which("z3") is None, reason="z3 not installed")),
    pytest.param(CVC5, id="cvc5", marks=pytest.mark.skipif(not _have_cvc5(), reason="cvc5 not installed")),
]
# solvers for quantifier-free queries only
QF_SOLVERS = QUANTIFIED_SOLVERS + [
    pytest.param(
        YICES, id="yices", marks=pytest.mark.skipif(shutil.which("yices-smt2") is None, reason="yices not installed")
    ),
]


@pytest.fixture
def parity() -> Net:
    net, _ = parse_net_text(PARITY_TEXT)
    return net


@pytest.fixture
def two_places() -> Net:
    return Net.from_arcs(["p1", "p2"], {"move": ({"p1": 1}, {"p2": 1}), "back": ({"p2": 2}, {"p1": 1})})


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("tests.test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(acceptance.RESULTS):
        terminalreporter.write_line(acceptance.RESULTS[n])
