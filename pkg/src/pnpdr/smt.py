"""Sessions with an external SMT-LIB v2 solver process.

The solver runs as a child process and is driven through its standard
input/output with ``:print-success`` enabled, so every command gets an
answer and desynchronization is detected immediately.
"""

from __future__ import annotations

import os
import queue
import shlex
import subprocess
import threading
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .encoding import VarSpace
from .formula import (
    And,
    Atom,
    Clause,
    Cube,
    Exists,
    Forall,
    Not,
    Or,
    Predicate,
    expand,
)

SOLVER_ENV = "PNPDR_SOLVER"
DEFAULT_SOLVER = "z3 -in"
DEFAULT_TIMEOUT = 60.0

QF_LIA = "QF_LIA"
LIA = "LIA"


class SolverError(RuntimeError):
    """The solver process failed, misbehaved or answered with an error."""


class SolverStartError(SolverError):
    """The solver process could not be launched or failed its handshake."""


def default_command() -> str:
    return os.environ.get(SOLVER_ENV) or DEFAULT_SOLVER


def quantified_check(argv: Sequence[str]) -> str:
    """Check command for sessions with quantified assertions.

    z3's default quantifier engine often answers unknown on the
    Presburger formulas produced by saturation, while its quantifier
    elimination tactic decides them, so that tactic is used for z3.
    """
    if os.path.basename(argv[0]).startswith("z3"):
        return "(check-sat-using (then qe smt))"
    return "(check-sat)"


# ---------------------------------------------------------------------------
# Serialization


def num(n: int) -> str:
    return str(n) if n >= 0 else f"(- {-n})"


def _linear(atom: Atom, space: VarSpace) -> str:
    terms = []
    for v, c in atom.expr.coeffs:
        sym = space.symbol(v)
        terms.append(sym if c == 1 else f"(* {num(c)} {sym})")
    return terms[0] if len(terms) == 1 else "(+ " + " ".join(terms) + ")"


def to_smt(pred: Predicate, space: VarSpace) -> str:
    """SMT-LIB term for ``pred``; quantified variables range over the naturals."""
    if isinstance(pred, Atom):
        return f"({pred.rel} {_linear(pred, space)} {num(pred.bound)})"
    if isinstance(pred, And):
        if not pred.args:
            return "true"
        if len(pred.args) == 1:
            return to_smt(pred.args[0], space)
        return "(and " + " ".join(to_smt(a, space) for a in pred.args) + ")"
    if isinstance(pred, Or):
        if not pred.args:
            return "false"
        if len(pred.args) == 1:
            return to_smt(pred.args[0], space)
        return "(or " + " ".join(to_smt(a, space) for a in pred.args) + ")"
    if isinstance(pred, Not):
        return f"(not {to_smt(pred.arg, space)})"
    if isinstance(pred, Exists):
        k = space.symbol(pred.var)
        return f"(exists (({k} Int)) (and (>= {k} 0) {to_smt(pred.body, space)}))"
    if isinstance(pred, Forall):
        k = space.symbol(pred.var)
        return f"(forall (({k} Int)) (=> (>= {k} 0) {to_smt(pred.body, space)}))"
    if isinstance(pred, (Cube, Clause)):
        return to_smt(expand(pred), space)
    raise TypeError(f"not a predicate: {pred!r}")


def parse_sexpr(text: str):
    """Parse one s-expression into nested lists of strings (bars stripped)."""
    tokens = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "()":
            tokens.append(ch)
            i += 1
        elif ch == "|":
            j = text.index("|", i + 1)
            tokens.append(("sym", text[i + 1 : j]))
            i = j + 1
        elif ch == '"':
            j = i + 1
            while True:
                j = text.index('"', j)
                if j + 1 < len(text) and text[j + 1] == '"':
                    j += 2
                    continue
                break
            tokens.append(("str", text[i + 1 : j]))
            i = j + 1
        else:
            j = i
            while j < len(text) and not text[j].isspace() and text[j] not in '()|"':
                j += 1
            tokens.append(("sym", text[i:j]))
            i = j
    pos = 0

    def read():
        nonlocal pos
        tok = tokens[pos]
        pos += 1
        if tok == "(":
            out = []
            while tokens[pos] != ")":
                out.append(read())
            pos += 1
            return out
        if tok == ")":
            raise SolverError(f"unbalanced response: {text!r}")
        return tok[1]

    try:
        value = read()
    except (IndexError, ValueError):
        raise SolverError(f"malformed response: {text!r}") from None
    return value


def _int_value(v) -> int:
    if isinstance(v, str):
        return int(v)
    if isinstance(v, list) and len(v) == 2 and v[0] == "-":
        return -_int_value(v[1])
    raise SolverError(f"unexpected value {v!r}")


# ---------------------------------------------------------------------------
# Session


@dataclass
class SatResult:
    status: str
    model: dict[str, int] | None = None
    core: list[str] | None = None

    @property
    def sat(self) -> bool:
        return self.status == "sat"

    @property
    def unsat(self) -> bool:
        return self.status == "unsat"


def _balanced_reader(stream, out: queue.Queue) -> None:
    depth = 0
    buf: list[str] = []
    in_bar = in_str = False
    while True:
        ch = stream.read(1)
        if not ch:
            if "".join(buf).strip():
                out.put("".join(buf).strip())
            out.put(None)
            return
        buf.append(ch)
        if in_bar:
            in_bar = ch != "|"
            continue
        if in_str:
            in_str = ch != '"'
            continue
        if ch == "|":
            in_bar = True
        elif ch == '"':
            in_str = True
        elif ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth == 0:
                out.put("".join(buf).strip())
                buf = []
        elif ch == "\n" and depth == 0:
            text = "".join(buf).strip()
            buf = []
            if text:
                out.put(text)


@dataclass
class Session:
    """A single-owner connection to a solver process."""

    command: str | Sequence[str] | None = None
    logic: str = QF_LIA
    timeout: float = DEFAULT_TIMEOUT
    depth: int = 0
    _proc: subprocess.Popen | None = field(default=None, repr=False)
    _queue: queue.Queue = field(default_factory=queue.Queue, repr=False)
    _counter: int = 0
    _poisoned: str | None = None
    _declared: set = field(default_factory=set, repr=False)
    queries: int = 0
    check_command: str | None = None

    def __post_init__(self):
        cmd = self.command if self.command is not None else default_command()
        argv = shlex.split(cmd) if isinstance(cmd, str) else list(cmd)
        if not argv:
            raise SolverError("empty solver command")
        self.command = argv
        if self.check_command is None:
            self.check_command = quantified_check(argv) if self.logic == LIA else "(check-sat)"
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise SolverStartError(f"cannot start solver {argv[0]!r}: {exc}") from None
        reader = threading.Thread(target=_balanced_reader, args=(self._proc.stdout, self._queue), daemon=True)
        reader.start()
        try:
            self._handshake()
        except SolverError:
            self.close()
            raise

    def _handshake(self) -> None:
        try:
            self.command_ok("(set-option :print-success true)")
        except SolverError as exc:
            raise SolverStartError(f"solver handshake failed: {exc}") from None
        self.command_ok("(set-option :produce-models true)")
        self.command_ok("(set-option :produce-unsat-cores true)")
        self.command_ok(f"(set-logic {self.logic})")

    # -- low level

    @property
    def alive(self) -> bool:
        return self._proc is not None and self._proc.poll() is None and self._poisoned is None

    def _send(self, text: str) -> None:
        if self._poisoned:
            raise SolverError(f"session unusable: {self._poisoned}")
        try:
            self._proc.stdin.write(text + "\n")
            self._proc.stdin.flush()
        except (OSError, ValueError, AttributeError) as exc:
            self._poison(f"write failed: {exc}")
            raise SolverError(self._poisoned) from None

    def _receive(self, timeout: float | None = None) -> str | None:
        """Next response, or None on timeout."""
        try:
            item = self._queue.get(timeout=timeout)
        except queue.Empty:
            return None
        if item is None:
            self._poison("solver process terminated")
            raise SolverError(self._poisoned)
        if item.startswith("(error"):
            self._poison(item)
            raise SolverError(f"solver error: {item}")
        return item

    def _poison(self, reason: str) -> None:
        if self._poisoned is None:
            self._poisoned = reason

    def command_ok(self, text: str) -> None:
        self._send(text)
        resp = self._receive(self.timeout)
        if resp is None:
            self._poison(f"no answer to {text}")
            self.close()
            raise SolverError(self._poisoned)
        if resp != "success":
            self._poison(f"unexpected answer {resp!r} to {text}")
            raise SolverError(self._poisoned)

    def close(self) -> None:
        proc, self._proc = self._proc, None
        if proc is None:
            return
        self._poison("session closed")
        try:
            if proc.poll() is None:
                proc.kill()
            proc.wait(timeout=5)
        except (OSError, subprocess.TimeoutExpired):
            pass
        try:
            proc.stdin.close()
        except (OSError, ValueError):
            pass

    def __enter__(self) -> "Session":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass

    # -- protocol operations

    def fresh_name(self, prefix: str = "a") -> str:
        self._counter += 1
        return f"{prefix}{self._counter}"

    def declare_int(self, symbol: str, nonneg: bool = True) -> None:
        if symbol in self._declared:
            return
        self.command_ok(f"(declare-const {symbol} Int)")
        if nonneg:
            self.command_ok(f"(assert (>= {symbol} 0))")
        if self.depth == 0:
            self._declared.add(symbol)

    def declare_space(self, space: VarSpace) -> None:
        for sym in space.unprimed_symbols() + space.primed_symbols():
            self.declare_int(sym)

    def assert_term(self, term: str, name: str | None = None) -> str | None:
        if name is None:
            self.command_ok(f"(assert {term})")
            return None
        self.command_ok(f"(assert (! {term} :named {name}))")
        return name

    def assert_pred(self, pred: Predicate, space: VarSpace, name: str | None = None) -> str | None:
        return self.assert_term(to_smt(pred, space), name)

    def push(self) -> None:
        self.command_ok("(push 1)")
        self.depth += 1

    def pop(self) -> None:
        if self.depth == 0:
            raise SolverError("pop on empty assertion stack")
        self.command_ok("(pop 1)")
        self.depth -= 1

    def reset(self) -> None:
        self.command_ok("(reset)")
        self.depth = 0
        self._declared.clear()
        self.command_ok("(set-option :print-success true)")
        self.command_ok("(set-option :produce-models true)")
        self.command_ok("(set-option :produce-unsat-cores true)")
        self.command_ok(f"(set-logic {self.logic})")

    def check(self, model_symbols: Iterable[str] | None = None, core: bool = False) -> SatResult:
        """Run check-sat; fetch a model or a core when asked."""
        self.queries += 1
        self._send(self.check_command)
        started = time.monotonic()
        resp = self._receive(self.timeout)
        if resp is None:
            self._poison(f"timeout after {time.monotonic() - started:.1f}s")
            self.close()
            return SatResult("unknown")
        if resp not in ("sat", "unsat", "unknown"):
            self._poison(f"unexpected answer {resp!r} to check-sat")
            raise SolverError(self._poisoned)
        result = SatResult(resp)
        if resp == "sat" and model_symbols is not None:
            result.model = self.get_model(model_symbols)
        elif resp == "unsat" and core:
            result.core = self.get_core()
        return result

    def get_model(self, symbols: Iterable[str]) -> dict[str, int]:
        """Values of ``symbols`` keyed by the symbol with bars stripped."""
        symbols = list(symbols)
        if not symbols:
            return {}
        self._send("(get-value (" + " ".join(symbols) + "))")
        resp = self._receive(self.timeout)
        if resp is None:
            self._poison("timeout in get-value")
            self.close()
            raise SolverError(self._poisoned)
        parsed = parse_sexpr(resp)
        if not isinstance(parsed, list):
            self._poison(f"unexpected answer {resp!r} to get-value")
            raise SolverError(self._poisoned)
        model = {}
        for pair in parsed:
            if not isinstance(pair, list) or len(pair) != 2 or not isinstance(pair[0], str):
                raise SolverError(f"unexpected model entry {pair!r}")
            model[pair[0]] = _int_value(pair[1])
        return model

    def get_core(self) -> list[str]:
        self._send("(get-unsat-core)")
        resp = self._receive(self.timeout)
        if resp is None:
            self._poison("timeout in get-unsat-core")
            self.close()
            raise SolverError(self._poisoned)
        parsed = parse_sexpr(resp)
        if not isinstance(parsed, list) or not all(isinstance(x, str) for x in parsed):
            self._poison(f"unexpected answer {resp!r} to get-unsat-core")
            raise SolverError(self._poisoned)
        return parsed


def open_session(
    command: str | Sequence[str] | None = None, logic: str = QF_LIA, timeout: float = DEFAULT_TIMEOUT
) -> Session:
    return Session(command=command, logic=logic, timeout=timeout)
