"""Property directed reachability over linear integer arithmetic.

The engine maintains an over-approximated reachability sequence F_0..F_k+1
of clause sets, blocks generalized witnesses of the feared predicate and
stops with either an inductive certificate or a replayable trace.
"""

from __future__ import annotations

import heapq
import itertools
import threading
import time
from dataclasses import dataclass, field
from typing import Sequence

from .encoding import VarSpace, gen_hurdle, gen_saturated, gen_state, prime, trans_rel
from .formula import (
    FALSE,
    Clause,
    Cube,
    LinearExpr,
    Predicate,
    conjoin,
    evaluate,
    is_monotonic,
    is_quantified,
    make_atom,
    negate,
    simplify_cube,
    solve_param,
    substitute,
    to_dnf,
)
from .petri import Marking, Net, enabled, fire, primitive_root
from .smt import DEFAULT_TIMEOUT, LIA, QF_LIA, SatResult, Session, SolverError, SolverStartError

STRATEGIES = ("state", "hurdle", "saturation", "auto", "portfolio")


class StrategyError(ValueError):
    pass


class InternalError(RuntimeError):
    """An engine invariant was broken; never expected in a correct run."""


class Counterexample(Exception):
    def __init__(self, trace: Sequence[str]):
        super().__init__("counterexample")
        self.trace = tuple(trace)


class _Abort(Exception):
    """Stops the engine with an Unknown verdict."""


# ---------------------------------------------------------------------------
# Verdicts


@dataclass
class Stats:
    level: int = 0
    witnesses: int = 0
    queries: int = 0
    clauses: int = 0
    seconds: float = 0.0
    strategy: str = ""


@dataclass
class Invariant:
    certificate: Predicate
    stats: Stats = field(default_factory=Stats)
    name = "INVARIANT"


@dataclass
class Reachable:
    trace: tuple[str, ...]
    final: Marking
    stats: Stats = field(default_factory=Stats)
    name = "REACHABLE"


@dataclass
class Unknown:
    reason: str
    frames: list[list[Clause]] | None = None
    stats: Stats = field(default_factory=Stats)
    name = "UNKNOWN"


Verdict = Invariant | Reachable | Unknown


@dataclass
class Options:
    strategy: str = "auto"
    solver_cmd: str | Sequence[str] | None = None
    timeout: float | None = None
    query_timeout: float = DEFAULT_TIMEOUT
    max_level: int = 1000
    max_obligations: int = 10_000
    max_witnesses: int | None = None
    minimize_cores: bool = True
    validate_oars: bool = False
    dnf_budget: int = 4096


@dataclass
class Obligation:
    """A cube whose models reach the root cube by replaying a known suffix.

    ``kind`` is ``state``, ``hurdle`` or ``saturated``. For saturated cubes
    ``seq`` is the repeated sequence and ``tail`` is fired once afterwards.
    """

    cube: Cube
    kind: str
    seq: tuple[str, ...]
    root: Cube
    tail: tuple[str, ...] = ()


# ---------------------------------------------------------------------------
# Engine


class Engine:
    def __init__(self, net: Net, m0: Sequence[int], prop: Predicate, options: Options | None = None):
        self.net = net
        self.m0 = net.marking(m0)
        self.prop = prop
        self.opts = options or Options()
        if self.opts.strategy not in STRATEGIES or self.opts.strategy == "portfolio":
            raise StrategyError("engine strategy must be one of state, hurdle, saturation, auto")
        if is_quantified(prop):
            raise StrategyError("the property must be quantifier-free")
        self.feared = negate(prop)
        self.monotonic = is_monotonic(self.feared)
        if self.opts.strategy == "state" and not self.monotonic:
            raise StrategyError("state-based generalization needs a monotonic feared predicate")
        self.space = VarSpace(net)
        self.init = conjoin(make_atom(LinearExpr.var(p), "=", x) for p, x in zip(net.places, self.m0))
        self.trans = trans_rel(net)
        self.frames: list[dict[Clause, None]] = []
        self.k = 0
        self.violations: list[str] = []
        self.stats = Stats(strategy=self.opts.strategy)
        self._sessions: dict[str, Session] = {}
        self._sk = itertools.count()
        self._cancel = threading.Event()
        self._deadline = None

    # -- sessions and queries

    def cancel(self) -> None:
        self._cancel.set()
        for s in list(self._sessions.values()):
            s.close()

    def close(self) -> None:
        for s in self._sessions.values():
            s.close()
        self._sessions.clear()

    def _session(self, quantified: bool) -> Session:
        logic = LIA if quantified else QF_LIA
        sess = self._sessions.get(logic)
        if sess is None:
            sess = Session(self.opts.solver_cmd, logic=logic, timeout=self.opts.query_timeout)
            sess.declare_space(self.space)
            sess.assert_pred(self.trans, self.space)
            self._sessions[logic] = sess
        return sess

    def _tick(self) -> None:
        if self._cancel.is_set():
            raise _Abort("cancelled")
        if self._deadline is not None and time.monotonic() > self._deadline:
            raise _Abort("timeout")

    def _solve(
        self,
        preds: Sequence[Predicate],
        cube: Cube | None = None,
        named: bool = False,
        model: bool = False,
    ) -> tuple[SatResult, dict[str, int]]:
        """Check ``preds`` (unprimed, with T in the background) and ``cube`` over primed places.

        A quantified cube is skolemized with a fresh natural constant. When
        ``named`` is set, each cube literal is named and the returned map
        gives the literal index of every core name.
        """
        self._tick()
        quantified = any(is_quantified(p) for p in preds)
        sess = self._session(quantified)
        if self._deadline is not None:
            sess.timeout = max(0.1, min(self.opts.query_timeout, self._deadline - time.monotonic()))
        names: dict[str, int] = {}
        sess.push()
        try:
            body = conjoin(preds)
            if body != conjoin([]):
                sess.assert_pred(body, self.space)
            if cube is not None:
                atoms = list(cube.atoms)
                if cube.param is not None:
                    sk = f"#sk{next(self._sk)}"
                    sess.declare_int(self.space.symbol(sk))
                    ren = {cube.param: LinearExpr.var(sk)}
                    atoms = [substitute(a, ren) for a in atoms]
                for idx, a in enumerate(atoms):
                    term = prime(a, self.net)
                    if named:
                        names[sess.assert_pred(term, self.space, sess.fresh_name("lit"))] = idx
                    else:
                        sess.assert_pred(term, self.space)
            symbols = self.space.unprimed_symbols() + self.space.primed_symbols() if model else None
            res = sess.check(model_symbols=symbols, core=named)
        except SolverError:
            if self._cancel.is_set():
                raise _Abort("cancelled") from None
            raise
        finally:
            self.stats.queries += 1
            if sess.alive:
                sess.pop()
        if res.status == "unknown":
            if self._cancel.is_set():
                raise _Abort("cancelled")
            raise _Abort("solver returned unknown")
        return res, names

    def _markings(self, model: dict[str, int]) -> tuple[Marking, Marking]:
        m = tuple(model[p] for p in self.net.places)
        m2 = tuple(model[p + "'"] for p in self.net.places)
        return m, m2

    def _identify(self, m: Marking, m2: Marking) -> str | None:
        d = tuple(b - a for a, b in zip(m, m2))
        for t in self.net.transitions:
            if self.net.delta(t) == d and enabled(self.net, m, t):
                return t
        if any(d):
            raise InternalError(f"no transition explains {m} -> {m2}")
        return None

    # -- frames

    def frame_preds(self, i: int) -> list[Predicate]:
        if i == 0:
            return [self.init]
        return [self.prop, *self.frames[i]]

    def frame_formula(self, i: int) -> Predicate:
        return conjoin(self.frame_preds(i))

    def _frames_snapshot(self) -> list[list[Clause]]:
        return [list(f) for f in self.frames]

    # -- witnesses

    def concrete_suffix(self, ob: Obligation, m: Marking) -> tuple[str, ...]:
        """A sequence leading from ``m`` (a model of ob.cube) to ob.root."""
        if ob.kind != "saturated":
            return ob.seq
        if ob.cube.param is None:
            return ob.seq + ob.tail
        k = solve_param(ob.cube.atoms, ob.cube.param, self.net.env(m))
        if k is None:
            raise InternalError(f"{m} does not model {ob.cube}")
        return ob.seq * (k + 1) + ob.tail

    def generalize_witness(self, m: Marking, sigma: Sequence[str], root: Cube) -> Obligation:
        """Abstract the witness ``m --sigma--> root`` with the configured strategy."""
        cap = self.opts.max_witnesses
        if cap is not None and self.stats.witnesses >= cap:
            raise _Abort("witness cap reached")
        self.stats.witnesses += 1
        sigma = tuple(sigma)
        strategy = self.opts.strategy
        if strategy == "auto":
            ob = self._auto_generalization(m, sigma, root)
        elif strategy == "state":
            ob = Obligation(gen_state(self.net, m), "state", sigma, root)
        elif strategy == "hurdle":
            ob = Obligation(self._simplified(gen_hurdle(self.net, sigma, root)), "hurdle", sigma, root)
        else:
            rho, _ = primitive_root(sigma)
            ob = Obligation(self._simplified(gen_saturated(self.net, rho, root)), "saturated", rho, root)
        if not evaluate(ob.cube, self.net.env(m)):
            raise InternalError(f"generalization {ob.cube} drops its own witness {m}")
        if evaluate(ob.cube, self.net.env(self.m0)):
            raise Counterexample(self.concrete_suffix(ob, self.m0))
        return ob

    def _auto_generalization(self, m: Marking, sigma: tuple[str, ...], root: Cube) -> Obligation:
        """State-based when the feared predicate is monotonic; otherwise
        saturate a repeated prefix of the suffix if there is one, else use
        the hurdle generalization.

        For ``sigma = rho^j . tail`` with j >= 2, the tail is first
        generalized by its hurdle and ``rho`` is then saturated towards it.
        """
        if self.monotonic:
            return Obligation(gen_state(self.net, m), "state", sigma, root)
        split = power_prefix(sigma)
        if split is None:
            return Obligation(self._simplified(gen_hurdle(self.net, sigma, root)), "hurdle", sigma, root)
        rho, _, tail = split
        target = self._simplified(gen_hurdle(self.net, tail, root)) if tail else root
        cube = self._simplified(gen_saturated(self.net, rho, target))
        return Obligation(cube, "saturated", rho, root, tail)

    def _simplified(self, cube: Cube | Predicate) -> Cube:
        if cube == FALSE:
            raise InternalError("generalization is empty")
        out = simplify_cube(cube)
        if out is None:
            raise InternalError("generalization is contradictory")
        return out

    # -- the six procedures

    def prove(self) -> Verdict:
        started = time.monotonic()
        if self.opts.timeout is not None:
            self._deadline = started + self.opts.timeout
        try:
            verdict = self._prove()
        except _Abort as exc:
            verdict = Unknown(str(exc), self._frames_snapshot())
        except SolverStartError:
            raise
        except SolverError as exc:
            verdict = Unknown(f"solver error: {exc}", self._frames_snapshot())
        finally:
            self.close()
        self.stats.level = self.k
        self.stats.clauses = sum(len(f) for f in self.frames)
        self.stats.seconds = time.monotonic() - started
        verdict.stats = self.stats
        return verdict

    def _prove(self) -> Verdict:
        env0 = self.net.env(self.m0)
        if evaluate(self.feared, env0):
            return Reachable((), self.m0)
        cubes = to_dnf(self.feared, self.opts.dnf_budget)
        self.bad = [c for c in cubes if self._solve([], c)[0].sat]
        if not self.bad:
            return Invariant(self.prop)
        for c in self.bad:
            res, _ = self._solve([self.init], c, model=True)
            if res.sat:
                m, m2 = self._markings(res.model)
                t = self._identify(m, m2)
                return self._reachable((t,) if t else ())
        self.k = 1
        self.frames = [{}, {}, {}]
        while True:
            if self.k > self.opts.max_level:
                raise _Abort("level budget exhausted")
            try:
                self.strengthen(self.k)
            except Counterexample as cex:
                return self._reachable(cex.trace)
            self.propagate_clauses(self.k)
            if self.opts.validate_oars:
                self.validate_oars()
            for i in range(1, self.k + 1):
                if set(self.frames[i]) == set(self.frames[i + 1]):
                    return Invariant(conjoin([self.prop, *self.frames[i]]))
            self.k += 1
            self.frames.append({})

    def _reachable(self, trace: Sequence[str]) -> Reachable:
        final = fire(self.net, self.m0, trace)
        if final is None or not evaluate(self.feared, self.net.env(final)):
            raise InternalError(f"trace {trace} does not reach the feared predicate")
        return Reachable(tuple(trace), final)

    def strengthen(self, k: int) -> bool:
        """Block every witness of ``F_k and T and feared'``; raises Counterexample."""
        for c in self.bad:
            while True:
                res, _ = self._solve(self.frame_preds(k), c, model=True)
                if not res.sat:
                    break
                m, m2 = self._markings(res.model)
                t = self._identify(m, m2)
                if t is None:
                    raise InternalError("stuttering witness in strengthen")
                ob = self.generalize_witness(m, (t,), c)
                n = self.inductively_generalize(ob, k - 2, k)
                self.push_generalization([(n + 1, ob)], k)
                if self.opts.validate_oars:
                    self.validate_oars()
        return True

    def inductively_generalize(self, ob: Obligation, lo: int, k: int) -> int:
        s = ob.cube
        if lo < 0:
            self._check_initial(ob)
        start = max(1, lo + 1)
        for i in range(start, k + 1):
            if self._solve([*self.frame_preds(i), Clause(s)], s)[0].sat:
                level = i - 1
                if i == start and lo >= 1:
                    # a generalized cube need not be inductive at ``lo``
                    level = self._descend(ob, lo)
                self.generate_clause(s, level, k)
                return level
        self.generate_clause(s, k, k)
        return k

    def _check_initial(self, ob: Obligation) -> None:
        """Raise a counterexample when ``ob.cube`` is reachable in at most one step."""
        res, _ = self._solve(self.frame_preds(0), ob.cube, model=True)
        if res.sat:
            m, m2 = self._markings(res.model)
            t = self._identify(m, m2)
            head = (t,) if t else ()
            raise Counterexample(head + self.concrete_suffix(ob, m2))

    def _descend(self, ob: Obligation, j: int) -> int:
        """Highest level at most ``j`` where the cube is relatively inductive."""
        s = ob.cube
        while j >= 1:
            if self._solve([*self.frame_preds(j), Clause(s)], s)[0].unsat:
                return j
            j -= 1
        self._check_initial(ob)
        return 0

    def generate_clause(self, s: Cube, i: int, k: int) -> Clause:
        """Learn the negation of the core of ``s`` into F_1..F_{i+1}."""
        preds = [*self.frame_preds(i), Clause(s)]
        res, names = self._solve(preds, s, named=True)
        if res.sat:
            raise InternalError(f"cube {s} is not inductive relative to F_{i}")
        env0 = self.net.env(self.m0)
        atoms = list(s.atoms)
        if res.core is not None:
            keep = sorted({names[n] for n in res.core if n in names})
            atoms = [s.atoms[j] for j in keep]
        cube = Cube(tuple(atoms), s.param)
        if evaluate(cube, env0):
            cube = s
        if self.opts.minimize_cores:
            cube = self._shrink(cube, i)
        cl = Clause(cube)
        for j in range(1, i + 2):
            self.frames[j][cl] = None
        return cl

    def _shrink(self, cube: Cube, i: int) -> Cube:
        """Deletion-based minimization: drop literals while the cube stays
        inductive relative to F_i and excludes the initial marking.

        Each attempt costs one query, so at most ``len(cube)`` queries run.
        """
        env0 = self.net.env(self.m0)
        for a in list(cube.atoms):
            if a not in cube.atoms or len(cube.atoms) <= 1:
                continue
            trial = Cube(tuple(x for x in cube.atoms if x != a), cube.param)
            if evaluate(trial, env0):
                continue
            res, names = self._solve([*self.frame_preds(i), Clause(trial)], trial, named=True)
            if not res.unsat:
                continue
            cube = trial
            if res.core is not None:
                keep = {names[n] for n in res.core if n in names}
                core = Cube(tuple(x for j, x in enumerate(trial.atoms) if j in keep), trial.param)
                if core.atoms and not evaluate(core, env0):
                    cube = core
        return cube

    def push_generalization(self, states: Sequence[tuple[int, Obligation]], k: int) -> None:
        counter = itertools.count()
        heap = [(n, next(counter), ob) for n, ob in states]
        heapq.heapify(heap)
        processed = 0
        while heap:
            n, _, ob = heap[0]
            if n > k:
                return
            processed += 1
            if processed > self.opts.max_obligations:
                raise _Abort("obligation budget exhausted")
            res, _ = self._solve(self.frame_preds(n), ob.cube, model=True)
            if res.sat:
                m, m2 = self._markings(res.model)
                t = self._identify(m, m2)
                if t is None:
                    raise InternalError("stuttering witness in pushGeneralization")
                suffix = (t,) + self.concrete_suffix(ob, m2)
                p = self.generalize_witness(m, suffix, ob.root)
                level = self.inductively_generalize(p, n - 2, k)
                heapq.heappush(heap, (level + 1, next(counter), p))
            else:
                heapq.heappop(heap)
                level = self.inductively_generalize(ob, n, k)
                heapq.heappush(heap, (level + 1, next(counter), ob))

    def propagate_clauses(self, k: int) -> None:
        for i in range(1, k + 1):
            for cl in list(self.frames[i]):
                if cl in self.frames[i + 1]:
                    continue
                res, _ = self._solve(self.frame_preds(i), cl.cube)
                if res.unsat:
                    self.frames[i + 1][cl] = None

    # -- debugging

    def validate_oars(self) -> list[str]:
        """Check the sequence invariants at the current level; record violations."""
        found = []
        k = self.k
        for i in range(1, k + 1):
            if not set(self.frames[i + 1]) <= set(self.frames[i]):
                found.append(f"containment broken between F_{i} and F_{i + 1}")
        if not evaluate(self.frame_formula(1), self.net.env(self.m0)):
            found.append("initial marking violates F_1")
        for i in range(k + 1):
            for c in self.bad:
                if self._solve_unprimed(self.frame_preds(i), c):
                    found.append(f"F_{i} intersects feared cube {c}")
        for i in range(k):
            targets = list(self.bad) + [cl.cube for cl in self.frames[i + 1]]
            for c in targets:
                res, _ = self._solve(self.frame_preds(i), c)
                if res.sat:
                    found.append(f"consecution broken from F_{i} for {c}")
        self.violations.extend(found)
        return found

    def _solve_unprimed(self, preds: Sequence[Predicate], c: Cube) -> bool:
        """Satisfiability of ``preds and c`` over unprimed places."""
        res, _ = self._solve([*preds, c])
        return res.sat


def power_prefix(sigma: Sequence[str]) -> tuple[tuple[str, ...], int, tuple[str, ...]] | None:
    """Split ``sigma`` as ``rho^j . tail`` with j >= 2 covering the longest prefix.

    Ties go to the shortest ``rho``; None when no block repeats at the start.
    """
    seq = tuple(sigma)
    best = None
    for size in range(1, len(seq) // 2 + 1):
        rho = seq[:size]
        j = 1
        while seq[j * size : (j + 1) * size] == rho:
            j += 1
        if j >= 2 and (best is None or size * j > best[0]):
            best = (size * j, rho, j)
    if best is None:
        return None
    cover, rho, j = best
    return rho, j, seq[cover:]


def prove(net: Net, m0: Sequence[int], prop: Predicate, options: Options | None = None) -> Verdict:
    """Decide whether ``prop`` holds in every marking reachable from ``m0``."""
    options = options or Options()
    if options.strategy == "portfolio":
        return prove_portfolio(net, m0, prop, options)
    return Engine(net, m0, prop, options).prove()


def portfolio_strategies(prop: Predicate) -> list[str]:
    out = ["saturation", "hurdle"]
    if is_monotonic(negate(prop)):
        out.insert(0, "state")
    return out


def prove_portfolio(net: Net, m0: Sequence[int], prop: Predicate, options: Options) -> Verdict:
    """Run several strategies concurrently; the first definite verdict wins."""
    engines = []
    for name in portfolio_strategies(prop):
        opts = Options(**{**options.__dict__, "strategy": name})
        engines.append(Engine(net, m0, prop, opts))
    results: list[Verdict | None] = [None] * len(engines)
    startup: list[SolverStartError] = []
    done = threading.Event()
    lock = threading.Lock()

    def run(i: int) -> None:
        try:
            v = engines[i].prove()
        except SolverStartError as exc:
            startup.append(exc)
            v = Unknown(str(exc))
        except Exception as exc:  # a failed member must not sink the others
            v = Unknown(f"{engines[i].opts.strategy}: {exc}")
        with lock:
            results[i] = v
            if not isinstance(v, Unknown) or all(r is not None for r in results):
                done.set()

    threads = [threading.Thread(target=run, args=(i,), daemon=True) for i in range(len(engines))]
    for th in threads:
        th.start()
    done.wait()
    for e in engines:
        e.cancel()
    for th in threads:
        th.join(timeout=10)
    for v in results:
        if v is not None and not isinstance(v, Unknown):
            return v
    if startup:
        raise startup[0]
    reasons = "; ".join(v.reason for v in results if isinstance(v, Unknown))
    return Unknown(f"portfolio: {reasons}")


# ---------------------------------------------------------------------------
# Certificates


@dataclass
class CertificateReport:
    """Outcome of the three checks; None marks an indeterminate solver answer."""

    initial: bool | None
    inductive: bool | None
    entails: bool | None

    @property
    def valid(self) -> bool:
        return self.initial is True and self.inductive is True and self.entails is True

    @property
    def indeterminate(self) -> bool:
        return None in (self.initial, self.inductive, self.entails)


def certificate_queries(net: Net, m0: Sequence[int], prop: Predicate, cert: Predicate) -> dict[str, Predicate]:
    """The three formulas whose unsatisfiability establishes the certificate."""
    init = conjoin(make_atom(LinearExpr.var(p), "=", x) for p, x in zip(net.places, m0))
    return {
        "initial": conjoin([init, negate(cert)]),
        "inductive": conjoin([cert, trans_rel(net), prime(negate(cert), net)]),
        "entails": conjoin([cert, negate(prop)]),
    }


def check_certificate(
    net: Net,
    m0: Sequence[int],
    prop: Predicate,
    cert: Predicate,
    solver_cmd: str | Sequence[str] | None = None,
    timeout: float = DEFAULT_TIMEOUT,
) -> CertificateReport:
    """Check that ``cert`` holds initially, is inductive and entails ``prop``."""
    m0 = net.marking(m0)
    queries = certificate_queries(net, m0, prop, cert)
    logic = LIA if any(is_quantified(q) for q in queries.values()) else QF_LIA
    space = VarSpace(net)
    out: dict[str, bool | None] = {}
    with Session(solver_cmd, logic=logic, timeout=timeout) as sess:
        sess.declare_space(space)
        for key, q in queries.items():
            if not sess.alive:
                out[key] = None
                continue
            sess.push()
            sess.assert_pred(q, space)
            res = sess.check()
            if sess.alive:
                sess.pop()
            out[key] = {"unsat": True, "sat": False}.get(res.status)
    return CertificateReport(out["initial"], out["inductive"], out["entails"])


def equivalent(net: Net, a: Predicate, b: Predicate, solver_cmd=None, timeout: float = DEFAULT_TIMEOUT) -> bool | None:
    """Solver check that ``a`` and ``b`` have the same models over markings."""
    space = VarSpace(net)
    logic = LIA if is_quantified(a) or is_quantified(b) else QF_LIA
    with Session(solver_cmd, logic=logic, timeout=timeout) as sess:
        sess.declare_space(space)
        for x, y in ((a, b), (b, a)):
            sess.push()
            sess.assert_pred(conjoin([x, negate(y)]), space)
            res = sess.check()
            if res.status != "unsat":
                return None if res.status == "unknown" else False
            sess.pop()
    return True
