"""CNF construction with role bookkeeping, DIMACS I/O, and solver sessions.

Literals are non-zero ints. The Python constants ``True``/``False`` are also
accepted wherever a literal is and are folded away when clauses are added,
which lets circuit instantiation substitute known signal values directly.
"""

from __future__ import annotations

import contextlib
import os
import shutil
import subprocess
import tempfile
import threading
import time
from collections import Counter
from typing import Iterable, Sequence

ROLES = ("function", "connection", "levelization", "fault", "io")

SOLVER_ENV = "CAMOSAT_SOLVER"
DEFAULT_BACKEND = "glucose4"


class SolverError(RuntimeError):
    pass


def neg(lit):
    if isinstance(lit, bool):
        return not lit
    return -lit


class CnfBuild:
    """Variable allocator plus clause sink.

    Clauses stream to attached solver sessions as they are added; they are
    kept in ``self.clauses`` only when ``store`` is true (needed for DIMACS
    export, wasteful for large attack runs).
    """

    def __init__(self, store: bool = True):
        self.nvars = 0
        self.nclauses = 0
        self.store = store
        self.clauses: list[list[int]] = []
        self.var_roles: list[str] = [""]
        self.names: dict[int, str] = {}
        self.clause_roles: Counter = Counter()
        self._role = "io"
        self._listeners: list = []

    @contextlib.contextmanager
    def role(self, name: str):
        if name not in ROLES:
            raise ValueError(f"unknown role {name!r}")
        prev, self._role = self._role, name
        try:
            yield
        finally:
            self._role = prev

    def new_var(self, name: str | None = None, role: str | None = None) -> int:
        self.nvars += 1
        self.var_roles.append(role or self._role)
        if name is not None:
            self.names[self.nvars] = name
        return self.nvars

    def add(self, clause: Iterable) -> None:
        out = []
        for lit in clause:
            if lit is True:
                return
            if lit is False:
                continue
            out.append(lit)
        self.nclauses += 1
        self.clause_roles[self._role] += 1
        if self.store:
            self.clauses.append(out)
        for listener in self._listeners:
            listener.add_clause(out)

    def attach(self, listener) -> None:
        """Replay stored clauses into ``listener`` and stream future ones."""
        if not self.store and self.nclauses:
            raise SolverError("cannot attach to a non-storing build after clauses were added")
        for c in self.clauses:
            listener.add_clause(c)
        self._listeners.append(listener)

    def detach(self, listener) -> None:
        self._listeners.remove(listener)

    def var_role_counts(self) -> dict[str, int]:
        counts = Counter(self.var_roles[1:])
        return {r: counts.get(r, 0) for r in ROLES}

    def stats(self) -> dict:
        return {
            "variables": self.nvars,
            "clauses": self.nclauses,
            "variables_by_role": self.var_role_counts(),
            "clauses_by_role": {r: self.clause_roles.get(r, 0) for r in ROLES},
        }


# -- cardinality ---------------------------------------------------------------

PAIRWISE_LIMIT = 30


def at_most_one(build: CnfBuild, lits: Sequence) -> None:
    lits = [l for l in lits if l is not False]
    if len(lits) <= PAIRWISE_LIMIT:
        for i in range(len(lits)):
            for j in range(i + 1, len(lits)):
                build.add([neg(lits[i]), neg(lits[j])])
        return
    # sequential counter: s_i means "some lit among the first i+1 is true"
    prev = None
    for i, x in enumerate(lits):
        if prev is not None:
            build.add([neg(prev), neg(x)])
        if i < len(lits) - 1:
            s = build.new_var()
            build.add([neg(x), s])
            if prev is not None:
                build.add([neg(prev), s])
            prev = s


def exactly_one(build: CnfBuild, lits: Sequence) -> None:
    build.add(list(lits))
    at_most_one(build, lits)


def at_most_k(build: CnfBuild, lits: Sequence, k: int) -> None:
    """Sinz sequential counter."""
    lits = [l for l in lits if l is not False]
    n = len(lits)
    if k >= n:
        return
    if k == 0:
        for x in lits:
            build.add([neg(x)])
        return
    s = [[build.new_var() for _ in range(k)] for _ in range(n - 1)]
    build.add([neg(lits[0]), s[0][0]])
    for j in range(1, k):
        build.add([neg(s[0][j])])
    for i in range(1, n - 1):
        build.add([neg(lits[i]), s[i][0]])
        build.add([neg(s[i - 1][0]), s[i][0]])
        for j in range(1, k):
            build.add([neg(lits[i]), neg(s[i - 1][j - 1]), s[i][j]])
            build.add([neg(s[i - 1][j]), s[i][j]])
        build.add([neg(lits[i]), neg(s[i - 1][k - 1])])
    build.add([neg(lits[n - 1]), neg(s[n - 2][k - 1])])


# -- DIMACS --------------------------------------------------------------------


def export_dimacs(build: CnfBuild, sink) -> None:
    if not build.store:
        raise SolverError("build was created with store=False; nothing to export")
    for v in range(1, build.nvars + 1):
        label = build.names.get(v)
        sink.write(f"c role {v} {build.var_roles[v]}{' ' + label if label else ''}\n")
    sink.write(f"p cnf {build.nvars} {len(build.clauses)}\n")
    for c in build.clauses:
        sink.write(" ".join(map(str, c)) + " 0\n")


def parse_dimacs(text: str) -> tuple[int, list[list[int]]]:
    nvars, clauses, cur = 0, [], []
    for line in text.splitlines():
        line = line.strip()
        if not line or line[0] == "c":
            continue
        if line[0] == "p":
            nvars = int(line.split()[2])
            continue
        for tok in line.split():
            lit = int(tok)
            if lit == 0:
                clauses.append(cur)
                cur = []
            else:
                cur.append(lit)
    return nvars, clauses


# -- solver sessions -----------------------------------------------------------


class SatSession:
    """Incremental, assumption-capable solver over a CnfBuild.

    ``solve`` returns True/False, or None if ``timeout`` seconds elapsed.
    """

    def __init__(self, build: CnfBuild, backend: str = DEFAULT_BACKEND, seed: int | None = None):
        from pysat.solvers import Solver

        self.backend = backend
        self._solver = Solver(name=backend)
        self.interruptible = not backend.startswith(("cadical", "lingeling"))
        self._model: set[int] | None = None
        self.seed_honored = seed is None
        self.solve_time = 0.0
        self.calls = 0
        self._seed = seed
        build.attach(self)
        self._build = build

    def add_clause(self, clause: list[int]) -> None:
        self._solver.add_clause(clause)

    def _apply_seed(self):
        if self._seed is None:
            return
        import random

        rng = random.Random(self._seed)
        phases = [v if rng.random() < 0.5 else -v for v in range(1, self._build.nvars + 1)]
        try:
            self._solver.set_phases(phases)
            self.seed_honored = True
        except NotImplementedError:
            self.seed_honored = False

    def solve(self, assumptions: Sequence[int] = (), timeout: float | None = None):
        self._apply_seed()
        self.calls += 1
        t0 = time.perf_counter()
        try:
            if timeout is None:
                res = self._solver.solve(assumptions=list(assumptions))
            elif not self.interruptible:
                # no interrupt support: the deadline is only checked between calls
                if timeout <= 0:
                    return None
                res = self._solver.solve(assumptions=list(assumptions))
            else:
                if timeout <= 0:
                    return None
                timer = threading.Timer(timeout, self._solver.interrupt)
                timer.start()
                try:
                    res = self._solver.solve_limited(assumptions=list(assumptions), expect_interrupt=True)
                finally:
                    timer.cancel()
                    self._solver.clear_interrupt()
        finally:
            self.solve_time += time.perf_counter() - t0
        self._model = None
        if res:
            self._model = {l for l in self._solver.get_model() if l > 0}
        return res

    def value(self, lit) -> int:
        if isinstance(lit, bool):
            return int(lit)
        if self._model is None:
            raise SolverError("no model available")
        return int((abs(lit) in self._model) == (lit > 0))

    def close(self):
        self._build.detach(self)
        self._solver.delete()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class DimacsSubprocessSession:
    """Same contract as SatSession, backed by an external DIMACS solver binary.

    The binary receives a CNF file path as its only argument and must print
    ``s SATISFIABLE``/``s UNSATISFIABLE`` and ``v`` model lines (SAT
    competition output). Assumptions are passed as unit clauses.
    """

    def __init__(self, build: CnfBuild, command: str | None = None, seed: int | None = None):
        command = command or os.environ.get(SOLVER_ENV)
        if not command:
            raise SolverError(f"no external solver configured (set {SOLVER_ENV})")
        self.command = command
        self.clauses: list[list[int]] = []
        self._build = build
        self._model: set[int] | None = None
        self.seed_honored = seed is None
        self.backend = f"external:{os.path.basename(command.split()[0])}"
        self.solve_time = 0.0
        self.calls = 0
        build.attach(self)

    def add_clause(self, clause: list[int]) -> None:
        self.clauses.append(list(clause))

    def solve(self, assumptions: Sequence[int] = (), timeout: float | None = None):
        self.calls += 1
        clauses = self.clauses + [[a] for a in assumptions]
        with tempfile.NamedTemporaryFile("w", suffix=".cnf", delete=False) as fh:
            fh.write(f"p cnf {self._build.nvars} {len(clauses)}\n")
            for c in clauses:
                fh.write(" ".join(map(str, c)) + " 0\n")
            path = fh.name
        t0 = time.perf_counter()
        try:
            proc = subprocess.run(
                [*self.command.split(), path], capture_output=True, text=True, timeout=timeout
            )
        except subprocess.TimeoutExpired:
            return None
        finally:
            self.solve_time += time.perf_counter() - t0
            os.unlink(path)
        status, model = None, set()
        for line in proc.stdout.splitlines():
            if line.startswith("s "):
                status = line[2:].strip()
            elif line.startswith("v "):
                model.update(int(t) for t in line[2:].split() if int(t) > 0)
        if status == "SATISFIABLE":
            self._model = model
            return True
        if status == "UNSATISFIABLE":
            self._model = None
            return False
        if status == "UNKNOWN":
            return None
        raise SolverError(f"external solver produced no status line: {proc.stdout[:200]!r}")

    value = SatSession.value

    def close(self):
        self._build.detach(self)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def open_session(build: CnfBuild, backend: str = DEFAULT_BACKEND, seed: int | None = None):
    """``backend='external'`` uses the binary named by $CAMOSAT_SOLVER."""
    if backend == "external":
        return DimacsSubprocessSession(build, seed=seed)
    return SatSession(build, backend=backend, seed=seed)


def external_solver_available() -> bool:
    cmd = os.environ.get(SOLVER_ENV)
    return bool(cmd) and shutil.which(cmd.split()[0]) is not None
