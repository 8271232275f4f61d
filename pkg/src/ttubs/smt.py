"""Constraint-solver integration: SMT-LIB 2 encoding, external process
driver, and model extraction.

The toolkit never links a solver.  ``solve`` pipes the encoded problem to a
child process on stdin and reads ``sat``/``unsat`` plus a model from stdout,
so any solver speaking SMT-LIB 2 works (``z3 -in``, for instance).  When no
command is configured, the bundled fallback (``python -m
ttubs.smtlib_solver``) is used.
"""

from __future__ import annotations

import os
import shlex
import subprocess
import sys
import time
from dataclasses import dataclass

from .constraints import Atom, ConstraintSet, ConstraintCensus, build_constraint_set, census, validate_schedule
from .model import InvalidInputError, Scenario
from .schedule import Schedule

__all__ = [
    "SolveRequest",
    "SolveOutcome",
    "SolverProcessError",
    "ModelParseError",
    "encode",
    "solve",
    "parse_model",
    "default_solver_command",
    "SOLVER_ENV_VAR",
]

SOLVER_ENV_VAR = "TTUBS_SMT_SOLVER"


class SolverProcessError(RuntimeError):
    """The external solver failed as a process (crash, garbage output,
    'unknown').  Never conflated with an unsatisfiable instance."""


class ModelParseError(RuntimeError):
    """Solver output could not be interpreted as a variable assignment."""


@dataclass
class SolveRequest:
    scenario: Scenario
    mode: str = "nfic"
    timeout_s: float = 300.0
    solver_command: list[str] | None = None

    def __post_init__(self):
        if self.timeout_s <= 0:
            raise InvalidInputError("timeout must be positive")


@dataclass
class SolveOutcome:
    status: str  # "sat" | "unsat" | "timeout"
    schedule: Schedule | None
    solve_time_s: float
    constraint_census: ConstraintCensus


def default_solver_command() -> list[str]:
    env = os.environ.get(SOLVER_ENV_VAR)
    if env:
        return shlex.split(env)
    return [sys.executable, "-m", "ttubs.smtlib_solver"]


# ---------------------------------------------------------------------------
# encoding

def _atom_sexpr(atom: Atom) -> str:
    terms = atom.terms
    if atom.op == "!=":
        if len(terms) == 2 and terms[0][1] == 1 and terms[1][1] == -1 and atom.const == 0:
            return f"(distinct {terms[0][0]} {terms[1][0]})"
        raise InvalidInputError(f"unsupported disequality shape: {atom}")
    rhs = str(atom.const) if atom.const >= 0 else f"(- {-atom.const})"
    if len(terms) == 1 and terms[0][1] == 1:
        return f"({atom.op} {terms[0][0]} {rhs})"
    if len(terms) == 2 and terms[0][1] == 1 and terms[1][1] == -1:
        return f"({atom.op} (- {terms[0][0]} {terms[1][0]}) {rhs})"
    parts = " ".join(
        v if c == 1 else f"(* {c} {v})" if c >= 0 else f"(* (- {-c}) {v})" for v, c in terms
    )
    return f"({atom.op} (+ {parts}) {rhs})"


def _conj_sexpr(conj: tuple[Atom, ...]) -> str:
    if len(conj) == 1:
        return _atom_sexpr(conj[0])
    return "(and " + " ".join(_atom_sexpr(a) for a in conj) + ")"


def encode(cs: ConstraintSet) -> str:
    """SMT-LIB 2 text for a ground constraint set.

    One integer constant per offset variable and per free queue variable,
    one assertion per ground constraint (with its label as a comment), plus
    queue domain assertions.  Byte-for-byte deterministic for identical
    input.
    """
    lines = [
        "(set-logic QF_LIA)",
        "(set-option :produce-models true)",
    ]
    for fi in cs.instances:
        lines.append(f"(declare-const {fi.var_name} Int)")
    for qv in cs.free_queue_vars():
        lines.append(f"(declare-const {qv.name} Int)")
        lines.append(f"(assert (and (>= {qv.name} 0) (<= {qv.name} {qv.domain_max})))")
    for gc in cs.constraints:
        body = (
            _conj_sexpr(gc.disjuncts[0])
            if len(gc.disjuncts) == 1
            else "(or " + " ".join(_conj_sexpr(c) for c in gc.disjuncts) + ")"
        )
        lines.append(f"; {gc.label}")
        lines.append(f"(assert {body})")
    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# model parsing

def _tokenize(text: str):
    tokens = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()":
            tokens.append(c)
            i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "();":
                j += 1
            tokens.append(text[i:j])
            i = j
    return tokens


def _parse_sexprs(tokens: list[str]):
    out, stack = [], []
    for tok in tokens:
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if not stack:
                raise ModelParseError("unbalanced ')'")
            done = stack.pop()
            (stack[-1] if stack else out).append(done)
        else:
            (stack[-1] if stack else out).append(tok)
    if stack:
        raise ModelParseError("unbalanced '('")
    return out


def _int_value(node) -> int:
    if isinstance(node, str):
        try:
            return int(node)
        except ValueError:
            raise ModelParseError(f"non-integer model value {node!r}") from None
    if isinstance(node, list) and len(node) == 2 and node[0] == "-":
        return -_int_value(node[1])
    raise ModelParseError(f"non-integer model value {node!r}")


def parse_model(output: str, declared: list[str]) -> dict[str, int]:
    """Extract a total integer assignment from solver output.

    Accepts the ``(define-fun name () Int value)`` model shape as well as
    flat ``((name value) ...)`` pairs.  Every declared variable must be
    assigned; names outside the declaration set are rejected.
    """
    declared_set = set(declared)
    try:
        forms = _parse_sexprs(_tokenize(output))
    except ModelParseError:
        raise
    assignment: dict[str, int] = {}

    def visit(node):
        if not isinstance(node, list) or not node:
            return
        head = node[0]
        if head == "define-fun":
            if len(node) < 5:
                raise ModelParseError(f"malformed define-fun: {node!r}")
            name = node[1]
            if name not in declared_set:
                raise ModelParseError(f"unknown variable {name!r} in model")
            assignment[name] = _int_value(node[4])
            return
        if head == "model":
            for sub in node[1:]:
                visit(sub)
            return
        if len(node) == 2 and isinstance(head, str) and head != "-":
            # flat (name value) pair, the get-value answer shape
            if head not in declared_set:
                raise ModelParseError(f"unknown variable {head!r} in model")
            assignment[head] = _int_value(node[1])
            return
        for sub in node:
            visit(sub)

    for form in forms:
        if form == "sat" or form == "unsat":
            continue
        visit(form)
    missing = [v for v in declared if v not in assignment]
    if missing:
        raise ModelParseError(f"unassigned variable {missing[0]!r}")
    return assignment


# ---------------------------------------------------------------------------
# driving the external process

def _schedule_from_assignment(cs: ConstraintSet, assignment: dict[str, int]) -> Schedule:
    sched = Schedule()
    for fi in cs.instances:
        rel = assignment[fi.var_name]
        sched.offsets[(fi.stream, fi.link, fi.slot)] = rel + fi.slot * fi.period_ns
    for qv in cs.queue_vars:
        value = qv.fixed if qv.fixed is not None else assignment[qv.name]
        sched.queues[(qv.stream, qv.link)] = value
    return sched


def solve(request: SolveRequest) -> SolveOutcome:
    """Encode, run the external solver, extract and validate the schedule.

    A wall-clock cap kills the child and reports ``timeout``; process
    failures and 'unknown' verdicts raise :class:`SolverProcessError` and
    are never reported as unsat.
    """
    cs = build_constraint_set(request.scenario, request.mode)
    text = encode(cs)
    cmd = request.solver_command or default_solver_command()
    cens = census(request.scenario, request.mode)

    start = time.perf_counter()
    try:
        proc = subprocess.run(
            cmd,
            input=text,
            capture_output=True,
            text=True,
            timeout=request.timeout_s,
        )
    except subprocess.TimeoutExpired:
        return SolveOutcome("timeout", None, time.perf_counter() - start, cens)
    except OSError as exc:
        raise SolverProcessError(f"cannot run solver {cmd!r}: {exc}") from exc
    elapsed = time.perf_counter() - start

    verdict = proc.stdout.split()[0] if proc.stdout.split() else ""
    if verdict == "unsat":
        return SolveOutcome("unsat", None, elapsed, cens)
    if verdict != "sat":
        raise SolverProcessError(
            f"solver did not answer sat/unsat (exit {proc.returncode}): "
            f"stdout={proc.stdout[:200]!r} stderr={proc.stderr[:200]!r}"
        )

    declared = cs.offset_var_names + [q.name for q in cs.free_queue_vars()]
    assignment = parse_model(proc.stdout, declared)
    sched = _schedule_from_assignment(cs, assignment)
    violated = validate_schedule(request.scenario, sched, request.mode)
    if violated:
        raise SolverProcessError(
            f"solver model violates {len(violated)} constraints, first: {violated[0].label}"
        )
    return SolveOutcome("sat", sched, elapsed, cens)
