"""Self-contained SMT-LIB 2 solver process for box-bounded linear integer
problems.

Reads SMT-LIB 2 from stdin (or a file argument), answers ``sat``/``unsat``
on ``(check-sat)`` and prints a ``define-fun`` model on ``(get-model)``.
Intended as the drop-in child process for :mod:`ttubs.smt` when no system
SMT solver is installed; any real solver can replace it on the wire.

Supported input subset: ``declare-const``/``declare-fun`` of ``Int``,
assertions built from ``and``/``or``/``not`` over linear atoms
(``<= < >= > = distinct``) with ``+ - *`` terms, where assertion trees are
at most a disjunction of conjunctions of atoms once disequalities are
split.  Every variable must be box-bounded by top-level unary assertions
(offset and queue domains always are); the disjunctive structure is then
compiled exactly to a mixed-integer program with per-disjunct indicator
variables and solved with HiGHS.  ``unsat`` is exact: the indicator
relaxation constants are derived from the asserted boxes.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass


class SolverInputError(Exception):
    pass


# ---------------------------------------------------------------------------
# s-expression reading (shared tokenizer shape with ttubs.smt, kept local so
# the process stays importable on its own)

def tokenize(text: str) -> list[str]:
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


def parse_sexprs(tokens: list[str]):
    out, stack = [], []
    for tok in tokens:
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if not stack:
                raise SolverInputError("unbalanced ')'")
            done = stack.pop()
            (stack[-1] if stack else out).append(done)
        else:
            (stack[-1] if stack else out).append(tok)
    if stack:
        raise SolverInputError("unbalanced '('")
    return out


# ---------------------------------------------------------------------------
# linear expressions and atoms

def linear(node, coeffs: dict[str, int], sign: int, variables: set[str]) -> int:
    """Accumulate sign*node into coeffs, returning the constant part."""
    if isinstance(node, str):
        if node.lstrip("-").isdigit():
            return sign * int(node)
        if node not in variables:
            raise SolverInputError(f"undeclared symbol {node!r}")
        coeffs[node] = coeffs.get(node, 0) + sign
        return 0
    if not node:
        raise SolverInputError("empty expression")
    head = node[0]
    if head == "+":
        return sum(linear(sub, coeffs, sign, variables) for sub in node[1:])
    if head == "-":
        if len(node) == 2:
            return linear(node[1], coeffs, -sign, variables)
        const = linear(node[1], coeffs, sign, variables)
        return const + sum(linear(sub, coeffs, -sign, variables) for sub in node[2:])
    if head == "*":
        if len(node) != 3:
            raise SolverInputError(f"only binary * supported: {node!r}")
        a, b = node[1], node[2]
        if isinstance(a, list) and a and a[0] == "-":
            a_val = -int(a[1])
        elif isinstance(a, str) and a.lstrip("-").isdigit():
            a_val = int(a)
        else:
            a, b = b, a
            if isinstance(a, list) and a and a[0] == "-":
                a_val = -int(a[1])
            elif isinstance(a, str) and a.lstrip("-").isdigit():
                a_val = int(a)
            else:
                raise SolverInputError(f"nonlinear product {node!r}")
        return linear(b, coeffs, sign * a_val, variables)
    raise SolverInputError(f"unsupported term {node!r}")


@dataclass(frozen=True)
class GeAtom:
    """Normalized atom: sum(coefs * vars) >= const."""

    coeffs: tuple[tuple[str, int], ...]
    const: int

    def negated(self) -> "GeAtom":
        # not(lhs >= c)  <=>  lhs <= c-1  <=>  -lhs >= 1-c   (integers)
        return GeAtom(tuple((v, -c) for v, c in self.coeffs), 1 - self.const)


def atom_to_ge(node, variables: set[str]) -> list[GeAtom]:
    """One relational s-expr into >=-atoms (a list means conjunction)."""
    head = node[0]
    coeffs: dict[str, int] = {}
    if head in (">=", ">", "<=", "<"):
        const = linear(node[1], coeffs, 1, variables)
        const += linear(node[2], coeffs, -1, variables)
        # now: lhs_coeffs + const <op> 0
        if head == ">=":
            return [GeAtom(tuple(sorted(coeffs.items())), -const)]
        if head == ">":
            return [GeAtom(tuple(sorted(coeffs.items())), -const + 1)]
        if head == "<=":
            neg = {v: -c for v, c in coeffs.items()}
            return [GeAtom(tuple(sorted(neg.items())), const)]
        neg = {v: -c for v, c in coeffs.items()}
        return [GeAtom(tuple(sorted(neg.items())), const + 1)]
    if head == "=":
        const = linear(node[1], coeffs, 1, variables)
        const += linear(node[2], coeffs, -1, variables)
        fw = GeAtom(tuple(sorted(coeffs.items())), -const)
        bw = GeAtom(tuple(sorted((v, -c) for v, c in coeffs.items())), const)
        return [fw, bw]
    raise SolverInputError(f"unsupported atom {node!r}")


def push_not(node):
    """Negation normal form over and/or/atoms; distinct kept symbolic."""
    head = node[0]
    if head == "not":
        inner = node[1]
        ih = inner[0]
        if ih == "not":
            return push_not(inner[1])
        if ih == "and":
            return ["or"] + [push_not(["not", s]) for s in inner[1:]]
        if ih == "or":
            return ["and"] + [push_not(["not", s]) for s in inner[1:]]
        if ih == "distinct":
            return ["=", inner[1], inner[2]]
        if ih == "=":
            return ["distinct", inner[1], inner[2]]
        if ih == ">=":
            return ["<", inner[1], inner[2]]
        if ih == ">":
            return ["<=", inner[1], inner[2]]
        if ih == "<=":
            return [">", inner[1], inner[2]]
        if ih == "<":
            return [">=", inner[1], inner[2]]
        raise SolverInputError(f"cannot negate {inner!r}")
    if head in ("and", "or"):
        return [head] + [push_not(s) for s in node[1:]]
    return node


def to_disjuncts(node, variables: set[str]) -> list[list[GeAtom]]:
    """Assertion tree into a list of conjunctions of >=-atoms.

    Handles (or C1 C2 ...) of conjunctions, bare conjunctions and bare
    atoms; ``distinct`` inside a disjunct splits the disjunct in two.
    """
    node = push_not(node)

    def conj_atoms(sub) -> list[list[GeAtom]]:
        """A conjunct into one or more >=-conjunctions (distinct splits)."""
        if sub[0] == "and":
            results = [[]]
            for piece in sub[1:]:
                expansions = conj_atoms(piece)
                results = [r + e for r in results for e in expansions]
            return results
        if sub[0] == "distinct":
            coeffs: dict[str, int] = {}
            const = linear(sub[1], coeffs, 1, variables)
            const += linear(sub[2], coeffs, -1, variables)
            lt = GeAtom(tuple(sorted((v, -c) for v, c in coeffs.items())), const + 1)
            gt = GeAtom(tuple(sorted(coeffs.items())), -const + 1)
            return [[gt], [lt]]
        if sub[0] == "or":
            raise SolverInputError("nested disjunction beyond or-of-and is unsupported")
        return [atom_to_ge(sub, variables)]

    if node[0] == "or":
        out: list[list[GeAtom]] = []
        for sub in node[1:]:
            out.extend(conj_atoms(sub))
        return out
    return conj_atoms(node)


# ---------------------------------------------------------------------------
# MILP compilation

def solve_instance(variables: list[str], assertions: list) -> tuple[str, dict[str, int] | None]:
    var_set = set(variables)
    problems = [to_disjuncts(a, var_set) for a in assertions]

    # box bounds from unary atoms in conjunctive (single-disjunct) assertions
    lo = {v: None for v in variables}
    hi = {v: None for v in variables}
    for disjuncts in problems:
        if len(disjuncts) != 1:
            continue
        for atom in disjuncts[0]:
            if len(atom.coeffs) != 1:
                continue
            (v, c), k = atom.coeffs[0], atom.const
            if c > 0:
                bound = -(-k // c)  # ceil
                if lo[v] is None or bound > lo[v]:
                    lo[v] = bound
            else:
                bound = k // c  # floor of k / negative c
                if hi[v] is None or bound < hi[v]:
                    hi[v] = bound
    unbounded = [v for v in variables if lo[v] is None or hi[v] is None]
    if unbounded:
        raise SolverInputError(f"variable {unbounded[0]!r} is not box-bounded by unary assertions")
    for v in variables:
        if lo[v] > hi[v]:
            return "unsat", None

    def lbox(atom: GeAtom) -> int:
        return sum(c * (lo[v] if c > 0 else hi[v]) for v, c in atom.coeffs)

    def ubox(atom: GeAtom) -> int:
        return sum(c * (hi[v] if c > 0 else lo[v]) for v, c in atom.coeffs)

    col = {v: i for i, v in enumerate(variables)}
    n_real = len(variables)
    n_cols = n_real
    rows_idx: list[list[int]] = []
    rows_val: list[list[float]] = []
    rows_lb: list[float] = []
    extra_lo: list[int] = []
    extra_hi: list[int] = []

    def add_row(idx, val, lb):
        rows_idx.append(idx)
        rows_val.append(val)
        rows_lb.append(lb)

    for disjuncts in problems:
        # drop disjuncts with an atom false over the whole box; a disjunct
        # whose atoms all hold over the box satisfies the assertion outright
        live: list[list[GeAtom]] = []
        trivially_true = False
        for conj in disjuncts:
            pruned = [a for a in conj if lbox(a) < a.const]
            if any(ubox(a) < a.const for a in conj):
                continue
            if not pruned:
                trivially_true = True
                break
            live.append(pruned)
        if trivially_true:
            continue
        if not live:
            return "unsat", None
        if len(live) == 1:
            for atom in live[0]:
                add_row([col[v] for v, _ in atom.coeffs], [float(c) for _, c in atom.coeffs], float(atom.const))
            continue
        # one indicator per disjunct; indicator set forces its atoms
        ind_cols = []
        for conj in live:
            b = n_cols
            n_cols += 1
            extra_lo.append(0)
            extra_hi.append(1)
            ind_cols.append(b)
            for atom in conj:
                m = atom.const - lbox(atom)
                idx = [col[v] for v, _ in atom.coeffs] + [b]
                val = [float(c) for _, c in atom.coeffs] + [float(-m)]
                add_row(idx, val, float(atom.const - m))
        add_row(ind_cols, [1.0] * len(ind_cols), 1.0)

    if n_cols == 0:
        return "sat", {}

    import numpy as np
    from scipy import sparse
    from scipy.optimize import Bounds, LinearConstraint, milp

    lower = np.array([float(lo[v]) for v in variables] + [float(x) for x in extra_lo])
    upper = np.array([float(hi[v]) for v in variables] + [float(x) for x in extra_hi])

    if rows_idx:
        data, rcols, rrows = [], [], []
        for r, (idx, val) in enumerate(zip(rows_idx, rows_val)):
            rrows.extend([r] * len(idx))
            rcols.extend(idx)
            data.extend(val)
        a_mat = sparse.csr_matrix((data, (rrows, rcols)), shape=(len(rows_idx), n_cols))
        constraints = LinearConstraint(a_mat, lb=np.array(rows_lb), ub=np.inf)
        res = milp(
            c=np.zeros(n_cols),
            constraints=constraints,
            integrality=np.ones(n_cols),
            bounds=Bounds(lower, upper),
        )
    else:
        res = milp(c=np.zeros(n_cols), integrality=np.ones(n_cols), bounds=Bounds(lower, upper))

    if res.status == 2:
        return "unsat", None
    if res.status != 0 or res.x is None:
        return "unknown", None
    values = {v: int(round(res.x[col[v]])) for v in variables}

    # exact re-check of every assertion on the rounded integers
    def atom_holds(atom: GeAtom) -> bool:
        return sum(c * values[v] for v, c in atom.coeffs) >= atom.const

    for disjuncts in problems:
        if not any(all(atom_holds(a) for a in conj) for conj in disjuncts):
            return "unknown", None
    return "sat", values


# ---------------------------------------------------------------------------
# command loop

def run(text: str, out=sys.stdout) -> int:
    forms = parse_sexprs(tokenize(text))
    variables: list[str] = []
    assertions: list = []
    model: dict[str, int] | None = None
    answered = False
    for form in forms:
        if not isinstance(form, list) or not form:
            continue
        cmd = form[0]
        if cmd in ("set-logic", "set-option", "set-info"):
            continue
        if cmd == "declare-const":
            if form[2] != "Int":
                raise SolverInputError(f"only Int constants supported: {form!r}")
            variables.append(form[1])
        elif cmd == "declare-fun":
            if form[2] != [] or form[3] != "Int":
                raise SolverInputError(f"only nullary Int functions supported: {form!r}")
            variables.append(form[1])
        elif cmd == "assert":
            assertions.append(form[1])
        elif cmd == "check-sat":
            status, model = solve_instance(variables, assertions)
            print(status, file=out)
            answered = True
            if status == "unknown":
                return 0
        elif cmd == "get-model":
            if not answered or model is None:
                continue
            print("(", file=out)
            for v in variables:
                val = model[v]
                rendered = str(val) if val >= 0 else f"(- {-val})"
                print(f"  (define-fun {v} () Int {rendered})", file=out)
            print(")", file=out)
        elif cmd == "exit":
            break
        else:
            raise SolverInputError(f"unsupported command {cmd!r}")
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if argv:
        with open(argv[0]) as fh:
            text = fh.read()
    else:
        text = sys.stdin.read()
    try:
        return run(text)
    except SolverInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
