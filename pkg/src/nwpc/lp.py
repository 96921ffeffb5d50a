"""Exact rational LP: two-phase tableau simplex with Bland's rule, vertex-capacitated
min cuts by node splitting, and the cutting-plane solver for the penalty LP used by
threshold rounding.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

try:
    from gmpy2 import mpq as _Q
except ImportError:  # pragma: no cover - pure-Python fallback
    _Q = Fraction

from .instance import Graph, TreeInstance, VertexSet, format_rational, neighbors, vertex_set

ZERO = Fraction(0)
ONE = Fraction(1)


@dataclass
class RationalLp:
    """min objective . x  subject to rows, x >= 0."""

    objective: list[Fraction]
    rows: list[tuple[list[Fraction], str, Fraction]] = field(default_factory=list)
    names: list[str] | None = None

    @property
    def ncols(self) -> int:
        return len(self.objective)

    def add_row(self, coeffs: Sequence, relation: str, rhs) -> None:
        if relation not in (">=", "<=", "="):
            raise ValueError(f"bad relation {relation!r}")
        if len(coeffs) != self.ncols:
            raise ValueError("row length does not match column count")
        self.rows.append(([Fraction(c) for c in coeffs], relation, Fraction(rhs)))

    def satisfied_by(self, x: Sequence[Fraction]) -> bool:
        if any(v < 0 for v in x):
            return False
        for coeffs, rel, rhs in self.rows:
            lhs = sum((c * v for c, v in zip(coeffs, x) if c), ZERO)
            if rel == ">=" and lhs < rhs or rel == "<=" and lhs > rhs or rel == "=" and lhs != rhs:
                return False
        return True

    def value(self, x: Sequence[Fraction]) -> Fraction:
        return sum((c * v for c, v in zip(self.objective, x) if c), ZERO)

    def to_lp_format(self) -> str:
        """CPLEX-style text, for cross-checking with external solvers."""
        names = self.names or [f"x{j}" for j in range(self.ncols)]

        def expr(coeffs):
            terms = [f"{'+' if c > 0 else '-'} {format_rational(abs(c))} {names[j]}"
                     for j, c in enumerate(coeffs) if c]
            return " ".join(terms) if terms else "0 " + names[0]

        out = ["Minimize", " obj: " + expr(self.objective), "Subject To"]
        for i, (coeffs, rel, rhs) in enumerate(self.rows):
            out.append(f" c{i}: {expr(coeffs)} {rel} {format_rational(rhs)}")
        out.append("End")
        return "\n".join(out) + "\n"


@dataclass
class LpResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: list[Fraction] | None = None
    value: Fraction | None = None


def _pivot(tab: list[list[Fraction]], basis: list[int], r: int, c: int) -> None:
    row = tab[r]
    piv = row[c]
    if piv != 1:
        tab[r] = row = [v / piv for v in row]
    nz = [j for j, v in enumerate(row) if v]
    for i, other in enumerate(tab):
        if i != r:
            f = other[c]
            if f:
                for j in nz:
                    other[j] -= f * row[j]
    basis[r] = c


def _simplex(tab, basis, obj: int, allowed: int) -> bool:
    """Minimize the objective stored in row ``obj`` (reduced costs) over the first
    ``allowed`` columns.  Returns False on unboundedness."""
    m = len(basis)
    rhs = len(tab[0]) - 1
    while True:
        cost = tab[obj]
        enter = next((j for j in range(allowed) if cost[j] < 0), None)
        if enter is None:
            return True
        best = None
        leave = None
        for i in range(m):
            a = tab[i][enter]
            if a > 0:
                ratio = tab[i][rhs] / a
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                    best, leave = ratio, i
        if leave is None:
            return False
        _pivot(tab, basis, leave, enter)


def solve_lp(lp: RationalLp) -> LpResult:
    """Exact optimum by two-phase simplex (Bland's rule, so it always terminates)."""
    n = lp.ncols
    zero, one = _Q(0), _Q(1)
    rows = []
    for coeffs, rel, rhs in lp.rows:
        coeffs = [_Q(c.numerator, c.denominator) for c in coeffs]
        rhs = _Q(rhs.numerator, rhs.denominator)
        if rhs < 0:
            coeffs = [-c for c in coeffs]
            rhs = -rhs
            rel = {">=": "<=", "<=": ">=", "=": "="}[rel]
        rows.append((coeffs, rel, rhs))
    m = len(rows)
    n_slack = sum(1 for _, rel, _ in rows if rel != "=")
    n_art = sum(1 for _, rel, _ in rows if rel != "<=")
    width = n + n_slack + n_art + 1
    tab = []
    basis = []
    s = n
    a = n + n_slack
    art_cols = []
    for coeffs, rel, rhs in rows:
        row = list(coeffs) + [zero] * (n_slack + n_art) + [rhs]
        if rel == "<=":
            row[s] = one
            basis.append(s)
            s += 1
        else:
            if rel == ">=":
                row[s] = -one
                s += 1
            row[a] = one
            basis.append(a)
            art_cols.append(a)
            a += 1
        tab.append(row)

    # phase 1: minimize the sum of artificials
    phase1 = [zero] * width
    for i, b in enumerate(basis):
        if b >= n + n_slack:
            for j in range(width):
                phase1[j] -= tab[i][j]
    for j in art_cols:
        phase1[j] += one
    tab.append(phase1)
    _simplex(tab, basis, m, width - 1)
    if tab[m][-1] != 0:
        return LpResult("infeasible")
    tab.pop()

    # drive artificials out of the basis; drop redundant rows
    real = n + n_slack
    i = 0
    while i < len(basis):
        if basis[i] >= real:
            col = next((j for j in range(real) if tab[i][j] != 0), None)
            if col is None:
                tab.pop(i)
                basis.pop(i)
                continue
            _pivot(tab, basis, i, col)
        i += 1

    cost = [zero] * width
    for j in range(n):
        cost[j] = _Q(lp.objective[j].numerator, lp.objective[j].denominator)
    for i, b in enumerate(basis):
        cb = cost[b]
        if cb:
            for j in range(width):
                cost[j] -= cb * tab[i][j]
    tab.append(cost)
    if not _simplex(tab, basis, len(basis), real):
        return LpResult("unbounded")
    x = [ZERO] * n
    for i, b in enumerate(basis):
        if b < n:
            v = tab[i][-1]
            x[b] = Fraction(int(v.numerator), int(v.denominator))
    if not lp.satisfied_by(x):
        raise ArithmeticError("simplex returned a point violating a row")
    return LpResult("optimal", x, lp.value(x))


# ---------------------------------------------------------------------------
# vertex-capacitated minimum cut
# ---------------------------------------------------------------------------

def min_vertex_cut(g: Graph, source: int, sink: int, cap: Sequence[Fraction]) -> tuple[Fraction, VertexSet]:
    """min over S with source in S, sink not in S of the capacity of N(S).

    The sink itself may lie in N(S) and is charged ``cap[sink]``; the source never is.
    Returns the value and a minimizing S (the source side of a max flow).
    """
    if source == sink:
        raise ValueError("source and sink coincide")
    n = g.n
    total = sum((Fraction(c) for c in cap), ZERO)
    inf = total + 1
    # node v -> v_in = 2v, v_out = 2v+1; super sink = 2n
    T = 2 * n
    graph: dict[int, dict[int, Fraction]] = {i: {} for i in range(2 * n + 1)}

    def arc(u, v, c):
        graph[u][v] = graph[u].get(v, ZERO) + c
        graph[v].setdefault(u, ZERO)

    for v in range(n):
        arc(2 * v, 2 * v + 1, inf if v == source else Fraction(cap[v]))
    for u, v in g.edges:
        arc(2 * u + 1, 2 * v, inf)
        arc(2 * v + 1, 2 * u, inf)
    arc(2 * sink + 1, T, inf)

    src = 2 * source + 1
    flow = ZERO
    while True:
        parent = {src: None}
        queue = deque([src])
        while queue and T not in parent:
            u = queue.popleft()
            for v, c in graph[u].items():
                if c > 0 and v not in parent:
                    parent[v] = u
                    queue.append(v)
        if T not in parent:
            break
        push = None
        v = T
        while parent[v] is not None:
            u = parent[v]
            push = graph[u][v] if push is None else min(push, graph[u][v])
            v = u
        v = T
        while parent[v] is not None:
            u = parent[v]
            graph[u][v] -= push
            graph[v][u] += push
            v = u
        flow += push
    side = {v // 2 for v in parent if v != T and v % 2 == 1}
    side.add(source)
    return flow, vertex_set(side)


# ---------------------------------------------------------------------------
# the penalty LP (x on vertices, y on terminals) and its cost-window variant
# ---------------------------------------------------------------------------

@dataclass
class LpbSolution:
    x: dict[int, Fraction]
    y: dict[int, Fraction]
    connection_value: Fraction
    penalty_value: Fraction
    cuts: list[tuple[VertexSet, int]] = field(default_factory=list)

    @property
    def value(self) -> Fraction:
        return self.connection_value + self.penalty_value


def _lpb_skeleton(inst: TreeInstance):
    n = inst.n
    terms = list(inst.terminals)
    col_y = {u: n + i for i, u in enumerate(terms)}
    objective = list(inst.weight) + [inst.penalty[u] for u in terms]
    names = [f"x{v}" for v in range(n)] + [f"y{u}" for u in terms]
    return RationalLp(objective, [], names), terms, col_y


def cut_row(inst: TreeInstance, col_y: dict[int, int], boundary: Iterable[int], u: int) -> list[Fraction]:
    row = [ZERO] * (inst.n + len(col_y))
    for v in boundary:
        row[v] = ONE
    row[col_y[u]] = ONE
    return row


def _window_rows(lp: RationalLp, inst: TreeInstance, window) -> None:
    lo, hi = window
    w_row = list(inst.weight) + [ZERO] * (lp.ncols - inst.n)
    if lo is not None and lo > 0:
        lp.add_row(w_row, ">=", lo)
    if hi is not None:
        lp.add_row(w_row, "<=", hi)


def _cutting_plane(inst: TreeInstance, window=None, pool: set | None = None) -> LpbSolution | None:
    """Separation loop.  ``pool`` is a shared cut pool: its rows seed the LP and newly
    found rows are added to it (every cut is valid for every window)."""
    lp, terms, col_y = _lpb_skeleton(inst)
    g = inst.graph
    if window is not None:
        _window_rows(lp, inst, window)
    seen: set[tuple[VertexSet, int]] = set()
    start = {(neighbors(g, [u]), u) for u in terms} | (pool or set())
    for key in sorted(start, key=lambda k: (k[1], len(k[0]), k[0])):
        seen.add(key)
        lp.add_row(cut_row(inst, col_y, key[0], key[1]), ">=", 1)
    while True:
        res = solve_lp(lp)
        if res.status == "infeasible":
            return None
        if res.status != "optimal":
            raise ArithmeticError(f"penalty LP {res.status}")
        x = res.x
        added = False
        for u in terms:
            value, side = min_vertex_cut(g, u, inst.root, x[: inst.n])
            if value < 1 - x[col_y[u]]:
                key = (neighbors(g, side), u)
                if key in seen:
                    raise ArithmeticError("separation returned an existing row")
                seen.add(key)
                lp.add_row(cut_row(inst, col_y, key[0], u), ">=", 1)
                added = True
        if pool is not None:
            pool |= seen
        if not added:
            break
    xs = {v: x[v] for v in range(inst.n)}
    ys = {u: x[col_y[u]] for u in terms}
    conn = sum((inst.weight[v] * xs[v] for v in xs), ZERO)
    pen = sum((inst.penalty[u] * ys[u] for u in ys), ZERO)
    return LpbSolution(xs, ys, conn, pen, sorted(seen))


def solve_lpb(inst: TreeInstance) -> LpbSolution:
    """Exact optimum of the penalty LP by separation over vertex cuts."""
    sol = _cutting_plane(inst)
    assert sol is not None
    return sol


def window(k: int | None, eps: Fraction) -> tuple[Fraction, Fraction]:
    """Cost window [(1+eps)^k, (1+eps)^(k+1)]; ``k=None`` is the degenerate window {0}."""
    if k is None:
        return ZERO, ZERO
    base = 1 + Fraction(eps)
    return base ** k, base ** (k + 1)


def solve_lpb_k(inst: TreeInstance, k: int | None, eps, pool: set | None = None) -> LpbSolution | None:
    """Penalty LP with the connection cost held in the k-th window; None if infeasible."""
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    return _cutting_plane(inst, window(k, eps), pool)


def solve_lpb_window(inst: TreeInstance, lo, hi) -> LpbSolution | None:
    return _cutting_plane(inst, (lo, hi))


def window_index(value: Fraction, eps: Fraction) -> int | None:
    """The k with value in [(1+eps)^k, (1+eps)^(k+1)); None for value 0."""
    if value == 0:
        return None
    base = 1 + Fraction(eps)
    k = math.floor(math.log(value) / math.log(base))
    while base ** k > value:
        k -= 1
    while base ** (k + 1) <= value:
        k += 1
    return k


def window_range(inst: TreeInstance, eps) -> list[int | None]:
    """Windows worth trying: {0}, then smallest positive weight up to one past the total."""
    positive = [w for w in inst.weight if w > 0]
    if not positive:
        return [None]
    lo = window_index(min(positive), Fraction(eps))
    hi = window_index(sum(positive, ZERO), Fraction(eps)) + 1
    return [None] + list(range(lo, hi + 1))


def lift_lpa_to_lpb(x: dict[int, Fraction], z: dict[frozenset[int], Fraction]):
    """Turn a feasible (x, z) of the set-penalty LP into (x, y) with y_u = sum of z_X over X containing u."""
    y: dict[int, Fraction] = {}
    for s, val in z.items():
        for u in s:
            y[u] = y.get(u, ZERO) + val
    return dict(x), y


def enumerate_lpb(inst: TreeInstance) -> RationalLp:
    """The penalty LP with every (S, u) row listed; duplicate and dominated rows dropped."""
    lp, terms, col_y = _lpb_skeleton(inst)
    g = inst.graph
    others = [v for v in range(inst.n) if v != inst.root]
    per_u: dict[int, set[frozenset[int]]] = {u: set() for u in terms}
    for mask in range(1, 1 << len(others)):
        s = [others[i] for i in range(len(others)) if mask >> i & 1]
        boundary = frozenset(neighbors(g, s))
        for u in s:
            if u in per_u:
                per_u[u].add(boundary)
    for u in terms:
        cands = sorted(per_u[u], key=lambda b: (len(b), sorted(b)))
        kept: list[frozenset[int]] = []
        for b in cands:
            if not any(k <= b for k in kept):
                kept.append(b)
        for b in kept:
            lp.add_row(cut_row(inst, col_y, b, u), ">=", 1)
    return lp


__all__ = [
    "LpResult",
    "LpbSolution",
    "RationalLp",
    "enumerate_lpb",
    "lift_lpa_to_lpb",
    "min_vertex_cut",
    "solve_lp",
    "solve_lpb",
    "solve_lpb_k",
    "solve_lpb_window",
    "window",
    "window_index",
    "window_range",
]
