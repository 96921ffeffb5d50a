"""Exhaustive exact solvers and independent checkers for small instances."""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations

from .instance import ForestInstance, Graph, TreeInstance, VertexSet, neighbors, planarity_screen, vertex_set
from .lp import RationalLp

TREE_CAP = 18
FOREST_CAP = 16
LPA_CAP = 7


class CapExceeded(ValueError):
    pass


def _masks_by_popcount(bits: int):
    for size in range(bits + 1):
        # lexicographic within a popcount layer
        for combo in combinations(range(bits), size):
            mask = 0
            for i in combo:
                mask |= 1 << i
            yield mask


def _adj_masks(g: Graph) -> list[int]:
    out = []
    for v in range(g.n):
        m = 0
        for u in g.adj[v]:
            m |= 1 << u
        out.append(m)
    return out


def _reach(adj: list[int], start: int, allowed: int) -> int:
    seen = 1 << start
    frontier = seen
    while frontier:
        nxt = 0
        f = frontier
        while f:
            low = f & -f
            nxt |= adj[low.bit_length() - 1]
            f ^= low
        nxt &= allowed & ~seen
        seen |= nxt
        frontier = nxt
    return seen


def exact_pcst(inst: TreeInstance, cap: int = TREE_CAP) -> tuple[Fraction, VertexSet]:
    """Optimal prize-collecting tree by enumerating every connected set containing the root."""
    n = inst.n
    if n > cap:
        raise CapExceeded(f"{n} vertices exceeds oracle cap {cap}")
    adj = _adj_masks(inst.graph)
    others = [v for v in range(n) if v != inst.root]
    total_pen = sum(inst.penalty, Fraction(0)) - inst.penalty[inst.root]
    best: tuple[Fraction, VertexSet] | None = None
    for sub in _masks_by_popcount(len(others)):
        mask = 1 << inst.root
        cost = inst.weight[inst.root]
        pen = total_pen
        for i, v in enumerate(others):
            if sub >> i & 1:
                mask |= 1 << v
                cost += inst.weight[v]
                pen -= inst.penalty[v]
        value = cost + pen
        if best is not None and value >= best[0]:
            continue
        if _reach(adj, inst.root, mask) != mask:
            continue
        best = (value, vertex_set(v for v in range(n) if mask >> v & 1))
    assert best is not None
    return best


def exact_nwst(inst: TreeInstance, terminals, cap: int = TREE_CAP) -> tuple[Fraction, VertexSet]:
    """Cheapest connected set containing the root and ``terminals``.

    Implemented as a prize-collecting problem whose terminal penalties exceed the cost
    of buying every vertex, so no optimum can skip a reachable terminal.
    """
    big = sum(inst.weight, Fraction(0)) + 1
    pen = tuple(big if v in set(terminals) else Fraction(0) for v in range(inst.n))
    value, witness = exact_pcst(TreeInstance(inst.graph, inst.root, inst.weight, pen), cap)
    if not set(terminals) <= set(witness):
        raise ValueError("some terminal is unreachable from the root")
    return value, witness


def pcst_objective(inst: TreeInstance, bought) -> Fraction:
    """Objective of ``bought`` on the instance as given (no normalization assumed)."""
    b = set(bought) | {inst.root}
    return sum((inst.weight[v] for v in b), Fraction(0)) + sum(
        (inst.penalty[v] for v in range(inst.n) if v not in b), Fraction(0)
    )


def exact_pcsf(inst: ForestInstance, cap: int = FOREST_CAP) -> tuple[Fraction, VertexSet]:
    """Optimal prize-collecting forest over all vertex subsets."""
    n = inst.n
    if n > cap:
        raise CapExceeded(f"{n} vertices exceeds oracle cap {cap}")
    adj = _adj_masks(inst.graph)
    best: tuple[Fraction, VertexSet] | None = None
    for mask in _masks_by_popcount(n):
        cost = sum((inst.weight[v] for v in range(n) if mask >> v & 1), Fraction(0))
        if best is not None and cost >= best[0]:
            continue
        pen = Fraction(0)
        comp: dict[int, int] = {}
        for i, j, p in inst.demands:
            if not (mask >> i & 1 and mask >> j & 1):
                pen += p
                continue
            if i not in comp:
                comp[i] = _reach(adj, i, mask)
            if not comp[i] >> j & 1:
                pen += p
        value = cost + pen
        if best is None or value < best[0]:
            best = (value, vertex_set(v for v in range(n) if mask >> v & 1))
    assert best is not None
    return best


# ---------------------------------------------------------------------------
# white/black adjacency bound
# ---------------------------------------------------------------------------

def _is_cut_vertex(adj: dict[int, set[int]], v: int) -> bool:
    rest = [u for u in adj if u != v]
    if len(rest) <= 1:
        return False
    start = rest[0]
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for w in adj[u]:
            if w != v and w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) < len(rest)


def check_white_black_bound(g: Graph, white: set[int] | frozenset[int]):
    """Check the white/black adjacency bound on a coloured graph.

    Returns ``("precondition-unmet", reason)`` when the graph is disconnected, fails the
    planarity screen, has a white-white edge or a black vertex that is not a cut vertex;
    otherwise ``("pass", counts)`` or ``("fail", counts)`` after checking
    |white-black edges| <= 3(|W|-1) and, once black-black edges are deleted or
    contracted away, |B| <= |W|-1.
    """
    white = set(white)
    black = set(range(g.n)) - white
    if g.n == 0 or not g.is_connected():
        return "precondition-unmet", "graph not connected"
    if not planarity_screen(g):
        return "precondition-unmet", "fails planarity screen"
    for u, v in g.edges:
        if u in white and v in white:
            return "precondition-unmet", f"white-white edge ({u}, {v})"
    adj = {v: set(g.adj[v]) for v in range(g.n)}
    for b in sorted(black):
        if not _is_cut_vertex(adj, b):
            return "precondition-unmet", f"black vertex {b} is not a cut vertex"

    wb_edges = sum(1 for u, v in g.edges if (u in white) != (v in white))
    bound = 3 * (len(white) - 1)
    counts = {"white": len(white), "black": len(black), "wb_edges": wb_edges}
    if wb_edges > bound:
        return "fail", counts

    # delete/contract black-black edges until the graph is bipartite
    while True:
        edge = next(((u, v) for u in sorted(adj) if u not in white
                     for v in sorted(adj[u]) if v not in white and u < v), None)
        if edge is None:
            break
        u, v = edge
        if adj[u] & adj[v] & white:
            adj[u].discard(v)
            adj[v].discard(u)
        else:
            for w in adj.pop(v):
                adj[w].discard(v)
                if w != u:
                    adj[w].add(u)
                    adj[u].add(w)
    n_black = sum(1 for v in adj if v not in white)
    counts["black_reduced"] = n_black
    counts["wb_edges_reduced"] = sum(len(adj[v]) for v in adj if v not in white)
    if n_black > len(white) - 1 or counts["wb_edges_reduced"] != wb_edges:
        return "fail", counts
    return "pass", counts


# ---------------------------------------------------------------------------
# the set-penalty LP, written out in full
# ---------------------------------------------------------------------------

def enumerate_lpa(inst: TreeInstance, cap: int = LPA_CAP) -> tuple[RationalLp, list[frozenset[int]]]:
    """Covering LP with one penalty variable z_X per nonempty X not containing the root.

    Columns are x_0..x_{n-1} followed by z_X in the order of the returned list.
    """
    n = inst.n
    if n > cap:
        raise CapExceeded(f"{n} vertices exceeds LP cap {cap}")
    others = [v for v in range(n) if v != inst.root]
    subsets = [frozenset(others[i] for i in range(len(others)) if mask >> i & 1)
               for mask in range(1, 1 << len(others))]
    objective = list(inst.weight) + [sum((inst.penalty[v] for v in x), Fraction(0)) for x in subsets]
    names = [f"x{v}" for v in range(n)] + ["z_" + "_".join(map(str, sorted(x))) for x in subsets]
    lp = RationalLp(objective, [], names)
    for s in subsets:
        row = [Fraction(0)] * (n + len(subsets))
        for v in neighbors(inst.graph, s):
            row[v] = Fraction(1)
        for j, x in enumerate(subsets):
            if s <= x:
                row[n + j] = Fraction(1)
        lp.add_row(row, ">=", 1)
    return lp, subsets


__all__ = [
    "CapExceeded",
    "check_white_black_bound",
    "enumerate_lpa",
    "exact_pcsf",
    "exact_nwst",
    "exact_pcst",
    "pcst_objective",
]
