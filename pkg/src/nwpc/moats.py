"""Primal-dual moat engine shared by the tree and forest solvers.

A moat is a connected component of the bought vertices.  Every iteration grows the
duals of all active moats by the same amount until a vertex or a set/family becomes
tight.  Iterations are numbered from 1; vertices bought up front have time 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable

from .instance import Graph, format_rational, vertex_set


class EngineError(RuntimeError):
    """Caller violated a precondition of the moat engine."""


class UnionFind:
    def __init__(self) -> None:
        self._parent: dict[int, int] = {}
        self._size: dict[int, int] = {}

    def add(self, x: int) -> None:
        if x not in self._parent:
            self._parent[x] = x
            self._size[x] = 1

    def __contains__(self, x: int) -> bool:
        return x in self._parent

    def find(self, x: int) -> int:
        parent = self._parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> int:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self._size[ra] < self._size[rb]:
            ra, rb = rb, ra
        self._parent[rb] = ra
        self._size[ra] += self._size[rb]
        return ra


class DualLedger:
    """Accumulated dual value per moat snapshot plus the per-vertex absorbed tally."""

    def __init__(self, n: int) -> None:
        self.y: dict[frozenset[int], Fraction] = {}
        self.absorbed: list[Fraction] = [Fraction(0)] * n

    def add(self, s: frozenset[int], amount: Fraction) -> None:
        self.y[s] = self.y.get(s, Fraction(0)) + amount

    def total(self) -> Fraction:
        return sum(self.y.values(), Fraction(0))

    def entries(self) -> list[tuple[frozenset[int], Fraction]]:
        return [(s, v) for s, v in self.y.items() if v > 0]

    def copy(self) -> "DualLedger":
        out = DualLedger(len(self.absorbed))
        out.y = dict(self.y)
        out.absorbed = list(self.absorbed)
        return out


@dataclass
class Event:
    eps: Fraction
    kind: str  # "vertex" | "set" | "family"
    vertices: tuple[int, ...] = ()
    sets: tuple[frozenset[int], ...] = ()


@dataclass
class IterationRecord:
    index: int
    eps: Fraction
    kind: str
    active: tuple[frozenset[int], ...]
    bought_before: frozenset[int]
    detail: str = ""


# Potential ``None`` is the +infinity sentinel: such a moat never goes set-tight.
Potential = Fraction | None


@dataclass
class MoatState:
    graph: Graph
    weight: tuple[Fraction, ...]
    ledger: DualLedger
    uf: UnionFind = field(default_factory=UnionFind)
    members: dict[int, set[int]] = field(default_factory=dict)
    potential: dict[int, Potential] = field(default_factory=dict)
    active: set[int] = field(default_factory=set)
    purchase_time: dict[int, int] = field(default_factory=dict)
    purchase_order: list[int] = field(default_factory=list)
    mark_time: dict[int, int] = field(default_factory=dict)
    iteration: int = 0
    history: list[IterationRecord] = field(default_factory=list)
    trace: list[str] = field(default_factory=list)
    merge_rule: Callable[["MoatState", frozenset[int]], bool] | None = None

    @classmethod
    def start(
        cls,
        graph: Graph,
        weight: Iterable[Fraction],
        initial: Iterable[int],
        potential_of: Callable[[int], Potential] = lambda v: Fraction(0),
        merge_rule: Callable[["MoatState", frozenset[int]], bool] | None = None,
    ) -> "MoatState":
        """Buy ``initial`` at time 0 and form moats from the components they induce."""
        state = cls(graph, tuple(weight), DualLedger(graph.n), merge_rule=merge_rule)
        for v in sorted(set(initial)):
            state.uf.add(v)
            state.members[v] = {v}
            state.potential[v] = potential_of(v)
            state.purchase_time[v] = 0
            state.purchase_order.append(v)
        for v in sorted(state.members):
            for u in graph.adj[v]:
                if u in state.uf:
                    state._merge(state.uf.find(u), state.uf.find(v))
        return state

    # -- queries --------------------------------------------------------

    @property
    def bought(self) -> frozenset[int]:
        return frozenset(self.purchase_time)

    def moat_of(self, v: int) -> int:
        return self.uf.find(v)

    def moat_set(self, key: int) -> frozenset[int]:
        return frozenset(self.members[key])

    def moats(self) -> list[int]:
        return sorted(self.members, key=lambda k: min(self.members[k]))

    def active_moats(self) -> list[int]:
        return [k for k in self.moats() if k in self.active]

    def active_sets(self) -> tuple[frozenset[int], ...]:
        return tuple(self.moat_set(k) for k in self.active_moats())

    def active_degree(self, v: int) -> int:
        """Number of distinct active moats adjacent to unbought vertex ``v``."""
        keys = {self.uf.find(u) for u in self.graph.adj[v] if u in self.uf}
        return len(keys & self.active)

    def vertex_event(self) -> tuple[Fraction | None, tuple[int, ...]]:
        """Smallest uniform growth making an unbought vertex tight, and the vertices hit."""
        best: Fraction | None = None
        hit: list[int] = []
        for v in range(self.graph.n):
            if v in self.purchase_time:
                continue
            k = self.active_degree(v)
            if k == 0:
                continue
            eps = (self.weight[v] - self.ledger.absorbed[v]) / k
            if best is None or eps < best:
                best, hit = eps, [v]
            elif eps == best:
                hit.append(v)
        return best, tuple(hit)

    # -- mutations ------------------------------------------------------

    def begin_iteration(self, eps: Fraction, kind: str, detail: str = "") -> IterationRecord:
        self.iteration += 1
        rec = IterationRecord(self.iteration, eps, kind, self.active_sets(), self.bought, detail)
        self.history.append(rec)
        self.trace.append(
            f"i={rec.index} ε={format_rational(eps)} kind={kind} detail={detail}"
        )
        return rec

    def grow(self, eps: Fraction) -> None:
        """Raise every active moat's dual by ``eps`` and charge its potential."""
        if eps < 0:
            raise EngineError("negative growth")
        if eps == 0:
            return
        keys = self.active_moats()
        for k in keys:
            p = self.potential[k]
            if p is not None and p < eps:
                raise EngineError(f"growth {eps} exceeds potential {p} of moat {sorted(self.members[k])}")
        touched: dict[int, int] = {}
        for k in keys:
            s = self.moat_set(k)
            self.ledger.add(s, eps)
            for v in neighbors_of(self.graph, s):
                touched[v] = touched.get(v, 0) + 1
            if self.potential[k] is not None:
                self.potential[k] -= eps
        for v, mult in touched.items():
            self.ledger.absorbed[v] += mult * eps
            if self.ledger.absorbed[v] > self.weight[v]:
                raise EngineError(f"vertex {v} over-tight")

    def buy(self, v: int) -> int:
        """Buy tight vertex ``v`` and merge it with every adjacent moat."""
        if v in self.purchase_time:
            raise EngineError(f"vertex {v} already bought")
        if self.ledger.absorbed[v] != self.weight[v]:
            raise EngineError(f"vertex {v} is not tight")
        self.uf.add(v)
        self.members[v] = {v}
        self.potential[v] = Fraction(0)
        self.purchase_time[v] = self.iteration
        self.purchase_order.append(v)
        key = v
        for u in sorted(self.graph.adj[v]):
            if u in self.uf:
                key = self._merge(key, self.uf.find(u))
        merged = self.moat_set(key)
        self.active.discard(key)
        if self.merge_rule is None or self.merge_rule(self, merged):
            self.active.add(key)
        return key

    def deactivate(self, key: int, marks: Iterable[int] = ()) -> None:
        """Make moat ``key`` inactive; its potential must be exhausted."""
        if key not in self.active:
            raise EngineError("moat is not active")
        if self.potential[key] != 0:
            raise EngineError(f"moat {sorted(self.members[key])} still has potential {self.potential[key]}")
        self.active.discard(key)
        for t in marks:
            self.mark_time.setdefault(t, self.iteration)

    def _merge(self, a: int, b: int) -> int:
        ra, rb = self.uf.find(a), self.uf.find(b)
        if ra == rb:
            return ra
        root = self.uf.union(ra, rb)
        other = rb if root == ra else ra
        self.members[root] |= self.members.pop(other)
        pa, pb = self.potential[root], self.potential.pop(other)
        self.potential[root] = None if pa is None or pb is None else pa + pb
        if other in self.active:
            self.active.discard(other)
            self.active.add(root)
        return root


def neighbors_of(g: Graph, s: frozenset[int]) -> set[int]:
    out: set[int] = set()
    for u in s:
        out |= g.adj[u]
    return out - s


def tree_slack(state: MoatState) -> Event | None:
    """Penalty event for the tree problem: the active moats of least potential."""
    best: Fraction | None = None
    hit: list[frozenset[int]] = []
    for k in state.active_moats():
        p = state.potential[k]
        if p is None:
            continue
        if best is None or p < best:
            best, hit = p, [state.moat_set(k)]
        elif p == best:
            hit.append(state.moat_set(k))
    if best is None:
        return None
    return Event(best, "set", sets=tuple(hit))


def next_event(state: MoatState, slack_oracle: Callable[[MoatState], Event | None]) -> Event:
    """Smallest uniform growth that makes a vertex or a set/family tight.

    Ties go to the set/family event; simultaneous vertex events are reported in
    ascending vertex order.
    """
    if not state.active:
        raise EngineError("no active moat")
    eps1, verts = state.vertex_event()
    other = slack_oracle(state)
    if other is not None and (eps1 is None or other.eps <= eps1):
        return other
    if eps1 is None:
        raise EngineError("active moats can neither grow into a vertex nor go tight")
    return Event(eps1, "vertex", vertices=verts)


def describe(sets: Iterable[frozenset[int]]) -> str:
    return "[" + ",".join("{" + ",".join(map(str, sorted(s))) + "}" for s in sets) + "]"


def vertex_feasibility_violations(g: Graph, weight, ledger: DualLedger) -> list[int]:
    """Vertices whose constraint sum_{S: v in N(S)} y_S <= w_v fails, recomputed from scratch."""
    load = [Fraction(0)] * g.n
    for s, y in ledger.y.items():
        for v in neighbors_of(g, s):
            load[v] += y
    return [v for v in range(g.n) if load[v] > weight[v]]


__all__ = [
    "DualLedger",
    "EngineError",
    "Event",
    "IterationRecord",
    "MoatState",
    "UnionFind",
    "describe",
    "next_event",
    "tree_slack",
    "vertex_feasibility_violations",
    "vertex_set",
]
