"""Graphs, prize-collecting instances, normalization gadgets, generators and file I/O.

All numbers are :class:`fractions.Fraction`.  Instances are immutable once built.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

VertexSet = tuple[int, ...]
Demand = tuple[int, int, Fraction]


class InstanceError(ValueError):
    """Malformed graph, instance or instance file."""


def vertex_set(vertices: Iterable[int]) -> VertexSet:
    return tuple(sorted(set(vertices)))


def as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        raise InstanceError(f"refusing inexact float {value!r}; use a rational")
    return Fraction(value)


@dataclass(frozen=True)
class Graph:
    n: int
    edges: frozenset[tuple[int, int]]
    adj: tuple[frozenset[int], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.n < 0:
            raise InstanceError("negative vertex count")
        canon = set()
        for u, v in self.edges:
            if u == v:
                raise InstanceError(f"self-loop at {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise InstanceError(f"edge ({u}, {v}) out of range")
            canon.add((min(u, v), max(u, v)))
        adj: list[set[int]] = [set() for _ in range(self.n)]
        for u, v in canon:
            adj[u].add(v)
            adj[v].add(u)
        object.__setattr__(self, "edges", frozenset(canon))
        object.__setattr__(self, "adj", tuple(frozenset(a) for a in adj))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        edges = list(edges)
        seen = set()
        for u, v in edges:
            key = (min(u, v), max(u, v))
            if key in seen:
                raise InstanceError(f"parallel edge {key}")
            seen.add(key)
        return cls(n, frozenset(edges))

    @property
    def m(self) -> int:
        return len(self.edges)

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def with_extra(self, extra_vertices: int, extra_edges: Iterable[tuple[int, int]]) -> "Graph":
        return Graph(self.n + extra_vertices, self.edges | frozenset(extra_edges))

    def component(self, start: int, allowed: Iterable[int] | None = None) -> set[int]:
        """Vertices reachable from ``start`` inside ``allowed`` (whole graph if None)."""
        allowed_set = None if allowed is None else set(allowed)
        if allowed_set is not None and start not in allowed_set:
            return set()
        seen = {start}
        stack = [start]
        while stack:
            u = stack.pop()
            for v in self.adj[u]:
                if v not in seen and (allowed_set is None or v in allowed_set):
                    seen.add(v)
                    stack.append(v)
        return seen

    def components(self, vertices: Iterable[int]) -> list[frozenset[int]]:
        remaining = set(vertices)
        out = []
        for v in sorted(remaining):
            if v in remaining:
                comp = self.component(v, remaining)
                remaining -= comp
                out.append(frozenset(comp))
        return out

    def is_connected(self, vertices: Iterable[int] | None = None) -> bool:
        vs = set(range(self.n)) if vertices is None else set(vertices)
        if not vs:
            return True
        return self.component(min(vs), vs) == vs


def neighbors(g: Graph, s: Iterable[int]) -> VertexSet:
    """Vertices outside ``s`` adjacent to some vertex of ``s``."""
    s = set(s)
    out = set()
    for u in s:
        out |= g.adj[u]
    return vertex_set(out - s)


def planarity_screen(g: Graph) -> bool:
    """Euler edge bound ``m <= 3n - 6``.

    Only a necessary condition: ``False`` proves non-planarity, ``True`` proves nothing.
    """
    if g.n < 3:
        return True
    return g.m <= 3 * g.n - 6


@dataclass(frozen=True)
class TreeInstance:
    graph: Graph
    root: int
    weight: tuple[Fraction, ...]
    penalty: tuple[Fraction, ...]
    # origin[v] is the vertex of the source instance that v stands for.
    origin: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        n = self.graph.n
        if not 0 <= self.root < n:
            raise InstanceError(f"root {self.root} not in graph")
        if len(self.weight) != n or len(self.penalty) != n:
            raise InstanceError("weight/penalty length must equal vertex count")
        w = tuple(as_fraction(x) for x in self.weight)
        p = tuple(as_fraction(x) for x in self.penalty)
        if any(x < 0 for x in w + p):
            raise InstanceError("weights and penalties must be non-negative")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "penalty", p)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def terminals(self) -> VertexSet:
        return tuple(v for v in range(self.n) if v != self.root and self.penalty[v] > 0)

    def is_normalized(self) -> bool:
        if self.weight[self.root] != 0:
            return False
        return all(self.weight[v] == 0 or self.penalty[v] == 0 for v in range(self.n))

    def cost(self, bought: Iterable[int]) -> tuple[Fraction, Fraction]:
        """(connection cost, penalty cost) of buying ``bought``; the root is always in."""
        b = set(bought) | {self.root}
        conn = sum((self.weight[v] for v in b), Fraction(0))
        pen = sum((self.penalty[v] for v in range(self.n) if v not in b), Fraction(0))
        return conn, pen

    def is_feasible(self, bought: Iterable[int]) -> bool:
        b = set(bought)
        return self.root in b and self.graph.is_connected(b)

    def map_back(self, bought: Iterable[int]) -> VertexSet:
        if self.origin is None:
            return vertex_set(bought)
        return vertex_set(self.origin[v] for v in bought)

    def with_penalty(self, penalty: Sequence[Fraction]) -> "TreeInstance":
        return TreeInstance(self.graph, self.root, self.weight, tuple(penalty), self.origin)


@dataclass(frozen=True)
class ForestInstance:
    graph: Graph
    weight: tuple[Fraction, ...]
    demands: tuple[Demand, ...]
    origin: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        n = self.graph.n
        if len(self.weight) != n:
            raise InstanceError("weight length must equal vertex count")
        w = tuple(as_fraction(x) for x in self.weight)
        if any(x < 0 for x in w):
            raise InstanceError("weights must be non-negative")
        merged: dict[tuple[int, int], Fraction] = {}
        for i, j, pen in self.demands:
            pen = as_fraction(pen)
            if not (0 <= i < n and 0 <= j < n):
                raise InstanceError(f"demand ({i}, {j}) out of range")
            if pen < 0:
                raise InstanceError("demand penalties must be non-negative")
            if i == j or pen == 0:
                continue
            key = (min(i, j), max(i, j))
            merged[key] = merged.get(key, Fraction(0)) + pen
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "demands", tuple((i, j, p) for (i, j), p in sorted(merged.items())))

    @property
    def n(self) -> int:
        return self.graph.n

    def terminals(self) -> VertexSet:
        return vertex_set(x for i, j, _ in self.demands for x in (i, j))

    def is_gadgetized(self) -> bool:
        seen: dict[int, int] = {}
        for i, j, _ in self.demands:
            for x in (i, j):
                seen[x] = seen.get(x, 0) + 1
        return all(c == 1 and self.weight[x] == 0 for x, c in seen.items())

    def unserved(self, bought: Iterable[int]) -> tuple[Demand, ...]:
        b = set(bought)
        comp_of: dict[int, int] = {}
        for idx, comp in enumerate(self.graph.components(b)):
            for v in comp:
                comp_of[v] = idx
        return tuple(
            d for d in self.demands
            if d[0] not in comp_of or d[1] not in comp_of or comp_of[d[0]] != comp_of[d[1]]
        )

    def cost(self, bought: Iterable[int]) -> tuple[Fraction, Fraction]:
        b = set(bought)
        conn = sum((self.weight[v] for v in b), Fraction(0))
        pen = sum((d[2] for d in self.unserved(b)), Fraction(0))
        return conn, pen

    def map_back(self, bought: Iterable[int]) -> VertexSet:
        """Original ids of ``bought``.  Gadget pendants are dropped, not mapped to their
        host: a pendant only stands in for the demand endpoint, and whenever its demand is
        served the host is bought too."""
        if self.origin is None:
            return vertex_set(bought)
        host = {}
        for v, o in enumerate(self.origin):
            host.setdefault(o, v)
        return vertex_set(self.origin[v] for v in bought if host[self.origin[v]] == v)


def normalize_tree(inst: TreeInstance) -> TreeInstance:
    """Split every vertex with both positive weight and penalty into a weighted vertex
    plus a free pendant terminal; the root loses its weight and penalty.

    The result records ``origin`` so solutions can be reported in source ids.
    """
    weight = list(inst.weight)
    penalty = list(inst.penalty)
    origin = list(inst.origin) if inst.origin is not None else list(range(inst.n))
    weight[inst.root] = Fraction(0)
    penalty[inst.root] = Fraction(0)
    extra_edges = []
    n = inst.n
    for v in range(inst.n):
        if weight[v] > 0 and penalty[v] > 0:
            extra_edges.append((v, n))
            weight.append(Fraction(0))
            penalty.append(penalty[v])
            origin.append(origin[v])
            penalty[v] = Fraction(0)
            n += 1
    if n == inst.n and weight == list(inst.weight) and penalty == list(inst.penalty):
        return inst
    graph = inst.graph.with_extra(n - inst.n, extra_edges)
    return TreeInstance(graph, inst.root, tuple(weight), tuple(penalty), tuple(origin))


def gadgetize_demands(inst: ForestInstance) -> ForestInstance:
    """Make every demand endpoint a weight-0 vertex used by exactly one demand.

    An endpoint that already has weight 0 and belongs to a single demand is kept as is;
    any other endpoint gets a fresh weight-0 pendant vertex that takes over the demand.
    """
    uses: dict[int, int] = {}
    for i, j, _ in inst.demands:
        uses[i] = uses.get(i, 0) + 1
        uses[j] = uses.get(j, 0) + 1
    weight = list(inst.weight)
    origin = list(inst.origin) if inst.origin is not None else list(range(inst.n))
    extra_edges = []
    demands = []
    n = inst.n
    for i, j, pen in inst.demands:
        ends = []
        for x in (i, j):
            if weight[x] == 0 and uses[x] == 1:
                ends.append(x)
            else:
                extra_edges.append((x, n))
                weight.append(Fraction(0))
                origin.append(origin[x])
                ends.append(n)
                n += 1
        demands.append((ends[0], ends[1], pen))
    if n == inst.n:
        return inst
    graph = inst.graph.with_extra(n - inst.n, extra_edges)
    return ForestInstance(graph, tuple(weight), tuple(demands), tuple(origin))


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

KINDS = ("grid", "triangulated-grid", "outerplanar-cycle")


def grid_graph(n: int, diagonals: bool = False) -> Graph:
    rows = max(1, math.isqrt(n))
    cols = -(-n // rows)
    edges = []
    for v in range(n):
        r, c = divmod(v, cols)
        if c + 1 < cols and v + 1 < n:
            edges.append((v, v + 1))
        if v + cols < n:
            edges.append((v, v + cols))
        if diagonals and c + 1 < cols and v + cols + 1 < n:
            edges.append((v, v + cols + 1))
    return Graph.from_edges(n, edges)


def outerplanar_graph(n: int, rng: random.Random) -> Graph:
    """A cycle on ``n`` vertices plus random non-crossing chords."""
    edges = {(min(v, (v + 1) % n), max(v, (v + 1) % n)) for v in range(n)} if n >= 3 else {(0, 1)}

    def split(poly: list[int]) -> None:
        if len(poly) < 4 or rng.random() < 0.35:
            return
        a = rng.randrange(len(poly))
        b = (a + rng.randrange(2, len(poly) - 1)) % len(poly)
        a, b = min(a, b), max(a, b)
        edges.add((min(poly[a], poly[b]), max(poly[a], poly[b])))
        split(poly[a:b + 1])
        split(poly[b:] + poly[:a + 1])

    if n >= 4:
        split(list(range(n)))
    return Graph(n, frozenset(edges))


def _random_rational(rng: random.Random, lo: int, hi: int) -> Fraction:
    return Fraction(rng.randint(lo, hi), rng.choice((1, 1, 2)))


def generate_planar_instance(
    kind: str,
    n: int,
    seed: int,
    weight_range: tuple[int, int] = (0, 6),
    penalty_density: float = 0.4,
    problem: str = "tree",
    demands: int = 2,
    mixed: bool = False,
) -> TreeInstance | ForestInstance:
    """Deterministic random instance on a planar-by-construction graph.

    Tree instances use vertex 0 as root.  Each other vertex becomes a terminal with
    probability ``penalty_density`` (weight 0, positive penalty) and a Steiner vertex
    otherwise; with ``mixed`` some vertices get both so normalization has work to do.
    """
    if kind not in KINDS:
        raise InstanceError(f"unknown kind {kind!r}; expected one of {KINDS}")
    if n < 2:
        raise InstanceError("need at least 2 vertices")
    rng = random.Random(f"{kind}:{n}:{seed}:{problem}")
    if kind == "grid":
        g = grid_graph(n)
    elif kind == "triangulated-grid":
        g = grid_graph(n, diagonals=True)
    else:
        g = outerplanar_graph(n, rng)
    lo, hi = weight_range
    if problem == "tree":
        weight = [Fraction(0)] * n
        penalty = [Fraction(0)] * n
        for v in range(1, n):
            if rng.random() < penalty_density:
                penalty[v] = _random_rational(rng, 1, 2 * max(hi, 1))
                if mixed and rng.random() < 0.5:
                    weight[v] = _random_rational(rng, max(lo, 1), max(hi, 1))
            else:
                weight[v] = _random_rational(rng, lo, hi)
        return TreeInstance(g, 0, tuple(weight), tuple(penalty))
    if problem == "forest":
        weight = [_random_rational(rng, lo, hi) for _ in range(n)]
        pairs = []
        for _ in range(demands):
            i, j = rng.sample(range(n), 2)
            pairs.append((i, j, _random_rational(rng, 1, 2 * max(hi, 1))))
        return ForestInstance(g, tuple(weight), tuple(pairs))
    raise InstanceError(f"unknown problem {problem!r}")


# ---------------------------------------------------------------------------
# file format
# ---------------------------------------------------------------------------

def format_rational(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def dumps(inst: TreeInstance | ForestInstance) -> str:
    """Canonical text form: header, root, sorted edges, nonzero weights/penalties, demands."""
    g = inst.graph
    lines = []
    if isinstance(inst, TreeInstance):
        lines.append(f"nwpc tree {g.n} {g.m}")
        lines.append(f"root {inst.root}")
    else:
        lines.append(f"nwpc forest {g.n} {g.m}")
    lines += [f"e {u} {v}" for u, v in g.sorted_edges()]
    lines += [f"w {v} {format_rational(x)}" for v, x in enumerate(inst.weight) if x != 0]
    if isinstance(inst, TreeInstance):
        lines += [f"p {v} {format_rational(x)}" for v, x in enumerate(inst.penalty) if x != 0]
    else:
        lines += [f"d {i} {j} {format_rational(p)}" for i, j, p in inst.demands]
    return "\n".join(lines) + "\n"


def loads(text: str) -> TreeInstance | ForestInstance:
    rows = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            rows.append((lineno, line.split()))
    if not rows or rows[0][1][0] != "nwpc" or len(rows[0][1]) != 4:
        raise InstanceError("missing header 'nwpc tree|forest <n> <m>'")
    _, (_, problem, n_txt, m_txt) = rows[0]
    if problem not in ("tree", "forest"):
        raise InstanceError(f"unknown problem {problem!r}")
    try:
        n, m = int(n_txt), int(m_txt)

        def vid(tok: str) -> int:
            v = int(tok)
            if not 0 <= v < n:
                raise InstanceError(f"vertex {v} out of range")
            return v

        edges, weight, penalty, demands, root = [], [Fraction(0)] * n, [Fraction(0)] * n, [], None
        for lineno, tok in rows[1:]:
            key = tok[0]
            if key == "e" and len(tok) == 3:
                edges.append((int(tok[1]), int(tok[2])))
            elif key == "w" and len(tok) == 3:
                weight[vid(tok[1])] = Fraction(tok[2])
            elif key == "p" and len(tok) == 3 and problem == "tree":
                penalty[vid(tok[1])] = Fraction(tok[2])
            elif key == "root" and len(tok) == 2 and problem == "tree":
                root = int(tok[1])
            elif key == "d" and len(tok) == 4 and problem == "forest":
                demands.append((int(tok[1]), int(tok[2]), Fraction(tok[3])))
            else:
                raise InstanceError(f"line {lineno}: cannot parse {' '.join(tok)!r}")
    except (ValueError, IndexError, ZeroDivisionError) as exc:
        if isinstance(exc, InstanceError):
            raise
        raise InstanceError(str(exc)) from exc
    if len(edges) != m:
        raise InstanceError(f"header says {m} edges, found {len(edges)}")
    g = Graph.from_edges(n, edges)
    if problem == "tree":
        if root is None:
            raise InstanceError("tree instance without 'root' line")
        return TreeInstance(g, root, tuple(weight), tuple(penalty))
    return ForestInstance(g, tuple(weight), tuple(demands))


def read_instance(path) -> TreeInstance | ForestInstance:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def write_instance(inst: TreeInstance | ForestInstance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(inst))
