"""Lagrangian-multiplier-preserving primal-dual algorithm for rooted NWPCST.

``solve_lmp`` grows moats around terminals until every non-root moat is either merged
into the root's component or has spent its penalty, then prunes in reverse purchase
order.  ``solve_nwst`` reuses the same machinery with unbreakable terminals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from .instance import InstanceError, TreeInstance, VertexSet, neighbors, vertex_set
from .moats import (
    DualLedger,
    EngineError,
    MoatState,
    describe,
    next_event,
    tree_slack,
    vertex_feasibility_violations,
)


@dataclass
class PcSolution:
    bought: VertexSet
    connection_cost: Fraction
    penalty_cost: Fraction
    ledger: DualLedger
    dual_total: Fraction
    state: MoatState | None = field(default=None, repr=False)

    @property
    def total_cost(self) -> Fraction:
        return self.connection_cost + self.penalty_cost


def _grow_tree(inst: TreeInstance, unbreakable: frozenset[int] = frozenset()) -> MoatState:
    root = inst.root
    terminals = set(inst.terminals) | set(unbreakable)

    def potential_of(v: int):
        if v in unbreakable:
            return None
        return inst.penalty[v] if v != root else Fraction(0)

    def stays_active(state: MoatState, merged: frozenset[int]) -> bool:
        return root not in merged

    state = MoatState.start(inst.graph, inst.weight, terminals | {root}, potential_of, stays_active)
    for key in state.moats():
        if root not in state.members[key]:
            state.active.add(key)

    while state.active:
        ev = next_event(state, tree_slack)
        if ev.kind == "set":
            state.begin_iteration(ev.eps, "set-tight", describe(ev.sets))
            state.grow(ev.eps)
            for s in ev.sets:
                key = state.moat_of(min(s))
                marks = [t for t in sorted(s) if inst.penalty[t] > 0 and t not in state.mark_time]
                state.deactivate(key, marks)
        else:
            state.begin_iteration(ev.eps, "vertex-tight", ",".join(map(str, ev.vertices)))
            state.grow(ev.eps)
            for v in ev.vertices:
                state.buy(v)
    return state


def prune(state: MoatState, inst: TreeInstance, keep: Iterable[int] | None = None) -> VertexSet:
    """Reverse-delete pruning restricted to the root's component.

    A vertex bought at time ``t`` is deleted, together with everything it cuts off from
    the root, unless it cuts off a terminal that was still unmarked at time ``t``.
    ``keep`` restricts the starting set (used to check idempotence).
    """
    root = inst.root
    start = state.bought if keep is None else frozenset(keep) & state.bought
    current = inst.graph.component(root, start)
    order = sorted(
        (v for v in current if v != root),
        key=lambda v: (state.purchase_time[v], state.purchase_order.index(v)),
        reverse=True,
    )
    terminals = set(inst.terminals)
    for v in order:
        if v not in current:
            continue
        t = state.purchase_time[v]
        remaining = inst.graph.component(root, current - {v})
        lost = current - remaining
        needed = any(
            u in terminals and (u not in state.mark_time or state.mark_time[u] > t)
            for u in lost
        )
        if not needed:
            current = remaining
    return vertex_set(current)


def _check_normalized(inst: TreeInstance) -> None:
    if not inst.is_normalized():
        raise InstanceError("instance is not normalized; call normalize_tree first")


def solve_lmp(inst: TreeInstance) -> PcSolution:
    _check_normalized(inst)
    state = _grow_tree(inst)
    bought = prune(state, inst)
    conn, pen = inst.cost(bought)
    return PcSolution(bought, conn, pen, state.ledger, state.ledger.total(), state)


def solve_nwst(inst: TreeInstance, terminals: Iterable[int]) -> VertexSet:
    """Connect ``terminals`` to the root: the LMP grower with infinite terminal penalties."""
    return solve_nwst_full(inst, terminals).bought


def solve_nwst_full(inst: TreeInstance, terminals: Iterable[int]) -> PcSolution:
    q = frozenset(terminals) - {inst.root}
    reach = inst.graph.component(inst.root)
    missing = sorted(q - reach)
    if missing:
        raise InstanceError(f"terminals {missing} unreachable from root {inst.root}")
    plain = TreeInstance(
        inst.graph,
        inst.root,
        inst.weight,
        tuple(Fraction(0) for _ in range(inst.n)),
        inst.origin,
    )
    state = _grow_tree(plain, q)
    bought = _prune_steiner(state, plain, q)
    conn, _ = plain.cost(bought)
    _, pen = inst.cost(bought)
    return PcSolution(bought, conn, pen, state.ledger, state.ledger.total(), state)


def _prune_steiner(state: MoatState, inst: TreeInstance, q: frozenset[int]) -> VertexSet:
    root = inst.root
    current = inst.graph.component(root, state.bought)
    order = sorted(
        (v for v in current if v != root),
        key=lambda v: (state.purchase_time[v], state.purchase_order.index(v)),
        reverse=True,
    )
    for v in order:
        if v not in current:
            continue
        remaining = inst.graph.component(root, current - {v})
        if not (current - remaining) & q:
            current = remaining
    return vertex_set(current)


# ---------------------------------------------------------------------------
# audit
# ---------------------------------------------------------------------------

@dataclass
class Violation:
    check: str
    iteration: int | None
    witness: tuple
    detail: str = ""

    def __str__(self) -> str:
        where = f" at iteration {self.iteration}" if self.iteration is not None else ""
        return f"{self.check}{where}: witness={self.witness} {self.detail}".rstrip()


@dataclass
class AuditReport:
    violations: list[Violation] = field(default_factory=list)
    values: dict[str, object] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations

    def fail(self, check: str, iteration, witness, detail: str = "") -> None:
        self.violations.append(Violation(check, iteration, tuple(witness), detail))

    def summary(self) -> str:
        if self.ok:
            return "audit: all checks passed"
        return "audit: " + "; ".join(str(v) for v in self.violations)


def partition_duals(inst: TreeInstance, sol: PcSolution):
    """Split positive duals into those touching the solution (CC) and the rest (PC)."""
    fp = set(sol.bought)
    cc, pc = [], []
    for s, y in sol.ledger.entries():
        touches = bool(s & fp) or bool(set(neighbors(inst.graph, s)) & fp)
        (cc if touches else pc).append((s, y))
    return cc, pc


def audit_lmp(inst: TreeInstance, sol: PcSolution) -> AuditReport:
    rep = AuditReport()
    g = inst.graph
    fp = set(sol.bought)
    cc, pc = partition_duals(inst, sol)
    cc_keys = {s for s, _ in cc}
    y_cc = sum((y for _, y in cc), Fraction(0))
    y_pc = sum((y for _, y in pc), Fraction(0))
    rep.values.update(cc=len(cc), pc=len(pc), y_cc=y_cc, y_pc=y_pc)

    conn, pen = inst.cost(sol.bought)
    if (conn, pen) != (sol.connection_cost, sol.penalty_cost):
        rep.fail("cost-recomputation", None, sol.bought, f"reported {(sol.connection_cost, sol.penalty_cost)}")
    if not inst.is_feasible(sol.bought):
        rep.fail("connectivity", None, sol.bought, "bought set not connected to root")

    for v in vertex_feasibility_violations(g, inst.weight, sol.ledger):
        rep.fail("dual-constraint-1", None, (v,), "vertex over-charged")
    if sol.state is not None:
        sets = set(sol.ledger.y) | {sol.state.moat_set(k) for k in sol.state.moats()}
    else:
        sets = set(sol.ledger.y)
    for x in sorted(sets, key=lambda s: (len(s), sorted(s))):
        if inst.root in x:
            continue
        inside = sum((y for s, y in sol.ledger.y.items() if s <= x), Fraction(0))
        if inside > sum((inst.penalty[v] for v in x), Fraction(0)):
            rep.fail("dual-constraint-2", None, vertex_set(x), f"sum y = {inside}")

    if pen != y_pc:
        rep.fail("penalty-identity", None, vertex_set(set(range(inst.n)) - fp), f"penalty {pen} != PC dual {y_pc}")

    charged = sum((len(fp & set(neighbors(g, s))) * y for s, y in cc), Fraction(0))
    rep.values["charged"] = charged
    if conn != charged:
        rep.fail("connection-identity", None, sol.bought, f"w(F')={conn} != {charged}")
    if charged > 3 * y_cc:
        rep.fail("connection-bound", None, sol.bought, f"{charged} > 3*{y_cc}")

    for s, _ in pc:
        hit = fp & set(neighbors(g, s))
        if hit:
            rep.fail("lemma-2", None, vertex_set(s), f"neighbors in solution {sorted(hit)}")

    if sol.state is not None:
        for rec in sol.state.history:
            moats = [s for s in rec.active if s in cc_keys]
            count = sum(len(fp & set(neighbors(g, s))) for s in moats)
            if count > 3 * len(moats):
                rep.fail("lemma-3", rec.index, tuple(vertex_set(s) for s in moats), f"{count} > 3*{len(moats)}")

    lhs = conn + 3 * pen
    if lhs > 3 * sol.dual_total:
        rep.fail("lmp-inequality", None, sol.bought, f"{lhs} > 3*{sol.dual_total}")
    return rep


def audit_nwst(inst: TreeInstance, terminals: Iterable[int], sol: PcSolution) -> AuditReport:
    """Checks for a penalty-free run: feasibility, vertex constraints, and w <= 3 sum y
    over the vertices bought by growth (terminals and root are bought up front)."""
    rep = AuditReport()
    g = inst.graph
    fp = set(sol.bought)
    missing = set(terminals) - fp
    if missing or not inst.is_feasible(sol.bought):
        rep.fail("connectivity", None, sol.bought, f"missing terminals {sorted(missing)}")
    for v in vertex_feasibility_violations(g, inst.weight, sol.ledger):
        rep.fail("dual-constraint-1", None, (v,), "vertex over-charged")
    upfront = set(terminals) | {inst.root}
    grown = sum((inst.weight[v] for v in fp - upfront), Fraction(0))
    rep.values["grown"] = grown
    charged = sum((len((fp - upfront) & set(neighbors(g, s))) * y for s, y in sol.ledger.entries()), Fraction(0))
    if charged != grown:
        rep.fail("connection-identity", None, sol.bought, f"w={grown} != {charged}")
    if grown > 3 * sol.dual_total:
        rep.fail("connection-bound", None, sol.bought, f"{grown} > 3*{sol.dual_total}")
    if sol.state is not None:
        for rec in sol.state.history:
            count = sum(len(fp & set(neighbors(g, s))) for s in rec.active)
            if count > 3 * len(rec.active):
                rep.fail("lemma-3", rec.index, tuple(vertex_set(s) for s in rec.active))
    return rep


def potential_identity_violations(inst: TreeInstance, state: MoatState) -> list[frozenset[int]]:
    """Current moats whose stored potential differs from penalty minus inner duals."""
    bad = []
    for key in state.moats():
        x = state.moat_set(key)
        p = state.potential[key]
        if p is None:
            continue
        inner = sum((y for s, y in state.ledger.y.items() if s <= x), Fraction(0))
        if p != sum((inst.penalty[v] for v in x), Fraction(0)) - inner:
            bad.append(x)
    return bad


__all__ = [
    "AuditReport",
    "EngineError",
    "PcSolution",
    "Violation",
    "audit_lmp",
    "audit_nwst",
    "partition_duals",
    "potential_identity_violations",
    "prune",
    "solve_lmp",
    "solve_nwst",
    "solve_nwst_full",
]
