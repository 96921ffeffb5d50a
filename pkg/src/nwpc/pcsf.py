"""Primal-dual algorithm for node-weighted prize-collecting Steiner forest.

Duals live on vertex sets; the penalty side is a family constraint: for any family of
sets, their total dual may not exceed the penalty of the demands the family separates.
Only the demands a set separates matter for that constraint, so both the event oracle
and the audit work with each set's *separation signature* (a bitmask over demands).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Sequence

from .instance import Demand, ForestInstance, InstanceError, VertexSet, neighbors, vertex_set
from .lmp_tree import AuditReport
from .moats import DualLedger, EngineError, Event, MoatState, describe, next_event, vertex_feasibility_violations

Family = frozenset[frozenset[int]]

MEMBER_CAP = 20
DEMAND_CAP = 16


class OracleCapExceeded(EngineError):
    pass


def separates(s: Iterable[int], d: tuple) -> bool:
    s = s if isinstance(s, (set, frozenset)) else set(s)
    return (d[0] in s) != (d[1] in s)


def signature(s: frozenset[int], demands: Sequence[Demand]) -> int:
    sig = 0
    for idx, d in enumerate(demands):
        if (d[0] in s) != (d[1] in s):
            sig |= 1 << idx
    return sig


def f_value(family: Iterable[Iterable[int]], demands: Sequence[Demand]) -> Fraction:
    """Total penalty of demands separated by at least one member of ``family``."""
    members = [frozenset(s) for s in family]
    return sum((d[2] for d in demands if any(separates(s, d) for s in members)), Fraction(0))


def _mask_penalty(mask: int, demands: Sequence[Demand]) -> Fraction:
    return sum((d[2] for i, d in enumerate(demands) if mask >> i & 1), Fraction(0))


def find_tight_family(
    y: dict[frozenset[int], Fraction],
    active: Sequence[frozenset[int]],
    demands: Sequence[Demand],
    demand_cap: int = DEMAND_CAP,
) -> tuple[Fraction | None, Family]:
    """Least uniform growth of ``active`` that makes some family constraint tight.

    Candidate members are the positive-dual sets plus the active moats.  For each
    demand subset D, the family of all candidates whose signature lies inside D is the
    hardest family separating at most D, so minimizing over D covers every family.
    Returns (None, empty) when no family limits growth, else the growth and the union of
    all families that are tight after it.
    """
    if len(demands) > demand_cap:
        raise OracleCapExceeded(f"{len(demands)} demands exceeds oracle cap {demand_cap}")
    if not demands:
        return None, frozenset()
    active_set = set(active)
    members = {s for s, v in y.items() if v > 0} | active_set
    by_sig: dict[int, list[frozenset[int]]] = {}
    for s in members:
        by_sig.setdefault(signature(s, demands), []).append(s)
    sig_y = {sig: sum((y.get(s, Fraction(0)) for s in ss), Fraction(0)) for sig, ss in by_sig.items()}
    sig_a = {sig: sum(1 for s in ss if s in active_set) for sig, ss in by_sig.items()}

    groups = []
    for mask in range(1 << len(demands)):
        sigs = [sig for sig in by_sig if sig & ~mask == 0]
        if not sigs:
            continue
        union = 0
        for sig in sigs:
            union |= sig
        if union != mask:
            continue  # same family as the smaller mask ``union``
        groups.append((mask, sigs))

    best: Fraction | None = None
    for mask, sigs in groups:
        a = sum(sig_a[s] for s in sigs)
        if a == 0:
            continue
        slack = _mask_penalty(mask, demands) - sum((sig_y[s] for s in sigs), Fraction(0))
        eps = slack / a
        if best is None or eps < best:
            best = eps
    if best is None:
        return None, frozenset()
    tight: set[frozenset[int]] = set()
    for mask, sigs in groups:
        a = sum(sig_a[s] for s in sigs)
        grown = sum((sig_y[s] for s in sigs), Fraction(0)) + a * best
        if grown == _mask_penalty(mask, demands):
            for sig in sigs:
                tight.update(by_sig[sig])
    return best, frozenset(tight)


def find_tight_family_bruteforce(
    y: dict[frozenset[int], Fraction],
    active: Sequence[frozenset[int]],
    demands: Sequence[Demand],
    extra_members: Iterable[frozenset[int]] = (),
    member_cap: int = MEMBER_CAP,
) -> Fraction | None:
    """Least growth over every family of candidate members, enumerated one by one."""
    active_set = set(active)
    members = sorted({s for s, v in y.items() if v > 0} | active_set | set(extra_members),
                     key=lambda s: (len(s), sorted(s)))
    if len(members) > member_cap:
        raise OracleCapExceeded(f"{len(members)} candidate members exceeds cap {member_cap}")
    best: Fraction | None = None
    for size in range(1, len(members) + 1):
        for fam in combinations(members, size):
            a = sum(1 for s in fam if s in active_set)
            if a == 0:
                continue
            slack = f_value(fam, demands) - sum((y.get(s, Fraction(0)) for s in fam), Fraction(0))
            eps = slack / a
            if best is None or eps < best:
                best = eps
    return best


@dataclass
class ForestSolution:
    bought: VertexSet
    unserved: tuple[Demand, ...]
    connection_cost: Fraction
    penalty_cost: Fraction
    ledger: DualLedger
    dual_total: Fraction
    marked: dict[int, int] = field(default_factory=dict)
    tight_families: list[Family] = field(default_factory=list)
    # marked demand indices after each iteration
    marked_history: list[frozenset[int]] = field(default_factory=list)
    state: MoatState | None = field(default=None, repr=False)

    @property
    def total_cost(self) -> Fraction:
        return self.connection_cost + self.penalty_cost


def solve_pcsf(inst: ForestInstance, demand_cap: int = DEMAND_CAP) -> ForestSolution:
    """Grow moats around demand endpoints, mark demands when a family goes tight, prune."""
    if not inst.is_gadgetized():
        raise InstanceError("demand endpoints must be weight-0 and in one demand; call gadgetize_demands")
    demands = inst.demands
    marked: dict[int, int] = {}

    def separates_unmarked(state: MoatState, s: frozenset[int]) -> bool:
        return any(idx not in marked and separates(s, d) for idx, d in enumerate(demands))

    free = [v for v in range(inst.n) if inst.weight[v] == 0]
    state = MoatState.start(inst.graph, inst.weight, free, lambda v: None, separates_unmarked)

    def refresh() -> None:
        state.active = {k for k in state.members if separates_unmarked(state, state.moat_set(k))}

    tight_families: list[Family] = []
    marked_history: list[frozenset[int]] = []

    def family_oracle(st: MoatState) -> Event | None:
        eps, fam = find_tight_family(st.ledger.y, st.active_sets(), demands, demand_cap)
        if eps is None:
            return None
        return Event(eps, "family", sets=tuple(sorted(fam, key=lambda s: (len(s), sorted(s)))))

    refresh()
    while state.active:
        ev = next_event(state, family_oracle)
        if ev.kind == "family":
            state.begin_iteration(ev.eps, "family-tight", "family=" + describe(ev.sets))
            state.grow(ev.eps)
            fam = frozenset(ev.sets)
            tight_families.append(fam)
            for idx, d in enumerate(demands):
                if idx not in marked and any(separates(s, d) for s in fam):
                    marked[idx] = state.iteration
            state.mark_time.update(marked)
        else:
            state.begin_iteration(ev.eps, "vertex-tight", ",".join(map(str, ev.vertices)))
            state.grow(ev.eps)
            for v in ev.vertices:
                state.buy(v)
        marked_history.append(frozenset(marked))
        refresh()

    unmarked = [d for idx, d in enumerate(demands) if idx not in marked]
    bought = prune_forest(state, inst, unmarked)
    unserved = inst.unserved(bought)
    conn, pen = inst.cost(bought)
    return ForestSolution(bought, unserved, conn, pen, state.ledger, state.ledger.total(),
                          dict(marked), tight_families, marked_history, state)


def _all_connected(inst: ForestInstance, vertices: set[int], demands: Sequence[Demand]) -> bool:
    for i, j, _ in demands:
        if i not in vertices or j not in inst.graph.component(i, vertices):
            return False
    return True


def prune_forest(state: MoatState, inst: ForestInstance, unmarked: Sequence[Demand],
                 keep: Iterable[int] | None = None) -> VertexSet:
    """Drop purchased vertices, latest first, whenever the unmarked demands stay connected.

    Vertices held from the start (weight 0) are never dropped.
    """
    current = set(state.bought if keep is None else set(keep) & state.bought)
    order = sorted(
        (v for v in current if state.purchase_time[v] > 0),
        key=lambda v: (state.purchase_time[v], state.purchase_order.index(v)),
        reverse=True,
    )
    for v in order:
        if _all_connected(inst, current - {v}, unmarked):
            current.discard(v)
    return vertex_set(current)


# ---------------------------------------------------------------------------
# audit
# ---------------------------------------------------------------------------

def family_violations(y: dict[frozenset[int], Fraction], demands: Sequence[Demand]):
    """Every family constraint violated by ``y``, one witness per distinct signature family.

    Sets sharing a separation signature are interchangeable inside a family, so families
    are enumerated over distinct signatures (each carrying the total dual of its sets).
    """
    by_sig: dict[int, list[frozenset[int]]] = {}
    for s, v in y.items():
        if v > 0:
            by_sig.setdefault(signature(s, demands), []).append(s)
    sigs = sorted(by_sig)
    sig_y = {sig: sum((y[s] for s in by_sig[sig]), Fraction(0)) for sig in sigs}
    out = []
    for size in range(1, len(sigs) + 1):
        for combo in combinations(sigs, size):
            mask = 0
            for sig in combo:
                mask |= sig
            lhs = sum((sig_y[sig] for sig in combo), Fraction(0))
            if lhs > _mask_penalty(mask, demands):
                fam = [vertex_set(s) for sig in combo for s in by_sig[sig]]
                out.append((fam, lhs, _mask_penalty(mask, demands)))
    return out


def audit_pcsf(inst: ForestInstance, sol: ForestSolution, ledger: DualLedger | None = None) -> AuditReport:
    rep = AuditReport()
    g = inst.graph
    ledger = ledger or sol.ledger
    y = ledger.y
    demands = inst.demands
    fp = set(sol.bought)
    total = ledger.total()

    for v in vertex_feasibility_violations(g, inst.weight, ledger):
        rep.fail("dual-constraint-3", None, (v,), "vertex over-charged")
    for fam, lhs, rhs in family_violations(y, demands):
        rep.fail("dual-constraint-4", None, fam, f"sum y = {lhs} > f = {rhs}")

    conn, pen = inst.cost(sol.bought)
    if (conn, pen) != (sol.connection_cost, sol.penalty_cost):
        rep.fail("cost-recomputation", None, sol.bought)

    marked_idx = set(sol.marked)
    marked = [d for idx, d in enumerate(demands) if idx in marked_idx]
    for d in sol.unserved:
        if demands.index(d) not in marked_idx:
            rep.fail("lemma-15", None, d[:2], "unserved demand was never marked")
    union: set[frozenset[int]] = set()
    for fam in sol.tight_families:
        union |= fam
    f_all = f_value(union, demands)
    y_all = sum((y.get(s, Fraction(0)) for s in union), Fraction(0))
    pen_marked = sum((d[2] for d in marked), Fraction(0))
    rep.values.update(f_all=f_all, y_all=y_all, marked_penalty=pen_marked)
    if union and f_all != y_all:
        rep.fail("tight-union", None, tuple(vertex_set(s) for s in union), f"f={f_all} y={y_all}")
    if not (pen <= pen_marked <= f_all and y_all <= total):
        rep.fail("penalty-bound", None, sol.bought, f"{pen} <= {pen_marked} <= {f_all} <= {total} fails")

    charged = sum((len(fp & set(neighbors(g, s))) * v for s, v in y.items()), Fraction(0))
    if charged != conn:
        rep.fail("connection-identity", None, sol.bought, f"w(F')={conn} != {charged}")
    if conn > 3 * total:
        rep.fail("connection-bound", None, sol.bought, f"{conn} > 3*{total}")
    if conn + pen > 4 * total:
        rep.fail("forest-inequality", None, sol.bought, f"{conn + pen} > 4*{total}")

    if sol.state is not None:
        for rec in sol.state.history:
            aug = rec.bought_before | fp
            count = sum(len(aug & set(neighbors(g, s))) for s in rec.active)
            if count > 3 * len(rec.active):
                rep.fail("lemma-17", rec.index, tuple(vertex_set(s) for s in rec.active),
                         f"{count} > 3*{len(rec.active)}")
    for j in range(1, len(sol.marked_history)):
        lost = sol.marked_history[j - 1] - sol.marked_history[j]
        if lost:
            rep.fail("marks-permanent", j + 1, tuple(sorted(lost)))
    return rep


__all__ = [
    "ForestSolution",
    "OracleCapExceeded",
    "audit_pcsf",
    "f_value",
    "family_violations",
    "find_tight_family",
    "find_tight_family_bruteforce",
    "prune_forest",
    "separates",
    "signature",
    "solve_pcsf",
]
