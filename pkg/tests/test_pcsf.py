from fractions import Fraction as F

import pytest
from hypothesis import given, settings

from conftest import forest_instances, umv
from nwpc.instance import ForestInstance, Graph, InstanceError, gadgetize_demands
from nwpc.oracle import exact_pcsf
from nwpc.pcsf import (
    audit_pcsf,
    f_value,
    family_violations,
    find_tight_family,
    find_tight_family_bruteforce,
    prune_forest,
    separates,
    solve_pcsf,
)

S = frozenset


def test_separates():
    d = (1, 2, F(1))
    assert separates({1}, d)
    assert not separates({1, 2}, d)
    assert not separates(set(), d)


def test_f_value():
    d = [(0, 2, F(4))]
    assert f_value([{0}], d) == 4
    assert f_value([{0}, {2}], d) == 4
    assert f_value([], d) == 0


# -- family oracle ------------------------------------------------------

def test_family_two_singletons():
    eps, fam = find_tight_family({}, [S({0}), S({2})], [(0, 2, F(4))])
    assert eps == 2 and fam == {S({0}), S({2})}
    assert find_tight_family_bruteforce({}, [S({0}), S({2})], [(0, 2, F(4))]) == 2


def test_family_zero_slack():
    # the demand is already paid for by the dual on {0}
    y = {S({0}): F(4)}
    eps, fam = find_tight_family(y, [S({0})], [(0, 2, F(4))])
    assert eps == 0 and fam == {S({0})}


def test_family_no_demands():
    assert find_tight_family({}, [S({0})], []) == (None, frozenset())


def test_family_member_cap():
    from nwpc.pcsf import OracleCapExceeded

    with pytest.raises(OracleCapExceeded):
        find_tight_family_bruteforce({}, [S({v}) for v in range(5)], [(0, 1, F(1))], member_cap=4)
    with pytest.raises(OracleCapExceeded):
        find_tight_family({}, [S({0})], [(0, 1, F(1))] * 3, demand_cap=2)


# -- solver ---------------------------------------------------------------

def test_umv_cheap_middle():
    inst = umv(3)
    sol = solve_pcsf(inst)
    assert sol.state.trace == ["i=1 ε=3/2 kind=vertex-tight detail=1"]
    assert sol.bought == (0, 1, 2) and sol.unserved == ()
    assert (sol.connection_cost, sol.penalty_cost, sol.dual_total) == (3, 0, 3)
    assert exact_pcsf(inst)[0] == 3
    assert audit_pcsf(inst, sol).ok


def test_umv_expensive_middle():
    inst = umv(5)
    sol = solve_pcsf(inst)
    assert sol.state.trace == ["i=1 ε=2 kind=family-tight detail=family=[{0},{2}]"]
    assert sol.bought == (0, 2) and sol.unserved == ((0, 2, F(4)),)
    assert (sol.connection_cost, sol.penalty_cost, sol.dual_total) == (0, 4, 4)
    assert exact_pcsf(inst)[0] == 4
    assert audit_pcsf(inst, sol).ok


def test_independent_components():
    g = Graph.from_edges(6, [(0, 1), (1, 2), (3, 4), (4, 5)])
    w = (F(0), F(3), F(0), F(0), F(5), F(0))
    both = ForestInstance(g, w, ((0, 2, F(4)), (3, 5, F(4))))
    sol = solve_pcsf(both)
    assert sol.bought == (0, 1, 2, 3, 5)
    assert sol.unserved == ((3, 5, F(4)),)
    assert sol.total_cost == 7 == exact_pcsf(both)[0]


def test_rejects_raw_instance():
    g = Graph.from_edges(2, [(0, 1)])
    with pytest.raises(InstanceError):
        solve_pcsf(ForestInstance(g, (F(1), F(0)), ((0, 1, F(1)),)))


def test_no_demands():
    g = Graph.from_edges(3, [(0, 1), (1, 2)])
    inst = ForestInstance(g, (F(0), F(2), F(0)), ())
    sol = solve_pcsf(inst)
    assert sol.dual_total == 0 and sol.connection_cost == 0
    assert audit_pcsf(inst, sol).ok


# -- pruning --------------------------------------------------------------

def test_prune_everything_marked():
    inst = umv(5)
    sol = solve_pcsf(inst)
    assert prune_forest(sol.state, inst, []) == (0, 2)


def test_prune_single_chain():
    inst = umv(3)
    sol = solve_pcsf(inst)
    assert prune_forest(sol.state, inst, inst.demands) == (0, 1, 2)


def test_prune_drops_vertex_for_later_marked_demand():
    # demand A: 0 - 1 - 2 (w_1 = 1, pi = 10); demand B: 3 - 4 - 5 (w_4 = 1, pi = 1/4) chained to 2 via 4
    g = Graph.from_edges(6, [(0, 1), (1, 2), (3, 4), (4, 5), (2, 4)])
    w = (F(0), F(1), F(0), F(0), F(3), F(0))
    inst = ForestInstance(g, w, ((0, 2, F(10)), (3, 5, F(1, 4))))
    sol = solve_pcsf(inst)
    assert 4 not in sol.bought
    assert sol.unserved == ((3, 5, F(1, 4)),)
    assert sol.total_cost == exact_pcsf(inst)[0]
    # a vertex bought and then found useless is removed
    st = sol.state
    st.purchase_time[4] = st.iteration + 1
    st.purchase_order.append(4)
    st.uf.add(4)
    st.members[4] = {4}
    assert 4 not in prune_forest(st, inst, [inst.demands[0]])


# -- auditing -------------------------------------------------------------

def test_audit_fault_injection():
    inst = umv(5)
    sol = solve_pcsf(inst)
    bad = sol.ledger.copy()
    bad.y[S({0})] += 1
    rep = audit_pcsf(inst, sol, bad)
    assert "dual-constraint-4" in {v.check for v in rep.violations}
    assert audit_pcsf(inst, sol).ok


def test_family_violations_direct():
    d = [(0, 2, F(4))]
    assert family_violations({S({0}): F(2), S({2}): F(2)}, d) == []
    out = family_violations({S({0}): F(3), S({2}): F(2)}, d)
    assert out and out[0][1] == 5 and out[0][2] == 4


# -- properties ----------------------------------------------------------

@settings(max_examples=120, deadline=None)
@given(forest_instances(max_n=8, max_demands=3))
def test_forest_guarantee(raw):
    inst = gadgetize_demands(raw)
    sol = solve_pcsf(inst)
    rep = audit_pcsf(inst, sol)
    assert rep.ok, rep.summary()
    opt = exact_pcsf(raw)[0]
    assert sol.total_cost <= 4 * sol.dual_total <= 4 * opt
    served = set(inst.demands) - set(sol.unserved)
    for i, j, _ in served:
        assert j in inst.graph.component(i, sol.bought)
    # mapped back, the solution costs the same on the raw instance
    assert raw.cost(inst.map_back(sol.bought)) == (sol.connection_cost, sol.penalty_cost)


@settings(max_examples=60, deadline=None)
@given(forest_instances(max_n=7, max_demands=3))
def test_family_oracle_matches_enumeration(raw):
    """Replay each run and, at every iteration, compare with the slow enumeration that also
    offers singleton sets that never grew."""
    inst = gadgetize_demands(raw)
    if not inst.demands:
        return
    from nwpc import pcsf

    seen = []
    real = pcsf.find_tight_family

    def checked(y, active, demands, demand_cap=16):
        eps, fam = real(y, active, demands, demand_cap)
        singles = [S({v}) for v in range(inst.n)]
        extra = [s for s in singles if s not in y]
        slow = find_tight_family_bruteforce(y, active, demands, extra, member_cap=40)
        seen.append((eps, slow))
        return eps, fam

    pcsf.find_tight_family = checked
    try:
        solve_pcsf(inst)
    finally:
        pcsf.find_tight_family = real
    for eps, slow in seen:
        assert eps == slow
