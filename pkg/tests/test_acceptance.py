"""Acceptance sweeps.  Each test prints one ``criterion N: PASS|FAIL`` line.

Run with ``pytest tests/test_acceptance.py -s -v`` to see the lines inline; they are also
printed when output is captured, via ``capsys.disabled``.
"""

import math
import random
import subprocess
import sys
import time
from fractions import Fraction as F
from pathlib import Path

import mpmath
import networkx as nx
import pytest

from nwpc.instance import Graph, gadgetize_demands, generate_planar_instance, neighbors, normalize_tree
from nwpc.lmp_tree import solve_lmp
from nwpc.lp import enumerate_lpb, lift_lpa_to_lpb, min_vertex_cut, solve_lp, solve_lpb, solve_lpb_k, window_index
from nwpc.oracle import check_white_black_bound, enumerate_lpa, exact_pcsf, exact_pcst
from nwpc.pcsf import audit_pcsf, solve_pcsf
from nwpc.threshold import CombineConfig, combine, optimize_constants

pytestmark = pytest.mark.acceptance

KINDS = ("grid", "triangulated-grid", "outerplanar-cycle")
DATA = Path(__file__).parent / "data"


def report(capsys, number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    with capsys.disabled():
        print("\n" + line)
    return line


# -- shared tree sweep -------------------------------------------------------------

def tree_corpus():
    """1008 instances: 3 kinds x sizes 5..10 x 56 seeds; odd seeds put weight on some
    terminals so normalization has to split them."""
    out = []
    for kind in KINDS:
        for n in range(5, 11):
            for seed in range(56):
                raw = generate_planar_instance(kind, n, seed, mixed=seed % 2 == 1)
                out.append((f"{kind}-{n}-{seed}", raw))
    return out


@pytest.fixture(scope="module")
def tree_sweep():
    start = time.perf_counter()
    rows = []
    for name, raw in tree_corpus():
        inst = normalize_tree(raw)
        sol = solve_lmp(inst)
        opt = exact_pcst(inst)[0]
        rows.append((name, inst, sol, opt))
    return rows, time.perf_counter() - start


def test_criterion_1_lmp_guarantee(tree_sweep, capsys):
    rows, elapsed = tree_sweep
    bad = [name for name, _, sol, opt in rows
           if not (sol.connection_cost + 3 * sol.penalty_cost <= 3 * sol.dual_total <= 3 * opt)]
    ok = len(rows) >= 1000 and not bad and elapsed < 60
    report(capsys, 1, ok, f"{len(rows)} instances, {len(bad)} violations, {elapsed:.1f}s (limit 60s)")
    assert not bad, bad[:5]
    assert len(rows) >= 1000 and elapsed < 60


def test_criterion_2_penalty_identity(tree_sweep, capsys):
    rows, _ = tree_sweep
    bad = []
    for name, inst, sol, _ in rows:
        fp = set(sol.bought)
        pc = sum((y for s, y in sol.ledger.entries()
                  if not (s & fp) and not (set(neighbors(inst.graph, s)) & fp)), F(0))
        missed = sum((inst.penalty[v] for v in range(inst.n) if v not in fp), F(0))
        if missed != pc:
            bad.append(name)
    report(capsys, 2, not bad, f"{len(rows)} instances, {len(bad)} mismatches")
    assert not bad, bad[:5]


def test_criterion_3_lemmas_2_and_3(tree_sweep, capsys):
    rows, _ = tree_sweep
    bad, iterations = [], 0
    for name, inst, sol, _ in rows:
        g, fp = inst.graph, set(sol.bought)
        cc = set()
        for s, _y in sol.ledger.entries():
            gamma = set(neighbors(g, s))
            if (s | gamma) & fp:
                cc.add(s)
            elif gamma & fp:
                bad.append((name, "lemma 2", sorted(s)))
        for rec in sol.state.history:
            iterations += 1
            moats = [s for s in rec.active if s in cc]
            hits = sum(len(fp & set(neighbors(g, s))) for s in moats)
            if hits > 3 * len(moats):
                bad.append((name, "lemma 3", rec.index))
    report(capsys, 3, not bad, f"{iterations} iterations checked, {len(bad)} violations")
    assert not bad, bad[:5]


# -- LP engine -------------------------------------------------------------------

def brute_cut(g, s, t, cap):
    others = [v for v in range(g.n) if v not in (s, t)]
    best = None
    for mask in range(1 << len(others)):
        side = {s} | {others[i] for i in range(len(others)) if mask >> i & 1}
        val = sum((cap[v] for v in neighbors(g, side)), F(0))
        best = val if best is None else min(best, val)
    return best


def random_graph(rng, n):
    edges = set()
    p = rng.choice((0.2, 0.35, 0.5))
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < p:
                edges.add((u, v))
    return Graph.from_edges(n, edges)


def test_criterion_4_lp_engine(capsys):
    lp_bad, lp_count = [], 0
    for i in range(210):
        kind = KINDS[i % 3]
        n = 3 + i % 7
        inst = generate_planar_instance(kind, n, 1000 + i)
        if inst.n > 9:
            continue
        lp_count += 1
        if solve_lpb(inst).value != solve_lp(enumerate_lpb(inst)).value:
            lp_bad.append((kind, n, 1000 + i))

    rng = random.Random(20240)
    cut_bad, cut_count = [], 0
    for _ in range(520):
        n = rng.randint(2, 10)
        g = random_graph(rng, n)
        s, t = rng.sample(range(n), 2)
        cap = [F(rng.randint(0, 6), rng.randint(1, 4)) for _ in range(n)]
        cut_count += 1
        value, side = min_vertex_cut(g, s, t, cap)
        if value != brute_cut(g, s, t, cap) or s not in side or t in side:
            cut_bad.append((g, s, t, cap))
    ok = lp_count >= 200 and cut_count >= 500 and not lp_bad and not cut_bad
    report(capsys, 4, ok, f"LP {lp_count} compared ({len(lp_bad)} off), cuts {cut_count} compared ({len(cut_bad)} off)")
    assert not lp_bad and not cut_bad
    assert lp_count >= 200 and cut_count >= 500


# -- lift and window facts ---------------------------------------------------------

def test_criterion_5_lift_and_windows(capsys):
    eps = F(1, 10)
    bad, count = [], 0
    for i in range(60):
        inst = generate_planar_instance(KINDS[i % 3], 4 + i % 4, 500 + i, penalty_density=0.6)
        if inst.n > 7:
            continue
        count += 1
        lp, subsets = enumerate_lpa(inst)
        res = solve_lp(lp)
        n = inst.n
        x_star = {v: res.x[v] for v in range(n)}
        z_star = {s: res.x[n + j] for j, s in enumerate(subsets)}
        w_star = sum((inst.weight[v] * x_star[v] for v in range(n)), F(0))
        pi_star = sum((z_star[s] * sum((inst.penalty[v] for v in s), F(0)) for s in subsets), F(0))

        # lifted point: feasible for the fully listed penalty LP, same objective
        x, y = lift_lpa_to_lpb(x_star, z_star)
        full = enumerate_lpb(inst)
        vec = [x[v] for v in range(n)] + [y.get(u, F(0)) for u in inst.terminals]
        if not full.satisfied_by(vec) or full.value(vec) != res.value:
            bad.append((i, "lift"))

        k = window_index(w_star, eps)
        sharp = solve_lpb_k(inst, None if k is None else k + 1, eps)
        if sharp is None:
            bad.append((i, "window infeasible"))
            continue
        if sharp.connection_value > (1 + eps) ** 2 * w_star:
            bad.append((i, "connection", sharp.connection_value, w_star))
        if sharp.penalty_value > pi_star:
            bad.append((i, "penalty", sharp.penalty_value, pi_star))
    report(capsys, 5, count >= 50 and not bad, f"{count} instances, {len(bad)} violations")
    assert not bad, bad[:5]
    assert count >= 50


# -- constants ------------------------------------------------------------------

def test_criterion_6_constants(capsys):
    k = optimize_constants(F(12, 5))
    with mpmath.workdps(50):
        e = mpmath.exp(mpmath.mpf(-5) / 36)
        beta_ref, p_ref = 1 - e, 1 / (4 - 3 * e)
    d_beta = abs(float(k.beta) - float(beta_ref))
    d_p = abs(float(k.p) - float(p_ref))
    d_ratio = abs(k.ratio_float - 2.8797)
    ok = d_beta <= 1e-6 and d_p <= 1e-6 and d_ratio <= 1e-6
    report(capsys, 6, ok,
           f"got beta={float(k.beta):.6f} p={float(k.p):.6f} ratio={k.ratio_float:.6f}; "
           f"|dbeta|={d_beta:.2e} |dp|={d_p:.2e} |ratio-2.8797|={d_ratio:.2e} (tolerance 1e-6)")
    assert d_beta <= 1e-6
    assert d_p <= 1e-6
    assert d_ratio <= 1e-6


# -- combination ----------------------------------------------------------------

def test_criterion_7_combine(tree_sweep, capsys):
    rows, _ = tree_sweep
    cfg = CombineConfig(eps=F(1, 10))
    ratio = optimize_constants(3).ratio
    bound = ratio * (1 + cfg.eps) ** 2
    bad, worst = [], F(0)
    start = time.perf_counter()
    for name, inst, _, opt in rows:
        res = combine(inst, cfg)
        if res.best.cost > bound * opt:
            bad.append(name)
        if opt:
            worst = max(worst, res.best.cost / opt)
    elapsed = time.perf_counter() - start
    report(capsys, 7, not bad,
           f"{len(rows)} instances, bound {float(bound):.4f}*OPT, worst ratio {float(worst):.4f}, "
           f"{len(bad)} violations, {elapsed:.1f}s")
    assert not bad, bad[:5]


# -- forests --------------------------------------------------------------------

def test_criterion_8_forest(capsys):
    bad, count, worst = [], 0, F(0)
    for kind in KINDS:
        for n in range(4, 11):
            for seed in range(24):
                raw = generate_planar_instance(kind, n, seed, problem="forest", demands=1 + seed % 4)
                count += 1
                inst = gadgetize_demands(raw)
                sol = solve_pcsf(inst)
                rep = audit_pcsf(inst, sol)
                opt = exact_pcsf(raw)[0]
                if not rep.ok or not (sol.total_cost <= 4 * sol.dual_total <= 4 * opt):
                    bad.append((kind, n, seed, rep.summary()))
                if opt:
                    worst = max(worst, sol.total_cost / opt)
    report(capsys, 8, count >= 500 and not bad,
           f"{count} instances, worst ratio {float(worst):.4f}, {len(bad)} violations")
    assert not bad, bad[:5]
    assert count >= 500


# -- white/black sweep --------------------------------------------------------------

def colored_graph(rng):
    """A random tree with black internal vertices, plus extra edges at black vertices.
    Most draws meet the hypotheses; the rest are filtered out."""
    n = rng.randint(3, 16)
    parent = [None] + [rng.randrange(i) for i in range(1, n)]
    edges = {(parent[i], i) for i in range(1, n)}
    deg = [0] * n
    for u, v in edges:
        deg[u] += 1
        deg[v] += 1
    black = {v for v in range(n) if deg[v] > 1 and rng.random() < 0.75}
    for u, v in sorted(edges):
        if u not in black and v not in black:
            black.add(u if deg[u] > 1 else v)
    bl = sorted(black)
    for _ in range(rng.randint(0, n // 2)):
        u = rng.choice(bl) if bl else 0
        v = rng.randrange(n)
        if u != v:
            edges.add((min(u, v), max(u, v)))
    return Graph.from_edges(n, edges), set(range(n)) - black


def test_criterion_9_white_black(capsys):
    rng = random.Random(9)
    checked = drawn = 0
    failures = []
    while checked < 10000:
        drawn += 1
        g, white = colored_graph(rng)
        if not nx.check_planarity(nx.Graph(list(g.edges)))[0]:
            continue
        status, info = check_white_black_bound(g, white)
        if status == "precondition-unmet":
            continue
        checked += 1
        if status != "pass":
            failures.append((g, sorted(white), info))
    report(capsys, 9, not failures, f"{checked} graphs met the hypotheses (of {drawn} drawn), {len(failures)} failures")
    assert not failures, failures[:3]


# -- determinism ------------------------------------------------------------------

def test_criterion_10_determinism(tmp_path, capsys):
    base = [sys.executable, "-m", "nwpc.cli"]
    commands = [
        ["solve", "lmp", str(DATA / "path5.nwpc"), "--audit", "--trace", "{trace}"],
        ["solve", "combine", str(DATA / "path5.nwpc"), "--eps", "1/20", "--format", "json"],
        ["solve", "nwst", str(DATA / "path5.nwpc"), "--audit", "--trace", "{trace}"],
        ["solve", "pcsf", str(DATA / "umv.nwpc"), "--audit", "--trace", "{trace}"],
        ["bench", "--algo", "lmp", "--count", "30", "--seed", "4"],
        ["bench", "--algo", "combine", "--n", "7", "--count", "5", "--seed", "4"],
        ["bench", "--algo", "pcsf", "--n", "8", "--count", "20", "--seed", "4", "--format", "json"],
        ["bench", "--algo", "nwst", "--kind", "outerplanar-cycle", "--count", "20", "--seed", "4"],
        ["generate", "--kind", "triangulated-grid", "--n", "12", "--seed", "5"],
        ["generate", "--problem", "forest", "--kind", "outerplanar-cycle", "--n", "9", "--seed", "5"],
    ]
    differing = []
    for cmd in commands:
        outputs = []
        for rep in range(2):
            trace = tmp_path / f"trace{rep}.txt"
            argv = [a.replace("{trace}", str(trace)) for a in cmd]
            res = subprocess.run(base + argv, capture_output=True, check=True)
            outputs.append((res.stdout, trace.read_bytes() if trace.exists() else b""))
        if outputs[0] != outputs[1]:
            differing.append(" ".join(cmd))
    report(capsys, 10, not differing, f"{len(commands)} commands run twice, {len(differing)} differ")
    assert not differing
