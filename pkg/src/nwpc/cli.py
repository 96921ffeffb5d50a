"""Command-line front end: ``nwpc solve|bench|generate``.

Exit codes: 0 success, 2 bad input (parse failure, missing file, wrong problem type),
3 audit or bound violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction

from .instance import (
    KINDS,
    ForestInstance,
    InstanceError,
    TreeInstance,
    dumps,
    format_rational,
    gadgetize_demands,
    generate_planar_instance,
    normalize_tree,
    read_instance,
)
from .lmp_tree import PcSolution, audit_lmp, audit_nwst, solve_lmp, solve_nwst_full
from .oracle import FOREST_CAP, TREE_CAP, exact_nwst, exact_pcsf, exact_pcst
from .pcsf import audit_pcsf, solve_pcsf
from .threshold import DEFAULT_EPS, CombineConfig, combine, optimize_constants

EXIT_OK, EXIT_INPUT, EXIT_VIOLATION = 0, 2, 3

ALGOS = ("lmp", "combine", "pcsf", "nwst")
REPORT_FIELDS = ("instance", "algo", "size", "connection", "penalty", "total", "dual",
                 "opt", "ratio", "total_dec", "opt_dec", "ratio_dec")
BENCH_FIELDS = ("algo", "kind", "n", "count", "with_opt", "max_ratio", "mean_ratio",
                "max_ratio_dec", "mean_ratio_dec", "violations")


def rat(x: Fraction | None) -> str:
    return "-" if x is None else format_rational(x)


def dec(x: Fraction | None) -> str:
    return "-" if x is None else f"{float(x):.6f}"


def ratio_of(cost: Fraction, opt: Fraction | None) -> Fraction | None:
    if opt is None:
        return None
    if opt == 0:
        # cost 0 against opt 0 is a perfect ratio; anything else would be a bug
        return Fraction(1) if cost == 0 else None
    return cost / opt


def parse_eps(text: str) -> Fraction:
    try:
        eps = Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational: {text!r}") from exc
    if eps <= 0:
        raise argparse.ArgumentTypeError("eps must be positive")
    return eps


def parse_vertices(text: str) -> tuple[int, ...]:
    if not text.strip():
        return ()
    try:
        return tuple(sorted({int(t) for t in text.split(",")}))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad vertex list {text!r}") from exc


# ---------------------------------------------------------------------------
# running one instance
# ---------------------------------------------------------------------------

class Outcome:
    """Everything a report needs from one solve."""

    def __init__(self, name, algo, bought, conn, pen, dual, opt, violations,
                 trace=(), candidates=(), bound_ok=True):
        self.name = name
        self.algo = algo
        self.bought = tuple(bought)
        self.conn = conn
        self.pen = pen
        self.dual = dual
        self.opt = opt
        self.violations = list(violations)
        self.trace = list(trace)
        self.candidates = list(candidates)
        self.bound_ok = bound_ok

    @property
    def total(self) -> Fraction:
        return self.conn + self.pen

    @property
    def ratio(self) -> Fraction | None:
        return ratio_of(self.total, self.opt)

    @property
    def failed(self) -> bool:
        return bool(self.violations) or not self.bound_ok

    def row(self) -> dict[str, object]:
        return {
            "instance": self.name, "algo": self.algo, "size": len(self.bought),
            "connection": rat(self.conn), "penalty": rat(self.pen), "total": rat(self.total),
            "dual": rat(self.dual), "opt": rat(self.opt), "ratio": rat(self.ratio),
            "total_dec": dec(self.total), "opt_dec": dec(self.opt), "ratio_dec": dec(self.ratio),
        }


def _require(inst, kind, algo):
    if not isinstance(inst, kind):
        want = "tree" if kind is TreeInstance else "forest"
        raise InstanceError(f"algorithm {algo!r} needs a {want} instance")


def run_algo(inst, algo: str, name: str, eps: Fraction = DEFAULT_EPS, oracle_cap: int | None = None,
             terminals: tuple[int, ...] | None = None, audit: bool = True) -> Outcome:
    """Solve ``inst`` with ``algo``, optionally audit, and check the proven bound against the
    exact optimum whenever the instance fits under the oracle cap."""
    violations: list[str] = []
    if algo == "pcsf":
        _require(inst, ForestInstance, algo)
        cap = FOREST_CAP if oracle_cap is None else oracle_cap
        gad = gadgetize_demands(inst)
        sol = solve_pcsf(gad)
        bought = gad.map_back(sol.bought)
        conn, pen = inst.cost(bought)
        opt = exact_pcsf(inst, cap)[0] if inst.n <= cap else None
        if audit:
            violations += [str(v) for v in audit_pcsf(gad, sol).violations]
        bound = sol.total_cost <= 4 * sol.dual_total and (opt is None or sol.dual_total <= opt)
        return Outcome(name, algo, bought, conn, pen, sol.dual_total, opt, violations,
                       sol.state.trace, bound_ok=bound and (conn, pen) == (sol.connection_cost, sol.penalty_cost))

    _require(inst, TreeInstance, algo)
    cap = TREE_CAP if oracle_cap is None else oracle_cap
    if algo == "nwst":
        q = tuple(inst.terminals) if terminals is None else terminals
        sol = solve_nwst_full(inst, q)
        opt = exact_nwst(inst, q, cap)[0] if inst.n <= cap else None
        if audit:
            violations += [str(v) for v in audit_nwst(inst, q, sol).violations]
        # an NWST run pays no penalties: report the connection cost only
        zero = Fraction(0)
        upfront = sum((inst.weight[v] for v in set(q) | {inst.root}), Fraction(0))
        bound = (sol.connection_cost - upfront <= 3 * sol.dual_total
                 and (opt is None or (sol.dual_total <= opt and sol.connection_cost <= 3 * opt)))
        return Outcome(name, algo, sol.bought, sol.connection_cost, zero, sol.dual_total, opt,
                       violations, sol.state.trace, bound_ok=bound)

    norm = normalize_tree(inst)
    opt = exact_pcst(inst, cap)[0] if inst.n <= cap else None
    if algo == "lmp":
        sol = solve_lmp(norm)
        bought = norm.map_back(sol.bought)
        conn, pen = inst.cost(bought)
        if audit:
            violations += [str(v) for v in audit_lmp(norm, sol).violations]
        bound = (sol.connection_cost + 3 * sol.penalty_cost <= 3 * sol.dual_total
                 and (opt is None or sol.dual_total <= opt)
                 and (conn, pen) == (sol.connection_cost, sol.penalty_cost))
        return Outcome(name, algo, bought, conn, pen, sol.dual_total, opt, violations,
                       sol.state.trace, bound_ok=bound)

    if algo == "combine":
        res = combine(norm, CombineConfig(eps=eps))
        best = res.solution
        bought = norm.map_back(best.bought)
        conn, pen = inst.cost(bought)
        lmp = res.candidates[0].solution
        if audit:
            scaled = norm.with_penalty(tuple(p / 3 for p in norm.penalty))
            c = scaled.cost(lmp.bought)
            raw = PcSolution(lmp.bought, c[0], c[1], lmp.ledger, lmp.dual_total, lmp.state)
            violations += [str(v) for v in audit_lmp(scaled, raw).violations]
        factor = optimize_constants(res.config.subroutine_factor).ratio * (1 + eps) ** 2
        bound = opt is None or conn + pen <= factor * opt
        cands = [(c.source, c.k, c.alpha, c.cost) for c in res.candidates]
        return Outcome(name, algo, bought, conn, pen, lmp.dual_total, opt, violations,
                       lmp.state.trace, candidates=cands, bound_ok=bound)
    raise ValueError(f"unknown algorithm {algo!r}")


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------

def _csv(fields, rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def _candidate_rows(out: Outcome) -> list[dict[str, object]]:
    rows = []
    for i, (source, k, alpha, cost) in enumerate(out.candidates):
        rows.append({"index": i, "source": source, "k": "-" if k is None else k,
                     "alpha": rat(alpha), "cost": rat(cost), "cost_dec": dec(cost)})
    return rows


def render_solve(out: Outcome, fmt: str) -> str:
    row = out.row()
    if fmt == "json":
        doc: dict[str, object] = {"report": row, "bought": list(out.bought), "violations": out.violations}
        if out.candidates:
            doc["candidates"] = _candidate_rows(out)
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    text = ""
    if out.candidates:
        text += _csv(("index", "source", "k", "alpha", "cost", "cost_dec"), _candidate_rows(out)) + "\n"
    text += _csv(REPORT_FIELDS, [row])
    text += "bought," + " ".join(map(str, out.bought)) + "\n"
    for v in out.violations:
        text += f"violation,{v}\n"
    return text


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_solve(args) -> int:
    try:
        inst = read_instance(args.file)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InstanceError as exc:
        print(f"error: {args.file}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    name = os.path.splitext(os.path.basename(args.file))[0]
    try:
        out = run_algo(inst, args.algo, name, args.eps, args.oracle_cap, args.terminals, args.audit)
    except InstanceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    sys.stdout.write(render_solve(out, args.format))
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as fh:
            fh.write("".join(line + "\n" for line in out.trace))
    return EXIT_VIOLATION if out.failed else EXIT_OK


def _problem(algo: str) -> str:
    return "forest" if algo == "pcsf" else "tree"


def _bench_one(job):
    kind, n, seed, algo, eps, cap, audit = job
    inst = generate_planar_instance(kind, n, seed, problem=_problem(algo))
    out = run_algo(inst, algo, f"{kind}-n{n}-s{seed}", eps, cap, None, audit)
    return seed, out.ratio, out.opt is not None, out.failed, out.violations, dumps(inst), out.name


def cmd_bench(args) -> int:
    jobs = [(args.kind, args.n, args.seed + i, args.algo, args.eps, args.oracle_cap, args.audit)
            for i in range(args.count)]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_bench_one, jobs))
    else:
        results = [_bench_one(j) for j in jobs]
    results.sort(key=lambda r: r[0])

    rows = []
    failures = [r for r in results if r[3]]
    if results:
        ratios = [r[1] for r in results if r[1] is not None]
        mx = max(ratios) if ratios else None
        mean = sum(ratios, Fraction(0)) / len(ratios) if ratios else None
        rows.append({"algo": args.algo, "kind": args.kind, "n": args.n, "count": len(results),
                     "with_opt": sum(1 for r in results if r[2]), "max_ratio": rat(mx),
                     "mean_ratio": rat(mean), "max_ratio_dec": dec(mx), "mean_ratio_dec": dec(mean),
                     "violations": len(failures)})
    if args.format == "json":
        sys.stdout.write(json.dumps({"bench": rows}, indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write(_csv(BENCH_FIELDS, rows))
    if failures:
        os.makedirs(args.dump_dir, exist_ok=True)
        for seed, _, _, _, violations, text, name in failures:
            path = os.path.join(args.dump_dir, name + ".nwpc")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write("".join(f"# {v}\n" for v in violations) or "# bound violated\n")
                fh.write(text)
            print(f"violation: witness written to {path}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_generate(args) -> int:
    try:
        inst = generate_planar_instance(args.kind, args.n, args.seed, problem=args.problem,
                                        demands=args.demands, mixed=args.mixed)
    except InstanceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    text = dumps(inst)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nwpc", description="Node-weighted prize-collecting Steiner solvers.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--eps", type=parse_eps, default=DEFAULT_EPS, help="window ratio for combine (rational)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--oracle-cap", type=int, default=None,
                       help="largest vertex count for the exact oracle")
        p.add_argument("--audit", action="store_true", help="run the dual-feasibility auditor")

    s = sub.add_parser("solve", help="solve one instance file")
    s.add_argument("algo", choices=ALGOS)
    s.add_argument("file")
    s.add_argument("--trace", metavar="PATH", help="write the event trace to PATH")
    s.add_argument("--terminals", type=parse_vertices, default=None,
                   help="comma-separated vertices to connect (nwst only; default: all terminals)")
    s.add_argument("--seed", type=int, default=0, help="accepted for symmetry; solving is deterministic")
    common(s)
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="sweep generated instances against the exact oracle")
    b.add_argument("--kind", choices=KINDS, default="grid")
    b.add_argument("--n", type=int, default=9)
    b.add_argument("--count", type=int, default=100)
    b.add_argument("--algo", choices=ALGOS, default="lmp")
    b.add_argument("--seed", type=int, default=0, help="first seed; instance i uses seed+i")
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--dump-dir", default="nwpc-witnesses", help="where violating instances are written")
    common(b)
    b.set_defaults(func=cmd_bench, audit=True)

    g = sub.add_parser("generate", help="write a generated instance")
    g.add_argument("--kind", choices=KINDS, default="grid")
    g.add_argument("--n", type=int, default=9)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--problem", choices=("tree", "forest"), default="tree")
    g.add_argument("--demands", type=int, default=2)
    g.add_argument("--mixed", action="store_true", help="give some terminals a weight too")
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "command", None) == "bench" and args.count < 0:
        print("error: --count must be >= 0", file=sys.stderr)
        return EXIT_INPUT
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
