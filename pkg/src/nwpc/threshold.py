"""Threshold rounding of the penalty LP, the best-of combination with the LMP solver,
and the mixing constants of the combined guarantee.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath

from .instance import TreeInstance, VertexSet
from .lmp_tree import PcSolution, solve_lmp, solve_nwst_full
from .lp import LpbSolution, solve_lpb_k, window_range

DEFAULT_EPS = Fraction(1, 10)


@dataclass(frozen=True)
class Constants:
    beta: Fraction
    p: Fraction
    ratio: Fraction  # certified upper bound on the objective at (beta, p)

    @property
    def ratio_float(self) -> float:
        return float(self.ratio)


def _split_costs(c: float, beta: float) -> tuple[float, float]:
    """Coefficients of w(x*) and pi(z*) contributed by threshold rounding alone."""
    return c * -math.log1p(-beta) / beta, 1.0 / beta


def best_mix(c: float, beta: float) -> tuple[float, float]:
    """For fixed beta, the p in [0, 1] minimizing max(3p + (1-p)A, p + (1-p)B)."""
    a, b = _split_costs(c, beta)
    if a >= 3:
        return 1.0, 3.0
    if a >= b:
        return 0.0, a
    p = (b - a) / (2 - a + b)
    return p, a + (3 - a) * p


def _raw_to_fraction(raw) -> Fraction:
    sign, man, exp, _ = raw
    value = Fraction(man) * Fraction(2) ** exp
    return -value if sign else value


def mixed_bound(c, beta, p, prec: int = 200) -> Fraction:
    """Certified upper bound (interval arithmetic at ``prec`` bits) on
    max(3p + (1-p)(c/beta)ln(1/(1-beta)), p + (1-p)/beta), returned exactly."""
    iv = mpmath.iv
    saved = iv.prec
    iv.prec = prec
    try:
        c_, b_, p_ = (iv.mpf(Fraction(v).numerator) / Fraction(v).denominator for v in (c, beta, p))
        first = 3 * p_ + (1 - p_) * (c_ / b_) * (-iv.log(1 - b_))
        second = p_ + (1 - p_) / b_
        return max(_raw_to_fraction(first._mpi_[1]), _raw_to_fraction(second._mpi_[1]))
    finally:
        iv.prec = saved


def optimize_constants(c) -> Constants:
    """Minimax choice of (beta, p) for a subroutine with approximation factor ``c``.

    The objective, for each beta, is balanced in p exactly (``best_mix``); beta is then
    located by a coarse grid followed by golden-section refinement.  When c >= 3 the
    rounding branch can never beat the LMP branch (its w-coefficient is >= 3 for every
    beta), so p = 1, ratio = 3 and beta is a neutral 1/2.
    """
    c = Fraction(c)
    if c < 1:
        raise ValueError("subroutine factor must be at least 1")
    if c >= 3:
        beta, p = Fraction(1, 2), Fraction(1)
        return Constants(beta, p, _upper_fraction(mixed_bound(c, beta, p)))
    cf = float(c)

    def g(b: float) -> float:
        return best_mix(cf, b)[1]

    grid = [i / 2000 for i in range(1, 2000)]
    i = min(range(len(grid)), key=lambda k: g(grid[k]))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    invphi = (math.sqrt(5) - 1) / 2
    x1, x2 = hi - invphi * (hi - lo), lo + invphi * (hi - lo)
    f1, f2 = g(x1), g(x2)
    while hi - lo > 1e-13:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - invphi * (hi - lo)
            f1 = g(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + invphi * (hi - lo)
            f2 = g(x2)
    b_star = (lo + hi) / 2
    p_star = best_mix(cf, b_star)[0]
    beta = Fraction(b_star).limit_denominator(10**12)
    p = Fraction(p_star).limit_denominator(10**12)
    return Constants(beta, p, _upper_fraction(mixed_bound(c, beta, p)))


def _upper_fraction(x: Fraction) -> Fraction:
    """Smallest multiple of 1e-15 that is >= x."""
    scale = 10**15
    return Fraction(math.ceil(x * scale), scale)


@dataclass
class CombineConfig:
    eps: Fraction = DEFAULT_EPS
    subroutine_factor: Fraction = Fraction(3)
    beta: Fraction | None = None
    p: Fraction | None = None

    def resolved(self) -> "CombineConfig":
        if self.beta is not None and self.p is not None:
            cfg = self
        else:
            k = optimize_constants(self.subroutine_factor)
            cfg = CombineConfig(self.eps, self.subroutine_factor,
                                k.beta if self.beta is None else self.beta,
                                k.p if self.p is None else self.p)
        if not (0 < cfg.beta < 1) or not (0 <= cfg.p <= 1) or cfg.eps <= 0:
            raise ValueError(f"invalid combine configuration {cfg}")
        return cfg


def threshold_round(inst: TreeInstance, lpb: LpbSolution, alpha) -> PcSolution:
    """Connect every terminal whose LP penalty share is at most ``alpha``; pay for the rest."""
    alpha = Fraction(alpha)
    if not 0 <= alpha < 1:
        raise ValueError("alpha must lie in [0, 1)")
    q = [u for u in inst.terminals if lpb.y.get(u, Fraction(0)) <= alpha]
    return solve_nwst_full(inst, q)


@dataclass
class Candidate:
    source: str  # "lmp" or "round"
    k: int | None
    alpha: Fraction | None
    solution: PcSolution

    @property
    def cost(self) -> Fraction:
        return self.solution.total_cost


@dataclass
class CombineResult:
    best: Candidate
    candidates: list[Candidate] = field(default_factory=list)
    config: CombineConfig | None = None

    @property
    def solution(self) -> PcSolution:
        return self.best.solution


def combine(inst: TreeInstance, cfg: CombineConfig | None = None) -> CombineResult:
    """Best of the LMP solution on penalties scaled by 1/3 and every threshold rounding
    of every cost-window LP.  Ties keep the earliest candidate, so the result is
    deterministic.
    """
    cfg = (cfg or CombineConfig()).resolved()
    scaled = inst.with_penalty(tuple(p / 3 for p in inst.penalty))
    lmp = solve_lmp(scaled)
    conn, pen = inst.cost(lmp.bought)
    lmp_sol = PcSolution(lmp.bought, conn, pen, lmp.ledger, lmp.dual_total, lmp.state)
    candidates = [Candidate("lmp", None, None, lmp_sol)]

    cache: dict[VertexSet, PcSolution] = {}
    pool: set = set()
    for k in window_range(inst, cfg.eps):
        lpb = solve_lpb_k(inst, k, cfg.eps, pool)
        if lpb is None:
            continue
        alphas = sorted({Fraction(0)} | {y for y in lpb.y.values() if y <= cfg.beta})
        for alpha in alphas:
            q = tuple(u for u in inst.terminals if lpb.y[u] <= alpha)
            if q not in cache:
                cache[q] = solve_nwst_full(inst, q)
            candidates.append(Candidate("round", k, alpha, cache[q]))
    best = min(candidates, key=lambda cand: cand.cost)
    return CombineResult(best, candidates, cfg)


__all__ = [
    "Candidate",
    "CombineConfig",
    "CombineResult",
    "Constants",
    "best_mix",
    "combine",
    "mixed_bound",
    "optimize_constants",
    "threshold_round",
]
