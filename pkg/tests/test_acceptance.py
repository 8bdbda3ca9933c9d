"""Acceptance criteria 1-10, each at its stated tolerance.

Every criterion records one pass/fail line (printed in the terminal summary)
before asserting. Solver traces produced along the way are collected for the
weak-duality check of criterion 10.
"""

import functools
import itertools
import time

import numpy as np
import pytest
from scipy.optimize import minimize

from conftest import ACCEPTANCE, lift_instance, random_problem, random_sizes, scalar_problem, trace_instance
from sepqcqp.certify import certify, sign_search
from sepqcqp.congruence import build_congruence
from sepqcqp.dual import SolverConfig, flexa_inner, in_w, lagrangian_argmin, project_W, solve_dual_ascent
from sepqcqp.dual.projection import PROJ_TOL
from sepqcqp.generate import certified_case1
from sepqcqp.linalg import inertia, offdiag_tol
from sepqcqp.model import BlockConstraint, Kind, SeparableQcqp, Status, assemble_extended, evaluate
from sepqcqp.oracle import grid_global_min
from sepqcqp.rank1 import extract_rank1, lift_to_primal, vector_inequality_check
from sepqcqp.rls import RlsInstance, inner_max, inner_standard_form, ols, rls_fit

# (criterion, trace, feasible reference values known from outside the trace)
TRACES = []


def record(k, ok, detail):
    ACCEPTANCE[k] = (bool(ok), detail)
    print(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


# 1. zero gap on certified instances

@functools.lru_cache(maxsize=None)
def run_zero_gap():
    rng = np.random.default_rng(2024)
    rows = []
    start = time.perf_counter()
    for k in range(50):
        p = int(rng.integers(2, 7))
        N = int(rng.integers(1, min(3, p) + 1))
        q = certified_case1(1000 + k, p, N)
        sol = solve_dual_ascent(q, SolverConfig(), certificate=certify(q))
        orc = grid_global_min(q)
        TRACES.append((1, sol.trace, [orc.f_best]))
        rows.append((abs(orc.f_best - sol.dual_value), max(1e-3, 2.0 * orc.pitch_bound), sol.status,
                     sum(b.kind is Kind.EQ for b in q.blocks)))
    return rows, time.perf_counter() - start


def test_criterion_1_zero_gap():
    rows, elapsed = run_zero_gap()
    bad = [i for i, (err, tol, st, _) in enumerate(rows) if err > tol or st is not Status.GLOBAL_CERTIFIED]
    n_eq = sum(r[3] for r in rows)
    worst = max(r[0] for r in rows)
    ok = not bad and elapsed <= 60.0 and n_eq > 0
    record(1, ok, f"50 instances, worst |f_oracle - q*| = {worst:.2e}, {elapsed:.1f} s, "
                  f"{n_eq} equality blocks, failures {bad}")
    assert ok


# 2. trust-region exactness

@functools.lru_cache(maxsize=None)
def run_trust_region():
    q = scalar_problem(-1.0, 0.0, 0.0, 1.0, 0.0, -1.0)
    out = {}
    for method in ("ascent", "augmented", "flexa"):
        sol = solve_dual_ascent(q, SolverConfig(method=method))
        TRACES.append((2, sol.trace, [-1.0]))
        out[method] = sol
    return out


def test_criterion_2_trust_region():
    errs = []
    for method, sol in run_trust_region().items():
        errs.append(max(abs(sol.lambda_star[0] - 1.0), abs(sol.dual_value + 1.0), abs(abs(sol.x_star[0]) - 1.0)))
    ok = max(errs) <= 1e-6
    record(2, ok, f"three methods, worst error in (lam*, q*, |x*|) = {max(errs):.2e}")
    assert ok


# 3. sign search against exhaustive enumeration

def enumerate_signs(F):
    """Vectorized check over all 2^n sign vectors (zero band from the package tolerance)."""
    n = F.shape[0]
    tol = offdiag_tol(F)
    D = np.array(list(itertools.product((-1.0, 1.0), repeat=n)))
    iu = np.triu_indices(n, 1)
    vals = F[iu]
    live = np.abs(vals) > tol
    prod = D[:, iu[0][live]] * D[:, iu[1][live]] * vals[live][None, :]
    return bool(np.any(np.all(prod <= 0.0, axis=1)))


def sign_patterns(rng, count):
    out = []
    for k in range(count):
        n = int(rng.integers(2, 13))
        mags = rng.uniform(0.5, 2.0, size=(n, n))
        if k % 2:
            # balanced up to a few random flips: roughly half satisfiable
            D = rng.choice([-1.0, 1.0], size=n)
            S = -np.outer(D, D) * (rng.random((n, n)) < 0.6)
            S = S * np.where(rng.random((n, n)) < 0.03, -1.0, 1.0)
        else:
            S = rng.choice([-1.0, 0.0, 1.0], size=(n, n), p=[0.3, 0.5, 0.2])
        F = np.triu(S * mags, 1)
        out.append(F + F.T + np.diag(rng.normal(size=n)))
    return out


def test_criterion_3_sign_search():
    rng = np.random.default_rng(3)
    pats = sign_patterns(rng, 200)
    agree = sum((sign_search(F) is not None) == enumerate_signs(F) for F in pats)
    n_sat = sum(enumerate_signs(F) for F in pats)
    ok = agree == 200
    record(3, ok, f"{agree}/200 agree with 2^(p+1) enumeration ({n_sat} satisfiable, p+1 <= 12)")
    assert ok


# 4. inertia preserved by the congruence

def test_criterion_4_inertia():
    rng = np.random.default_rng(4)
    bad = 0
    for k in range(100):
        p = int(rng.integers(2, 8))
        N = int(rng.integers(1, p + 1))
        kinds = [(Kind.INEQ, Kind.EQ)[int(rng.integers(2))] for _ in range(N)]
        q = random_problem(rng, random_sizes(rng, p, N), kinds, singular=bool(k % 2))
        sys = build_congruence(q, alpha=float(rng.normal()))
        ext = assemble_extended(q)
        bad += sum(inertia(Fi) != inertia(Ai) for Fi, Ai in zip(sys.F, ext.Abar))
        bad += inertia(sys.F0) != inertia(ext.Abar0 - sys.alpha * ext.E)
    record(4, bad == 0, f"100 instances, {bad} inertia violations")
    assert bad == 0


# 5. rank-one extraction and the vector inequality

def test_criterion_5_rank1():
    rng = np.random.default_rng(5)
    worst_trace, worst_obj = 0.0, -np.inf
    for k in range(200):
        n = int(rng.integers(3, 9))
        ts, D = trace_instance(rng, n, int(rng.integers(1, 4)), int(rng.integers(1, n + 1)), case2=bool(k % 2))
        y = extract_rank1(ts, D)
        for Fi, psi in zip(ts.F, ts.psi):
            worst_trace = max(worst_trace, abs(y @ Fi @ y - psi) / (1.0 + abs(psi)))
        worst_obj = max(worst_obj, y @ ts.F0 @ y - float(np.sum(ts.F0 * ts.Y)))
    vec = 0
    for _ in range(1000):
        v = rng.normal(size=(int(rng.integers(1, 7)), int(rng.integers(2, 7))))
        i, j = rng.choice(v.shape[1], size=2, replace=False)
        vec += vector_inequality_check(v, int(i), int(j))
    ok = worst_trace <= 1e-10 and worst_obj <= 1e-10 and vec == 1000
    record(5, ok, f"200 Y: trace residual {worst_trace:.1e}, objective excess {worst_obj:.1e}; "
                  f"vector inequality {vec}/1000")
    assert ok


# 6. lift validity

def test_criterion_6_lift():
    rng = np.random.default_rng(6)
    counts = {}
    bad = []
    for k in range(100):
        kind = (Kind.INEQ, Kind.EQ)[k % 2]
        w_zero = (k // 2) % 2 == 1
        q, sys, y, alpha = lift_instance(rng, kind, w_zero)
        try:
            x = lift_to_primal(y, sys, q, alpha)
            f, _, feas = evaluate(q, x)
            good = feas and f < alpha
        except Exception as exc:
            good = False
            bad.append((k, repr(exc)))
        if good:
            counts[(kind, w_zero)] = counts.get((kind, w_zero), 0) + 1
        elif not bad or bad[-1][0] != k:
            bad.append((k, "invalid point"))
    escapes = min(counts.get((Kind.INEQ, True), 0), counts.get((Kind.EQ, True), 0))
    ok = not bad and escapes >= 10
    record(6, ok, f"100 lifts valid {100 - len(bad)}/100, w=0 escapes per kind >= {escapes}")
    assert ok


# 7. FLEXA limit

def strongly_convex(rng, p, N):
    G = rng.normal(size=(p, p))
    A0 = G @ G.T / p + np.eye(p)
    blocks = []
    for n in random_sizes(rng, p, N):
        H = rng.normal(size=(n, n))
        blocks.append(BlockConstraint(H @ H.T / n + 0.5 * np.eye(n), rng.normal(size=n), -1.0,
                                      (Kind.INEQ, Kind.EQ)[int(rng.integers(2))]))
    return SeparableQcqp(A0, rng.normal(size=p), 0.0, tuple(blocks))


def test_criterion_7_flexa():
    rng = np.random.default_rng(7)
    worst = 0.0
    for k in range(50):
        p = int(rng.integers(2, 21))
        N = int(rng.integers(1, min(5, p) + 1))
        q = strongly_convex(rng, p, N)
        lam = np.abs(rng.normal(size=N))
        res = flexa_inner(q, lam, rng.normal(size=p))
        worst = max(worst, float(np.abs(res.x - lagrangian_argmin(q, lam)).max()))
        if k < 5:
            sol = solve_dual_ascent(q, SolverConfig(method="flexa", max_outer=300))
            TRACES.append((7, sol.trace, []))
    ok = worst <= 1e-6
    record(7, ok, f"50 strongly convex instances, worst |x_flexa - x_direct| = {worst:.1e}")
    assert ok


# 8. projection onto W

def _w_member(q, L):
    """Membership of a stack of multipliers ``L`` (shape (K, N)), no tolerance band."""
    H = np.repeat(q.A0[None], len(L), axis=0)
    for i, (s, blk) in enumerate(zip(q.slices(), q.blocks)):
        H[:, s, s] += L[:, i, None, None] * blk.A[None]
    ok = np.linalg.eigvalsh(H)[:, 0] >= 0.0
    mask = q.ineq_mask()
    return ok & np.all(L[:, mask] >= 0.0, axis=1)


def _interior(q, rng):
    mask = q.ineq_mask()

    def score(lam):
        H = q.A0 + sum(l * q.embed_hessian(i) for i, l in enumerate(lam))
        pen = np.minimum(lam[mask], 0.0).sum() if mask.any() else 0.0
        # the small quadratic term keeps the point near the origin when W is unbounded
        return -np.linalg.eigvalsh(H)[0] - 10.0 * pen + 0.05 * float(lam @ lam)

    best = min((minimize(score, rng.uniform(0, 3, size=q.N), method="Nelder-Mead") for _ in range(4)),
               key=lambda r: r.fun)
    H = q.A0 + sum(l * q.embed_hessian(i) for i, l in enumerate(best.x))
    return best.x, float(np.linalg.eigvalsh(H)[0]) if np.all(best.x[mask] > 0) else -1.0


def spectrahedron(rng, N):
    while True:
        p = 3 if N == 1 else 4
        G = rng.normal(size=(p, p))
        A0 = 0.5 * (G + G.T)
        blocks = []
        for i, n in enumerate([3] if N == 1 else [2, 2]):
            Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
            d = rng.uniform(0.3, 2.0, size=n)
            kind = Kind.INEQ
            if i == 1 and rng.random() < 0.5:
                # an indefinite equality block bounds W in that multiplier
                d[0] = -d[0]
                kind = Kind.EQ
            blocks.append(BlockConstraint(Q @ np.diag(d) @ Q.T, np.zeros(n), -1.0, kind))
        q = SeparableQcqp(A0, np.zeros(p), 0.0, tuple(blocks))
        c, margin = _interior(q, rng)
        if margin > 0.05:
            return q, c


def grid_projection_1d(q, lam_temp, guess, pitch=1e-3):
    lo, hi = min(lam_temp[0], guess[0]) - 1.0, max(lam_temp[0], guess[0]) + 1.0
    L = np.arange(lo, hi + pitch, pitch)[:, None]
    inside = L[_w_member(q, L)]
    return inside[np.argmin(np.abs(inside[:, 0] - lam_temp[0]))]


def grid_projection_2d(q, lam_temp, guess, center, spacing=1e-3, window=0.6):
    """Nearest boundary sample on rays from an interior point.

    Boundary points are found by bisection along rays at angular steps small
    enough that neighbouring samples are closer than ``spacing``. The nearest
    sample must not sit at the edge of the angular window; by convexity a
    local minimizer of the distance over ``W`` is global.
    """
    d = guess - center
    R = float(np.linalg.norm(d))
    theta0 = np.arctan2(d[1], d[0])
    step = 0.25 * spacing / max(R, 0.1)
    window = min(window, 1.0 / max(R, 0.1))
    th = theta0 + np.arange(-window, window + step, step)
    U = np.column_stack([np.cos(th), np.sin(th)])
    lo, hi = np.zeros(len(th)), np.full(len(th), 4.0 * R + 4.0)
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        ok = _w_member(q, center[None, :] + mid[:, None] * U)
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    pts = center[None, :] + lo[:, None] * U
    k = int(np.argmin(np.linalg.norm(pts - lam_temp[None, :], axis=1)))
    assert 0 < k < len(th) - 1, "window too narrow"
    return pts[k]


def test_criterion_8_projection():
    rng = np.random.default_rng(8)
    worst, worst_idem, outside = 0.0, 0.0, 0
    for k in range(20):
        N = 1 if k < 8 else 2
        q, c = spectrahedron(rng, N)
        for j in range(3):
            # two of three points are drawn outside W
            for _ in range(500):
                u = rng.normal(size=N)
                lam_temp = c + rng.uniform(0.5, 6.0) * u / np.linalg.norm(u)
                if j == 2 or not in_w(q, lam_temp):
                    break
            lam = project_W(q, lam_temp)
            assert in_w(q, lam)
            if in_w(q, lam_temp):
                ref = lam_temp
            else:
                outside += 1
                ref = grid_projection_1d(q, lam_temp, lam) if N == 1 else grid_projection_2d(q, lam_temp, lam, c)
            worst = max(worst, float(np.linalg.norm(lam - ref)))
            worst_idem = max(worst_idem, float(np.linalg.norm(project_W(q, lam) - lam)))
    ok = worst <= 2e-3 and worst_idem <= PROJ_TOL
    record(8, ok, f"20 spectrahedra, 60 points ({outside} outside W): worst distance to grid projection "
                  f"{worst:.1e}, idempotence {worst_idem:.1e}")
    assert ok


# 9. robust least squares

def closed_form(A, b, radius, x):
    xb = np.append(x, -1.0)
    return float((np.linalg.norm(np.column_stack([A, b]) @ xb) + np.sqrt(radius) @ np.abs(xb)) ** 2)


def grid_worst_case(A, b, radius, x, m=1201):
    """Brute force over the boundary of the column balls (p = 1, one or two rows)."""
    H = np.column_stack([A, b])
    xb = np.append(x, -1.0)
    r = np.sqrt(radius)
    if H.shape[0] == 1:
        d0 = np.linspace(-r[0], r[0], m)[:, None]
        d1 = np.linspace(-r[1], r[1], m)[None, :]
        return float(np.max((H[0] @ xb + d0 * xb[0] + d1 * xb[1]) ** 2))
    th = np.linspace(0.0, 2.0 * np.pi, m, endpoint=False)
    circ = np.column_stack([np.cos(th), np.sin(th)])
    base = H @ xb
    res = base[None, None, :] + xb[0] * r[0] * circ[:, None, :] + xb[1] * r[1] * circ[None, :, :]
    return float(np.max(np.sum(res * res, axis=2)))


@functools.lru_cache(maxsize=None)
def run_rls():
    rng = np.random.default_rng(9)
    certified = 0
    for _ in range(50):
        rows, cols = int(rng.integers(1, 5)), int(rng.integers(1, 4))
        inst = RlsInstance(rng.normal(size=(rows, cols)), rng.normal(size=rows),
                           rng.uniform(0.01, 1.0, size=cols + 1))
        x = rng.normal(size=cols) * (rng.random(cols) < 0.8)
        certified += certify(inner_standard_form(inst, x)).certified
    grid_err = 0.0
    for k in range(10):
        rows = 1 + k % 2
        A, b = rng.normal(size=(rows, 1)), rng.normal(size=rows)
        radius = rng.uniform(0.01, 0.5, size=2)
        x = rng.normal(size=1)
        im = inner_max(RlsInstance(A, b, radius), x)
        TRACES.append((9, im.trace, []))
        grid_err = max(grid_err, abs(im.value - grid_worst_case(A, b, radius, x)))
        assert im.value == pytest.approx(closed_form(A, b, radius, x), rel=1e-6)
    ols_err = 0.0
    for _ in range(5):
        A, b = rng.normal(size=(6, 3)), rng.normal(size=6)
        x, _ = rls_fit(RlsInstance(A, b, 1e-10))
        ols_err = max(ols_err, float(np.abs(x - ols(A, b)).max()))
    return certified, grid_err, ols_err


def test_criterion_9_rls():
    certified, grid_err, ols_err = run_rls()
    ok = certified == 50 and grid_err <= 1e-3 and ols_err <= 1e-4
    record(9, ok, f"certified {certified}/50, inner_max vs grid {grid_err:.1e}, radius->0 fit vs OLS {ols_err:.1e}")
    assert ok


# 10. weak duality along every trace

def test_criterion_10_weak_duality():
    run_zero_gap()
    run_trust_region()
    run_rls()
    if not any(c == 7 for c, _, _ in TRACES):
        test_criterion_7_flexa()
    checked, worst = 0, -np.inf
    for _, trace, refs in TRACES:
        qs = np.array([r["q_lambda"] for r in trace], dtype=float)
        fs = np.array([r["primal_f"] for r in trace], dtype=float)
        feas = list(fs[np.isfinite(fs)]) + list(refs)
        if not feas:
            continue
        qs = qs[np.isfinite(qs)]
        checked += qs.size
        # every dual value against every feasible value of the same problem
        worst = max(worst, float(qs.max(initial=-np.inf) - min(feas)))
    ok = worst <= 1e-8 and checked > 0
    record(10, ok, f"{len(TRACES)} traces, {checked} dual values, max q - f_feasible = {worst:.1e}")
    assert ok
