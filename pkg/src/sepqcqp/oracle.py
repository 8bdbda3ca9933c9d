"""Brute-force global minimization for small instances, used as ground truth.

Every block is sampled on its own: inequality blocks on a box grid filtered
by ``g_i <= 0``, equality blocks on their level set ``g_i = 0`` (grid all but
one coordinate, solve the scalar quadratic for the last). The objective is
evaluated over the Cartesian product of the block samples, the box is shrunk
around the incumbent for a few rounds, and the best points are polished with
SLSQP. Only points that pass :func:`evaluate` are reported, so ``f_best`` is
always an upper bound on the true minimum.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import linalg
from .model import Kind, evaluate, objective

logger = logging.getLogger(__name__)

GRID_CAP = 10_000_000
AUTO_BUDGET = 400_000
CHUNK = 200_000


class OracleError(RuntimeError):
    pass


@dataclass
class GridSpec:
    """Grid resolution. ``box`` is a ``(p, 2)`` array of bounds or ``None`` for the default."""

    box: np.ndarray = None
    points_per_dim: int = None
    refine_rounds: int = 4
    polish: bool = True

    def __post_init__(self):
        if self.points_per_dim is not None and self.points_per_dim < 3:
            raise ValueError("points_per_dim must be at least 3")
        if self.refine_rounds < 0:
            raise ValueError("refine_rounds must be nonnegative")


@dataclass
class OracleResult:
    x_best: np.ndarray
    f_best: float
    feas_margin: float
    pitch: float
    pitch_bound: float
    n_points: int
    history: list


def default_box(q):
    """Per-block box around ``-A_i^+ b_i``.

    The radius is ``2 (1 + |A_i^+ b_i| + sqrt(|c_i| + 1))``. When ``A_i`` is
    positive definite the block's feasible set is an ellipsoid and its exact
    bounding box is used instead, which keeps the grid pitch matched to the
    set however small it is.
    """
    rows = []
    for blk in q.blocks:
        center, _ = linalg.split_range(blk.A, blk.b)
        radius = 2.0 * (1.0 + np.linalg.norm(center) + np.sqrt(abs(blk.c) + 1.0))
        w = np.linalg.eigvalsh(blk.A)
        if w[0] > linalg.eig_tol(blk.A):
            kappa = max(float(-blk.b @ center) - blk.c, 0.0)
            half = 1.0001 * np.sqrt(kappa * np.diag(np.linalg.inv(blk.A)))
            rows += [(c - h, c + h) for c, h in zip(center, half)]
            continue
        rows += [(c - radius, c + radius) for c in center]
    return np.array(rows)


def auto_points(q):
    return int(max(3, min(201, np.floor(AUTO_BUDGET ** (1.0 / q.p)))))


def _axis(lo, hi, m):
    return np.linspace(lo, hi, m)


def _level_set_samples(blk, box, axes, tol):
    """Points of ``{g = 0}`` in ``box``: grid all coordinates but one, solve for it."""
    n = blk.n
    pts = []
    for k in range(n):
        others = [a for j, a in enumerate(axes) if j != k]
        if others:
            grid = np.array(np.meshgrid(*others, indexing="ij")).reshape(n - 1, -1).T
        else:
            grid = np.zeros((1, 0))
        rest = [j for j in range(n) if j != k]
        Ar = blk.A[np.ix_(rest, rest)]
        # g = a t^2 + 2 (A[k, rest] z + b_k) t + (z^T Ar z + 2 b_rest^T z + c)
        a = blk.A[k, k]
        bb = grid @ blk.A[rest, k] + blk.b[k]
        cc = np.einsum("ij,jk,ik->i", grid, Ar, grid) + 2.0 * grid @ blk.b[rest] + blk.c
        if abs(a) > 1e-14:
            disc = bb * bb - a * cc
            ok = disc >= 0
            sq = np.sqrt(np.where(ok, disc, 0.0))
            roots = [(-bb + sq) / a, (-bb - sq) / a]
        else:
            ok = np.abs(bb) > 1e-14
            roots = [-cc / np.where(ok, 2.0 * bb, 1.0)]
        for t in roots:
            keep = ok & (t >= box[k, 0]) & (t <= box[k, 1])
            full = np.zeros((int(keep.sum()), n))
            full[:, rest] = grid[keep]
            full[:, k] = t[keep]
            pts.append(full)
    if not pts:
        return np.zeros((0, n))
    pts = np.vstack(pts)
    g = np.einsum("ij,jk,ik->i", pts, blk.A, pts) + 2.0 * pts @ blk.b + blk.c
    return pts[np.abs(g) <= tol]


def _block_samples(blk, box, m):
    """Feasible sample points of one block inside ``box`` (shape ``(n, 2)``).

    Inequality blocks get the feasible box-grid points plus level-set points,
    so thin feasible sets and boundary optima are both represented.
    """
    n = blk.n
    axes = [_axis(lo, hi, m) for lo, hi in box]
    tol = 1e-9 * (1.0 + abs(blk.c) + float(np.abs(blk.A).max(initial=0.0)))
    edge = _level_set_samples(blk, box, axes, tol)
    if blk.kind is Kind.EQ:
        return edge
    grid = np.array(np.meshgrid(*axes, indexing="ij")).reshape(n, -1).T
    g = np.einsum("ij,jk,ik->i", grid, blk.A, grid) + 2.0 * grid @ blk.b + blk.c
    center, _ = linalg.split_range(blk.A, blk.b)
    extra = center[None, :] if blk.value(center) <= 0 and np.all((center >= box[:, 0]) & (center <= box[:, 1])) else np.zeros((0, n))
    return np.vstack([grid[g <= 0.0], edge, extra])


def _product_min(q, samples, threads):
    """Index-ordered argmin of ``f`` over the Cartesian product of block samples."""
    counts = [len(s) for s in samples]
    total = int(np.prod(counts, dtype=np.float64))
    if total > GRID_CAP:
        raise OracleError(f"grid has {total} points, above the cap {GRID_CAP}; lower points_per_dim")
    if total == 0:
        return None, np.inf, 0
    slices = q.slices()

    def chunk(start):
        idx = np.arange(start, min(start + CHUNK, total))
        multi = np.unravel_index(idx, counts)
        X = np.empty((idx.size, q.p))
        for s, smp, mi in zip(slices, samples, multi):
            X[:, s] = smp[mi]
        f = np.einsum("ij,jk,ik->i", X, q.A0, X) + 2.0 * X @ q.b0 + q.c0
        k = int(np.argmin(f))
        return f[k], X[k]

    starts = list(range(0, total, CHUNK))
    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(chunk, starts))
    else:
        parts = [chunk(s) for s in starts]
    best_f, best_x = np.inf, None
    for f, x in parts:
        if f < best_f:
            best_f, best_x = float(f), x.copy()
    return best_x, best_f, total


def _polish(q, x0, feas_tol):
    cons = []
    for s, blk in zip(q.slices(), q.blocks):
        def fun(x, s=s, blk=blk):
            return -blk.value(x[s])

        def jac(x, s=s, blk=blk):
            out = np.zeros(q.p)
            out[s] = -2.0 * (blk.A @ x[s] + blk.b)
            return out

        cons.append({"type": "ineq" if blk.kind is Kind.INEQ else "eq", "fun": fun, "jac": jac})
    res = minimize(
        lambda x: objective(q, x),
        x0,
        jac=lambda x: 2.0 * (q.A0 @ x + q.b0),
        constraints=cons,
        method="SLSQP",
        options={"ftol": 1e-14, "maxiter": 500},
    )
    f, _, feas = evaluate(q, res.x, feas_tol)
    return (res.x, f) if feas else None


def _violation(q, x):
    g = np.array([blk.value(x[s]) for s, blk in zip(q.slices(), q.blocks)])
    return float(np.max(np.where(q.ineq_mask(), np.maximum(g, 0.0), np.abs(g)), initial=0.0))


def grid_global_min(q, spec=None, threads=1, feas_tol=linalg.FEAS_TOL):
    """Best feasible point found by gridding, box shrinking and local polish.

    Parameters
    ----------
    q : SeparableQcqp
    spec : GridSpec, optional
    threads : int
        Worker threads for the product evaluation.

    Returns
    -------
    OracleResult
        ``pitch`` is the final grid spacing and ``pitch_bound`` a first-order
        estimate of how far the grid value can sit above the true minimum.

    Raises
    ------
    OracleError
        When no feasible point is found or the grid exceeds the cap.
    """
    spec = spec or GridSpec()
    m = spec.points_per_dim or auto_points(q)
    box = default_box(q) if spec.box is None else np.asarray(spec.box, dtype=float)
    if box.shape != (q.p, 2):
        raise ValueError(f"box must have shape ({q.p}, 2)")
    if float(m) ** max(q.sizes) > GRID_CAP:
        raise OracleError(f"a block grid has {m}^{max(q.sizes)} points, above the cap {GRID_CAP}; lower points_per_dim")
    slices = q.slices()
    total_points = 0
    best_x, best_f = None, np.inf
    history = []
    pitch = float(np.max(box[:, 1] - box[:, 0])) / (m - 1)
    for rnd in range(spec.refine_rounds + 1):
        samples = [_block_samples(blk, box[s], m) for s, blk in zip(slices, q.blocks)]
        x, f, n = _product_min(q, samples, threads)
        total_points += n
        if x is not None and f < best_f:
            fx, _, feas = evaluate(q, x, feas_tol)
            if feas:
                best_x, best_f = x, fx
        history.append(best_f)
        if best_x is None:
            if rnd == 0:
                raise OracleError("no feasible grid point; the instance may be infeasible at this resolution")
            break
        width = (box[:, 1] - box[:, 0]) / (m - 1)
        pitch = float(width.max())
        if rnd < spec.refine_rounds:
            half = 2.0 * width
            box = np.column_stack([best_x - half, best_x + half])
    if spec.polish and best_x is not None:
        pol = _polish(q, best_x, feas_tol)
        if pol is not None and pol[1] < best_f:
            best_x, best_f = pol
            history.append(best_f)
    grad = 2.0 * (q.A0 @ best_x + q.b0)
    pitch_bound = float(np.linalg.norm(grad)) * pitch * np.sqrt(q.p) + float(np.linalg.norm(q.A0, 2)) * q.p * pitch**2
    return OracleResult(
        x_best=best_x,
        f_best=float(best_f),
        feas_margin=_violation(q, best_x),
        pitch=pitch,
        pitch_bound=pitch_bound,
        n_points=total_points,
        history=history,
    )


def duality_gap_report(q, cfg=None, spec=None, threads=1):
    """Certificate, dual solve and grid oracle side by side.

    Returns
    -------
    dict
        ``f_oracle``, ``q_star``, ``gap = f_oracle - q_star``, ``certified``,
        the solver status and the oracle's pitch bound.
    """
    from .certify import certify
    from .dual import SolverConfig, solve_dual_ascent

    cfg = cfg or SolverConfig()
    cert = certify(q)
    sol = solve_dual_ascent(q, cfg, certificate=cert)
    orc = grid_global_min(q, spec, threads=threads)
    return {
        "f_oracle": orc.f_best,
        "q_star": float(sol.dual_value),
        "gap": orc.f_best - float(sol.dual_value),
        "certified": cert.certified,
        "status": sol.status.value,
        "primal_value": float(sol.primal_value),
        "pitch": orc.pitch,
        "pitch_bound": orc.pitch_bound,
        "x_oracle": orc.x_best.tolist(),
        "x_star": np.asarray(sol.x_star).tolist(),
        "lambda_star": np.asarray(sol.lambda_star).tolist(),
        "reasons": list(cert.reasons),
    }
