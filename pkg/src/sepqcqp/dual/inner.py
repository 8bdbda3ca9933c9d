"""Inner minimizations of the Lagrangian: augmented and block-parallel."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .. import linalg
from ..model import Kind

logger = logging.getLogger(__name__)


@dataclass
class InnerResult:
    x: np.ndarray
    iterations: int
    converged: bool
    grad_norm: float


def _penalty_parts(q, x):
    """Values, gradients and Hessians of the per-block penalties ``c(g_i)``."""
    val = 0.0
    grad = np.zeros(q.p)
    hess = np.zeros((q.p, q.p))
    for s, blk in zip(q.slices(), q.blocks):
        xi = x[s]
        g = blk.value(xi)
        if blk.kind is Kind.INEQ and g <= 0.0:
            continue
        dg = 2.0 * (blk.A @ xi + blk.b)
        val += g * g
        grad[s] += 2.0 * g * dg
        hess[s, s] += 2.0 * np.outer(dg, dg) + 4.0 * g * blk.A
    return val, grad, hess


def augmented_argmin(q, lam, rho_aug, x_warm, tol=1e-9, max_iter=200):
    """Minimize ``L(x, lam) + rho_aug * sum_i c(g_i(x_i))`` by damped Newton.

    ``c(u) = u^2`` for equality blocks and ``max(u, 0)^2`` for inequality
    blocks. The Newton system is shifted to positive definiteness when needed
    and each step is backtracked on the objective.

    Returns
    -------
    InnerResult
        ``converged`` is False when the gradient norm did not reach ``tol``.
    """
    if rho_aug <= 0:
        raise ValueError("rho_aug must be positive")
    H, r, c = q.lagrangian_data(lam)
    x = np.array(x_warm, dtype=float)

    def phi(z):
        pv, _, _ = _penalty_parts(q, z)
        return float(z @ H @ z + 2.0 * r @ z + c + rho_aug * pv)

    fx = phi(x)
    gnorm = np.inf
    for it in range(1, max_iter + 1):
        _, pg, ph = _penalty_parts(q, x)
        grad = 2.0 * (H @ x + r) + rho_aug * pg
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= tol:
            return InnerResult(x, it - 1, True, gnorm)
        K = 2.0 * H + rho_aug * ph
        w = np.linalg.eigvalsh(K)
        shift = 0.0
        if w[0] <= 1e-10 * max(1.0, abs(w[-1])):
            shift = -w[0] + 1e-6 * max(1.0, abs(w[-1]))
        step = -np.linalg.solve(K + shift * np.eye(q.p), grad)
        t = 1.0
        while t > 1e-12:
            trial = x + t * step
            ft = phi(trial)
            if ft <= fx + 1e-4 * t * float(grad @ step):
                break
            t *= 0.5
        else:
            break
        x, fx = trial, ft
        if not np.isfinite(fx):
            break
    _, pg, _ = _penalty_parts(q, x)
    gnorm = float(np.linalg.norm(2.0 * (H @ x + r) + rho_aug * pg))
    return InnerResult(x, max_iter, gnorm <= tol, gnorm)


def default_prox(q):
    """Proximal weight making a unit-step block-Jacobi sweep contractive.

    With ``rho >= ||offdiag(A0)|| / 2`` the sweep with step one converges for
    any multiplier at which the Lagrangian is convex.
    """
    off = np.array(q.A0)
    for s in q.slices():
        off[s, s] = 0.0
    nrm = float(np.linalg.norm(off, 2)) if off.size else 0.0
    return 0.5 * nrm + 1e-3 * q.scale()


def flexa_inner(q, lam, x_pivot, prox=None, step=1.0, tol=1e-9, max_iter=10000, threads=1):
    """Parallel block minimization of ``L(., lam)``.

    Each sweep solves, for every block at once, the strongly convex local
    model with the other blocks frozen at the current point,

        X_i = A0[ii] + lam_i A_i + prox_i I
        r_i = b0_i + lam_i b_i + sum_{j != i} A0[ij] x_j - prox_i x_i
        xt_i = -X_i^+ r_i

    and then moves ``x_i <- x_i + step (xt_i - x_i)``. Updates are applied
    after all blocks are computed (bulk-synchronous).

    Parameters
    ----------
    prox : float or array_like, optional
        Proximal weights per block; :func:`default_prox` when omitted.
    step : float
        Relaxation ``0 < step <= 1``.
    threads : int
        Worker threads for the per-block solves.

    Returns
    -------
    InnerResult
    """
    if not 0.0 < step <= 1.0:
        raise ValueError("step must be in (0, 1]")
    lam = np.asarray(lam, dtype=float)
    slices = q.slices()
    if prox is None:
        prox = default_prox(q)
    prox = np.broadcast_to(np.asarray(prox, dtype=float), (q.N,))
    if np.any(prox < 0):
        raise ValueError("proximal weights must be nonnegative")
    solvers = []
    for i, (s, blk) in enumerate(zip(slices, q.blocks)):
        X = q.A0[s, s] + lam[i] * blk.A + prox[i] * np.eye(blk.n)
        if linalg.min_eig(X) < -linalg.eig_tol(X):
            raise ValueError(f"local model of block {i + 1} is not convex at this multiplier")
        inv, _ = linalg.pinv_sym(X)
        solvers.append(inv)
    H, r, _ = q.lagrangian_data(lam)

    def local(i, x):
        s = slices[i]
        ri = q.b0[s] + lam[i] * q.blocks[i].b + q.A0[s, :] @ x - q.A0[s, s] @ x[s] - prox[i] * x[s]
        return -solvers[i] @ ri

    x = np.array(x_pivot, dtype=float)
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        gnorm = float(np.linalg.norm(2.0 * (H @ x + r)))
        for it in range(1, max_iter + 1):
            if gnorm <= tol:
                return InnerResult(x, it - 1, True, gnorm)
            snapshot = x.copy()
            if pool is not None:
                xt = list(pool.map(lambda i: local(i, snapshot), range(q.N)))
            else:
                xt = [local(i, snapshot) for i in range(q.N)]
            for s, xi in zip(slices, xt):
                x[s] = snapshot[s] + step * (xi - snapshot[s])
            gnorm = float(np.linalg.norm(2.0 * (H @ x + r)))
            if not np.isfinite(gnorm):
                break
    finally:
        if pool is not None:
            pool.shutdown()
    return InnerResult(x, max_iter, gnorm <= tol, gnorm)
