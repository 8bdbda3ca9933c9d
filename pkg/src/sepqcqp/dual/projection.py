"""The dual feasible set ``W = {lam in Gamma : A0 + sum lam_i A_i >= 0}``.

``W`` is a spectrahedron intersected with the sign constraints of the
inequality multipliers. Projection uses outer polyhedral approximations:
every unit vector ``v`` gives a valid cut ``v^T (A0 + sum lam_i A_i) v >= 0``,
with ``v`` taken from the eigenvectors of the most negative eigenvalues
(the usual supergradient of the minimum eigenvalue). The Euclidean
projection onto the current polyhedron is a least-distance program, solved
exactly through NNLS.
"""

import logging

import numpy as np
from scipy.linalg import eigh
from scipy.optimize import lsq_linear, minimize_scalar, nnls

from .. import linalg

logger = logging.getLogger(__name__)

PROJ_TOL = 1e-7


class EmptySpectrahedronError(RuntimeError):
    """No multiplier makes the Lagrangian Hessian PSD."""


class ProjectionError(RuntimeError):
    pass


def hessian_terms(q):
    """Objective Hessian and zero-padded constraint Hessians."""
    return q.A0, [q.embed_hessian(i) for i in range(q.N)]


def lagrangian_hessian(q, lam):
    H = np.array(q.A0)
    for li, s, blk in zip(np.asarray(lam, dtype=float), q.slices(), q.blocks):
        H[s, s] += li * blk.A
    return H


def common_complement(q):
    """Orthonormal basis of the complement of the common nullspace.

    Directions annihilated by ``A0`` and every ``A_i`` keep a zero eigenvalue
    for every multiplier, so strictness is measured on the complement.
    """
    A0, As = hessian_terms(q)
    stacked = np.vstack([A0] + As)
    _, s, vt = np.linalg.svd(stacked)
    tol = linalg.rank_tol(float(s.max(initial=0.0)), stacked.shape)
    rank = int(np.sum(s > max(tol, 1e-300)))
    return vt[:rank].T


def reduced_min_eig(q, lam, U=None):
    H = lagrangian_hessian(q, lam)
    if U is not None:
        if U.shape[1] == 0:
            return np.inf
        H = U.T @ H @ U
    return linalg.min_eig(H)


def in_gamma(q, lam, tol=0.0):
    lam = np.asarray(lam, dtype=float)
    return bool(np.all(lam[q.ineq_mask()] >= -tol))


def clip_gamma(q, lam):
    lam = np.array(lam, dtype=float)
    mask = q.ineq_mask()
    lam[mask] = np.maximum(lam[mask], 0.0)
    return lam


def w_tol(q, lam):
    return linalg.eig_tol(lagrangian_hessian(q, lam))


def in_w(q, lam):
    """Membership in ``W`` up to the eigenvalue zero band."""
    if not in_gamma(q, lam):
        return False
    H = lagrangian_hessian(q, lam)
    return linalg.min_eig(H) >= -linalg.eig_tol(H)


def strict_feasibility_probe(q, seed=0, max_doublings=20, sweeps=30, restarts=8):
    """Search for ``lam in Gamma`` with ``A0 + sum lam_i A_i`` positive definite.

    Coordinate ascent on the (concave) minimum eigenvalue over growing boxes,
    started from zero and from random points. A negative answer is
    inconclusive.

    Returns
    -------
    found : bool
    lam : numpy.ndarray or None
    """
    U = common_complement(q)
    if U.shape[1] == 0:
        return True, np.zeros(q.N)
    mask = q.ineq_mask()
    rng = np.random.default_rng(seed)

    def score(lam):
        return reduced_min_eig(q, lam, U)

    def thresh(lam):
        return linalg.eig_tol(lagrangian_hessian(q, lam))

    lam0 = np.zeros(q.N)
    if score(lam0) > thresh(lam0):
        return True, lam0
    # cheap ray first: push every multiplier toward the sign that makes its block convex
    u = np.array([1.0 if (m or linalg.min_eig(blk.A) >= -linalg.eig_tol(blk.A)) else -1.0
                  for m, blk in zip(mask, q.blocks)])
    for k in range(max_doublings + 1):
        ray = (2.0 ** k) * u
        if score(ray) > thresh(ray):
            return True, ray

    def ascend(lam, R):
        lo = np.where(mask, 0.0, -R)
        hi = np.full(q.N, R)
        best = score(lam)
        for _ in range(sweeps):
            prev = best
            for i in range(q.N):
                def neg(t, i=i):
                    trial = lam.copy()
                    trial[i] = t
                    return -score(trial)

                res = minimize_scalar(neg, bounds=(lo[i], hi[i]), method="bounded",
                                      options={"xatol": 1e-10 * max(1.0, R)})
                cands = [(res.fun, res.x), (neg(lo[i]), lo[i]), (neg(hi[i]), hi[i])]
                val, arg = min(cands, key=lambda c: c[0])
                if -val > best:
                    lam[i] = arg
                    best = -val
                if best > thresh(lam):
                    return lam, best
            if best - prev <= 1e-12 * max(1.0, abs(best)):
                break
        return lam, best

    for k in range(max_doublings + 1):
        R = float(2 ** k)
        starts = [lam0.copy()]
        for _ in range(restarts if k < 4 else 2):
            s = rng.uniform(-R, R, q.N)
            s[mask] = np.abs(s[mask])
            starts.append(s)
        for start in starts:
            lam, best = ascend(start, R)
            if best > thresh(lam):
                return True, lam
    return False, None


def _nnls_optimal(E, f, u, tol=1e-10):
    """KKT check for ``min ||E u - f||, u >= 0``: zero gradient on the support, nonnegative off it."""
    grad = E.T @ (E @ u - f)
    scale = tol * (1.0 + float(np.abs(E).max(initial=0.0)) ** 2 * (1.0 + float(np.abs(u).sum())))
    return bool(np.all(grad >= -scale) and np.all(np.abs(grad[u > 0]) <= scale))


def _ldp(G, h, center):
    """Euclidean projection of ``center`` onto ``{lam : G lam >= h}``.

    Least-distance programming through non-negative least squares.
    Returns ``None`` if the polyhedron is empty.
    """
    hs = h - G @ center
    n = G.shape[1]
    E = np.vstack([G.T, hs[None, :]])
    f = np.zeros(n + 1)
    f[n] = 1.0
    u, _ = nnls(E, f, maxiter=50 * E.shape[1] + 100)
    if not _nnls_optimal(E, f, u):
        # some scipy releases return non-stationary NNLS points; BVLS is slower but reliable
        u = lsq_linear(E, f, bounds=(0.0, np.inf), method="bvls", tol=1e-14).x
    r = E @ u - f
    if abs(r[n]) < 1e-14 or np.linalg.norm(r) < 1e-12:
        return None
    z = -r[:n] / r[n]
    return center + z


def _cuts_from(q, lam, level):
    """Cuts ``g^T lam >= h`` from eigenvectors with eigenvalue below ``level``."""
    H = lagrangian_hessian(q, lam)
    w, V = linalg.sym_eig(H)
    rows, rhs = [], []
    idx = np.nonzero(w < level)[0]
    if idx.size == 0:
        idx = np.array([0])
    for k in idx[: max(3, q.N)]:
        v = V[:, k]
        g = np.array([v[s] @ blk.A @ v[s] for s, blk in zip(q.slices(), q.blocks)])
        hval = -float(v @ q.A0 @ v)
        nrm = np.linalg.norm(g)
        if nrm < 1e-14:
            continue
        rows.append(g / nrm)
        rhs.append(hval / nrm)
    return rows, rhs


def _boundary_point(q, inner, outer, U, iters=200):
    """Last feasible point on the segment from an interior point outward.

    With ``H(t) = H_in + t (H_out - H_in)`` and ``H_in`` positive definite,
    the first ``t`` where ``H(t)`` turns singular is ``-1 / mu_min`` for the
    smallest generalized eigenvalue ``mu_min`` of ``(H_out - H_in, H_in)``.
    Bisection on the minimum eigenvalue is the fallback.
    """
    def f(t):
        return reduced_min_eig(q, inner + t * (outer - inner), U)

    if f(1.0) >= 0.0:
        return outer
    H_in = lagrangian_hessian(q, inner)
    H_d = lagrangian_hessian(q, outer) - H_in
    if U is not None:
        H_in, H_d = U.T @ H_in @ U, U.T @ H_d @ U
    hi = 1.0
    try:
        mu = float(eigh(linalg.symmetrize(H_d), linalg.symmetrize(H_in), eigvals_only=True)[0])
        if mu < 0.0:
            t = min(1.0, -1.0 / mu)
            # step back by rounding until the point is feasible
            for shrink in (1.0, 1.0 - 1e-12, 1.0 - 1e-10, 1.0 - 1e-8):
                if f(t * shrink) >= 0.0:
                    return inner + t * shrink * (outer - inner)
            hi = t
    except (np.linalg.LinAlgError, ValueError):
        pass
    lo = 0.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if f(mid) >= 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-13:
            break
    return inner + lo * (outer - inner)


def project_W(q, lam_temp, proj_tol=PROJ_TOL, interior=None, max_iter=500):
    """Euclidean projection of ``lam_temp`` onto ``W``.

    Parameters
    ----------
    q : SeparableQcqp
    lam_temp : array_like, shape (N,)
    proj_tol : float
        Stop when the outer approximation's projection is within this
        distance of a feasible point.
    interior : array_like, optional
        A point of ``W`` with a positive definite (reduced) Hessian. Found with
        :func:`strict_feasibility_probe` when omitted.

    Raises
    ------
    EmptySpectrahedronError
        When the cuts prove that ``W`` is empty.
    """
    lam_temp = np.asarray(lam_temp, dtype=float)
    if in_w(q, lam_temp):
        return lam_temp.copy()
    N = q.N
    mask = q.ineq_mask()
    rows = [np.eye(N)[i] for i in range(N) if mask[i]]
    rhs = [0.0] * len(rows)
    U = common_complement(q)
    if interior is None:
        found, interior = strict_feasibility_probe(q)
        if not found:
            interior = None
    lam = clip_gamma(q, lam_temp)
    best = None
    for it in range(max_iter):
        H = lagrangian_hessian(q, lam)
        tol = linalg.eig_tol(H)
        if linalg.min_eig(H) >= -tol:
            return lam
        r, h = _cuts_from(q, lam, -tol)
        rows += r
        rhs += h
        if interior is not None:
            b = _boundary_point(q, np.asarray(interior, dtype=float), lam, U)
            best = b
            if np.linalg.norm(lam - b) <= proj_tol:
                return b
            r, h = _cuts_from(q, b, linalg.eig_tol(lagrangian_hessian(q, b)) * 10.0)
            rows += r
            rhs += h
        G = np.array(rows)
        new = _ldp(G, np.array(rhs), lam_temp)
        if new is None:
            raise EmptySpectrahedronError(
                "W is empty: no multiplier makes A0 + sum lam_i A_i positive semidefinite; "
                "the instance violates the existence conditions"
            )
        if np.linalg.norm(new - lam_temp) > 1e8 * (1.0 + np.linalg.norm(lam_temp)):
            raise EmptySpectrahedronError("projection drifted without bound; W appears to be empty")
        lam = clip_gamma(q, new)
    if best is not None:
        logger.warning("project_W stopped after %d cuts; returning the last feasible boundary point", max_iter)
        return best
    raise ProjectionError("projection onto W did not converge")
