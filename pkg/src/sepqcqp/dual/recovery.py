"""Primal recovery from an optimal multiplier.

Every minimizer of ``L(., lam*)`` has the form ``x0 + Z t`` with
``x0 = -H^+ r`` and ``Z`` a nullspace basis of ``H = A0 + sum lam*_i A_i``.
A global solution is a member of that affine set which is feasible and
complementary (``lam*_i g_i = 0``).
"""

import itertools

import numpy as np
from scipy.optimize import least_squares

from .. import linalg
from ..model import Kind, constraint_values

MAX_NULL_DIM = 4


class RecoveryError(RuntimeError):
    """No feasible complementary point was found among the Lagrangian minimizers.

    Several minimizers with only some of them complementary is the degenerate
    multi-solution case of the trust-region literature, which needs a
    dedicated search.
    """


def _requirements(q, lam, lam_tol):
    """Per block: True where ``g_i = 0`` is required, False where ``g_i <= 0``."""
    out = []
    for li, blk in zip(lam, q.blocks):
        out.append(blk.kind is Kind.EQ or li > lam_tol)
    return np.array(out)


def complementarity_residual(q, x, lam):
    g = constraint_values(q, x)
    ineq = q.ineq_mask()
    viol = np.where(ineq, np.maximum(g, 0.0), np.abs(g))
    comp = np.abs(np.asarray(lam) * g)
    return float(max(viol.max(initial=0.0), comp.max(initial=0.0)))


def _residuals(q, x, need_zero):
    g = constraint_values(q, x)
    return np.where(need_zero, g, np.maximum(g, 0.0))


def _acceptable(q, x, lam, kkt_tol, feas_tol):
    g = constraint_values(q, x)
    ineq = q.ineq_mask()
    if np.any(g[ineq] > feas_tol) or np.any(np.abs(g[~ineq]) > feas_tol):
        return False
    return bool(np.all(np.abs(np.asarray(lam) * g) <= kkt_tol))


def _scalar_roots(a, b, c):
    """Real roots of ``a t^2 + 2 b t + c``."""
    if abs(a) < 1e-300:
        return [] if abs(b) < 1e-300 else [-c / (2.0 * b)]
    disc = b * b - a * c
    if disc < 0:
        if disc > -1e-12 * (b * b + abs(a * c)):
            return [-b / a]
        return []
    sq = np.sqrt(disc)
    # numerically stable pair
    qv = -(b + np.copysign(sq, b))
    roots = [qv / a]
    if qv != 0:
        roots.append(c / qv)
    return roots


def _onto_constraints(q, x, need_zero, iters=3):
    """Newton steps along ``grad g_i`` driving the selected ``g_i`` to zero.

    An accepted point may carry a residual of order ``feas_tol`` when
    ``lam`` is only accurate to solver precision; the correction is of that
    order too, so stationarity is unaffected to first order.
    """
    x = np.array(x, dtype=float)
    for s, blk, req in zip(q.slices(), q.blocks, need_zero):
        if not req:
            continue
        xi = x[s]
        for _ in range(iters):
            g = blk.value(xi)
            grad = 2.0 * (blk.A @ xi + blk.b)
            gg = float(grad @ grad)
            if g == 0.0 or gg == 0.0:
                break
            xi = xi - (g / gg) * grad
        x[s] = xi
    return x


def restore_feasibility(q, x):
    """Move equality blocks and violated inequality blocks onto ``g_i = 0``."""
    g = constraint_values(q, x)
    out = _onto_constraints(q, x, ~q.ineq_mask() | (g > 0.0))
    return out if np.all(np.isfinite(out)) else np.array(x, dtype=float)


def _kkt_refine(q, x, lam, need_zero):
    """Solve ``H(lam) x + r(lam) = 0`` and ``g_i(x) = 0`` (required blocks) jointly.

    Only the multipliers of the required blocks move. Used when ``lam`` is
    accurate to solver precision but the nullspace roots of different blocks
    disagree by a small amount.
    """
    act = np.nonzero(need_zero)[0]
    if act.size == 0:
        return None
    slices = q.slices()

    def unpack(z):
        lz = np.array(lam, dtype=float)
        lz[act] = z[q.p:]
        return z[: q.p], lz

    def fun(z):
        xz, lz = unpack(z)
        H, r, _ = q.lagrangian_data(lz)
        return np.concatenate([H @ xz + r, constraint_values(q, xz)[act]])

    def jac(z):
        xz, lz = unpack(z)
        H, _, _ = q.lagrangian_data(lz)
        J = np.zeros((q.p + act.size, q.p + act.size))
        J[: q.p, : q.p] = H
        for k, i in enumerate(act):
            s, blk = slices[i], q.blocks[i]
            grad = blk.A @ xz[s] + blk.b
            J[s, q.p + k] = grad
            J[q.p + k, s] = 2.0 * grad
        return J

    z0 = np.concatenate([x, np.asarray(lam, dtype=float)[act]])
    res = least_squares(fun, z0, jac=jac, xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=100)
    return unpack(res.x)


def recover_primal(q, lam_star, kkt_tol=1e-6, feas_tol=linalg.FEAS_TOL, null_tol=None, seed=0,
                   return_multiplier=False):
    """Recover a global primal solution from ``lam_star``.

    Parameters
    ----------
    q : SeparableQcqp
    lam_star : array_like
        Dual optimal multipliers (``q(lam_star)`` finite).
    kkt_tol, feas_tol : float
        Complementarity and feasibility tolerances of the accepted point.
    null_tol : float, optional
        Eigenvalue threshold for the Hessian nullspace; a looser band is tried
        automatically when the strict one yields no complementary point.

    return_multiplier : bool
        Also return the multiplier the point is complementary to. It differs
        from ``lam_star`` only when a joint refinement of ``(x, lam)`` was
        needed to reconcile nearly consistent nullspace roots.

    Raises
    ------
    RecoveryError
    """
    lam = np.asarray(lam_star, dtype=float)

    def done(x, l=lam):
        xs = _onto_constraints(q, x, _requirements(q, l, lam_tol))
        if np.all(np.isfinite(xs)) and _acceptable(q, xs, l, kkt_tol, feas_tol):
            x = xs
        return (x, l) if return_multiplier else x

    H, r, _ = q.lagrangian_data(lam)
    w, V = linalg.sym_eig(H)
    scale = max(1.0, float(np.abs(w).max(initial=0.0)))
    tols = [linalg.eig_tol(H)] if null_tol is None else [null_tol]
    if null_tol is None:
        tols += [1e-7 * scale, 1e-5 * scale]
    lam_tol = max(kkt_tol, 1e-9) * 1e-2
    need_zero = _requirements(q, lam, lam_tol)
    rng = np.random.default_rng(seed)
    last_dim = 0
    for tol in tols:
        keep = np.abs(w) > tol
        inv = (V[:, keep] / w[keep]) @ V[:, keep].T
        Z = V[:, ~keep]
        x0 = -inv @ r
        if _acceptable(q, x0, lam, kkt_tol, feas_tol):
            return done(x0)
        d = Z.shape[1]
        last_dim = d
        if d == 0:
            continue
        if d > MAX_NULL_DIM:
            raise RecoveryError(
                f"Hessian nullspace has dimension {d} > {MAX_NULL_DIM}; the multi-solution case "
                "needs a dedicated search"
            )
        found, near = _null_sweep(q, x0, Z, lam, need_zero, kkt_tol, feas_tol, rng)
        if found is not None:
            return done(found)
        for xn in near:
            ref = _kkt_refine(q, xn, lam, need_zero)
            if ref is None:
                continue
            xr, lr = ref
            ineq = q.ineq_mask()
            Hr = lagrangian_data_hessian(q, lr)
            if np.any(lr[ineq] < -lam_tol) or linalg.min_eig(Hr) < -linalg.eig_tol(Hr):
                continue
            if np.linalg.norm(lr - lam) > 1e-4 * (1.0 + np.linalg.norm(lam)):
                continue
            if _acceptable(q, xr, lr, kkt_tol, feas_tol):
                return done(xr, lr)
    raise RecoveryError(
        "no feasible complementary point among the Lagrangian minimizers "
        f"(nullspace dimension {last_dim}); this is the degenerate multi-solution case"
    )


def lagrangian_data_hessian(q, lam):
    return q.lagrangian_data(lam)[0]


def _null_sweep(q, x0, Z, lam, need_zero, kkt_tol, feas_tol, rng):
    """Search ``x0 + Z t``; returns ``(point or None, near misses)``."""
    d = Z.shape[1]
    slices = q.slices()
    near = []
    # one-dimensional moves: every constraint is a scalar quadratic in t
    for k in range(d):
        z = Z[:, k]
        cands = [0.0]
        for s, blk in zip(slices, q.blocks):
            zi, xi = z[s], x0[s]
            a = float(zi @ blk.A @ zi)
            b = float(zi @ blk.A @ xi + blk.b @ zi)
            c = blk.value(xi)
            cands += _scalar_roots(a, b, c)
        for t in cands:
            x = x0 + t * z
            if _acceptable(q, x, lam, kkt_tol, feas_tol):
                return x, near
            near.append(x)
    # joint search over the nullspace coefficients
    span = 1.0 + float(np.linalg.norm(x0))
    starts = [np.zeros(d)]
    for k, sgn in itertools.product(range(d), (1.0, -1.0)):
        for mag in (1.0, 3.0):
            t = np.zeros(d)
            t[k] = sgn * mag * span
            starts.append(t)
    starts += [rng.normal(scale=span, size=d) for _ in range(6)]

    def fun(t):
        return _residuals(q, x0 + Z @ t, need_zero)

    for t0 in starts:
        res = least_squares(fun, t0, xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200 * (d + 1))
        x = x0 + Z @ res.x
        if _acceptable(q, x, lam, kkt_tol, feas_tol):
            return x, near
        near.append(x)
    near.sort(key=lambda x: float(np.linalg.norm(_residuals(q, x, need_zero))))
    return None, near[:5]
