"""Dual function and Lagrangian minimizers."""

import numpy as np

from .. import linalg


class DualInfeasibleError(ValueError):
    """The Lagrangian is unbounded below at the requested multipliers."""


def _psd_and_range(H, r):
    w, V = linalg.sym_eig(H)
    tol = linalg.eig_tol(H)
    if w.size and w[0] < -tol:
        return None
    keep = np.abs(w) > tol
    inv = (V[:, keep] / w[keep]) @ V[:, keep].T
    null = V[:, ~keep]
    x = -inv @ r
    if null.size:
        resid = float(np.abs(null.T @ r).max())
        if resid > linalg.OFFDIAG_RTOL * 10.0 * (1.0 + float(np.abs(r).max()) + float(np.abs(H).max())):
            return None
    return x, null


def dual_value(q, lam):
    """Evaluate ``q(lam) = min_x L(x, lam)``.

    Returns ``-inf`` when the Lagrangian Hessian is not PSD or its linear term
    leaves the range of the Hessian.
    """
    H, r, c = q.lagrangian_data(lam)
    res = _psd_and_range(H, r)
    if res is None:
        return -np.inf
    x, _ = res
    return float(c + r @ x)


def lagrangian_argmin(q, lam, return_nullspace=False):
    """Minimum-norm minimizer of ``L(., lam)``.

    Parameters
    ----------
    q : SeparableQcqp
    lam : array_like, shape (N,)
    return_nullspace : bool
        Also return an orthonormal basis of the Hessian nullspace; every
        minimizer is ``x + Z t``.

    Raises
    ------
    DualInfeasibleError
        If ``q(lam) = -inf``.
    """
    H, r, _ = q.lagrangian_data(lam)
    res = _psd_and_range(H, r)
    if res is None:
        raise DualInfeasibleError("Lagrangian is unbounded below at this multiplier")
    x, null = res
    if return_nullspace:
        return x, null
    return x


def lagrangian_gradient(q, x, lam):
    H, r, _ = q.lagrangian_data(lam)
    return 2.0 * (H @ x + r)
