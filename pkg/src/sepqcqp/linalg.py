"""Small symmetric linear-algebra helpers shared by every module.

All thresholds used to decide "zero", "PSD" or "in range" live here so that
the certificate, the dual solver and the tests agree on them.
"""

import numpy as np

#: relative tolerance below which a symmetric input is silently symmetrized
SYMMETRY_REJECT = 1e-8
#: absolute tolerance on constraint values
FEAS_TOL = 1e-8
#: relative singular-value cutoff for rank and range decisions
RANK_RTOL = 1e-12
#: relative eigenvalue band treated as zero
EIG_RTOL = 1e-9
#: relative threshold below which an off-diagonal entry is treated as zero
OFFDIAG_RTOL = 1e-9


def symmetrize(a):
    a = np.asarray(a, dtype=float)
    return 0.5 * (a + a.T)


def eig_tol(m):
    """Zero band for the eigenvalues of ``m``."""
    m = np.asarray(m, dtype=float)
    if m.size == 0:
        return EIG_RTOL
    return EIG_RTOL * max(1.0, float(np.abs(m).max()) * m.shape[0])


def offdiag_tol(m):
    """Threshold under which an entry of ``m`` counts as zero.

    Uses ``1e-9 * (1 + ||m||_inf)`` with the induced infinity norm.
    """
    m = np.asarray(m, dtype=float)
    if m.size == 0:
        return OFFDIAG_RTOL
    return OFFDIAG_RTOL * (1.0 + float(np.abs(m).sum(axis=1).max()))


def rank_tol(sigma_max, shape):
    return max(shape) * sigma_max * RANK_RTOL


def sym_eig(m):
    """Eigen-decomposition of a symmetric matrix, eigenvalues ascending."""
    w, v = np.linalg.eigh(symmetrize(m))
    return w, v


def min_eig(m):
    m = np.asarray(m, dtype=float)
    if m.size == 0:
        return np.inf
    return float(np.linalg.eigvalsh(symmetrize(m))[0])


def pinv_sym(m, tol=None):
    """Moore-Penrose pseudo-inverse of a symmetric matrix.

    Returns the pseudo-inverse together with an orthonormal basis of the
    numerical nullspace (eigenvalues with ``|w| <= tol``).
    """
    w, v = sym_eig(m)
    if tol is None:
        scale = float(np.abs(w).max()) if w.size else 0.0
        tol = max(rank_tol(scale, m.shape), 1e-300)
    keep = np.abs(w) > tol
    inv = (v[:, keep] / w[keep]) @ v[:, keep].T
    return inv, v[:, ~keep]


def split_range(a, b):
    """Split ``b`` into its range(a) and null(a) components.

    Returns ``(x, b_null)`` where ``x = -pinv(a) b`` and ``b_null`` is the
    part of ``b`` orthogonal to the range of the symmetric matrix ``a``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    inv, null = pinv_sym(a)
    x = -inv @ b
    b_null = null @ (null.T @ b) if null.size else np.zeros_like(b)
    return x, b_null


def in_range(a, b):
    """Whether ``b`` lies in the range of the symmetric matrix ``a``."""
    _, b_null = split_range(a, b)
    return float(np.abs(b_null).max(initial=0.0)) <= OFFDIAG_RTOL * (
        1.0 + float(np.abs(a).sum(axis=1).max(initial=0.0)) + float(np.abs(b).max(initial=0.0))
    )


def inertia(m, tol=None):
    """Count positive, negative and zero eigenvalues of a symmetric matrix.

    Parameters
    ----------
    m : array_like, shape (n, n)
        Symmetric matrix.
    tol : float, optional
        Half-width of the zero band. Defaults to :func:`eig_tol`.

    Returns
    -------
    tuple of int
        ``(n_pos, n_neg, n_zero)``.
    """
    m = symmetrize(m)
    if tol is None:
        tol = eig_tol(m)
    w = np.linalg.eigvalsh(m)
    n_pos = int(np.sum(w > tol))
    n_neg = int(np.sum(w < -tol))
    return n_pos, n_neg, int(w.size - n_pos - n_neg)


def psd_sqrt_factor(y):
    """Factor a (numerically) PSD matrix as ``Y = V V^T``.

    Tiny negative eigenvalues are clipped to zero. Columns of ``V`` are the
    scaled eigenvectors, so ``V[:, r]`` is the r-th vector of the factor.
    """
    w, q = sym_eig(y)
    w = np.clip(w, 0.0, None)
    keep = w > 0
    return q[:, keep] * np.sqrt(w[keep])
