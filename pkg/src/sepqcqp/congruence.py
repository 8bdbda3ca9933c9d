"""Block congruence transform that (almost) diagonalizes the constraints.

For each block ``A_i = Q_i diag(d_i) Q_i^T`` we take ``P_i = Q_i |d_i|^{-1/2}``
(unit scaling on zero eigenvalues) and ``p_i = -A_i^+ b_i``. With ``P`` the
block matrix ``[[blkdiag(P_i), (p_i)], [0, 1]]`` the constraint forms
``F_i = P^T Abar_i P`` are diagonal whenever every ``b_i`` is in the range of
``A_i``; otherwise entries survive only in the last row/column at coordinates
where ``F_i`` has a zero diagonal (the index set ``M``).
"""

import enum
from dataclasses import dataclass

import numpy as np

from . import linalg
from .model import assemble_extended


class CongruenceCase(str, enum.Enum):
    DIAGONALIZABLE = "Diagonalizable"
    NOT_DIAGONALIZABLE = "NotDiagonalizable"


@dataclass(frozen=True, eq=False)
class CongruenceSystem:
    P: np.ndarray
    P_inv: np.ndarray
    F0: np.ndarray
    F: tuple
    case: CongruenceCase
    M: frozenset
    alpha: float
    block_slices: tuple

    @property
    def p(self):
        return self.P.shape[0] - 1


def _block_transform(A, b):
    w, Q = linalg.sym_eig(A)
    tol = max(linalg.rank_tol(float(np.abs(w).max(initial=0.0)), A.shape), 1e-300)
    scale = np.ones_like(w)
    nz = np.abs(w) > tol
    scale[nz] = 1.0 / np.sqrt(np.abs(w[nz]))
    Pi = Q * scale
    pi, _ = linalg.split_range(A, b)
    return Pi, pi


def build_congruence(ext_or_q, alpha=0.0, slices=None):
    """Build ``P``, the transformed matrices and the case classification.

    Parameters
    ----------
    ext_or_q : SeparableQcqp
        Problem instance. (Extended matrices are recomputed from it.)
    alpha : float
        Level shift, ``F0 = P^T (Abar0 - alpha E) P``.

    Returns
    -------
    CongruenceSystem
    """
    q = ext_or_q
    if not np.isfinite(alpha):
        raise ValueError("alpha must be finite")
    ext = assemble_extended(q)
    p = q.p
    P = np.zeros((p + 1, p + 1))
    P[p, p] = 1.0
    for s, blk in zip(q.slices(), q.blocks):
        Pi, pi = _block_transform(blk.A, blk.b)
        P[s, s] = Pi
        P[s, p] = pi
    # P is block upper-triangular with invertible diagonal blocks
    P_inv = np.linalg.inv(P)
    assert np.allclose(P @ P_inv, np.eye(p + 1), atol=1e-8 * max(1.0, np.abs(P).max()) * np.abs(P_inv).max())
    F = tuple(linalg.symmetrize(P.T @ Ab @ P) for Ab in ext.Abar)
    F0 = linalg.symmetrize(P.T @ (ext.Abar0 - alpha * ext.E) @ P)

    M = set()
    for s, Ab, Fi in zip(q.slices(), ext.Abar, F):
        tol = linalg.offdiag_tol(Ab)
        col = np.abs(Fi[s, p])
        for j in np.nonzero(col > tol)[0]:
            M.add(int(s.start + j))
    case = CongruenceCase.DIAGONALIZABLE if not M else CongruenceCase.NOT_DIAGONALIZABLE
    return CongruenceSystem(
        P=P,
        P_inv=P_inv,
        F0=F0,
        F=F,
        case=case,
        M=frozenset(M),
        alpha=float(alpha),
        block_slices=tuple(q.slices()),
    )


def offdiag_mass(m):
    m = np.asarray(m, dtype=float)
    return float(np.abs(m - np.diag(np.diag(m))).max(initial=0.0))


inertia = linalg.inertia
