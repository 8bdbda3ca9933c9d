"""Rank-one extraction from a PSD solution of the trace system, and the lift
of the resulting vector back to a strictly better primal point.

Given ``Y >= 0`` with ``trace(F_i Y) = psi_i`` and a sign vector ``D`` for
which ``D F0 D`` is a Z-matrix, the vector

    y_j = D_j sqrt(Y_jj)

keeps every ``y^T F_i y = psi_i`` (the ``F_i`` are diagonal) and can only
lower ``y^T F0 y``. In the non-diagonalizable case the coordinates in ``M``
are instead matched to the last column of ``Y``.
"""

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .model import Kind, evaluate, slater_check


class DegenerateDenominatorError(ValueError):
    """Case-2 extraction with ``Y[p, p] == 0``; the formula is undefined."""


class LiftError(RuntimeError):
    pass


@dataclass
class TraceSystem:
    """``Y`` together with the transformed data and the trace values ``psi``."""

    Y: np.ndarray
    F0: np.ndarray
    F: tuple
    psi: np.ndarray = None
    M: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        self.Y = linalg.symmetrize(np.asarray(self.Y, dtype=float))
        self.F0 = np.asarray(self.F0, dtype=float)
        self.F = tuple(np.asarray(f, dtype=float) for f in self.F)
        self.M = frozenset(int(m) for m in self.M)
        n = self.Y.shape[0]
        if self.F0.shape != (n, n) or any(f.shape != (n, n) for f in self.F):
            raise ValueError("Y, F0 and F must share one square shape")
        if linalg.min_eig(self.Y) < -linalg.eig_tol(self.Y):
            raise ValueError("Y is not positive semidefinite")
        traces = np.array([float(np.sum(f * self.Y)) for f in self.F])
        if self.psi is None:
            self.psi = traces
        else:
            self.psi = np.asarray(self.psi, dtype=float)
            bad = np.abs(traces - self.psi) > 1e-9 * (1.0 + np.abs(self.psi))
            if np.any(bad):
                raise ValueError(f"trace(F_i Y) != psi_i at blocks {list(np.nonzero(bad)[0] + 1)}")


def extract_rank1(ts, D):
    """Rank-one vector ``y`` with ``y^T F_i y = psi_i`` and ``y^T F0 y <= trace(F0 Y)``.

    Parameters
    ----------
    ts : TraceSystem
    D : array_like of +-1
        Sign vector satisfying the sign condition on ``F0`` (off ``M``).

    Returns
    -------
    numpy.ndarray, shape (p + 1,)

    Raises
    ------
    DegenerateDenominatorError
        In the non-diagonalizable case when ``Y[p, p]`` vanishes.
    """
    D = np.asarray(D, dtype=float)
    n = ts.Y.shape[0]
    if D.shape != (n,) or not np.all(np.abs(D) == 1.0):
        raise ValueError("D must be a +-1 vector of length p + 1")
    V = linalg.psd_sqrt_factor(ts.Y)
    # y_j^2 = sum_r v_rj^2 = Y_jj after clipping tiny negative eigenvalues
    y = D * np.sqrt(np.sum(V * V, axis=1))
    if ts.M:
        last = n - 1
        denom = float(V[last] @ V[last])
        if denom <= 1e-300:
            raise DegenerateDenominatorError(
                "Y has no mass on the last coordinate; the case-2 extraction divides by it"
            )
        root = np.sqrt(denom)
        y[last] = root
        for m in ts.M:
            y[m] = float(V[last] @ V[m]) / root
    return y


def vector_inequality_check(v_rows, i, j):
    """Check ``sqrt(sum_{r,s} v_ri^2 v_sj^2) >= sum_r v_ri v_rj`` for columns ``i, j``."""
    v = np.asarray(v_rows, dtype=float)
    lhs = np.sqrt(float(np.sum(v[:, i] ** 2)) * float(np.sum(v[:, j] ** 2)))
    rhs = float(v[:, i] @ v[:, j])
    return bool(lhs >= rhs - 1e-12)


def _block_quadratic(F, s_blk, p):
    """``(Q, l, c)`` with ``g(s) = s^T Q s + 2 l^T s + c`` on one block."""
    return F[s_blk, s_blk], F[s_blk, p], float(F[p, p])


def _to_x(sys, s):
    z = np.append(s, 1.0)
    return (sys.P @ z)[:-1]


def _witness_candidates(q, sys, i, v_i, reports):
    """Directions in congruence coordinates to combine with ``v`` on block ``i``."""
    s_blk = sys.block_slices[i]
    n = s_blk.stop - s_blk.start
    Pi = sys.P[s_blk, s_blk]
    pi = sys.P[s_blk, -1]
    cands = []
    rep = reports[i]
    for wit in (rep.witness_neg, rep.witness_pos):
        if wit is not None:
            cands.append(np.linalg.solve(Pi, wit - pi))
    Lv = sys.F[i][s_blk, s_blk] @ v_i
    if np.linalg.norm(Lv) > 0:
        cands.append(Lv / np.linalg.norm(Lv))
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        cands.append(e)
    out = []
    for c in cands:
        out += [c, -c]
    return out


def _escape(q, sys, F0, v, alpha, feas_tol, schedule):
    p = q.p
    reports = slater_check(q)
    cand = [_witness_candidates(q, sys, i, v[s], reports) for i, s in enumerate(sys.block_slices)]
    for tv in schedule:
        s = tv * v
        ok = True
        for i, (s_blk, blk) in enumerate(zip(sys.block_slices, q.blocks)):
            Q, l, c = _block_quadratic(sys.F[i], s_blk, p)
            base = tv * v[s_blk]
            best = None
            for sh in cand[i]:
                a = float(sh @ Q @ sh)
                b = float(sh @ Q @ base + l @ sh)
                c0 = float(base @ Q @ base + 2.0 * l @ base + c)
                if blk.kind is Kind.INEQ:
                    ts = [0.0, 1.0] if c0 <= 0 else [1.0]
                    ts += [t for t in _quad_roots(a, b, c0)]
                    ts = [t for t in ts if a * t * t + 2 * b * t + c0 <= 0.0]
                    if c0 > 0:
                        # move past the root into the strictly feasible side
                        ts = [1.01 * t for t in ts if a * (1.01 * t) ** 2 + 2 * b * 1.01 * t + c0 <= 0.0] or ts
                else:
                    ts = _quad_roots(a, b, c0)
                for t in ts:
                    if best is None or abs(t) < abs(best[0]):
                        best = (t, sh)
            if best is None:
                ok = False
                break
            s[s_blk] = base + best[0] * best[1]
        if not ok:
            continue
        z = np.append(s, 1.0)
        if float(z @ F0 @ z) >= 0.0:
            continue
        x = _to_x(sys, s)
        f, _, feas = evaluate(q, x, feas_tol)
        if feas and f < alpha:
            return x
    return None


def _quad_roots(a, b, c):
    """Real roots of ``a t^2 + 2 b t + c``."""
    if abs(a) <= 1e-14 * (abs(b) + abs(c) + 1e-300):
        return [] if b == 0 else [-c / (2.0 * b)]
    disc = b * b - a * c
    if disc < 0:
        return []
    sq = np.sqrt(disc)
    qv = -(b + np.copysign(sq, b))
    roots = [qv / a]
    if qv != 0:
        roots.append(c / qv)
    return roots


def lift_to_primal(y, sys, q, alpha, feas_tol=linalg.FEAS_TOL, w_tol=1e-9):
    """Map ``y`` with ``y^T F0 y < 0`` and feasible block forms to ``x`` with ``f(x) < alpha``.

    Parameters
    ----------
    y : array_like, shape (p + 1,)
    sys : CongruenceSystem
    q : SeparableQcqp
    alpha : float
        Level; ``F0`` is taken at this level regardless of ``sys.alpha``.

    Returns
    -------
    numpy.ndarray
        A feasible ``x`` (within ``feas_tol``) with ``f(x) < alpha``.

    Raises
    ------
    LiftError
        When ``y`` does not satisfy the preconditions, or (in the
        diagonalizable case with ``w = 0``) the escape construction does not
        produce a valid point within the ``t_v`` schedule.
    """
    y = np.asarray(y, dtype=float)
    p = q.p
    if y.shape != (p + 1,):
        raise ValueError(f"y has shape {y.shape}, expected ({p + 1},)")
    F0 = np.array(sys.F0)
    F0[p, p] -= alpha - sys.alpha
    scale = 1.0 + float(y @ y)
    if not float(y @ F0 @ y) < 0.0:
        raise LiftError("precondition y^T F0 y < 0 fails")
    for i, blk in enumerate(q.blocks):
        gi = float(y @ sys.F[i] @ y)
        if blk.kind is Kind.INEQ and gi > feas_tol * scale:
            raise LiftError(f"precondition y^T F_{i + 1} y <= 0 fails ({gi:.3g})")
        if blk.kind is Kind.EQ and abs(gi) > feas_tol * scale:
            raise LiftError(f"precondition y^T F_{i + 1} y = 0 fails ({gi:.3g})")
    v, w = y[:p], y[p]
    if abs(w) > w_tol * np.sqrt(scale):
        x = _to_x(sys, v / w)
        f, g, feas = evaluate(q, x, feas_tol)
        if not (feas and f < alpha):
            raise LiftError(f"direct lift s = v/w gave f - alpha = {f - alpha:.3g}, max violation {_viol(q, g):.3g}")
        return x
    if sys.M:
        raise LiftError("w = 0 cannot occur with A0 PSD in the non-diagonalizable case")
    if not float(v @ F0[:p, :p] @ v) < 0.0:
        raise LiftError("w = 0 and v^T F0 v >= 0: no escape direction")
    schedule = [2.0**k for k in range(21)]
    x = _escape(q, sys, F0, v / np.linalg.norm(v), alpha, feas_tol, schedule)
    if x is None:
        raise LiftError("escape construction exhausted t_v up to 2^20; check tolerances")
    return x


def _viol(q, g):
    ineq = q.ineq_mask()
    return float(np.max(np.where(ineq, np.maximum(g, 0.0), np.abs(g)), initial=0.0))
