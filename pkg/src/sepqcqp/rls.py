"""Robust least squares with one perturbation budget per data column.

For ``H = [A, b]`` and ``xbar = (x, -1)`` the robust objective is

    phi(x) = max { ||(H + Delta) xbar||^2 : ||Delta[:, i]||^2 <= radius_i }

The inner maximization is a separable QCQP in the columns of ``Delta``.
After the change of variables ``Delta'_i = sign(xbar_i) (Delta[:, i] + H[:, i])``
its objective Hessian ``-(|xbar| |xbar|^T kron I)`` is a Z-matrix up to a
row-wise sign flip, so strong duality always holds and the dual solver
returns the global worst case.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .certify import certify
from .dual import SolverConfig, solve_dual_ascent
from .model import BlockConstraint, SeparableQcqp, Status

logger = logging.getLogger(__name__)


class RlsError(RuntimeError):
    pass


@dataclass
class RlsInstance:
    """Regression data with per-column budgets.

    ``radius[i]`` bounds the squared norm of the perturbation of column ``i``
    of ``H = [A, b]``; the last entry belongs to ``b``.
    """

    A: np.ndarray
    b: np.ndarray
    radius: np.ndarray
    x: np.ndarray = None

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.asarray(self.b, dtype=float).ravel()
        rows, cols = self.A.shape
        if self.b.shape != (rows,):
            raise ValueError(f"b has {self.b.size} entries, A has {rows} rows")
        r = np.asarray(self.radius, dtype=float)
        self.radius = np.full(cols + 1, float(r)) if r.ndim == 0 else r.ravel()
        if self.radius.shape != (cols + 1,):
            raise ValueError(f"radius needs {cols + 1} entries (one per column of [A, b])")
        if np.any(self.radius <= 0) or not np.all(np.isfinite(self.radius)):
            raise ValueError("radii must be positive and finite")
        if not (np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.b))):
            raise ValueError("A and b must be finite")
        if self.x is None:
            self.x = np.zeros(cols)

    @property
    def H(self):
        return np.column_stack([self.A, self.b])

    @property
    def n_rows(self):
        return self.A.shape[0]


def _xbar(x):
    return np.append(np.asarray(x, dtype=float), -1.0)


def column_signs(xbar):
    """``sign(xbar)`` with ``sign(0) = +1``."""
    return np.where(np.asarray(xbar) >= 0, 1.0, -1.0)


def inner_standard_form(inst, x, columns=None):
    """Worst-case problem at ``x`` as a minimization over stacked columns ``Delta'``.

    Parameters
    ----------
    columns : array_like of int, optional
        Columns of ``H`` to keep; all ``p + 1`` by default.

    Returns
    -------
    SeparableQcqp
        One block of size ``n_rows`` per kept column ``i``:
        ``||s_i Delta'_i - H[:, i]||^2 <= radius_i``.
    """
    xb = _xbar(x)
    if xb.shape != (inst.H.shape[1],):
        raise ValueError(f"x must have {inst.H.shape[1] - 1} entries")
    s = column_signs(xb)
    keep = np.arange(xb.size) if columns is None else np.asarray(columns, dtype=int)
    n = inst.n_rows
    a = np.abs(xb[keep])
    A0 = -np.kron(np.outer(a, a), np.eye(n))
    H = inst.H
    blocks = tuple(
        BlockConstraint(np.eye(n), -s[i] * H[:, i], float(H[:, i] @ H[:, i] - inst.radius[i]))
        for i in keep
    )
    return SeparableQcqp(A0, np.zeros(A0.shape[0]), 0.0, blocks)


def delta_from_stacked(inst, x, z, columns=None):
    """Undo the change of variables: ``Delta[:, i] = s_i Delta'_i - H[:, i]``.

    Columns not in ``columns`` get ``Delta[:, i] = 0``.
    """
    xb = _xbar(x)
    s = column_signs(xb)
    keep = np.arange(xb.size) if columns is None else np.asarray(columns, dtype=int)
    n = inst.n_rows
    delta = np.zeros_like(inst.H)
    cols = np.asarray(z, dtype=float).reshape(-1, n).T
    delta[:, keep] = cols * s[None, keep] - inst.H[:, keep]
    return delta


def residual_value(inst, x, delta):
    r = (inst.H + delta) @ _xbar(x)
    return float(r @ r)


@dataclass
class InnerMax:
    delta: np.ndarray
    value: float
    lam: np.ndarray
    status: Status
    gap: float
    trace: list = field(default_factory=list)


def _scaled_form(r, a):
    scale = float(r @ r + a @ a)
    n = r.size
    A0 = -np.kron(np.outer(a, a), np.eye(n)) / scale
    b0 = -np.kron(a, r) / scale
    blocks = tuple(BlockConstraint(np.eye(n), np.zeros(n), -1.0) for _ in a)
    return SeparableQcqp(A0, b0, -float(r @ r) / scale, blocks), scale


def scaled_inner_form(inst, x, columns=None):
    """Equivalent worst-case problem on unit balls, normalized to unit scale.

    With ``r = H xbar``, ``a_i = |xbar_i| sqrt(radius_i)`` and
    ``Delta[:, i] = s_i sqrt(radius_i) u_i`` the residual is
    ``r + sum_i a_i u_i``, so the problem is

        min  -||r + sum_i a_i u_i||^2 / S   s.t.  ||u_i||^2 <= 1

    with ``S = ||r||^2 + sum_i a_i^2``. Off-diagonal entries of the objective
    are ``-a_i a_j / S <= 0`` and the linear term is ``-a_i r / S``; flipping
    row ``k`` of every block by ``sign(r_k)`` makes the whole matrix a
    Z-matrix, so the certificate holds as for :func:`inner_standard_form`.
    Unlike that form the block constants do not carry ``||H[:, i]||^2``,
    which keeps the dual well scaled when the residual is tiny.

    Returns
    -------
    q : SeparableQcqp
    scale : float
        ``S``; the robust objective is ``-S`` times the optimal value.
    """
    xb = _xbar(x)
    if xb.shape != (inst.H.shape[1],):
        raise ValueError(f"x must have {inst.H.shape[1] - 1} entries")
    keep = np.arange(xb.size) if columns is None else np.asarray(columns, dtype=int)
    a = np.abs(xb[keep]) * np.sqrt(inst.radius[keep])
    return _scaled_form(inst.H @ xb, a)


def _plane(r):
    """Orthonormal ``(n, min(n, 2))`` basis whose first column is along ``r``."""
    n = r.size
    nr = float(np.linalg.norm(r))
    e = r / nr if nr > 0 else np.eye(n)[0]
    if n == 1:
        return e[:, None]
    w = np.eye(n)[int(np.argmin(np.abs(e)))]
    w = w - (w @ e) * e
    return np.column_stack([e, w / np.linalg.norm(w)])


def inner_max(inst, x, cfg=None, lam0=None):
    """Worst-case perturbation at ``x`` and the robust objective value.

    The dual solver runs on :func:`scaled_inner_form` restricted to a plane
    containing the residual ``r = H xbar``. The objective only sees the
    columns through ``r + sum_i a_i u_i`` and the balls are round, so
    rotating every ``u_i`` about the axis ``r`` changes nothing; the
    maximizer can therefore be taken in ``span{r, w}`` for one ``w``
    orthogonal to ``r``. Without the reduction the Lagrangian Hessian has a
    nullspace of dimension ``n_rows`` whenever ``r = 0``.

    Raises
    ------
    RlsError
        If the built instance is not certified (it always should be) or the
        dual solver does not reach a feasible point.
    """
    xb = _xbar(x)
    if xb.shape != (inst.H.shape[1],):
        raise ValueError(f"x must have {inst.H.shape[1] - 1} entries")
    # a column multiplied by x_i = 0 never reaches the residual; leaving it
    # out avoids a block the objective does not see
    keep = np.nonzero(xb != 0)[0]
    r = inst.H @ xb
    basis = _plane(r)
    a = np.abs(xb[keep]) * np.sqrt(inst.radius[keep])
    q, _ = _scaled_form(basis.T @ r, a)
    cert = certify(q)
    if not cert.certified:
        raise RlsError("worst-case problem failed its strong-duality certificate: " + "; ".join(cert.reasons))
    if lam0 is not None and len(lam0) != len(q.blocks):
        lam0 = None
    sol = solve_dual_ascent(q, cfg or SolverConfig(), certificate=cert, lam0=lam0)
    if not np.all(np.isfinite(sol.x_star)):
        raise RlsError(f"inner dual solve failed: {sol.message}")
    u = basis @ np.asarray(sol.x_star, dtype=float).reshape(-1, basis.shape[1]).T
    # project tiny violations back onto the unit balls
    u /= np.maximum(np.sqrt(np.sum(u * u, axis=0)), 1.0)
    delta = np.zeros_like(inst.H)
    delta[:, keep] = u * (column_signs(xb)[keep] * np.sqrt(inst.radius[keep]))[None, :]
    return InnerMax(delta, residual_value(inst, x, delta), sol.lambda_star, sol.status, sol.gap, sol.trace)


def robust_gradient(inst, x, delta):
    """``2 (A + dA)^T ((A + dA) x - (b + db))``, a subgradient of the robust objective."""
    Ap = inst.A + delta[:, :-1]
    bp = inst.b + delta[:, -1]
    return 2.0 * Ap.T @ (Ap @ x - bp)


def descent_direction(inst, x, delta):
    """Minimum-norm subgradient of the robust objective at ``x``.

    Where ``x_j != 0`` this is :func:`robust_gradient`. Where ``x_j = 0`` the
    worst-case column is free in its ball, so the subdifferential in that
    coordinate is the interval ``2 A_j^T r +- 2 sqrt(radius_j) ||r||`` with
    ``r`` the worst-case residual; the entry closest to zero is returned.
    """
    x = np.asarray(x, dtype=float)
    r = (inst.H + delta) @ _xbar(x)
    g = robust_gradient(inst, x, delta)
    zero = x == 0
    if np.any(zero):
        g0 = 2.0 * inst.A[:, zero].T @ r
        slack = 2.0 * np.sqrt(inst.radius[:-1][zero]) * float(np.linalg.norm(r))
        g[zero] = np.sign(g0) * np.maximum(np.abs(g0) - slack, 0.0)
    return g


def ols(A, b):
    return np.linalg.lstsq(A, b, rcond=None)[0]


def _snap(x, scale):
    # coordinates this small only make the worst-case problem ill-conditioned
    return np.where(np.abs(x) <= 1e-9 * scale, 0.0, x)


def rls_fit(inst, cfg=None, x0=None, step=None, step_tol=1e-8, max_outer=100):
    """Minimize the robust objective by subgradient descent with backtracking.

    Each outer iteration computes the worst case at ``x``, steps against the
    minimum-norm subgradient there (:func:`descent_direction`), and shrinks
    the step until the robust objective decreases. The objective is convex
    but not smooth where a coordinate of ``x`` is zero; steps that carry a
    coordinate across zero are also tried with it stopped at zero. The loop
    ends when ``x`` stops moving, the subgradient vanishes, or no step of at
    least ``1e-10`` times the base step decreases the objective.

    Parameters
    ----------
    x0 : array_like, optional
        Start point; ordinary least squares when omitted.
    step : float, optional
        Initial step; ``1 / (2 ||A||^2 + 1)`` when omitted.

    Returns
    -------
    x_star : numpy.ndarray
    history : list of dict
        ``iter``, ``objective``, ``step`` and ``grad_norm`` per iteration.
    """
    cfg = cfg or SolverConfig()
    x = ols(inst.A, inst.b) if x0 is None else np.asarray(x0, dtype=float).copy()
    alpha = step if step is not None else 1.0 / (2.0 * np.linalg.norm(inst.A, 2) ** 2 + 1.0)
    cur = inner_max(inst, x, cfg)
    history = [{"iter": 0, "objective": cur.value, "step": 0.0, "grad_norm": np.nan}]
    increases = 0
    retried = False
    for k in range(1, max_outer + 1):
        grad = descent_direction(inst, x, cur.delta)
        gn = float(np.linalg.norm(grad))
        if gn <= 1e-12 * (1.0 + cur.value):
            history.append({"iter": k, "objective": cur.value, "step": 0.0, "grad_norm": gn})
            break
        scale = 1.0 + float(np.abs(x).max(initial=0.0))
        t = alpha
        accepted = None
        while accepted is None and t > 1e-10 * alpha:
            plain = _snap(x - t * grad, scale)
            crossed = (x != 0) & (np.sign(plain) != np.sign(x))
            clipped = np.where(crossed, 0.0, plain)
            for trial_x in (plain, clipped) if crossed.any() else (plain,):
                trial = inner_max(inst, trial_x, cfg, lam0=cur.lam)
                if trial.value < cur.value - 1e-4 * float(grad @ (x - trial_x)):
                    accepted = trial_x, trial
                    break
            t *= 0.25
        if accepted is None:
            history.append({"iter": k, "objective": cur.value, "step": 0.0, "grad_norm": gn})
            break
        new_x, new = accepted
        moved = float(np.linalg.norm(new_x - x))
        increases = increases + 1 if new.value > cur.value else 0
        if increases >= 20:
            if retried:
                raise RlsError("robust objective increased over 20 consecutive steps")
            alpha *= 0.5
            retried = True
            increases = 0
        x, cur = new_x, new
        # let the step grow back after short backtracks
        alpha = min(8.0 * t, 1e6)
        history.append({"iter": k, "objective": cur.value, "step": t, "grad_norm": gn})
        if moved <= step_tol:
            break
    inst.x = x
    return x, history
