"""Projected dual subgradient ascent and its augmented / block-parallel variants.

Each outer iteration minimizes the Lagrangian at the current multiplier,
takes a step along the constraint values (a supergradient of the dual
function) and projects back onto ``W``:

    x      <- argmin_x L(x, lam)
    lam    <- Proj_W(lam + mu_k g(x))

After the loop the best multiplier found is turned into a primal point by
:func:`recover_primal`.
"""

import logging
import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .. import linalg
from ..certify import certify
from ..model import Solution, Status, constraint_values, evaluate
from .function import dual_value, lagrangian_argmin, DualInfeasibleError
from .inner import augmented_argmin, flexa_inner
from .projection import EmptySpectrahedronError, lagrangian_hessian, project_W, strict_feasibility_probe
from .recovery import RecoveryError, complementarity_residual, recover_primal, restore_feasibility

logger = logging.getLogger(__name__)

METHODS = ("ascent", "augmented", "flexa")
STEP_RULES = ("constant", "harmonic", "sqrt")
TRACE_COLUMNS = ("iter", "q_lambda", "primal_f", "gap", "min_eig", "step")


@dataclass
class SolverConfig:
    """Options of the dual solvers.

    ``prox`` are the FLEXA proximal weights (one per block, or a scalar) and
    ``flexa_step`` the FLEXA relaxation; ``rho_aug`` is the augmented
    Lagrangian weight. Every ``polish_every`` outer iterations a projected
    Newton step on the smooth part of the dual is tried from the best
    multiplier; when it lands on a stationary point the loop stops there
    (``0`` disables this). The loop also stops when the best dual value
    improved by less than ``gap_tol`` over the last ``window`` iterations
    and the last step moved ``lam`` by less than ``step_tol``.
    """

    method: str = "ascent"
    step_rule: str = "sqrt"
    mu0: float = None
    max_outer: int = 3000
    max_inner: int = 10000
    gap_tol: float = 1e-6
    kkt_tol: float = 1e-6
    step_tol: float = 1e-10
    window: int = 10
    rho_aug: float = 1.0
    prox: object = None
    flexa_step: float = 1.0
    proj_tol: float = 1e-7
    feas_tol: float = linalg.FEAS_TOL
    threads: int = 1
    seed: int = 0
    polish_every: int = 25

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.step_rule not in STEP_RULES:
            raise ValueError(f"step_rule must be one of {STEP_RULES}")
        for name in ("gap_tol", "kkt_tol", "step_tol", "proj_tol", "feas_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.flexa_step <= 1.0:
            raise ValueError("flexa_step must be in (0, 1]")
        if self.rho_aug < 0:
            raise ValueError("rho_aug must be nonnegative")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("iteration limits must be positive")
        if self.mu0 is not None and not self.mu0 > 0:
            raise ValueError("mu0 must be positive")


@dataclass
class DualIterate:
    lam: np.ndarray
    x: np.ndarray
    q_value: float
    subgrad: np.ndarray
    iter: int


def step_size(rule, mu0, k):
    if rule == "constant":
        return mu0
    if rule == "harmonic":
        return mu0 / k
    return mu0 / math.sqrt(k)


def _regularized_argmin(q, lam):
    """Lagrangian minimizer, or a damped surrogate where none exists.

    On the boundary of ``W`` the linear term may leave the range of the
    Hessian; a small Tikhonov shift then gives a large point along the
    direction of unboundedness, whose constraint values push the multiplier
    back inside.
    """
    try:
        return lagrangian_argmin(q, lam)
    except DualInfeasibleError:
        H, r, _ = q.lagrangian_data(lam)
        w = np.linalg.eigvalsh(H)
        delta = max(1e-8 * max(1.0, float(np.abs(w).max())), -w[0] + 1e-8)
        return -np.linalg.solve(H + delta * np.eye(q.p), r)


def _restore(q, lam, interior):
    """Best point on the segment toward ``interior`` when ``q(lam) = -inf``.

    There is no supergradient where the Lagrangian is unbounded below. The
    dual is concave along the segment, so a bounded scalar search finds the
    best restart point.
    """
    d = np.asarray(interior, dtype=float) - lam

    def neg(theta):
        v = dual_value(q, lam + theta * d)
        return -v if np.isfinite(v) else 1e300

    res = minimize_scalar(neg, bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-10})
    theta = float(res.x)
    if neg(1.0) <= res.fun:
        theta = 1.0
    return lam + theta * d, theta


def _inner(q, cfg, lam, x):
    if cfg.method == "ascent":
        return _regularized_argmin(q, lam)
    if cfg.method == "augmented":
        if cfg.rho_aug == 0:
            return _regularized_argmin(q, lam)
        res = augmented_argmin(q, lam, cfg.rho_aug, x, tol=cfg.kkt_tol * 1e-3, max_iter=min(cfg.max_inner, 500))
        if not res.converged:
            logger.debug("augmented inner solve stopped at gradient norm %.3g", res.grad_norm)
        return res.x
    try:
        res = flexa_inner(q, lam, x, prox=cfg.prox, step=cfg.flexa_step, tol=cfg.kkt_tol * 1e-3,
                          max_iter=cfg.max_inner, threads=cfg.threads)
    except ValueError:
        return _regularized_argmin(q, lam)
    return res.x


def _dual_derivatives(q, lam):
    """Value, gradient and Hessian of ``q`` where the Lagrangian Hessian is PD.

    With ``x(lam) = -H^{-1} r`` the gradient is ``g(x(lam))`` and the Hessian
    is ``-1/2 J^T H^{-1} J`` with ``J`` the constraint Jacobian at ``x(lam)``.
    Returns ``None`` on the boundary of ``W``.
    """
    H, r, c = q.lagrangian_data(lam)
    w = np.linalg.eigvalsh(H)
    if w[0] <= 1e-10 * max(1.0, abs(w[-1])):
        return None
    x = -np.linalg.solve(H, r)
    g = constraint_values(q, x)
    J = np.zeros((q.p, q.N))
    for i, (s, blk) in enumerate(zip(q.slices(), q.blocks)):
        J[s, i] = 2.0 * (blk.A @ x[s] + blk.b)
    hess = -0.5 * J.T @ np.linalg.solve(H, J)
    return float(c + r @ x), g, 0.5 * (hess + hess.T), x


def _stationarity(q, lam, g):
    ineq = q.ineq_mask()
    res = np.where(ineq & (lam <= 0.0), np.maximum(g, 0.0), np.abs(g))
    return float(np.abs(res).max(initial=0.0))


def newton_polish(q, lam, max_iter=50, tol=1e-12):
    """Projected Newton ascent on the smooth interior part of the dual.

    Starts from ``lam`` and keeps every iterate strictly inside ``W``.
    Inequality multipliers at zero with negative constraint value are held
    fixed. Returns ``(lam, q_value, stationarity, iterations)``, or ``None``
    when ``lam`` sits on the boundary of ``W``.
    """
    lam = np.array(lam, dtype=float)
    d0 = _dual_derivatives(q, lam)
    if d0 is None:
        return None
    qv, g, hess, _ = d0
    ineq = q.ineq_mask()
    it = 0
    for it in range(1, max_iter + 1):
        stat = _stationarity(q, lam, g)
        if stat <= tol * (1.0 + abs(qv)):
            return lam, qv, stat, it - 1
        free = ~(ineq & (lam <= 0.0) & (g <= 0.0))
        d = np.zeros(q.N)
        if free.any():
            Hf = -hess[np.ix_(free, free)]
            Hf += 1e-14 * max(1.0, float(np.abs(Hf).max())) * np.eye(int(free.sum()))
            try:
                d[free] = np.linalg.solve(Hf, g[free])
            except np.linalg.LinAlgError:
                d[free] = np.linalg.lstsq(Hf, g[free], rcond=None)[0]
        t = 1.0
        accepted = None
        while t > 1e-10:
            trial = lam + t * d
            trial[ineq] = np.maximum(trial[ineq], 0.0)
            dt = _dual_derivatives(q, trial)
            if dt is not None and dt[0] >= qv - 1e-15 * (1.0 + abs(qv)):
                accepted = trial, dt
                break
            t *= 0.5
        if accepted is None:
            break
        lam, (qv, g, hess, _) = accepted
    return lam, qv, _stationarity(q, lam, g), it


def _stationary_check(q, cfg, lam, qv, boundary=True):
    """Try to confirm that ``lam`` (or a Newton-polished version) is dual optimal.

    Interior of ``W``: a projected Newton solve that reaches a stationary
    point. Boundary of ``W``: a recovered primal point that is feasible,
    complementary and closes the gap; skipped when ``boundary`` is False.
    Returns ``(lam, q, x)`` or ``None``.
    """
    pol = newton_polish(q, lam)
    if pol is not None:
        lam_p, q_p, stat, _ = pol
        # polish can land a rounding error below qv when lam is already optimal;
        # q sums terms of size |lam_i| (|c_i| + |b_i|^2), so the error scales with them
        size = sum(abs(l) * (abs(blk.c) + float(blk.b @ blk.b)) for l, blk in zip(lam_p, q.blocks))
        if q_p >= qv - 1e-14 * (1.0 + abs(qv) + size) and stat <= cfg.gap_tol * 1e-3 * (1.0 + abs(q_p)):
            return lam_p, q_p, lagrangian_argmin(q, lam_p)
        return None
    if not boundary:
        return None
    try:
        x, lam_r = recover_primal(q, lam, kkt_tol=cfg.kkt_tol, feas_tol=cfg.feas_tol, seed=cfg.seed,
                                  return_multiplier=True)
    except RecoveryError:
        return None
    q_r = dual_value(q, lam_r)
    if not np.isfinite(q_r):
        return None
    f, _, feas = evaluate(q, x, cfg.feas_tol)
    if feas and f - max(q_r, qv) <= cfg.gap_tol * (1.0 + abs(f)):
        return (lam_r, q_r, x) if q_r >= qv else (lam, qv, x)
    return None


def kkt_residual(q, x, lam):
    """Largest violation among stationarity, feasibility, complementarity and dual PSD-ness."""
    H, r, _ = q.lagrangian_data(lam)
    stat = float(np.linalg.norm(2.0 * (H @ x + r)))
    comp = complementarity_residual(q, x, lam)
    psd = max(0.0, -linalg.min_eig(H) - linalg.eig_tol(H))
    sign = float(np.maximum(-np.asarray(lam)[q.ineq_mask()], 0.0).max(initial=0.0))
    return max(stat, comp, psd, sign)


def solve_dual_ascent(q, cfg=None, certificate=None, lam0=None):
    """Solve ``q`` through its dual.

    Parameters
    ----------
    q : SeparableQcqp
    cfg : SolverConfig, optional
    certificate : Certificate, optional
        Result of :func:`certify`; computed when omitted. The status is
        ``GlobalCertified`` only for certified instances meeting both
        tolerances.
    lam0 : array_like, optional
        Starting multiplier (projected onto ``W``).

    Returns
    -------
    Solution
        ``trace`` holds one dict per outer iteration with keys
        :data:`TRACE_COLUMNS`.
    """
    cfg = cfg or SolverConfig()
    cert = certificate if certificate is not None else certify(q)
    t0 = time.perf_counter()
    found, interior = strict_feasibility_probe(q, seed=cfg.seed)
    start = np.zeros(q.N) if lam0 is None else np.asarray(lam0, dtype=float)
    try:
        lam = project_W(q, start, cfg.proj_tol, interior if found else None)
    except EmptySpectrahedronError as exc:
        return Solution(
            x_star=np.full(q.p, np.nan), lambda_star=np.full(q.N, np.nan),
            primal_value=-np.inf, dual_value=-np.inf, gap=np.nan, kkt_residual=np.inf,
            status=Status.UNBOUNDED, message=str(exc),
        )
    interior = interior if found else None

    x = np.zeros(q.p)
    trace = []
    best_q, best_lam = -np.inf, lam.copy()
    best_f, best_x = np.inf, None
    history = []
    mu0 = cfg.mu0
    polished = False
    # recovery-based checks are costly; space them out after each failure
    next_boundary = cfg.polish_every
    k = 0
    for k in range(1, cfg.max_outer + 1):
        qv = dual_value(q, lam)
        if not np.isfinite(qv) and interior is not None:
            lam, theta = _restore(q, lam, interior)
            qv = dual_value(q, lam)
            logger.debug("iteration %d: moved %.1e of the way into W to leave q = -inf", k, theta)
        x = _inner(q, cfg, lam, x)
        g = constraint_values(q, x)
        # the minimizer is feasible only to solver precision; log f where it is exact
        xf = restore_feasibility(q, x)
        f, _, feas = evaluate(q, xf, cfg.feas_tol)
        if feas and f < best_f:
            best_f, best_x = f, xf
        if qv > best_q:
            best_q, best_lam = qv, lam.copy()
        if mu0 is None and np.isfinite(qv):
            mu0 = 1.0 / (1.0 + float(np.linalg.norm(g)))
        if mu0 is None:
            # no finite dual value yet: a unit-length move along g
            mu = 1.0 / (1.0 + float(np.linalg.norm(g)))
        else:
            mu = step_size(cfg.step_rule, mu0, k)
        lam_new = project_W(q, lam + mu * g, cfg.proj_tol, interior)
        H = lagrangian_hessian(q, lam)
        trace.append({
            "iter": k,
            "q_lambda": qv,
            "primal_f": f if feas else math.nan,
            "gap": (f - qv) if feas and np.isfinite(qv) else math.nan,
            "min_eig": linalg.min_eig(H),
            "step": mu,
        })
        history.append(best_q)
        moved = float(np.linalg.norm(lam_new - lam))
        lam = lam_new
        if (k > cfg.window and np.isfinite(best_q) and moved < cfg.step_tol
                and history[-1] - history[-1 - cfg.window] < cfg.gap_tol * (1.0 + abs(best_q))):
            # stalled: the projection returns the same multiplier and the dual value is flat
            break
        if cfg.polish_every and k % cfg.polish_every == 0 and np.isfinite(best_q):
            boundary = k >= next_boundary
            found = _stationary_check(q, cfg, best_lam, best_q, boundary=boundary)
            if found is None and boundary:
                next_boundary = 2 * k
            if found is not None:
                best_lam, best_q, x_found = found
                x_found = restore_feasibility(q, x_found)
                polished = True
                fp, _, feasp = evaluate(q, x_found, cfg.feas_tol)
                if feasp and fp < best_f:
                    best_f, best_x = fp, x_found
                trace.append({
                    "iter": k + 1,
                    "q_lambda": best_q,
                    "primal_f": fp if feasp else math.nan,
                    "gap": fp - best_q if feasp else math.nan,
                    "min_eig": linalg.min_eig(lagrangian_hessian(q, best_lam)),
                    "step": 0.0,
                })
                k += 1
                break
    if not polished:
        qv = dual_value(q, lam)
        if qv > best_q:
            best_q, best_lam = qv, lam.copy()

    lam_star = best_lam
    message = ""
    try:
        x_star, lam_rec = recover_primal(q, lam_star, kkt_tol=cfg.kkt_tol, feas_tol=cfg.feas_tol,
                                         seed=cfg.seed, return_multiplier=True)
        if lam_rec is not lam_star:
            q_rec = dual_value(q, lam_rec)
            if np.isfinite(q_rec) and q_rec >= best_q - cfg.gap_tol * (1.0 + abs(best_q)):
                lam_star, best_q = lam_rec, q_rec
    except RecoveryError as exc:
        message = str(exc)
        x_star = best_x if best_x is not None else x
    f_star, _, feas = evaluate(q, x_star, cfg.feas_tol)
    if best_x is not None and (not feas or best_f < f_star):
        x_star, f_star, feas = best_x, best_f, True
    gap = f_star - best_q if np.isfinite(best_q) else np.inf
    kkt = kkt_residual(q, x_star, lam_star)
    if not feas:
        status = Status.STATIONARY_UNCERTIFIED
        message = message or "recovered point is infeasible"
    elif cert.certified and gap <= cfg.gap_tol * (1.0 + abs(f_star)) and kkt <= cfg.kkt_tol * (1.0 + abs(f_star)):
        status = Status.GLOBAL_CERTIFIED
    else:
        status = Status.STATIONARY_UNCERTIFIED
        if not cert.certified:
            message = message or "S-property not certified; zero gap is not guaranteed"
    logger.info("dual solve: %d iterations, gap %.3g, %.2fs", k, gap, time.perf_counter() - t0)
    return Solution(
        x_star=x_star,
        lambda_star=lam_star,
        primal_value=f_star,
        dual_value=best_q,
        gap=gap,
        kkt_residual=kkt,
        status=status,
        iterations=k,
        trace=trace,
        message=message,
    )
