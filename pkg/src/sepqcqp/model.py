"""Problem representation for QCQPs with block-separable quadratic constraints.

The problem is

    minimize    x^T A0 x + 2 b0^T x + c0
    subject to  x_i^T A_i x_i + 2 b_i^T x_i + c_i  <= 0  or  == 0,   i = 1..N

where ``x = (x_1, ..., x_N)`` is split into disjoint blocks.
"""

import enum
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import linalg

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class ProblemFormatError(ValueError):
    """Raised when a problem file or in-memory instance is malformed."""


class Kind(str, enum.Enum):
    INEQ = "ineq"
    EQ = "eq"


class Status(str, enum.Enum):
    GLOBAL_CERTIFIED = "GlobalCertified"
    STATIONARY_UNCERTIFIED = "StationaryUncertified"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


def _as_matrix(value, path):
    try:
        a = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ProblemFormatError(f"{path}: not a numeric matrix ({exc})") from None
    if a.ndim != 2:
        raise ProblemFormatError(f"{path}: expected a 2-d array, got {a.ndim}-d")
    if a.shape[0] != a.shape[1]:
        raise ProblemFormatError(f"{path}: dimension mismatch, matrix is {a.shape[0]}x{a.shape[1]}")
    if a.shape[0] < 1:
        raise ProblemFormatError(f"{path}: empty matrix")
    if not np.all(np.isfinite(a)):
        raise ProblemFormatError(f"{path}: contains NaN or Inf")
    scale = max(1.0, float(np.abs(a).max()))
    if np.abs(a - a.T).max() > linalg.SYMMETRY_REJECT * scale:
        raise ProblemFormatError(f"{path}: matrix is not symmetric")
    return linalg.symmetrize(a)


def _as_vector(value, n, path):
    try:
        b = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ProblemFormatError(f"{path}: not a numeric vector ({exc})") from None
    if b.ndim != 1:
        raise ProblemFormatError(f"{path}: expected a 1-d array, got {b.ndim}-d")
    if b.shape[0] != n:
        raise ProblemFormatError(f"{path}: dimension mismatch, expected length {n}, got {b.shape[0]}")
    if not np.all(np.isfinite(b)):
        raise ProblemFormatError(f"{path}: contains NaN or Inf")
    return b


def _as_scalar(value, path):
    if isinstance(value, bool):
        raise ProblemFormatError(f"{path}: expected a number")
    try:
        c = float(value)
    except (TypeError, ValueError):
        raise ProblemFormatError(f"{path}: expected a number") from None
    if not math.isfinite(c):
        raise ProblemFormatError(f"{path}: contains NaN or Inf")
    return c


@dataclass(frozen=True, eq=False)
class BlockConstraint:
    """One quadratic constraint ``x_i^T A x_i + 2 b^T x_i + c (<=|==) 0``."""

    A: np.ndarray
    b: np.ndarray
    c: float
    kind: Kind = Kind.INEQ

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", _as_vector(self.b, A.shape[0], "b"))
        object.__setattr__(self, "c", _as_scalar(self.c, "c"))
        try:
            object.__setattr__(self, "kind", Kind(self.kind))
        except ValueError:
            raise ProblemFormatError(f"kind: expected 'ineq' or 'eq', got {self.kind!r}") from None
        self.A.flags.writeable = False
        self.b.flags.writeable = False

    @property
    def n(self):
        return self.A.shape[0]

    def value(self, xi):
        xi = np.asarray(xi, dtype=float)
        return float(xi @ self.A @ xi + 2.0 * self.b @ xi + self.c)


@dataclass(frozen=True, eq=False)
class SeparableQcqp:
    """Full problem instance.

    Attributes
    ----------
    A0, b0, c0 : objective data.
    blocks : tuple of BlockConstraint
        Constraints in block order; block ``i`` owns the coordinates
        ``offsets[i]:offsets[i] + blocks[i].n``.
    """

    A0: np.ndarray
    b0: np.ndarray
    c0: float
    blocks: tuple = field(default_factory=tuple)

    def __post_init__(self):
        A0 = _as_matrix(self.A0, "A0")
        p = A0.shape[0]
        object.__setattr__(self, "A0", A0)
        object.__setattr__(self, "b0", _as_vector(self.b0, p, "b0"))
        object.__setattr__(self, "c0", _as_scalar(self.c0, "c0"))
        blocks = tuple(self.blocks)
        if not blocks:
            raise ProblemFormatError("blocks: at least one block is required")
        for i, blk in enumerate(blocks):
            if not isinstance(blk, BlockConstraint):
                raise ProblemFormatError(f"blocks[{i}]: not a BlockConstraint")
        object.__setattr__(self, "blocks", blocks)
        total = sum(blk.n for blk in blocks)
        if total != p:
            raise ProblemFormatError(
                f"blocks: dimension mismatch, block sizes sum to {total} but A0 is {p}x{p}"
            )
        if len(blocks) > p:
            logger.warning("instance has more constraints (%d) than variables (%d)", len(blocks), p)
        self.A0.flags.writeable = False
        self.b0.flags.writeable = False
        offsets = np.concatenate([[0], np.cumsum([blk.n for blk in blocks])[:-1]])
        object.__setattr__(self, "_slices", tuple(slice(int(o), int(o) + blk.n) for o, blk in zip(offsets, blocks)))

    @property
    def p(self):
        return self.A0.shape[0]

    @property
    def N(self):
        return len(self.blocks)

    @property
    def sizes(self):
        return [blk.n for blk in self.blocks]

    @property
    def offsets(self):
        return [int(o) for o in np.concatenate([[0], np.cumsum(self.sizes)[:-1]])]

    @property
    def kinds(self):
        return [blk.kind for blk in self.blocks]

    def slices(self):
        return list(self._slices)

    def ineq_mask(self):
        return np.array([blk.kind is Kind.INEQ for blk in self.blocks])

    def embed_hessian(self, i):
        """Zero-padded ``p x p`` embedding of block ``i``'s Hessian."""
        out = np.zeros((self.p, self.p))
        s = self.slices()[i]
        out[s, s] = self.blocks[i].A
        return out

    def embed_linear(self, i):
        out = np.zeros(self.p)
        out[self.slices()[i]] = self.blocks[i].b
        return out

    def lagrangian_data(self, lam):
        """Hessian, linear term and constant of ``L(., lam)``.

        Returns ``(H, r, c)`` with ``L(x, lam) = x^T H x + 2 r^T x + c``.
        """
        lam = np.asarray(lam, dtype=float)
        H = np.array(self.A0)
        r = np.array(self.b0)
        c = self.c0
        for li, s, blk in zip(lam, self.slices(), self.blocks):
            H[s, s] += li * blk.A
            r[s] += li * blk.b
            c += li * blk.c
        return H, r, float(c)

    def scale(self):
        """Rough magnitude of the data, used for relative tolerances."""
        m = float(np.abs(self.A0).max(initial=0.0))
        for blk in self.blocks:
            m = max(m, float(np.abs(blk.A).max(initial=0.0)))
        return max(1.0, m)


@dataclass(frozen=True, eq=False)
class ExtendedMatrices:
    """Homogenized ``(p+1) x (p+1)`` forms of the objective and constraints."""

    Abar0: np.ndarray
    Abar: tuple
    E: np.ndarray


@dataclass
class Solution:
    x_star: np.ndarray
    lambda_star: np.ndarray
    primal_value: float
    dual_value: float
    gap: float
    kkt_residual: float
    status: Status
    iterations: int = 0
    trace: list = field(default_factory=list)
    message: str = ""


def problem_to_dict(q):
    return {
        "schema_version": SCHEMA_VERSION,
        "A0": q.A0.tolist(),
        "b0": q.b0.tolist(),
        "c0": q.c0,
        "blocks": [
            {"A": blk.A.tolist(), "b": blk.b.tolist(), "c": blk.c, "kind": blk.kind.value}
            for blk in q.blocks
        ],
    }


def problem_from_dict(doc):
    """Build a validated instance from a parsed problem document."""
    if not isinstance(doc, dict):
        raise ProblemFormatError("<root>: expected an object")
    if "schema_version" not in doc:
        raise ProblemFormatError("schema_version: missing required field")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise ProblemFormatError(
            f"schema_version: unsupported version {doc['schema_version']!r} (expected {SCHEMA_VERSION})"
        )
    for key in ("A0", "b0", "c0", "blocks"):
        if key not in doc:
            raise ProblemFormatError(f"{key}: missing required field")
    A0 = _as_matrix(doc["A0"], "A0")
    b0 = _as_vector(doc["b0"], A0.shape[0], "b0")
    c0 = _as_scalar(doc["c0"], "c0")
    if not isinstance(doc["blocks"], list):
        raise ProblemFormatError("blocks: expected a list")
    blocks = []
    for i, raw in enumerate(doc["blocks"]):
        path = f"blocks[{i}]"
        if not isinstance(raw, dict):
            raise ProblemFormatError(f"{path}: expected an object")
        for key in ("A", "b", "c", "kind"):
            if key not in raw:
                raise ProblemFormatError(f"{path}.{key}: missing required field")
        A = _as_matrix(raw["A"], f"{path}.A")
        b = _as_vector(raw["b"], A.shape[0], f"{path}.b")
        c = _as_scalar(raw["c"], f"{path}.c")
        if raw["kind"] not in ("ineq", "eq"):
            raise ProblemFormatError(f"{path}.kind: expected 'ineq' or 'eq', got {raw['kind']!r}")
        blocks.append(BlockConstraint(A, b, c, Kind(raw["kind"])))
    return SeparableQcqp(A0, b0, c0, tuple(blocks))


def dumps_problem(q):
    return json.dumps(problem_to_dict(q), indent=1) + "\n"


def load_problem(path):
    """Read and validate a problem file.

    Raises
    ------
    FileNotFoundError
        If ``path`` does not exist.
    ProblemFormatError
        On parse errors or schema violations; the message names the field.
    """
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(f"<root>: not valid JSON ({exc})") from None
    return problem_from_dict(doc)


def save_problem(q, path):
    Path(path).write_text(dumps_problem(q))


def assemble_extended(q):
    """Extended matrices ``[[A, b], [b^T, c]]`` with block zero-padding."""
    p = q.p
    Abar0 = np.zeros((p + 1, p + 1))
    Abar0[:p, :p] = q.A0
    Abar0[:p, p] = Abar0[p, :p] = q.b0
    Abar0[p, p] = q.c0
    Abar = []
    for s, blk in zip(q.slices(), q.blocks):
        m = np.zeros((p + 1, p + 1))
        m[s, s] = blk.A
        m[s, p] = m[p, s] = blk.b
        m[p, p] = blk.c
        Abar.append(m)
    E = np.zeros((p + 1, p + 1))
    E[p, p] = 1.0
    return ExtendedMatrices(Abar0, tuple(Abar), E)


def objective(q, x):
    x = np.asarray(x, dtype=float)
    return float(x @ q.A0 @ x + 2.0 * q.b0 @ x + q.c0)


def constraint_values(q, x):
    x = np.asarray(x, dtype=float)
    return np.array([blk.value(x[s]) for s, blk in zip(q.slices(), q.blocks)])


def is_feasible(q, g, feas_tol=linalg.FEAS_TOL):
    g = np.asarray(g, dtype=float)
    ineq = q.ineq_mask()
    return bool(np.all(g[ineq] <= feas_tol) and np.all(np.abs(g[~ineq]) <= feas_tol))


def evaluate(q, x, feas_tol=linalg.FEAS_TOL):
    """Objective value, constraint values and a feasibility flag at ``x``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (q.p,):
        raise ValueError(f"x has shape {x.shape}, expected ({q.p},)")
    g = constraint_values(q, x)
    return objective(q, x), g, is_feasible(q, g, feas_tol)


@dataclass
class BlockSlaterReport:
    neg_attainable: bool
    pos_attainable: bool
    witness_neg: np.ndarray = None
    witness_pos: np.ndarray = None
    kind: Kind = Kind.INEQ

    @property
    def ok(self):
        if self.kind is Kind.INEQ:
            return self.neg_attainable
        return self.neg_attainable and self.pos_attainable


def _strict_negative_point(A, b, c):
    """A point where ``x^T A x + 2 b^T x + c < 0``, or ``None`` if none exists."""
    w, v = linalg.sym_eig(A)
    tol = linalg.eig_tol(A)
    if w[0] < -tol:
        d = v[:, 0]
        if b @ d > 0:
            d = -d
        t = math.sqrt((abs(c) + 1.0) / -w[0])
        return t * d
    x0, b_null = linalg.split_range(A, b)
    gmin = float(x0 @ A @ x0 + 2.0 * b @ x0 + c)
    if not linalg.in_range(A, b):
        # g decreases linearly along -b_null
        t = (abs(gmin) + 1.0) / (2.0 * float(b_null @ b_null))
        return x0 - t * b_null
    if gmin < -1e-14 * (1.0 + abs(c) + abs(float(b @ x0))):
        return x0
    return None


def slater_check(q):
    """Per-block strict-feasibility report.

    For each block decides whether ``g_i`` takes strictly negative and
    strictly positive values, with explicit witness points.
    """
    reports = []
    for blk in q.blocks:
        neg = _strict_negative_point(blk.A, blk.b, blk.c)
        pos = _strict_negative_point(-blk.A, -blk.b, -blk.c)
        reports.append(
            BlockSlaterReport(
                neg_attainable=neg is not None,
                pos_attainable=pos is not None,
                witness_neg=neg,
                witness_pos=pos,
                kind=blk.kind,
            )
        )
    return reports
