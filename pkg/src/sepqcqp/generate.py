"""Deterministic random instance families for tests and experiments.

Certified families are built backwards: block spectra and the transformed
objective ``F0`` are drawn first (``F0`` sign-compatible by construction)
and the original data are recovered through ``P^{-1}``.
"""

import io

import numpy as np

from .congruence import build_congruence
from .model import BlockConstraint, Kind, SeparableQcqp, dumps_problem

KINDS = ("certified_case1", "certified_case2", "odd_cycle_uncertified", "convex", "rls_toy")
MAX_P = 60


def _check_dims(p, N):
    if not 1 <= N <= p:
        raise ValueError(f"need 1 <= N <= p, got p={p}, N={N}")
    if p > MAX_P:
        raise ValueError(f"p={p} exceeds the desk-scale cap {MAX_P}")


def _block_sizes(rng, p, N):
    cuts = np.sort(rng.choice(np.arange(1, p), size=N - 1, replace=False)) if N > 1 else np.array([], int)
    edges = np.concatenate([[0], cuts, [p]])
    return [int(e) for e in np.diff(edges)]


def _rotation(rng, n):
    Q, R = np.linalg.qr(rng.normal(size=(n, n)))
    return Q * np.sign(np.diag(R))


def _z_matrix(rng, n, density=0.6):
    """Symmetric matrix with non-positive off-diagonals and random diagonal."""
    K = -rng.uniform(0.1, 1.0, size=(n, n)) * (rng.random((n, n)) < density)
    K = np.triu(K, 1)
    K = K + K.T
    K[np.diag_indices(n)] = rng.uniform(-1.0, 1.0, size=n)
    return K


def _from_f0(blocks, F0):
    """Recover ``(A0, b0, c0)`` from a prescribed transformed objective."""
    p = F0.shape[0] - 1
    probe = SeparableQcqp(np.eye(p), np.zeros(p), 0.0, tuple(blocks))
    sys = build_congruence(probe)
    Abar0 = sys.P_inv.T @ F0 @ sys.P_inv
    Abar0 = 0.5 * (Abar0 + Abar0.T)
    return Abar0[:p, :p], Abar0[:p, p], float(Abar0[p, p])


def certified_case1(seed, p, N, eq_fraction=0.3):
    rng = np.random.default_rng(seed)
    _check_dims(p, N)
    blocks = []
    for n in _block_sizes(rng, p, N):
        Q = _rotation(rng, n)
        A = Q @ np.diag(rng.uniform(0.5, 2.0, size=n)) @ Q.T
        center = rng.normal(scale=0.5, size=n)
        radius = rng.uniform(0.5, 1.5)
        kind = Kind.EQ if rng.random() < eq_fraction else Kind.INEQ
        blocks.append(BlockConstraint(A, -A @ center, float(center @ A @ center - radius**2), kind))
    D = rng.choice([-1.0, 1.0], size=p + 1)
    F0 = D[:, None] * _z_matrix(rng, p + 1) * D[None, :]
    A0, b0, c0 = _from_f0(blocks, F0)
    return SeparableQcqp(A0, b0, c0, tuple(blocks))


def certified_case2(seed, p, N, eq_fraction=0.3):
    """Some blocks have a singular Hessian with ``b_i`` outside its range."""
    rng = np.random.default_rng(seed)
    _check_dims(p, N)
    if p < 2:
        raise ValueError("certified_case2 needs p >= 2")
    sizes = _block_sizes(rng, p, N)
    if max(sizes) < 2:
        raise ValueError("certified_case2 needs a block of size >= 2 (use N < p)")
    blocks = []
    singular_done = False
    for n in sizes:
        d = rng.uniform(0.5, 2.0, size=n)
        b = np.zeros(n)
        if n >= 2 and (not singular_done or rng.random() < 0.5):
            d[-1] = 0.0
            b[-1] = rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 1.5)
            singular_done = True
        center = rng.normal(scale=0.5, size=n)
        center[d == 0] = 0.0
        b_rng = -d * center
        A = np.diag(d)
        c = float(center @ A @ center - rng.uniform(0.5, 1.5) ** 2)
        kind = Kind.EQ if rng.random() < eq_fraction else Kind.INEQ
        blocks.append(BlockConstraint(A, b_rng + b, c, kind))
    # M lives in the congruence coordinates, which reorder each block's eigenbasis
    M = sorted(build_congruence(SeparableQcqp(np.eye(p), np.zeros(p), 0.0, tuple(blocks))).M)
    D = rng.choice([-1.0, 1.0], size=p + 1)
    D[p] = 1.0
    K = _z_matrix(rng, p + 1)
    for m in M:
        K[m, :p] = 0.0
        K[:p, m] = 0.0
        K[m, p] = K[p, m] = rng.normal()
    top = K[:p, :p]
    # diagonal dominance of a Z-matrix gives a positive definite objective Hessian
    top[np.diag_indices(p)] = np.abs(top).sum(axis=1) - np.abs(np.diag(top)) + rng.uniform(0.5, 1.5, size=p)
    K[:p, :p] = top
    F0 = D[:, None] * K * D[None, :]
    A0, b0, c0 = _from_f0(blocks, F0)
    return SeparableQcqp(A0, b0, c0, tuple(blocks))


def odd_cycle_uncertified(seed, p=3, N=3):
    """Three unit intervals coupled through a positive triangle (duality gap)."""
    if (p, N) != (3, 3):
        raise ValueError("odd_cycle_uncertified has fixed dimensions p=3, N=3")
    rng = np.random.default_rng(seed)
    w = rng.uniform(0.8, 1.2, size=3)
    A0 = np.array([[0.0, w[0], w[1]], [w[0], 0.0, w[2]], [w[1], w[2], 0.0]])
    blocks = tuple(BlockConstraint([[1.0]], [0.0], -1.0) for _ in range(3))
    return SeparableQcqp(A0, np.zeros(3), 0.0, blocks)


def convex(seed, p, N):
    rng = np.random.default_rng(seed)
    _check_dims(p, N)
    G = rng.normal(size=(p, p))
    A0 = G @ G.T / p + 0.5 * np.eye(p)
    blocks = []
    for n in _block_sizes(rng, p, N):
        Q = _rotation(rng, n)
        A = Q @ np.diag(rng.uniform(0.5, 2.0, size=n)) @ Q.T
        center = rng.normal(scale=0.5, size=n)
        blocks.append(BlockConstraint(A, -A @ center, float(center @ A @ center - rng.uniform(0.5, 1.5) ** 2)))
    return SeparableQcqp(A0, rng.normal(size=p), 0.0, tuple(blocks))


def rls_toy(seed, rows, cols, noise=0.05):
    """Regression data ``(A, b)`` with ``b = A x_true + noise``."""
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be positive")
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(rows, cols))
    x_true = rng.normal(size=cols)
    b = A @ x_true + noise * rng.normal(size=rows)
    return A, b


def rls_csv(A, b):
    buf = io.StringIO()
    np.savetxt(buf, np.column_stack([A, b]), delimiter=",", fmt="%.17g")
    return buf.getvalue()


def generate(kind, seed, p, N):
    """Instance of family ``kind``; ``rls_toy`` returns ``(A, b)`` with ``p`` rows and ``N`` columns."""
    if kind == "certified_case1":
        return certified_case1(seed, p, N)
    if kind == "certified_case2":
        return certified_case2(seed, p, N)
    if kind == "odd_cycle_uncertified":
        return odd_cycle_uncertified(seed, p, N)
    if kind == "convex":
        return convex(seed, p, N)
    if kind == "rls_toy":
        return rls_toy(seed, p, N)
    raise ValueError(f"unknown kind {kind!r}; choose from {', '.join(KINDS)}")


def generate_text(kind, seed, p, N):
    """File contents for ``generate``: problem JSON, or CSV for ``rls_toy``."""
    out = generate(kind, seed, p, N)
    if kind == "rls_toy":
        return rls_csv(*out)
    return dumps_problem(out)
