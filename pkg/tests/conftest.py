import numpy as np
import pytest

from sepqcqp.model import BlockConstraint, Kind, SeparableQcqp


def scalar_problem(a0, b0, c0, a1, b1, c1, kind="ineq"):
    """One variable, one constraint."""
    return SeparableQcqp([[a0]], [b0], c0, (BlockConstraint([[a1]], [b1], c1, kind),))


@pytest.fixture
def trust_region():
    # f = -x^2 subject to x^2 <= 1
    return scalar_problem(-1.0, 0.0, 0.0, 1.0, 0.0, -1.0)


def random_blocks(rng, sizes, kinds=None, singular=False):
    """Blocks with random spectra; ``singular`` puts some ``b`` outside the range."""
    blocks = []
    for k, n in enumerate(sizes):
        Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
        d = rng.uniform(0.3, 2.0, size=n) * rng.choice([-1.0, 1.0], size=n)
        b = rng.normal(size=n)
        if singular and n >= 2 and rng.random() < 0.5:
            d[-1] = 0.0
        A = Q @ np.diag(d) @ Q.T
        kind = Kind.INEQ if kinds is None else kinds[k]
        blocks.append(BlockConstraint(A, b, float(rng.normal()), kind))
    return tuple(blocks)


def random_problem(rng, sizes, kinds=None, singular=False):
    p = sum(sizes)
    G = rng.normal(size=(p, p))
    return SeparableQcqp(0.5 * (G + G.T), rng.normal(size=p), float(rng.normal()),
                         random_blocks(rng, sizes, kinds, singular))


def random_sizes(rng, p, N):
    cuts = np.sort(rng.choice(np.arange(1, p), size=N - 1, replace=False)) if N > 1 else []
    edges = np.concatenate([[0], cuts, [p]]).astype(int)
    return [int(e) for e in np.diff(edges)]


def lift_instance(rng, kind, w_zero):
    """``(q, sys, y, alpha)`` satisfying the preconditions of the lift.

    Blocks are 2x2 and indefinite, so directions ``v`` with
    ``v_i^T F_i v_i <= 0`` (or ``= 0``) exist; the objective is negative
    definite, so ``v^T F0 v < 0`` along any of them. With ``w_zero`` the last
    coordinate of ``y`` is exactly zero, forcing the escape construction.
    """
    from sepqcqp.congruence import build_congruence
    from sepqcqp.model import BlockConstraint, Kind, SeparableQcqp, evaluate

    N = int(rng.integers(1, 4))
    blocks = []
    for _ in range(N):
        Q, _ = np.linalg.qr(rng.normal(size=(2, 2)))
        A = Q @ np.diag([rng.uniform(0.5, 2.0), -rng.uniform(0.5, 2.0)]) @ Q.T
        center = rng.normal(scale=0.5, size=2)
        blocks.append(BlockConstraint(A, -A @ center, float(center @ A @ center + rng.normal(scale=0.5)), kind))
    p = 2 * N
    G = rng.normal(size=(p, p))
    q = SeparableQcqp(-(G @ G.T / p + 0.5 * np.eye(p)), rng.normal(size=p), 0.0, tuple(blocks))
    sys = build_congruence(q)
    # in congruence coordinates block i reads d_pos s_pos^2 + d_neg s_neg^2 + k_i
    const = 0.0 if w_zero else 1.0
    v = np.zeros(p)
    for i, s in enumerate(sys.block_slices):
        d = np.diag(sys.F[i])[s]
        k = const * sys.F[i][p, p]
        pos, neg = int(np.argmax(d)), int(np.argmin(d))
        a = rng.uniform(0.5, 2.0) + np.sqrt(max(-k, 0.0) / d[pos])
        need = (d[pos] * a * a + k) / -d[neg]
        ratio = 1.0 if kind is Kind.EQ else rng.uniform(1.0, 1.5)
        v[s.start + pos] = rng.choice([-1.0, 1.0]) * a
        v[s.start + neg] = rng.choice([-1.0, 1.0]) * ratio * np.sqrt(need)
    if w_zero:
        return q, sys, np.append(v, 0.0), float(rng.normal())
    x = (sys.P @ np.append(v, 1.0))[:-1]
    alpha = evaluate(q, x)[0] + rng.uniform(0.1, 1.0)
    w = float(rng.uniform(0.5, 2.0) * rng.choice([-1.0, 1.0]))
    return q, sys, w * np.append(v, 1.0), alpha


def trace_instance(rng, n, N, rank, case2=False):
    """``(TraceSystem, D)`` with a sign-compatible ``F0``.

    Case 1: diagonal ``F_i`` and ``D F0 D`` a Z-matrix. Case 2: indices in
    ``M`` couple only to the last coordinate, have ``(F_i)_mm = 0`` and a
    nonnegative ``(F0)_mm``; the sign condition holds off ``M`` with
    ``D_last = +1``.
    """
    from sepqcqp.rank1 import TraceSystem

    last = n - 1
    M = set()
    if case2:
        M = set(int(m) for m in rng.choice(last, size=int(rng.integers(1, max(2, last // 2 + 1))), replace=False))
    D = rng.choice([-1.0, 1.0], size=n)
    if case2:
        D[last] = 1.0
    K = -np.abs(rng.normal(size=(n, n))) * (rng.random((n, n)) < 0.7)
    K = np.triu(K, 1)
    K = K + K.T + np.diag(rng.normal(size=n))
    F0 = D[:, None] * K * D[None, :]
    F = []
    for _ in range(N):
        Fi = np.diag(rng.normal(size=n))
        for m in M:
            Fi[m, m] = 0.0
            Fi[m, last] = Fi[last, m] = rng.normal()
        F.append(Fi)
    for m in M:
        F0[m, :] = 0.0
        F0[:, m] = 0.0
        F0[m, m] = abs(rng.normal())
        F0[m, last] = F0[last, m] = rng.normal()
    V = rng.normal(size=(n, rank))
    return TraceSystem(V @ V.T, F0, F, M=M), D


# one line per acceptance criterion, printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
