"""Sufficient conditions for strong duality (the S-property).

Two certificates are checked:

* Case 1, every ``b_i`` in ``range(A_i)``: the congruent objective ``F0``
  must become a Z-matrix (non-positive off-diagonals) under a diagonal
  ``+-1`` similarity ``D F0 D``.
* Case 2, some ``b_i`` outside ``range(A_i)``: ``A0`` must be PSD, the
  coordinates in ``M`` must be decoupled in the objective, and the sign
  condition only needs to hold off ``M``. A nonnegative diagonal of ``A0``
  is also checked and reported separately even though PSD implies it.

Failing either check yields ``Unknown``, never a refutation, because the
conditions are sufficient only.
"""

import enum
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .congruence import CongruenceCase, build_congruence
from .model import Kind, slater_check


class CertificateStatus(str, enum.Enum):
    CERTIFIED = "Certified"
    UNKNOWN = "Unknown"


class CertificateCase(str, enum.Enum):
    CASE1 = "Case1"
    CASE2 = "Case2"


@dataclass
class Certificate:
    status: CertificateStatus
    case: CertificateCase
    D: np.ndarray = None
    reasons: list = field(default_factory=list)
    slater_report: list = field(default_factory=list)
    is_fully_diagonal: bool = False
    system: object = None

    @property
    def certified(self):
        return self.status is CertificateStatus.CERTIFIED

    def to_dict(self):
        return {
            "status": self.status.value,
            "case": self.case.value,
            "D": None if self.D is None else [int(d) for d in self.D],
            "M": sorted(int(m) + 1 for m in self.system.M) if self.system is not None else [],
            "is_fully_diagonal": bool(self.is_fully_diagonal),
            "reasons": list(self.reasons),
            "slater": [
                {
                    "kind": r.kind.value,
                    "neg_attainable": r.neg_attainable,
                    "pos_attainable": r.pos_attainable,
                }
                for r in self.slater_report
            ],
        }


def sign_search(F0, skip=(), tol=None):
    """Find ``D`` in ``{-1, +1}^n`` with ``D_i D_j F0_ij <= 0`` off the diagonal.

    The entries with ``|F0_ij| > tol`` define a signed graph; ``D`` exists iff
    that graph is balanced for the flipped signs, which a breadth-first
    two-colouring decides. Indices in ``skip`` are ignored and get ``+1``.

    Returns
    -------
    numpy.ndarray or None
        The sign vector, or ``None`` when no such ``D`` exists.
    """
    F0 = np.asarray(F0, dtype=float)
    n = F0.shape[0]
    if tol is None:
        tol = linalg.offdiag_tol(F0)
    skip = set(skip)
    active = [i for i in range(n) if i not in skip]
    # want D_i == D_j across negative entries and D_i != D_j across positive ones
    adj = {i: [] for i in active}
    for a, i in enumerate(active):
        for j in active[a + 1:]:
            v = F0[i, j]
            if abs(v) > tol:
                parity = 1 if v > 0 else 0
                adj[i].append((j, parity))
                adj[j].append((i, parity))
    D = np.ones(n, dtype=int)
    seen = set()
    for root in active:
        if root in seen:
            continue
        seen.add(root)
        D[root] = 1
        queue = deque([root])
        while queue:
            i = queue.popleft()
            for j, parity in adj[i]:
                want = -D[i] if parity else D[i]
                if j in seen:
                    if D[j] != want:
                        return None
                else:
                    seen.add(j)
                    D[j] = want
                    queue.append(j)
    return D


def sign_condition_holds(F0, D, skip=(), tol=None):
    F0 = np.asarray(F0, dtype=float)
    if tol is None:
        tol = linalg.offdiag_tol(F0)
    S = np.outer(D, D) * F0
    idx = [i for i in range(F0.shape[0]) if i not in set(skip)]
    sub = S[np.ix_(idx, idx)]
    off = sub - np.diag(np.diag(sub))
    return bool(np.all(off <= tol))


def _decoupling_violations(Ahat, M, tol):
    bad = []
    for m in sorted(M):
        row = np.abs(Ahat[m]).copy()
        row[m] = 0.0
        if np.any(row > tol):
            bad.append(m)
    return bad


def certify(q, alpha=0.0):
    """Run the sufficient S-property tests on ``q``.

    Returns
    -------
    Certificate
    """
    reports = slater_check(q)
    reasons = []
    for i, rep in enumerate(reports):
        if not rep.ok:
            if rep.kind is Kind.INEQ:
                reasons.append(f"Slater condition fails on block {i + 1}: g_{i + 1} has no strictly negative value")
            else:
                reasons.append(
                    f"Slater condition fails on equality block {i + 1}: g_{i + 1} does not take both strict signs"
                )
    sys = build_congruence(q, alpha)
    case = CertificateCase.CASE1 if sys.case is CongruenceCase.DIAGONALIZABLE else CertificateCase.CASE2
    p = q.p
    tol = linalg.offdiag_tol(sys.F0)

    # the off-diagonal pattern of F0 must not depend on alpha
    shifted = build_congruence(q, alpha + 1.0).F0
    diff = shifted - sys.F0
    diff[p, p] = 0.0
    if np.abs(diff).max() > tol:
        reasons.append("internal: F0 off-diagonal pattern depends on alpha")

    D = None
    if case is CertificateCase.CASE1:
        for i, blk in enumerate(q.blocks):
            if blk.kind is Kind.EQ and np.abs(blk.A).max() <= linalg.offdiag_tol(blk.A) * 1e-3:
                reasons.append(f"equality block {i + 1} has zero Hessian")
        D = sign_search(sys.F0, (), tol)
        if D is None:
            reasons.append("sign search failed: no diagonal +-1 matrix makes D F0 D a Z-matrix")
    else:
        if linalg.min_eig(q.A0) < -linalg.eig_tol(q.A0):
            reasons.append("case 2 requires A0 to be positive semidefinite")
        if np.any(np.diag(q.A0) < -linalg.eig_tol(q.A0)):
            reasons.append("case 2 requires nonnegative diagonal entries of A0")
        # decoupling is checked on A0 expressed in the congruence coordinates
        Ahat = sys.F0[:p, :p]
        bad = _decoupling_violations(Ahat, sys.M, tol)
        if bad:
            reasons.append(
                "case 2 requires the objective rows at M to be decoupled; violated at "
                + ", ".join(str(m + 1) for m in bad)
            )
        D = sign_search(sys.F0, sys.M, tol)
        if D is None:
            reasons.append("sign search failed off M: no diagonal +-1 matrix satisfies the sign condition")
        elif D[p] < 0:
            D = -D

    status = CertificateStatus.UNKNOWN if reasons else CertificateStatus.CERTIFIED
    fully_diag = False
    if D is not None:
        off = np.abs(sys.F0 - np.diag(np.diag(sys.F0)))
        if case is CertificateCase.CASE2:
            keep = [i for i in range(p + 1) if i not in sys.M]
            off = off[np.ix_(keep, keep)]
        fully_diag = bool(np.all(off <= tol))
    return Certificate(
        status=status,
        case=case,
        D=D if status is CertificateStatus.CERTIFIED else None,
        reasons=reasons,
        slater_report=reports,
        is_fully_diagonal=fully_diag and status is CertificateStatus.CERTIFIED,
        system=sys,
    )


def verify_certificate(q, cert):
    """Re-check a certificate from scratch against ``q``.

    Returns a list of violated conditions; empty means the certificate holds.
    """
    problems = []
    if not cert.certified:
        return ["certificate is not Certified"]
    if not all(rep.ok for rep in slater_check(q)):
        problems.append("Slater condition")
    sys = build_congruence(q, cert.system.alpha if cert.system is not None else 0.0)
    tol = linalg.offdiag_tol(sys.F0)
    p = q.p
    if cert.case is CertificateCase.CASE1:
        if sys.M:
            problems.append("instance is not simultaneously diagonalizable")
        if not sign_condition_holds(sys.F0, cert.D, (), tol):
            problems.append("D F0 D is not a Z-matrix")
    else:
        if linalg.min_eig(q.A0) < -linalg.eig_tol(q.A0):
            problems.append("A0 not PSD")
        if _decoupling_violations(sys.F0[:p, :p], sys.M, tol):
            problems.append("M rows coupled")
        if not sign_condition_holds(sys.F0, cert.D, sys.M, tol):
            problems.append("sign condition off M")
    return problems
