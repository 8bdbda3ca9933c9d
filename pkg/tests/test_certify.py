import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import scalar_problem
from sepqcqp.certify import (
    CertificateCase,
    certify,
    sign_condition_holds,
    sign_search,
    verify_certificate,
)
from sepqcqp.generate import certified_case1, certified_case2, odd_cycle_uncertified
from sepqcqp.model import BlockConstraint, SeparableQcqp


def exhaustive(F, skip=()):
    n = F.shape[0]
    keep = [i for i in range(n) if i not in skip]
    for signs in itertools.product([-1.0, 1.0], repeat=len(keep)):
        D = np.ones(n)
        D[keep] = signs
        if sign_condition_holds(F, D, skip):
            return True
    return False


def test_z_matrix_needs_no_flips():
    F = np.array([[1.0, -1.0, 0.0], [-1.0, 2.0, -3.0], [0.0, -3.0, 0.5]])
    assert np.array_equal(sign_search(F), np.ones(3))


def test_single_positive_edge():
    D = sign_search(np.array([[1.0, 2.0], [2.0, 3.0]]))
    assert D[0] * D[1] == -1.0
    assert (D[:, None] * np.array([[1.0, 2.0], [2.0, 3.0]]) * D[None, :])[0, 1] == -2.0


def test_positive_triangle_fails():
    F = np.ones((3, 3))
    assert sign_search(F) is None
    assert not exhaustive(F)


def test_near_zero_entries_create_no_edge():
    F = np.ones((3, 3))
    F[0, 1] = F[1, 0] = 1e-14
    assert sign_search(F) is not None


def test_skip_indices_are_ignored():
    F = np.ones((3, 3))
    D = sign_search(F, skip={2})
    assert D is not None and D[2] == 1.0


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**6))
def test_search_matches_enumeration_and_flip(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 9))
    S = rng.choice([-1.0, 0.0, 1.0], size=(n, n), p=[0.4, 0.2, 0.4]) * rng.uniform(0.5, 2.0, size=(n, n))
    F = np.triu(S, 1)
    F = F + F.T + np.diag(rng.normal(size=n))
    D = sign_search(F)
    assert (D is not None) == exhaustive(F)
    if D is not None:
        assert sign_condition_holds(F, D)
        assert sign_condition_holds(F, -D)


def test_trust_region_certified():
    cert = certify(scalar_problem(-1.0, 0.0, 0.0, 1.0, 0.0, -1.0))
    assert cert.certified and cert.case is CertificateCase.CASE1
    assert np.array_equal(np.abs(cert.D), [1, 1])
    assert cert.is_fully_diagonal


def test_odd_cycle_unknown():
    cert = certify(odd_cycle_uncertified(0))
    assert not cert.certified
    assert any("sign search failed" in r for r in cert.reasons)
    assert cert.D is None


def test_equality_block_with_zero_hessian():
    q = SeparableQcqp([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0], 0.0, (
        BlockConstraint([[0.0]], [0.0], 0.0, "eq"),
        BlockConstraint([[1.0]], [0.0], -1.0),
    ))
    cert = certify(q)
    assert not cert.certified
    assert any("zero Hessian" in r or "Slater" in r for r in cert.reasons)


def test_slater_failure_is_reported():
    cert = certify(scalar_problem(-1.0, 0.0, 0.0, 1.0, 0.0, 1.0))
    assert not cert.certified
    assert any("Slater" in r for r in cert.reasons)


def test_case_two_requires_psd_objective():
    # A0 indefinite, block 1 has b outside the range of A
    q = SeparableQcqp([[-1.0, 0.0], [0.0, 1.0]], [0.0, 0.0], 0.0, (
        BlockConstraint([[1.0, 0.0], [0.0, 0.0]], [0.0, 1.0], -1.0),
    ))
    cert = certify(q)
    assert cert.case is CertificateCase.CASE2
    assert not cert.certified
    assert any("positive semidefinite" in r for r in cert.reasons)


def test_case_two_coupled_rows_rejected():
    q = SeparableQcqp([[1.0, 0.5], [0.5, 1.0]], [0.0, 0.0], 0.0, (
        BlockConstraint([[1.0, 0.0], [0.0, 0.0]], [0.0, 1.0], -1.0),
    ))
    cert = certify(q)
    assert cert.case is CertificateCase.CASE2 and not cert.certified
    assert any("decoupled" in r for r in cert.reasons)


@pytest.mark.parametrize("seed", range(8))
def test_generated_families_certify_and_reverify(seed):
    for q, case in ((certified_case1(seed, 5, 2), CertificateCase.CASE1),
                    (certified_case2(seed, 5, 2), CertificateCase.CASE2)):
        cert = certify(q)
        assert cert.case is case
        assert cert.certified, cert.reasons
        assert verify_certificate(q, cert) == []
        if cert.case is CertificateCase.CASE2:
            assert cert.D[-1] == 1.0


def test_to_dict_is_json_ready():
    import json

    json.dumps(certify(odd_cycle_uncertified(1)).to_dict())
