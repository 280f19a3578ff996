from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from avqe.errors import DenseCapExceeded, H2TermBlowup, LambdaOutOfRange
from avqe.pauli import (AdiabaticPath, PauliSum, apply_pauli, build_matrix, interpolate,
                        multiply_strings, operator_norm, path_norm_sup)

from conftest import kron_matrix, kron_sum, random_sum

letters3 = ["".join(p) for p in itertools.product("IXYZ", repeat=3)]


def test_z_matrix():
    np.testing.assert_array_equal(build_matrix(PauliSum.single("Z")), np.diag([1, -1]))


def test_identity_matrix():
    np.testing.assert_array_equal(build_matrix(PauliSum.single("I")), np.eye(2))


def test_tfim_pair_matrix():
    h = PauliSum(2, [(-1, "ZZ"), (-1, "XI"), (-1, "IX")])
    m = build_matrix(h)
    np.testing.assert_allclose(np.diag(m), [-1, 1, 1, -1])
    expected = np.zeros((4, 4))
    for a, b in [(0, 1), (0, 2), (1, 3), (2, 3)]:
        expected[a, b] = expected[b, a] = -1
    np.testing.assert_allclose(m - np.diag(np.diag(m)), expected)


@pytest.mark.parametrize("letters", letters3)
def test_matrix_matches_kronecker(letters):
    np.testing.assert_allclose(build_matrix(PauliSum.single(letters)), kron_matrix(letters), atol=0)


def test_apply_pauli_matches_matrix(rng):
    psi = rng.normal(size=8) + 1j * rng.normal(size=8)
    for letters in letters3:
        np.testing.assert_allclose(apply_pauli(letters, psi), kron_matrix(letters) @ psi, atol=1e-14)


def test_multiply_strings_matches_matrices():
    for a, b in itertools.product(["".join(p) for p in itertools.product("IXYZ", repeat=2)], repeat=2):
        phase, s = multiply_strings(a, b)
        np.testing.assert_allclose(kron_matrix(a) @ kron_matrix(b), phase * kron_matrix(s), atol=1e-14)


def test_empty_sum_is_zero_matrix():
    np.testing.assert_array_equal(build_matrix(PauliSum(2)), np.zeros((4, 4)))


def test_duplicates_merge_and_zeros_drop():
    h = PauliSum(2, [(1.0, "XZ"), (0.5, "XZ"), (1.0, "ZZ"), (-1.0, "ZZ")])
    assert h.as_dict() == {"XZ": 1.5}
    assert PauliSum(1, [(1e-15, "X")]).terms == ()


def test_coefficient_norm():
    h = PauliSum(2, [(3.0, "XZ"), (4.0, "ZI")])
    assert h.coefficient_norm == pytest.approx(5.0)


def test_dense_cap(monkeypatch):
    monkeypatch.setenv("AVQE_DENSE_CAP", "2")
    with pytest.raises(DenseCapExceeded):
        build_matrix(PauliSum.single("ZZZ"))


def test_operator_norm_examples():
    assert operator_norm(PauliSum.single("Z")) == pytest.approx(1.0)
    assert operator_norm(PauliSum(1, [(1, "X"), (-1, "Z")])) == pytest.approx(math.sqrt(2))
    h = PauliSum(2, [(-1, "ZZ"), (-1, "XI"), (-1, "IX")])
    assert operator_norm(h) == pytest.approx(math.sqrt(5))


def test_interpolate_endpoints_and_midpoint():
    path = AdiabaticPath(PauliSum.single("Z"), PauliSum.single("X"))
    assert interpolate(path, 0.0) == path.h_initial
    assert interpolate(path, 1.0) == path.h_final
    assert interpolate(path, 0.5).as_dict() == {"Z": 0.5, "X": 0.5}
    with pytest.raises(LambdaOutOfRange):
        interpolate(path, 1.5)
    with pytest.raises(LambdaOutOfRange):
        interpolate(path, -1e-9)


def test_path_norms_examples():
    n = path_norm_sup(AdiabaticPath(PauliSum.single("Z"), PauliSum.single("X")), 101)
    assert n.h_op == pytest.approx(1.0, abs=1e-12)
    assert n.dh_op == pytest.approx(math.sqrt(2))
    const = path_norm_sup(AdiabaticPath(PauliSum.single("Z"), PauliSum.single("Z")), 11)
    assert const.dh_op == 0.0
    double = path_norm_sup(AdiabaticPath(PauliSum.single("Z", 2), PauliSum.single("X", 2)), 101)
    assert double.h_op == pytest.approx(2.0, abs=1e-12)


def test_path_norm_convex_maximum_at_endpoint():
    # the operator norm is convex in lambda, so the sup sits at an endpoint
    path = AdiabaticPath(PauliSum.single("Z"), PauliSum(1, [(-1, "Z"), (3, "X")]))
    n = path_norm_sup(path, 11)
    assert n.h_op == pytest.approx(math.sqrt(10), rel=1e-12)


def test_square_matches_dense(rng):
    h = random_sum(rng, 3, 5)
    np.testing.assert_allclose(build_matrix(h.square()), kron_sum(h) @ kron_sum(h), atol=1e-12)
    with pytest.raises(H2TermBlowup):
        h.square(cap=1)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 4))
def test_random_sums_hermitian_and_match_oracle(seed, n):
    rng = np.random.default_rng(seed)
    h = random_sum(rng, n, 5)
    m = build_matrix(h)
    assert np.max(np.abs(m - m.conj().T)) <= 1e-12
    np.testing.assert_allclose(m, kron_sum(h), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_interpolation_triangle_and_bit_exact(seed):
    rng = np.random.default_rng(seed)
    path = AdiabaticPath(random_sum(rng, 2, 3), random_sum(rng, 2, 3))
    a, b = path.h_initial.as_dict(), path.h_final.as_dict()
    na, nb = operator_norm(path.h_initial), operator_norm(path.h_final)
    for lam in np.linspace(0, 1, 11):
        h = interpolate(path, lam)
        for s, c in h.as_dict().items():
            assert c == (1.0 - lam) * a.get(s, 0.0) + lam * b.get(s, 0.0)
        assert operator_norm(h) <= (1 - lam) * na + lam * nb + 1e-12
