"""Validated dense symmetric linear algebra: construction gates, factorization,
solves, and submatrix extraction."""

import math

import numpy as np
import pytest

from artifact.linalg import (
    MAX_DIM,
    PD_TOLERANCE,
    CholeskyFactor,
    CorrelationMatrix,
    IndexSubset,
    NotPositiveDefinite,
    principal_submatrix,
    solve_spd,
    spd_factorize,
    submatrix,
)
from conftest import coupled_pair_matrix, equi_matrix, random_correlation


class TestIndexSubset:
    def test_of_sorts_and_dedupes_via_validation(self):
        s = IndexSubset.of(2, 1)
        assert s.members == (1, 2)
        assert str(s) == "{1,2}"

    def test_duplicates_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            IndexSubset((2, 2))

    def test_labels_start_at_one(self):
        with pytest.raises(ValueError, match=">= 1"):
            IndexSubset((0, 1))

    def test_full_and_complement(self):
        assert IndexSubset.full(3).members == (1, 2, 3)
        assert IndexSubset.of(1, 3).complement(4).members == (2, 4)
        assert IndexSubset.full(2).complement(2).members == ()

    def test_as_indices_zero_based(self):
        assert IndexSubset.of(1, 3).as_indices().tolist() == [0, 2]

    def test_positions_in_superset(self):
        sup = IndexSubset.of(2, 5, 7)
        assert IndexSubset.of(5, 7).positions_in(sup).tolist() == [1, 2]
        with pytest.raises(ValueError, match="not contained"):
            IndexSubset.of(3).positions_in(sup)

    def test_validate_within(self):
        IndexSubset.of(1, 4).validate_within(4)
        with pytest.raises(ValueError, match="out of range"):
            IndexSubset.of(1, 5).validate_within(4)

    def test_container_protocol(self):
        s = IndexSubset.of(1, 3)
        assert len(s) == 2
        assert list(s) == [1, 3]
        assert 3 in s and 2 not in s


class TestCorrelationMatrix:
    def test_identity_accepted(self):
        m = CorrelationMatrix(np.eye(3))
        assert m.dim == 3
        assert repr(m) == "CorrelationMatrix(dim=3)"

    def test_entries_read_only(self):
        m = CorrelationMatrix(np.eye(2))
        with pytest.raises(ValueError):
            m.entries[0, 1] = 0.5

    def test_non_square_rejected(self):
        with pytest.raises(ValueError, match="square"):
            CorrelationMatrix(np.ones((2, 3)))

    def test_dimension_cap(self):
        CorrelationMatrix(np.eye(MAX_DIM))
        with pytest.raises(ValueError, match="outside supported range"):
            CorrelationMatrix(np.eye(MAX_DIM + 1))

    def test_asymmetry_names_the_entry(self):
        a = np.eye(3)
        a[0, 2] = 0.5
        a[2, 0] = 0.5 + 1e-13
        with pytest.raises(ValueError, match=r"\(1,3\)"):
            CorrelationMatrix(a)

    def test_diagonal_must_be_one_exactly(self):
        a = np.eye(2)
        a[1, 1] = 1.0 + 1e-15
        with pytest.raises(ValueError, match=r"\(2,2\)"):
            CorrelationMatrix(a)

    def test_off_diagonal_strictly_below_one(self):
        a = np.array([[1.0, 1.0], [1.0, 1.0]])
        with pytest.raises(ValueError, match="strictly below 1"):
            CorrelationMatrix(a)

    def test_not_positive_definite_at_construction(self):
        # equi-correlation needs rho > -1/(d-1); -0.6 < -0.5 fails at minor 3
        a = np.full((3, 3), -0.6)
        np.fill_diagonal(a, 1.0)
        with pytest.raises(NotPositiveDefinite) as err:
            CorrelationMatrix(a)
        assert err.value.minor == 3
        assert err.value.pivot <= PD_TOLERANCE

    def test_nonfinite_rejected(self):
        a = np.eye(2)
        a[0, 1] = a[1, 0] = np.nan
        with pytest.raises(ValueError, match="finite"):
            CorrelationMatrix(a)


class TestSpdFactorize:
    def test_identity(self):
        fact = spd_factorize(np.eye(2))
        assert isinstance(fact, CholeskyFactor)
        assert np.array_equal(fact.lower, np.eye(2))
        assert fact.log_det == 0.0
        assert fact.dim == 2

    def test_two_by_two_log_det(self):
        fact = spd_factorize(np.array([[1.0, 0.6], [0.6, 1.0]]))
        assert fact.log_det == pytest.approx(math.log(0.64), abs=1e-12)

    def test_log_det_matches_one_minus_rho_squared(self):
        for rho in np.linspace(-0.95, 0.95, 39):
            fact = spd_factorize(np.array([[1.0, rho], [rho, 1.0]]))
            assert fact.log_det == pytest.approx(math.log1p(-rho * rho), abs=1e-12)

    def test_invalid_correlation_value_fails_pd(self):
        with pytest.raises(NotPositiveDefinite):
            spd_factorize(np.array([[1.0, 1.01], [1.01, 1.0]]))

    def test_visibly_asymmetric_rejected(self):
        with pytest.raises(ValueError, match="asymmetry"):
            spd_factorize(np.array([[1.0, 0.2], [0.3, 1.0]]))

    def test_reconstruction_and_triangularity(self, rng):
        sigma = random_correlation(rng, 12)
        fact = spd_factorize(sigma)
        assert np.allclose(np.triu(fact.lower, 1), 0.0)
        assert np.allclose(fact.lower @ fact.lower.T, sigma.entries, atol=1e-12)
        _, ref = np.linalg.slogdet(sigma.entries)
        assert fact.log_det == pytest.approx(ref, abs=1e-10)

    def test_dimension_cap(self):
        with pytest.raises(ValueError, match="exceeds supported maximum"):
            spd_factorize(np.eye(MAX_DIM + 1))


class TestSolveSpd:
    def test_identity(self):
        fact = spd_factorize(np.eye(2))
        assert np.allclose(solve_spd(fact, np.array([1.0, 1.0])), [1.0, 1.0])

    def test_equicorrelated_pair(self):
        fact = spd_factorize(np.array([[1.0, 0.6], [0.6, 1.0]]))
        x = solve_spd(fact, np.array([1.0, 1.0]))
        assert x == pytest.approx([0.625, 0.625], abs=1e-14)

    def test_uncorrelated_passthrough(self):
        fact = spd_factorize(np.array([[1.0, 0.0], [0.0, 1.0]]))
        assert np.allclose(solve_spd(fact, np.array([3.0, -2.0])), [3.0, -2.0])

    def test_roundtrip_recovers_solution(self, rng):
        sigma = random_correlation(rng, 12)
        x = rng.standard_normal(12)
        rhs = sigma.entries @ x
        got = solve_spd(spd_factorize(sigma), rhs)
        assert np.linalg.norm(got - x) <= 1e-10 * np.linalg.norm(x)

    def test_matrix_rhs(self, rng):
        sigma = random_correlation(rng, 5)
        rhs = rng.standard_normal((5, 3))
        got = solve_spd(spd_factorize(sigma), rhs)
        assert np.allclose(sigma.entries @ got, rhs, atol=1e-12)

    def test_dimension_mismatch(self):
        fact = spd_factorize(np.eye(3))
        with pytest.raises(ValueError, match="leading dimension"):
            solve_spd(fact, np.ones(2))


class TestSubmatrix:
    def test_identity_principal_block(self):
        sigma = CorrelationMatrix(np.eye(3))
        block = submatrix(sigma, IndexSubset.of(1, 3), IndexSubset.of(1, 3))
        assert np.array_equal(block, np.eye(2))

    def test_coupled_pair_principal_block(self):
        rho = 0.3
        sigma = coupled_pair_matrix(rho)
        block = submatrix(sigma, IndexSubset.of(1, 2), IndexSubset.of(1, 2))
        assert np.array_equal(block, [[1.0, rho], [rho, 1.0]])

    def test_coupled_pair_cross_block(self):
        rho = 0.3
        sigma = coupled_pair_matrix(rho)
        cross = submatrix(sigma, IndexSubset.of(3), IndexSubset.of(1, 2))
        assert np.array_equal(cross, [[math.sqrt(2.0) * rho] * 2])

    def test_out_of_range_label(self):
        sigma = CorrelationMatrix(np.eye(3))
        with pytest.raises(ValueError, match="out of range"):
            submatrix(sigma, IndexSubset.of(4), IndexSubset.of(1))

    def test_empty_subset_rejected(self):
        sigma = CorrelationMatrix(np.eye(3))
        with pytest.raises(ValueError, match="nonempty"):
            submatrix(sigma, IndexSubset(()), IndexSubset.of(1))

    def test_principal_submatrix_is_valid_correlation(self, rng):
        sigma = random_correlation(rng, 6)
        sub = principal_submatrix(sigma, IndexSubset.of(2, 4, 5))
        assert isinstance(sub, CorrelationMatrix)
        assert sub.dim == 3

    def test_every_principal_block_factorizes(self, rng):
        import itertools

        sigma = random_correlation(rng, 5)
        for r in range(1, 6):
            for combo in itertools.combinations(range(1, 6), r):
                spd_factorize(principal_submatrix(sigma, IndexSubset(combo)))


def test_equi_matrix_positive_definite_boundary():
    # valid strictly above rho = -1/(d-1)
    equi_matrix(4, -0.33)
    with pytest.raises(NotPositiveDefinite):
        equi_matrix(4, -0.34)
