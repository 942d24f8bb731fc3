import math

import numpy as np
import pytest

from eigensens import (
    DegenerateEigenvaluesError,
    EigenSystem,
    Subspace,
    UnsupportedEstimatorError,
    count_decompositions,
    eif_b,
    eif_b_series,
    eigh,
    estimate,
    subspace_alignment,
    sci,
    scia,
    scia_series,
    sif_b,
    subspace,
)
from eigensens.subspace_diag import influence_records

from conftest import COV_N, COR_N, axis_swap_data, gaussian_data, make_data


def tied_spectrum_data():
    return make_data([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])


def spectrum_planted_data(top_variance: float):
    """Eight points with exactly diagonal covariance diag(top_variance, 1).

    The first row sits at centered coordinates (1, 1) on both eigenvectors.
    """
    c = math.sqrt((8.0 * top_variance - 4.0) / 2.0)
    d = math.sqrt(2.0)
    rows = [
        [1.0, 1.0],
        [-1.0, -1.0],
        [1.0, -1.0],
        [-1.0, 1.0],
        [c, 0.0],
        [-c, 0.0],
        [0.0, d],
        [0.0, -d],
    ]
    return make_data(rows)


class TestSubspaceAlignment:
    def test_identical_subspaces(self):
        rng = np.random.default_rng(2)
        q, _ = np.linalg.qr(rng.normal(size=(5, 2)))
        S = Subspace(q, 2)
        assert subspace_alignment(S, S) == pytest.approx(1.0, abs=1e-12)

    def test_full_space_on_both_sides(self):
        E = eigh(np.diag([3.0, 2.0, 1.0]))
        S = subspace(E, 3)
        rng = np.random.default_rng(3)
        q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        assert subspace_alignment(S, Subspace(q, 3)) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_spans(self):
        full = Subspace(np.array([[1.0], [0.0]]), 1)
        loo = Subspace(np.array([[0.0], [1.0]]), 1)
        assert subspace_alignment(full, loo) == pytest.approx(0.0, abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="differ"):
            subspace_alignment(Subspace(np.eye(2), 2), Subspace(np.eye(3), 3))

    def test_invariant_to_loo_basis_rotation(self):
        rng = np.random.default_rng(6)
        qa, _ = np.linalg.qr(rng.normal(size=(6, 2)))
        qb, _ = np.linalg.qr(rng.normal(size=(6, 2)))
        rot, _ = np.linalg.qr(rng.normal(size=(2, 2)))
        a = subspace_alignment(Subspace(qa, 2), Subspace(qb, 2))
        b = subspace_alignment(Subspace(qa, 2), Subspace(qb @ rot, 2))
        assert a == pytest.approx(b, abs=1e-12)

    def test_invariant_to_sign_flips_of_full_basis(self):
        rng = np.random.default_rng(7)
        qa, _ = np.linalg.qr(rng.normal(size=(6, 2)))
        qb, _ = np.linalg.qr(rng.normal(size=(6, 2)))
        flipped = qa * np.array([-1.0, 1.0])
        assert subspace_alignment(Subspace(qa, 2), Subspace(qb, 2)) == pytest.approx(
            subspace_alignment(Subspace(flipped, 2), Subspace(qb, 2)), abs=1e-12
        )


class TestSifB:
    def test_duplicate_row_is_nearly_neutral(self):
        X = gaussian_data(21, 60, [2.0, 1.0, 0.5])
        values = X.values.copy()
        values[37] = values[12]
        X = make_data(values)
        assert abs(sif_b(X, COV_N, 2, 38)) < 0.5

    def test_full_dimension_is_zero(self, oils):
        with pytest.warns(RuntimeWarning, match="identically zero"):
            assert sif_b(oils, COV_N, 7, 4) == 0.0

    def test_oils_top_spikes_are_the_switching_observations(self, oils):
        E = eigh(estimate(oils, COV_N))
        magnitudes = {
            i: abs(sif_b(oils, COV_N, 2, i, eigen=E))
            for i in range(1, oils.n + 1)
        }
        top7 = sorted(sorted(magnitudes, key=magnitudes.get, reverse=True)[:7])
        assert top7 == [42, 57, 58, 59, 60, 91, 93]

    def test_never_positive(self, oils):
        E = eigh(estimate(oils, COV_N))
        for i in (1, 42, 57, 96):
            assert sif_b(oils, COV_N, 2, i, eigen=E) <= 0.0

    def test_works_for_correlation_estimates(self, oils):
        value = sif_b(oils, COR_N, 2, 57)
        assert np.isfinite(value) and value <= 0.0


class TestEifB:
    def test_zero_at_the_mean(self, centered_with_mean_row):
        X, i = centered_with_mean_row
        assert eif_b(X, 2, i) == pytest.approx(0.0, abs=1e-12)

    def test_direct_formula_arithmetic(self):
        X = spectrum_planted_data(3.0)
        assert eif_b(X, 1, 1) == pytest.approx(-0.5, abs=1e-9)

    def test_oils_obs42_underestimates_badly(self, oils):
        E = eigh(estimate(oils, COV_N))
        empirical = eif_b(oils, 2, i=42, eigen=E)
        sample = sif_b(oils, COV_N, 2, 42, eigen=E)
        assert abs(empirical) < 0.1 * abs(sample)

    def test_degenerate_pair_reported(self):
        with pytest.raises(DegenerateEigenvaluesError, match="1 and 2"):
            eif_b(tied_spectrum_data(), 1, 1)

    def test_rejects_correlation_spec(self, oils):
        with pytest.raises(UnsupportedEstimatorError):
            eif_b(oils, 2, 1, COR_N)


class TestSci:
    def test_axis_swap_reaches_the_upper_bound(self):
        X, i = axis_swap_data()
        assert sci(X, COV_N, 1, i) == pytest.approx((X.n - 1) ** 2, abs=1e-8)

    def test_full_dimension_spans_are_identical(self):
        X = gaussian_data(31, 12, [2.0, 0.7])
        for i in (1, 5, 12):
            assert sci(X, COV_N, 2, i) == pytest.approx(0.0, abs=1e-8)

    def test_oils_top_spikes_match_sif_b_spikes(self, oils):
        E = eigh(estimate(oils, COV_N))
        magnitudes = {
            i: sci(oils, COV_N, 2, i, eigen=E) for i in range(1, oils.n + 1)
        }
        top7 = sorted(sorted(magnitudes, key=magnitudes.get, reverse=True)[:7])
        assert top7 == [42, 57, 58, 59, 60, 91, 93]

    def test_within_bounds(self, oils):
        E = eigh(estimate(oils, COV_N))
        for i in (1, 42, 60):
            value = sci(oils, COV_N, 2, i, eigen=E)
            assert 0.0 <= value <= (oils.n - 1) ** 2


class TestScia:
    def test_zero_at_the_mean(self, centered_with_mean_row):
        X, i = centered_with_mean_row
        assert scia(X, 2, i) == pytest.approx(0.0, abs=1e-12)

    def test_direct_formula_arithmetic(self):
        X = spectrum_planted_data(4.0)
        assert scia(X, 1, 1) == pytest.approx(1.0 / 36.0, abs=1e-9)

    def test_tracks_sci_for_non_extreme_observations(self):
        X = gaussian_data(13, 60, [3.0, 1.5, 0.6, 0.25])
        E = eigh(estimate(X, COV_N))
        scores = (X.values - X.values.mean(axis=0)) @ E.vectors
        inside = np.all(np.abs(scores) <= 2.0 * np.sqrt(E.values), axis=1)
        checked = 0
        for i in range(1, X.n + 1):
            if not inside[i - 1]:
                continue
            sample = sci(X, COV_N, 2, i, eigen=E)
            empirical = scia(X, 2, i, eigen=E)
            assert abs(empirical - sample) <= 0.25 * max(sample, 1e-12)
            checked += 1
        assert checked >= 40

    def test_zero_eigenvalue_rejected(self):
        X = make_data([[1.0, 0.0], [-1.0, 0.0], [0.5, 1.0], [-0.5, -1.0]])
        doctored = EigenSystem(np.array([0.0, -1.0]), np.eye(2), [])
        with pytest.raises(DegenerateEigenvaluesError, match="zero"):
            scia(X, 1, 1, eigen=doctored)


class TestSweeps:
    def test_empirical_series_use_one_decomposition(self, oils):
        with count_decompositions() as window:
            E = eigh(estimate(oils, COV_N))
            b = eif_b_series(oils, 2, eigen=E)
            c = scia_series(oils, 2, eigen=E)
        assert window.total == 1
        assert b.shape == c.shape == (oils.n,)

    def test_series_match_single_calls(self, oils):
        E = eigh(estimate(oils, COV_N))
        b = eif_b_series(oils, 2, eigen=E)
        c = scia_series(oils, 2, eigen=E)
        for i in (1, 42, 96):
            assert b[i - 1] == eif_b(oils, 2, i, eigen=E)
            assert c[i - 1] == scia(oils, 2, i, eigen=E)

    def test_series_sign_conventions(self, oils):
        E = eigh(estimate(oils, COV_N))
        assert np.all(eif_b_series(oils, 2, eigen=E) <= 0.0)
        assert np.all(scia_series(oils, 2, eigen=E) >= 0.0)

    def test_records_empirical_only(self, oils):
        records = influence_records(oils, COV_N, 2)
        assert len(records) == oils.n
        assert records[41].sif_b is None
        assert records[41].eif_b == pytest.approx(eif_b(oils, 2, 42))
        assert records[41].obs_label == oils.row_labels[41]

    def test_records_exact_mode(self, oils):
        E = eigh(estimate(oils, COV_N))
        records = influence_records(oils, COV_N, 2, exact=True, eigen=E)
        assert records[56].sif_b == pytest.approx(
            sif_b(oils, COV_N, 2, 57, eigen=E)
        )
        assert records[56].sci == pytest.approx(sci(oils, COV_N, 2, 57, eigen=E))

    def test_records_exact_mode_parallel_matches_serial(self, oils):
        serial = influence_records(oils, COV_N, 2, exact=True)
        threaded = influence_records(oils, COV_N, 2, exact=True, jobs=4)
        for a, b in zip(serial, threaded):
            assert a.sif_b == b.sif_b
            assert a.sci == b.sci

    def test_records_note_on_degenerate_spectrum(self):
        records = influence_records(tied_spectrum_data(), COV_N, 1)
        assert all(r.eif_b is None and r.scia is None for r in records)
        assert all("nearly equal" in r.note for r in records)
