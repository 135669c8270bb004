import numpy as np
import pandas as pd
import pytest

from covcast.cholpipe import (
    FactorSeries,
    build_factor_series,
    cholesky_factor,
    flatten_factor,
    lower_triangular_index_map,
    reconstruct,
)
from covcast.errors import IndefiniteMatrixError, InsufficientHistoryError

from conftest import random_psd


class TestCholeskyFactor:
    def test_identity(self):
        assert cholesky_factor(np.eye(3)) == pytest.approx(np.eye(3))

    def test_hand_factorization(self):
        sigma = np.array([[4.0, 2.0], [2.0, 3.0]])
        lower = cholesky_factor(sigma)
        assert lower == pytest.approx(np.array([[2.0, 0.0], [1.0, np.sqrt(2.0)]]), abs=1e-12)
        assert lower @ lower.T == pytest.approx(sigma, abs=1e-12)

    def test_zero_matrix(self):
        assert cholesky_factor(np.zeros((4, 4))) == pytest.approx(np.zeros((4, 4)))

    def test_exactly_singular_psd(self):
        v = np.array([1.0, 2.0, 3.0])
        sigma = np.outer(v, v)  # rank one
        lower = cholesky_factor(sigma)
        assert lower @ lower.T == pytest.approx(sigma, abs=1e-10)
        assert np.triu(lower, 1) == pytest.approx(np.zeros((3, 3)))

    def test_indefinite_raises(self):
        with pytest.raises(IndefiniteMatrixError):
            cholesky_factor(np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_round_trip_random_psd(self, rng):
        for _ in range(100):
            n = int(rng.integers(2, 12))
            sigma = random_psd(rng, n, scale=0.05)
            lower = cholesky_factor(sigma)
            err = np.linalg.norm(lower @ lower.T - sigma) / max(np.linalg.norm(sigma), 1e-300)
            assert err <= 1e-10


class TestIndexMapAndReconstruct:
    def test_two_asset_order(self):
        assert lower_triangular_index_map(2) == [(0, 0), (1, 0), (1, 1)]

    def test_index_map_is_bijection(self):
        for n in range(1, 8):
            idx = lower_triangular_index_map(n)
            assert len(idx) == n * (n + 1) // 2
            assert len(set(idx)) == len(idx)
            assert all(i >= j for i, j in idx)

    def test_identity_round_trip(self):
        factors = flatten_factor(np.eye(3))
        assert reconstruct(factors, 3) == pytest.approx(np.eye(3))

    def test_arbitrary_vectors_give_psd(self, rng):
        for _ in range(200):
            n = int(rng.integers(1, 9))
            vec = rng.normal(0, 2, size=n * (n + 1) // 2)
            sigma = reconstruct(vec, n)
            assert sigma == pytest.approx(sigma.T, abs=1e-14)
            assert np.linalg.eigvalsh(sigma)[0] >= -1e-10 * max(np.linalg.eigvalsh(sigma)[-1], 1e-300)

    def test_negative_diagonal_clamped(self):
        sigma = reconstruct(np.array([-5.0]), 1)
        assert sigma[0, 0] == 0.0

    def test_flatten_reconstruct_identity_on_psd(self, rng):
        for _ in range(50):
            sigma = random_psd(rng, 5, scale=0.1)
            lower = cholesky_factor(sigma)
            back = reconstruct(flatten_factor(lower), 5)
            assert np.linalg.norm(back - sigma) <= 1e-10 * max(np.linalg.norm(sigma), 1e-300)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            reconstruct(np.zeros(4), 2)


class TestBuildFactorSeries:
    def test_constant_returns_zero_series(self):
        series = build_factor_series(np.full((40, 3), 0.01), window=20)
        assert series.values == pytest.approx(np.zeros_like(series.values))
        assert len(series) == 21

    def test_column_contract(self, rng):
        series = build_factor_series(rng.normal(0, 0.02, size=(30, 2)), window=10)
        assert series.column_names == ["L_0_0", "L_1_0", "L_1_1"]
        assert series.index_map == [(0, 0), (1, 0), (1, 1)]

    def test_round_trip_matches_rolling_cov(self, rng):
        from covcast.estimators import sample_cov

        r = rng.normal(0, 0.02, size=(50, 4))
        w = 15
        series = build_factor_series(r, window=w)
        for row in range(len(series)):
            direct = sample_cov(r[row : row + w])
            assert np.linalg.norm(series.reconstruct_row(row) - direct) <= 1e-10 * max(
                np.linalg.norm(direct), 1e-300
            )

    def test_persistence_round_trip(self, rng):
        from covcast.forecasters import persistence_forecast

        r = rng.normal(0, 0.02, size=(40, 3))
        series = build_factor_series(r, window=20)
        sigma = reconstruct(persistence_forecast(series.values), 3)
        assert sigma == pytest.approx(series.reconstruct_row(len(series) - 1), abs=1e-12)

    def test_insufficient_history(self):
        with pytest.raises(InsufficientHistoryError):
            build_factor_series(np.zeros((10, 2)), window=10)

    def test_csv_round_trip(self, rng, tmp_path):
        dates = pd.date_range("2021-01-01", periods=30, freq="D")
        series = build_factor_series(
            rng.normal(0, 0.02, size=(30, 3)), window=10, dates=dates
        )
        path = tmp_path / "factors.csv"
        series.to_csv(path)
        loaded = FactorSeries.from_csv(path)
        assert loaded.n_assets == 3
        assert loaded.values == pytest.approx(series.values, abs=1e-12)
        assert list(loaded.dates) == list(series.dates)
