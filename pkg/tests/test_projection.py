"""
Tests for oml_stream.core.projection module.
"""

import numpy as np
import pytest

from oml_stream.core.projection import (
    ProjectionP,
    auto_ridge,
    fit_projection,
    project_instance,
    project_rows,
)
from oml_stream.exceptions import ConfigError, NumericError, ShapeError


class TestFitProjection:
    """Test the ridge least-squares fit."""

    def test_identity_design(self):
        Y = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        P = fit_projection(np.eye(3), Y, ridge=0.0)
        assert np.array_equal(P.matrix, Y)

    def test_scalar_ridge(self):
        P = fit_projection(np.array([[1.0]]), np.array([[1.0]]), ridge=1.0)
        assert P.matrix[0, 0] == pytest.approx(0.5)
        assert P.ridge == 1.0

    def test_normal_equations_full_rank(self, rng):
        X = rng.normal(size=(40, 5))
        Y = (rng.random((40, 3)) < 0.5).astype(float)
        P = fit_projection(X, Y, ridge=0.0)
        assert np.allclose(X.T @ (X @ P.matrix - Y), 0.0, atol=1e-8)

    def test_normal_equations_suite(self):
        rng = np.random.default_rng(2024)
        for _ in range(200):
            n, p, q = (int(v) for v in rng.integers(1, 33, size=3))
            X = rng.normal(size=(n, p))
            Y = (rng.random((n, q)) < 0.4).astype(float)
            ridge = float(rng.choice([0.0, 1e-3, 0.5]))
            if ridge == 0.0 and n < p + 5:
                ridge = 1e-3
            P = fit_projection(X, Y, ridge=ridge)
            residual = (X.T @ X + ridge * np.eye(p)) @ P.matrix - X.T @ Y
            bound = 1e-8 * (1.0 + np.linalg.norm(X.T @ Y))
            assert np.linalg.norm(residual) <= bound

    def test_min_norm_when_singular(self):
        # duplicated column: X^T X is singular
        X = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
        Y = np.array([[1.0], [2.0], [3.0]])
        P = fit_projection(X, Y, ridge=0.0)
        assert np.allclose(P.matrix, [[0.5], [0.5]])

    def test_auto_ridge(self):
        X = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert auto_ridge(X) == pytest.approx(1e-6 * 30.0 / 2)
        P = fit_projection(X, np.eye(2))
        assert P.ridge == pytest.approx(auto_ridge(X))

    def test_ridge_shrinks(self, rng):
        X = rng.normal(size=(20, 6))
        Y = (rng.random((20, 4)) < 0.5).astype(float)
        norms = [
            np.linalg.norm(fit_projection(X, Y, ridge=r).matrix)
            for r in (0.0, 0.1, 1.0, 10.0, 100.0)
        ]
        assert all(a >= b - 1e-12 for a, b in zip(norms, norms[1:], strict=False))

    def test_non_finite_input(self):
        X = np.array([[1.0, np.nan]])
        with pytest.raises(NumericError):
            fit_projection(X, np.array([[1.0]]))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            fit_projection(np.ones((3, 2)), np.ones((2, 2)))

    def test_negative_ridge(self):
        with pytest.raises(ConfigError):
            fit_projection(np.ones((3, 2)), np.ones((3, 2)), ridge=-1.0)


class TestProjectInstance:
    """Test projecting instances into label space."""

    def test_zero_projection(self):
        P = ProjectionP(np.zeros((3, 2)))
        assert project_instance(P, np.array([1.0, 2.0, 3.0])).tolist() == [0.0, 0.0]

    def test_identity_projection(self):
        x = np.array([0.5, -2.0])
        assert project_instance(ProjectionP(np.eye(2)), x).tolist() == x.tolist()

    def test_hand_product(self):
        P = ProjectionP(np.array([[1.0, 2.0], [0.0, 1.0]]))
        assert project_instance(P, np.array([1.0, 1.0])).tolist() == [1.0, 3.0]

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            project_instance(ProjectionP(np.eye(2)), np.ones(3))

    def test_rows_match_instances(self, rng):
        P = ProjectionP(rng.normal(size=(4, 3)))
        X = rng.normal(size=(5, 4))
        rows = project_rows(P, X)
        for x, row in zip(X, rows, strict=True):
            assert np.allclose(project_instance(P, x), row)


class TestProjectionP:
    """Test the frozen projection matrix."""

    def test_read_only(self):
        P = ProjectionP(np.eye(2))
        with pytest.raises(ValueError):
            P.matrix[0, 0] = 3.0

    def test_non_finite(self):
        with pytest.raises(NumericError):
            ProjectionP(np.array([[np.inf]]))

    def test_frobenius(self):
        P = ProjectionP(np.array([[1.0, 2.0], [2.0, 0.0]]))
        assert (P.p, P.q, P.frobenius_sq) == (2, 2, 9.0)
