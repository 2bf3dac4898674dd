"""
Feature-to-label-space projection P, fit once on the seed set by ridge least squares.
"""

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from oml_stream.exceptions import ConfigError, ShapeError, require_finite

logger = logging.getLogger(__name__)

AUTO_RIDGE_SCALE = 1e-6


@dataclass(frozen=True)
class ProjectionP:
    """p x q matrix mapping an instance x to P^T x in label space."""

    matrix: np.ndarray
    ridge: float = 0.0

    def __post_init__(self) -> None:
        matrix = np.array(self.matrix, dtype=np.float64, order="C")
        if matrix.ndim != 2:
            raise ShapeError("P must be a 2-d matrix", actual=list(matrix.shape))
        require_finite("projection matrix", matrix)
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @property
    def p(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def q(self) -> int:
        return int(self.matrix.shape[1])

    @property
    def frobenius_sq(self) -> float:
        return float(np.sum(self.matrix**2))


def auto_ridge(X: np.ndarray) -> float:
    """1e-6 * trace(X^T X) / p."""
    return AUTO_RIDGE_SCALE * float(np.sum(X * X)) / X.shape[1]


def fit_projection(
    X: np.ndarray, Y: np.ndarray, ridge: float | None = None
) -> ProjectionP:
    """
    Minimize 1/2 ||P^T X^T - Y^T||_F^2 + ridge/2 ||P||_F^2.

    Solves (X^T X + ridge I) P = X^T Y by Cholesky; rank-deficient or
    ill-conditioned systems fall back to least squares, which gives the
    minimum-norm solution when ridge is 0.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise ShapeError(
            "X and Y must be matrices with the same number of rows",
            expected="(n, p) and (n, q)",
            actual=[list(X.shape), list(Y.shape)],
        )
    if X.shape[0] < 1:
        raise ShapeError("need at least one example to fit P")
    require_finite("fit_projection input", X, Y)

    if ridge is None:
        ridge = auto_ridge(X)
    if ridge < 0:
        raise ConfigError(f"ridge must be >= 0, got {ridge}")

    n, p = X.shape
    gram = X.T @ X
    rhs = X.T @ Y
    if ridge > 0:
        gram[np.diag_indices(p)] += ridge

    matrix: np.ndarray | None = None
    if ridge > 0 or np.linalg.matrix_rank(X) == p:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
                matrix = scipy.linalg.solve(gram, rhs, assume_a="pos")
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning):
            logger.debug("normal equations ill-conditioned, using least squares")

    if matrix is None:
        if ridge > 0:
            # ridge problem as an augmented least-squares system
            X_aug = np.vstack([X, np.sqrt(ridge) * np.eye(p)])
            Y_aug = np.vstack([Y, np.zeros((p, Y.shape[1]))])
            matrix = scipy.linalg.lstsq(X_aug, Y_aug)[0]
        else:
            matrix = scipy.linalg.lstsq(X, Y)[0]

    require_finite("fitted projection", matrix)
    logger.info("fitted P (%d x %d) on %d examples, ridge=%.3g", p, Y.shape[1], n, ridge)
    return ProjectionP(matrix=matrix, ridge=float(ridge))


def project_instance(P: ProjectionP, x: np.ndarray) -> np.ndarray:
    """P^T x."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (P.p,):
        raise ShapeError(
            "feature vector length does not match P", expected=P.p, actual=list(x.shape)
        )
    return P.matrix.T @ x


def project_rows(P: ProjectionP, X: np.ndarray) -> np.ndarray:
    """Row-wise P^T x for an n x p matrix."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != P.p:
        raise ShapeError(
            "feature matrix width does not match P", expected=P.p, actual=list(X.shape)
        )
    return X @ P.matrix
