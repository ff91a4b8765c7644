"""Ordinary least squares / ridge regression.

Serves both as the plain multiple-linear-regression baseline and as the
linear readout solver for the echo state network.  The intercept is handled
by column augmentation and is never penalized; the penalized problem is
solved as an augmented least-squares system through a rank-revealing QR
factorization, so wide and nearly collinear feature blocks (reservoir
readouts) stay numerically stable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from sensorcal.errors import DataError, SingularityError


@dataclass(frozen=True)
class RidgeSpec:
    """Nonnegative regularization weight; 0 means pure least squares."""

    lam: float = 0.0

    def __post_init__(self):
        if self.lam < 0:
            raise DataError(f"ridge weight must be >= 0, got {self.lam}")


@dataclass(frozen=True)
class MlrModel:
    beta: np.ndarray
    intercept: float
    feature_dim: int
    ridge_lambda: float = 0.0

    def __post_init__(self):
        beta = np.ascontiguousarray(self.beta, dtype=float)
        if beta.shape != (self.feature_dim,):
            raise DataError("beta length does not match feature_dim")
        if not np.all(np.isfinite(beta)) or not np.isfinite(self.intercept):
            raise DataError("coefficients must be finite")
        beta.flags.writeable = False
        object.__setattr__(self, "beta", beta)


def fit_mlr(X: np.ndarray, y: np.ndarray, ridge: RidgeSpec = RidgeSpec()) -> MlrModel:
    """Minimize ||y - X beta - b||^2 + lam ||beta||^2 (intercept unpenalized).

    Raises SingularityError naming the offending columns when X is rank
    deficient and lam is 0.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise DataError("X must be [n, p]")
    n, p = X.shape
    if y.shape != (n,):
        raise DataError(f"y must have shape ({n},)")
    if n < 1:
        raise DataError("need at least one sample")
    if np.isnan(X).any() or np.isnan(y).any():
        raise DataError("missing entries must be excluded before fitting")

    A = np.hstack([X, np.ones((n, 1))])
    rhs = y
    if ridge.lam > 0.0:
        tail = np.hstack([np.sqrt(ridge.lam) * np.eye(p), np.zeros((p, 1))])
        A = np.vstack([A, tail])
        rhs = np.concatenate([y, np.zeros(p)])

    coef, _res, rank, _sv = scipy.linalg.lstsq(A, rhs, lapack_driver="gelsy")
    if ridge.lam == 0.0 and rank < p + 1:
        # rank-revealing pivoted QR identifies the dependent columns
        _q, r, piv = scipy.linalg.qr(A, mode="economic", pivoting=True)
        diag = np.abs(np.diag(r))
        tol = diag.max() * max(A.shape) * np.finfo(float).eps if diag.size else 0.0
        eff_rank = int((diag > tol).sum())
        offending = sorted(int(c) for c in piv[eff_rank:] if c < p)
        raise SingularityError(offending)
    return MlrModel(
        beta=coef[:p], intercept=float(coef[p]), feature_dim=p, ridge_lambda=ridge.lam
    )


def predict_mlr(m: MlrModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != m.feature_dim:
        raise DataError(f"X must be [n, {m.feature_dim}]")
    out = X @ m.beta + m.intercept
    if not np.all(np.isfinite(out)):
        raise DataError("prediction produced non-finite values")
    return out


def readout_ridge_lambda(X: np.ndarray) -> float:
    """Default readout penalty, 1e-8 * trace(X^T X) / p.

    Reproduces pseudo-inverse readout training in the small-penalty limit
    while keeping nearly collinear reservoir blocks well conditioned.
    """
    X = np.asarray(X, dtype=float)
    p = X.shape[1]
    if p == 0:
        return 0.0
    return 1e-8 * float(np.einsum("ij,ij->", X, X)) / p


def mlr_to_fields(m: MlrModel) -> dict:
    return {
        "kind": "mlr",
        "feature_dim": m.feature_dim,
        "ridge_lambda": m.ridge_lambda,
        "intercept": m.intercept,
        "beta": m.beta,
    }


def mlr_from_fields(fields: dict) -> MlrModel:
    return MlrModel(
        beta=fields["beta"],
        intercept=fields["intercept"],
        feature_dim=fields["feature_dim"],
        ridge_lambda=fields.get("ridge_lambda", 0.0),
    )
