"""Covariance functions shared by the Gaussian process regressor.

All three kernels are parameterized by a signal deviation sigma_f and a
length scale sigma_l and depend on the Euclidean distance r between inputs:

    squaredexponential: sigma_f^2 exp(-r^2 / (2 sigma_l^2))
    matern32:           sigma_f^2 (1 + sqrt(3) r / sigma_l) exp(-sqrt(3) r / sigma_l)
    matern52:           sigma_f^2 (1 + sqrt(5) r / sigma_l + 5 r^2 / (3 sigma_l^2))
                                  exp(-sqrt(5) r / sigma_l)
"""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

from sensorcal.errors import DataError

KERNEL_IDS = ("squaredexponential", "matern32", "matern52")


def _check_params(sigma_f: float, sigma_l: float) -> None:
    if sigma_f <= 0 or sigma_l <= 0:
        raise DataError(f"kernel parameters must be positive, got ({sigma_f}, {sigma_l})")


def _apply(kind: str, r: np.ndarray, sigma_f: float, sigma_l: float) -> np.ndarray:
    sf2 = sigma_f * sigma_f
    if kind == "squaredexponential":
        return sf2 * np.exp(-0.5 * (r / sigma_l) ** 2)
    if kind == "matern32":
        a = np.sqrt(3.0) * r / sigma_l
        return sf2 * (1.0 + a) * np.exp(-a)
    if kind == "matern52":
        a = np.sqrt(5.0) * r / sigma_l
        return sf2 * (1.0 + a + a * a / 3.0) * np.exp(-a)
    raise DataError(f"unknown kernel {kind!r}; expected one of {KERNEL_IDS}")


def kernel_eval(kind: str, sigma_f: float, sigma_l: float, x: np.ndarray, xp: np.ndarray) -> float:
    """Covariance between two single points."""
    _check_params(sigma_f, sigma_l)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xp = np.atleast_1d(np.asarray(xp, dtype=float))
    if x.shape != xp.shape:
        raise DataError("points must have equal dimension")
    r = float(np.linalg.norm(x - xp))
    return float(_apply(kind, np.array(r), sigma_f, sigma_l))


def kernel_matrix(
    kind: str, sigma_f: float, sigma_l: float, X: np.ndarray, Xp: np.ndarray = None
) -> np.ndarray:
    """Gram matrix K(X, Xp) (Xp defaults to X, giving the symmetric case)."""
    _check_params(sigma_f, sigma_l)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if Xp is None:
        r = cdist(X, X)
        # cdist self-distances are exact zeros, so diagonals hit sigma_f^2
        k = _apply(kind, r, sigma_f, sigma_l)
        return 0.5 * (k + k.T)
    Xp = np.atleast_2d(np.asarray(Xp, dtype=float))
    if X.shape[1] != Xp.shape[1]:
        raise DataError("dimension mismatch between X and Xp")
    return _apply(kind, cdist(X, Xp), sigma_f, sigma_l)


def kernel_matrix_with_grads(
    kind: str, sigma_f: float, sigma_l: float, X: np.ndarray
):
    """Gram matrix plus derivatives w.r.t. log(sigma_f) and log(sigma_l)."""
    _check_params(sigma_f, sigma_l)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    r = cdist(X, X)
    k = _apply(kind, r, sigma_f, sigma_l)
    dk_dlog_sf = 2.0 * k
    sf2 = sigma_f * sigma_f
    if kind == "squaredexponential":
        dk_dlog_sl = k * (r / sigma_l) ** 2
    elif kind == "matern32":
        a = np.sqrt(3.0) * r / sigma_l
        dk_dlog_sl = sf2 * a * a * np.exp(-a)
    elif kind == "matern52":
        a = np.sqrt(5.0) * r / sigma_l
        dk_dlog_sl = sf2 * (a * a / 3.0) * (1.0 + a) * np.exp(-a)
    else:
        raise DataError(f"unknown kernel {kind!r}")
    return k, dk_dlog_sf, dk_dlog_sl
