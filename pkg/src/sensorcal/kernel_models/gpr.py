"""Gaussian process regression with a constant basis and exact inference.

The model is y = h beta + f(x) + noise with h = 1, f ~ GP(0, k); beta is the
generalized least squares offset and the latent covariance is one of the
kernels in kernels.py.  Hyperparameters (sigma_f, sigma_l, noise std) can be
refined by maximizing the log marginal likelihood (beta profiled out) with a
bounded quasi-Newton loop and analytic gradients.

Exact inference costs O(n^3); a hard warning is issued above n = 10000 and
no sparse approximation is attempted.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.optimize

from sensorcal.errors import DataError
from sensorcal.kernel_models.kernels import (
    KERNEL_IDS,
    kernel_matrix,
    kernel_matrix_with_grads,
)

EXACT_INFERENCE_WARN_N = 10000
JITTERS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class GprModel:
    x_train: np.ndarray  # [n, d]
    alpha: np.ndarray  # [n], (K + sigma^2 I)^-1 (y - 1 beta)
    kernel: str
    sigma_f: float
    sigma_l: float
    noise_std: float
    basis_coef: float
    jitter: float = 0.0
    _chol: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @property
    def n_train(self) -> int:
        return self.x_train.shape[0]

    @property
    def input_dim(self) -> int:
        return self.x_train.shape[1]

    @property
    def parameter_count(self) -> int:
        # training inputs, alpha vector, and the four learned constants
        n, d = self.x_train.shape
        return n * (d + 1) + 4


def _chol_with_jitter(c: np.ndarray):
    """Cholesky factor of c, escalating diagonal jitter when needed."""
    for jit in JITTERS:
        try:
            length = scipy.linalg.cholesky(
                c + jit * np.eye(c.shape[0]) if jit else c, lower=True
            )
            return length, jit
        except scipy.linalg.LinAlgError:
            continue
    raise DataError(
        "covariance matrix is not positive definite even after 1e-6 jitter"
    )


def _profiled_quantities(X, y, kernel, sigma_f, sigma_l, noise):
    """Cholesky, GLS offset, residual and alpha for given hyperparameters."""
    n = X.shape[0]
    k = kernel_matrix(kernel, sigma_f, sigma_l, X)
    c = k + (noise * noise) * np.eye(n)
    length, jit = _chol_with_jitter(c)
    ones = np.ones(n)
    cinv_y = scipy.linalg.cho_solve((length, True), y)
    cinv_1 = scipy.linalg.cho_solve((length, True), ones)
    beta = float(ones @ cinv_y) / float(ones @ cinv_1)
    resid = y - beta
    alpha = scipy.linalg.cho_solve((length, True), resid)
    return length, jit, beta, resid, alpha


def gpr_log_marginal_likelihood(
    X: np.ndarray,
    y: np.ndarray,
    kernel: str,
    sigma_f: float,
    sigma_l: float,
    noise_std: float,
    return_grad: bool = False,
):
    """Gaussian log marginal likelihood with the constant basis profiled out.

    With return_grad, also returns the gradient with respect to
    (log sigma_f, log sigma_l, log noise_std).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    if noise_std <= 0:
        raise DataError("noise std must be positive")
    length, _jit, _beta, resid, alpha = _profiled_quantities(
        X, y, kernel, sigma_f, sigma_l, noise_std
    )
    lml = (
        -0.5 * float(resid @ alpha)
        - float(np.log(np.diag(length)).sum())
        - 0.5 * n * LOG_2PI
    )
    if not return_grad:
        return lml
    # envelope theorem: at the GLS offset the basis term contributes nothing
    _k, dk_dlsf, dk_dlsl = kernel_matrix_with_grads(kernel, sigma_f, sigma_l, X)
    cinv = scipy.linalg.cho_solve((length, True), np.eye(n))
    outer = np.outer(alpha, alpha)
    diff = outer - cinv
    grad = np.array(
        [
            0.5 * float(np.sum(diff * dk_dlsf)),
            0.5 * float(np.sum(diff * dk_dlsl)),
            0.5 * float(np.trace(diff)) * 2.0 * noise_std * noise_std,
        ]
    )
    return lml, grad


def gpr_fit(
    X: np.ndarray,
    y: np.ndarray,
    kernel: str,
    theta0: Optional[tuple] = None,
    sigma0: Optional[float] = None,
    optimize: bool = True,
    sigma_bounds: Optional[tuple] = None,
    max_opt_iter: int = 100,
) -> GprModel:
    """Fit the GP, optionally refining hyperparameters by marginal likelihood.

    theta0 is (sigma_f0, sigma_l0); defaults follow the standardized-data
    convention (signal std of y, unit length scale per feature).  sigma0
    defaults to a tenth of std(y); sigma_bounds constrain the noise std
    during optimization.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    if n < 1:
        raise DataError("need at least one training sample")
    if y.shape != (n,):
        raise DataError("y must match X rows")
    if np.isnan(X).any() or np.isnan(y).any():
        raise DataError("missing entries must be excluded before fitting")
    if kernel not in KERNEL_IDS:
        raise DataError(f"unknown kernel {kernel!r}")
    if n > EXACT_INFERENCE_WARN_N:
        warnings.warn(
            f"exact GP inference on n={n} costs O(n^3) time and O(n^2) memory; "
            "consider a shorter training segment",
            RuntimeWarning,
            stacklevel=2,
        )

    y_scale = float(np.std(y)) or 1.0
    sigma_f = float(theta0[0]) if theta0 is not None else y_scale / np.sqrt(2.0)
    sigma_l = float(theta0[1]) if theta0 is not None else float(np.sqrt(X.shape[1]))
    noise = float(sigma0) if sigma0 is not None else 0.1 * y_scale

    if optimize and n > 1:
        if sigma_bounds is None:
            sigma_bounds = (1e-3 * y_scale, 10.0 * y_scale)
        lo = np.log(max(sigma_bounds[0], 1e-12))
        hi = np.log(max(sigma_bounds[1], sigma_bounds[0] * (1 + 1e-12)))
        noise = float(np.clip(noise, np.exp(lo), np.exp(hi)))
        scale_lo, scale_hi = np.log(1e-4 * y_scale + 1e-300), np.log(1e4 * y_scale)

        def objective(z):
            sf, sl, sn = np.exp(z)
            try:
                lml, grad = gpr_log_marginal_likelihood(
                    X, y, kernel, sf, sl, sn, return_grad=True
                )
            except DataError:
                return np.inf, np.zeros(3)
            return -lml, -grad

        z0 = np.log([sigma_f, sigma_l, noise])
        bounds = [(scale_lo, scale_hi), (np.log(1e-6), np.log(1e6)), (lo, hi)]
        z0 = np.clip(z0, [b[0] for b in bounds], [b[1] for b in bounds])
        result = scipy.optimize.minimize(
            objective,
            z0,
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": max_opt_iter},
        )
        if np.isfinite(result.fun):
            sigma_f, sigma_l, noise = (float(v) for v in np.exp(result.x))

    length, jit, beta, _resid, alpha = _profiled_quantities(
        X, y, kernel, sigma_f, sigma_l, noise
    )
    return GprModel(
        x_train=X.copy(),
        alpha=alpha,
        kernel=kernel,
        sigma_f=sigma_f,
        sigma_l=sigma_l,
        noise_std=noise,
        basis_coef=beta,
        jitter=jit,
        _chol=length,
    )


def gpr_predict(m: GprModel, Xq: np.ndarray):
    """Posterior mean and variance at query points.

    Returns (mean, variance, n_clamped): the variance includes the noise
    term and is clamped at zero, with the number of clamped entries counted.
    """
    Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
    if Xq.shape[1] != m.input_dim:
        raise DataError(f"query dimension {Xq.shape[1]} != {m.input_dim}")
    k_star = kernel_matrix(m.kernel, m.sigma_f, m.sigma_l, Xq, m.x_train)  # [q, n]
    mean = m.basis_coef + k_star @ m.alpha

    if m._chol is None:
        k = kernel_matrix(m.kernel, m.sigma_f, m.sigma_l, m.x_train)
        c = k + (m.noise_std * m.noise_std + m.jitter) * np.eye(m.n_train)
        m._chol, _ = _chol_with_jitter(c)
    v = scipy.linalg.solve_triangular(m._chol, k_star.T, lower=True)
    prior = m.sigma_f * m.sigma_f
    var = prior - np.einsum("ij,ij->j", v, v) + m.noise_std * m.noise_std
    n_clamped = int((var < 0).sum())
    return mean, np.maximum(var, 0.0), n_clamped


def gpr_to_fields(m: GprModel) -> dict:
    return {
        "kind": "gpr",
        "kernel": m.kernel,
        "n_train": m.n_train,
        "input_dim": m.input_dim,
        "sigma_f": m.sigma_f,
        "sigma_l": m.sigma_l,
        "noise_std": m.noise_std,
        "basis_coef": m.basis_coef,
        "jitter": m.jitter,
        "x_train": m.x_train,
        "alpha": m.alpha,
    }


def gpr_from_fields(fields: dict) -> GprModel:
    return GprModel(
        x_train=fields["x_train"],
        alpha=fields["alpha"],
        kernel=fields["kernel"],
        sigma_f=fields["sigma_f"],
        sigma_l=fields["sigma_l"],
        noise_std=fields["noise_std"],
        basis_coef=fields["basis_coef"],
        jitter=fields.get("jitter", 0.0),
    )
