"""Epsilon-insensitive support vector regression with an RBF kernel.

The dual problem is solved by sequential minimal optimization over the 2n
box variables (alpha, alpha*), selecting the maximal KKT-violating pair at
every step (no shrinking, so runs are deterministic and reproducible).
Kernel rows are served through a least-recently-used cache with a
configurable memory budget, since training sets reach tens of thousands of
rows and the full Gram matrix cannot be assumed resident.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

from sensorcal.errors import ConvergenceError, DataError

DEFAULT_CACHE_BYTES = 1 << 30  # 1 GiB
PREDICT_CHUNK = 2048


def rbf_kernel(X: np.ndarray, Y: np.ndarray, gamma: float) -> np.ndarray:
    """K(x, y) = exp(-gamma ||x - y||^2)."""
    return np.exp(-gamma * cdist(np.atleast_2d(X), np.atleast_2d(Y), "sqeuclidean"))


class RbfKernelCache:
    """LRU cache of RBF kernel rows against a fixed training matrix."""

    def __init__(self, X: np.ndarray, gamma: float, budget_bytes: int = DEFAULT_CACHE_BYTES):
        self.x = np.ascontiguousarray(X, dtype=float)
        self.gamma = float(gamma)
        self.sq_norms = np.einsum("ij,ij->i", self.x, self.x)
        row_bytes = 8 * self.x.shape[0]
        self.max_rows = max(2, int(budget_bytes // row_bytes))
        self._rows: OrderedDict = OrderedDict()
        self.hits = 0
        self.misses = 0

    def row(self, i: int) -> np.ndarray:
        cached = self._rows.get(i)
        if cached is not None:
            self._rows.move_to_end(i)
            self.hits += 1
            return cached
        self.misses += 1
        xi = self.x[i]
        sq = self.sq_norms + (xi @ xi) - 2.0 * (self.x @ xi)
        np.maximum(sq, 0.0, out=sq)
        row = np.exp(-self.gamma * sq)
        self._rows[i] = row
        if len(self._rows) > self.max_rows:
            self._rows.popitem(last=False)
        return row


@dataclass
class SvrModel:
    """Dual expansion f(x) = sum_i coef_i K(sv_i, x) + bias.

    Stored vectors are exactly the training samples with nonzero dual
    coefficient (coef_i = alpha_i - alpha*_i, each in [-C, C]).
    """

    support_vectors: np.ndarray  # [n_sv, d]
    dual_coef: np.ndarray  # [n_sv]
    bias: float
    gamma: float
    c: float
    epsilon: float
    n_iter: int = 0
    kkt_gap: float = 0.0
    dual_objective: float = 0.0
    sv_indices: Optional[np.ndarray] = field(default=None, compare=False)

    @property
    def n_sv(self) -> int:
        return self.support_vectors.shape[0]

    @property
    def input_dim(self) -> int:
        return self.support_vectors.shape[1]

    @property
    def parameter_count(self) -> int:
        return self.n_sv * (self.input_dim + 1) + 1


def svr_fit(
    X: np.ndarray,
    y: np.ndarray,
    c: float,
    gamma: float,
    epsilon: float,
    tol: float = 1e-3,
    max_iter: Optional[int] = None,
    cache: Optional[RbfKernelCache] = None,
    cache_bytes: int = DEFAULT_CACHE_BYTES,
) -> SvrModel:
    """Solve the epsilon-SVR dual by SMO to the given KKT tolerance.

    Expects standardized inputs and targets.  Raises ConvergenceError with
    the residual KKT violation if the iteration cap is reached first.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    if y.shape != (n,) or n == 0:
        raise DataError("X and y must be non-empty with matching rows")
    if min(c, gamma, epsilon) <= 0:
        raise DataError("C, gamma and epsilon must all be positive")
    if np.isnan(X).any() or np.isnan(y).any():
        raise DataError("missing entries must be excluded before fitting")
    if cache is None:
        cache = RbfKernelCache(X, gamma, cache_bytes)
    elif cache.gamma != gamma or cache.x.shape != X.shape:
        raise DataError("kernel cache does not match this training problem")
    if max_iter is None:
        max_iter = max(100_000, 20 * n)

    # minimization form over z = [alpha; alpha*]:
    #   min 1/2 z^T Q z + p^T z,  s^T z = 0,  0 <= z <= C
    # with p = [eps - y; eps + y], s = [+1; -1], Q = s s^T (x) K
    z = np.zeros(2 * n)
    grad = np.concatenate([epsilon - y, epsilon + y])
    top = slice(0, n)
    bot = slice(n, 2 * n)

    converged = False
    gap = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        # score_k = -s_k grad_k equals the bias at optimality for free vars
        score_top = -grad[top]
        score_bot = grad[bot]
        at_c_top = z[top] >= c
        at_0_bot = z[bot] <= 0.0
        at_0_top = z[top] <= 0.0
        at_c_bot = z[bot] >= c

        up_top = np.where(at_c_top, -np.inf, score_top)
        up_bot = np.where(at_0_bot, -np.inf, score_bot)
        i_top = int(np.argmax(up_top))
        i_bot = int(np.argmax(up_bot))
        if up_top[i_top] >= up_bot[i_bot]:
            i, s_i, m_up = i_top, 1.0, up_top[i_top]
        else:
            i, s_i, m_up = n + i_bot, -1.0, up_bot[i_bot]

        low_top = np.where(at_0_top, np.inf, score_top)
        low_bot = np.where(at_c_bot, np.inf, score_bot)
        j_top = int(np.argmin(low_top))
        j_bot = int(np.argmin(low_bot))
        if low_top[j_top] <= low_bot[j_bot]:
            j, s_j, m_low = j_top, 1.0, low_top[j_top]
        else:
            j, s_j, m_low = n + j_bot, -1.0, low_bot[j_bot]

        gap = m_up - m_low
        if gap < tol:
            converged = True
            break

        i_pt = i % n
        j_pt = j % n
        k_i = cache.row(i_pt)
        k_j = cache.row(j_pt)
        eta = 2.0 - 2.0 * k_i[j_pt]
        if eta < 1e-12:
            eta = 1e-12
        step = gap / eta
        cap_i = (c - z[i]) if s_i > 0 else z[i]
        cap_j = z[j] if s_j > 0 else (c - z[j])
        step = min(step, cap_i, cap_j)

        new_i = min(max(z[i] + s_i * step, 0.0), c)
        new_j = min(max(z[j] - s_j * step, 0.0), c)
        coef_i = s_i * (new_i - z[i])
        coef_j = s_j * (new_j - z[j])
        z[i] = new_i
        z[j] = new_j
        delta = coef_i * k_i + coef_j * k_j
        grad[top] += delta
        grad[bot] -= delta

    if not converged:
        raise ConvergenceError(
            f"SMO did not reach tolerance {tol} within {max_iter} iterations "
            f"(KKT gap {gap:.3e})",
            residual=float(gap),
        )

    dual_objective = -0.5 * float(z @ (grad + np.concatenate([epsilon - y, epsilon + y])))

    beta = z[top] - z[bot]
    beta[np.abs(beta) < 1e-12 * c] = 0.0
    free = (z > 1e-12 * c) & (z < c * (1.0 - 1e-12))
    if free.any():
        score = np.concatenate([-grad[top], grad[bot]])
        bias = float(score[free].mean())
    else:
        bias = float(0.5 * (m_up + m_low))

    sv_idx = np.flatnonzero(beta)
    return SvrModel(
        support_vectors=X[sv_idx].copy(),
        dual_coef=beta[sv_idx].copy(),
        bias=bias,
        gamma=gamma,
        c=c,
        epsilon=epsilon,
        n_iter=it,
        kkt_gap=float(gap),
        dual_objective=dual_objective,
        sv_indices=sv_idx,
    )


def svr_predict(m: SvrModel, X: np.ndarray) -> np.ndarray:
    """Exact dual expansion over the stored support vectors plus bias."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != m.input_dim:
        raise DataError(f"query dimension {X.shape[1]} != {m.input_dim}")
    if m.n_sv == 0:
        return np.full(X.shape[0], m.bias)
    out = np.empty(X.shape[0])
    for start in range(0, X.shape[0], PREDICT_CHUNK):
        chunk = X[start : start + PREDICT_CHUNK]
        out[start : start + PREDICT_CHUNK] = (
            rbf_kernel(chunk, m.support_vectors, m.gamma) @ m.dual_coef + m.bias
        )
    return out


def svr_kkt_violation(m: SvrModel, X: np.ndarray, y: np.ndarray) -> float:
    """Largest epsilon-KKT violation of a fitted model over training points.

    Complementarity certificate computed from predictions alone: points with
    zero coefficient must sit inside the tube, free points on the tube edge,
    bound points on or beyond it.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    resid = svr_predict(m, X) - y
    beta = np.zeros(X.shape[0])
    if m.sv_indices is not None:
        beta[m.sv_indices] = m.dual_coef
    else:
        raise DataError("model does not carry training indices")
    bound_tol = 1e-9 * m.c
    viol = np.zeros_like(resid)

    zero = beta == 0.0
    viol[zero] = np.abs(resid[zero]) - m.epsilon

    free_pos = (beta > 0) & (beta < m.c - bound_tol)
    viol[free_pos] = np.abs(resid[free_pos] + m.epsilon)
    at_c_pos = beta >= m.c - bound_tol
    viol[at_c_pos] = resid[at_c_pos] + m.epsilon

    free_neg = (beta < 0) & (beta > -m.c + bound_tol)
    viol[free_neg] = np.abs(resid[free_neg] - m.epsilon)
    at_c_neg = beta <= -m.c + bound_tol
    viol[at_c_neg] = m.epsilon - resid[at_c_neg]

    return float(np.maximum(viol, 0.0).max())


def svr_to_fields(m: SvrModel) -> dict:
    return {
        "kind": "svr",
        "n_sv": m.n_sv,
        "input_dim": m.input_dim,
        "gamma": m.gamma,
        "c": m.c,
        "epsilon": m.epsilon,
        "bias": m.bias,
        "kkt_gap": m.kkt_gap,
        "dual_objective": m.dual_objective,
        "support_vectors": m.support_vectors,
        "dual_coef": m.dual_coef,
    }


def svr_from_fields(fields: dict) -> SvrModel:
    sv = fields["support_vectors"]
    if sv.ndim == 1:
        sv = sv.reshape(fields["n_sv"], fields["input_dim"])
    return SvrModel(
        support_vectors=sv,
        dual_coef=fields["dual_coef"],
        bias=fields["bias"],
        gamma=fields["gamma"],
        c=fields["c"],
        epsilon=fields["epsilon"],
        kkt_gap=fields.get("kkt_gap", 0.0),
        dual_objective=fields.get("dual_objective", 0.0),
    )
