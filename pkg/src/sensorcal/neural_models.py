"""Shallow feedforward network and echo state network.

The MLP is a single tanh hidden layer with one linear output, trained by
full-batch gradient descent with momentum for a fixed number of epochs; the
parameter snapshot with the lowest validation MAE seen during training is
retained.  The ESN has a fixed random dense reservoir (spectral radius and
input scaling chosen at build time) and only its linear readout is trained,
through the shared ridge solver.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np

from sensorcal.errors import DataError, TrialFailure
from sensorcal.linear_models import RidgeSpec, fit_mlr, readout_ridge_lambda

MOMENTUM = 0.9


@dataclass(frozen=True)
class MlpModel:
    """One tanh hidden layer, one linear output: w2 . tanh(W1 x + b1) + b2."""

    w1: np.ndarray  # [k, n]
    b1: np.ndarray  # [k]
    w2: np.ndarray  # [k]
    b2: float
    seed: int = 0

    def __post_init__(self):
        w1 = np.ascontiguousarray(self.w1, dtype=float)
        if w1.ndim != 2:
            raise DataError("w1 must be [k, n]")
        k = w1.shape[0]
        b1 = np.ascontiguousarray(self.b1, dtype=float)
        w2 = np.ascontiguousarray(self.w2, dtype=float)
        if b1.shape != (k,) or w2.shape != (k,):
            raise DataError("b1/w2 shapes do not match hidden count")
        for arr in (w1, b1, w2):
            arr.flags.writeable = False
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "b1", b1)
        object.__setattr__(self, "w2", w2)

    @property
    def input_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden_count(self) -> int:
        return self.w1.shape[0]

    @property
    def parameter_count(self) -> int:
        k, n = self.w1.shape
        return k * n + 2 * k + 1


@dataclass(frozen=True)
class MlpTrainSpec:
    epochs: int
    hidden_count: int
    seed: int
    learn_rate: float = 0.05
    decay: float = 0.0

    def __post_init__(self):
        if self.epochs < 1 or self.hidden_count < 1:
            raise DataError("epochs and hidden_count must be positive")
        if self.learn_rate <= 0 or self.decay < 0:
            raise DataError("bad learning schedule")


def mlp_forward(m: MlpModel, x: np.ndarray) -> float:
    """Network output for a single feature vector."""
    x = np.asarray(x, dtype=float)
    if x.shape != (m.input_dim,):
        raise DataError(f"expected input of length {m.input_dim}, got {x.shape}")
    return float(m.w2 @ np.tanh(m.w1 @ x + m.b1) + m.b2)


def mlp_predict(m: MlpModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != m.input_dim:
        raise DataError(f"X must be [n, {m.input_dim}]")
    return np.tanh(X @ m.w1.T + m.b1) @ m.w2 + m.b2


def mlp_gradient(m: MlpModel, X: np.ndarray, y: np.ndarray):
    """Analytic gradient of the batch MSE with respect to all parameters.

    Returns (dw1, db1, dw2, db2) for loss mean((f(x) - y)^2) over the batch.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[1] != m.input_dim:
        raise DataError(f"X must be [n, {m.input_dim}]")
    if y.shape != (X.shape[0],) or X.shape[0] == 0:
        raise DataError("batch targets must be non-empty and match X")
    n = X.shape[0]
    h = np.tanh(X @ m.w1.T + m.b1)  # [n, k]
    f = h @ m.w2 + m.b2
    e = 2.0 * (f - y) / n  # dL/df per sample
    dw2 = h.T @ e
    db2 = float(e.sum())
    dz = np.outer(e, m.w2) * (1.0 - h * h)  # [n, k]
    dw1 = dz.T @ X
    db1 = dz.sum(axis=0)
    return dw1, db1, dw2, db2


def _init_mlp(input_dim: int, hidden: int, seed: int) -> MlpModel:
    # uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per layer
    rng = np.random.default_rng(seed)
    bound1 = 1.0 / np.sqrt(input_dim)
    bound2 = 1.0 / np.sqrt(hidden)
    w1 = rng.uniform(-bound1, bound1, size=(hidden, input_dim))
    b1 = rng.uniform(-bound1, bound1, size=hidden)
    w2 = rng.uniform(-bound2, bound2, size=hidden)
    b2 = float(rng.uniform(-bound2, bound2))
    return MlpModel(w1=w1, b1=b1, w2=w2, b2=b2, seed=seed)


def mlp_train(
    train: tuple,
    val: tuple,
    spec: MlpTrainSpec,
) -> MlpModel:
    """Full-batch gradient descent with momentum for exactly spec.epochs.

    The step is halved (and momentum reset) whenever the training loss
    increases; the returned model is the snapshot with the lowest validation
    MAE observed during training.  Expects standardized features and targets.
    """
    x_tr, y_tr = (np.asarray(a, dtype=float) for a in train)
    x_va, y_va = (np.asarray(a, dtype=float) for a in val)
    if x_va.shape[0] == 0:
        raise DataError("validation set must be non-empty")
    model = _init_mlp(x_tr.shape[1], spec.hidden_count, spec.seed)
    params = [model.w1.copy(), model.b1.copy(), model.w2.copy(), np.array([model.b2])]
    velocity = [np.zeros_like(p) for p in params]

    def loss_of(pl) -> float:
        h = np.tanh(x_tr @ pl[0].T + pl[1])
        f = h @ pl[2] + pl[3][0]
        return float(np.mean((f - y_tr) ** 2))

    def val_mae_of(pl) -> float:
        h = np.tanh(x_va @ pl[0].T + pl[1])
        f = h @ pl[2] + pl[3][0]
        return float(np.mean(np.abs(f - y_va)))

    best_mae = val_mae_of(params)
    best = [p.copy() for p in params]
    prev_loss = loss_of(params)
    step_scale = 1.0
    for epoch in range(spec.epochs):
        cur = MlpModel(w1=params[0], b1=params[1], w2=params[2], b2=float(params[3][0]), seed=spec.seed)
        grads = mlp_gradient(cur, x_tr, y_tr)
        grads = (*grads[:3], np.array([grads[3]]))
        lr = step_scale * spec.learn_rate / (1.0 + spec.decay * epoch)
        for p, v, g in zip(params, velocity, grads):
            v *= MOMENTUM
            v -= lr * g
            p += v
        loss = loss_of(params)
        if not np.isfinite(loss):
            raise TrialFailure(f"MLP training diverged at epoch {epoch + 1}")
        if loss > prev_loss:
            step_scale *= 0.5
            for v in velocity:
                v[:] = 0.0
        prev_loss = loss
        mae = val_mae_of(params)
        if mae < best_mae:
            best_mae = mae
            best = [p.copy() for p in params]
    return MlpModel(
        w1=best[0], b1=best[1], w2=best[2], b2=float(best[3][0]), seed=spec.seed
    )


def mlp_to_fields(m: MlpModel) -> dict:
    return {
        "kind": "mlp",
        "input_dim": m.input_dim,
        "hidden_count": m.hidden_count,
        "seed": m.seed,
        "w1": m.w1,
        "b1": m.b1,
        "w2": m.w2,
        "b2": m.b2,
    }


def mlp_from_fields(fields: dict) -> MlpModel:
    return MlpModel(
        w1=fields["w1"],
        b1=fields["b1"],
        w2=fields["w2"],
        b2=fields["b2"],
        seed=fields.get("seed", 0),
    )


# ---------------------------------------------------------------------------
# echo state network
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EsnSpec:
    spectral_radius: float
    input_scaling: float
    reservoir_units: int
    seed: int
    washout: Optional[int] = None
    leaking_rate: float = 1.0

    def __post_init__(self):
        if self.reservoir_units < 1:
            raise DataError("reservoir_units must be >= 1")
        if not (0.0 < self.leaking_rate <= 1.0):
            raise DataError("leaking rate must be in (0, 1]")
        if self.spectral_radius <= 0 or self.input_scaling <= 0:
            raise DataError("spectral radius and input scaling must be positive")


@dataclass(frozen=True)
class EsnModel:
    """Fixed random reservoir with a trainable linear readout.

    State update: x(n) = (1-a) x(n-1) + a tanh(W_in [1; u(n)] + W x(n-1)),
    readout y(n) = w_out . [1; u(n); x(n)].  The default leaking rate a = 1
    makes the update purely tanh.
    """

    w_in: np.ndarray  # [N_x, 1 + N_u]
    w: np.ndarray  # [N_x, N_x]
    spectral_radius: float
    input_scaling: float
    seed: int
    leaking_rate: float = 1.0
    w_out: Optional[np.ndarray] = None  # [1 + N_u + N_x]

    def __post_init__(self):
        w_in = np.ascontiguousarray(self.w_in, dtype=float)
        w = np.ascontiguousarray(self.w, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1] or w_in.shape[0] != w.shape[0]:
            raise DataError("reservoir matrices have inconsistent shapes")
        w_in.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "w_in", w_in)
        object.__setattr__(self, "w", w)
        if self.w_out is not None:
            w_out = np.ascontiguousarray(self.w_out, dtype=float)
            if w_out.shape != (1 + self.input_dim + self.reservoir_units,):
                raise DataError("w_out length must be 1 + N_u + N_x")
            w_out.flags.writeable = False
            object.__setattr__(self, "w_out", w_out)

    @property
    def reservoir_units(self) -> int:
        return self.w.shape[0]

    @property
    def input_dim(self) -> int:
        return self.w_in.shape[1] - 1

    @property
    def parameter_count(self) -> int:
        n_x, n_u = self.reservoir_units, self.input_dim
        return n_x * (1 + n_u) + n_x * n_x + (1 + n_u + n_x)


def esn_build(spec: EsnSpec, input_dim: int) -> EsnModel:
    """Draw the random reservoir and rescale it to the requested radius.

    Entries of W and W_in are uniform in [-1, 1] and [-IS, +IS]; W is then
    rescaled so its spectral radius matches spec.spectral_radius (checked to
    1e-6).  A numerically zero draw is rediscarded and redrawn from the next
    values of the seeded stream.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.reservoir_units
    for _attempt in range(8):
        w = rng.uniform(-1.0, 1.0, size=(n, n))
        raw_radius = float(np.max(np.abs(np.linalg.eigvals(w))))
        if raw_radius > 1e-12:
            break
    else:
        raise DataError("could not draw a reservoir with nonzero spectral radius")
    w *= spec.spectral_radius / raw_radius
    check = float(np.max(np.abs(np.linalg.eigvals(w))))
    if abs(check - spec.spectral_radius) > 1e-6:
        raise DataError("spectral radius rescaling missed the 1e-6 tolerance")
    w_in = rng.uniform(-spec.input_scaling, spec.input_scaling, size=(n, 1 + input_dim))
    return EsnModel(
        w_in=w_in,
        w=w,
        spectral_radius=spec.spectral_radius,
        input_scaling=spec.input_scaling,
        seed=spec.seed,
        leaking_rate=spec.leaking_rate,
    )


def esn_run_states(
    m: EsnModel, u: np.ndarray, x0: Optional[np.ndarray] = None
) -> np.ndarray:
    """Roll the reservoir over an input sequence, starting from x0 (or zero)."""
    u = np.asarray(u, dtype=float)
    if u.ndim != 2 or u.shape[1] != m.input_dim:
        raise DataError(f"u must be [T, {m.input_dim}]")
    if u.shape[0] == 0:
        raise DataError("input sequence must be non-empty")
    n_x = m.reservoir_units
    x = np.zeros(n_x) if x0 is None else np.asarray(x0, dtype=float).copy()
    drive = u @ m.w_in[:, 1:].T + m.w_in[:, 0]  # W_in [1; u(n)] for all n
    states = np.empty((u.shape[0], n_x))
    a = m.leaking_rate
    for t in range(u.shape[0]):
        updated = np.tanh(drive[t] + m.w @ x)
        x = (1.0 - a) * x + a * updated
        states[t] = x
    return states


def esn_train_readout(
    m: EsnModel,
    u: np.ndarray,
    y: np.ndarray,
    washout: int,
    row_mask: Optional[np.ndarray] = None,
) -> EsnModel:
    """Fit w_out by ridge regression of y(n) on [1; u(n); x(n)], n > washout.

    row_mask (True = exclude) drops rows with missing inputs or targets from
    the regression; the reservoir rollout itself always runs over the whole
    sequence.  Returns a new model; W and W_in are never mutated.
    """
    u = np.asarray(u, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.shape != (u.shape[0],):
        raise DataError("y length must match the input sequence")
    if u.shape[0] <= washout:
        raise DataError(f"sequence of {u.shape[0]} samples is not longer than washout {washout}")
    states = esn_run_states(m, np.nan_to_num(u, nan=0.0))
    design = np.hstack([u, states])
    keep = np.arange(u.shape[0]) >= washout
    if row_mask is not None:
        keep &= ~np.asarray(row_mask, dtype=bool)
    keep &= ~np.isnan(design).any(axis=1)
    keep &= ~np.isnan(y)
    if keep.sum() < 1:
        raise DataError("no usable rows after washout and masking")
    design = design[keep]
    lam = readout_ridge_lambda(design)
    fit = fit_mlr(design, y[keep], RidgeSpec(lam))
    w_out = np.concatenate([[fit.intercept], fit.beta])
    return dataclasses.replace(m, w_out=w_out)


def esn_predict(
    m: EsnModel, u: np.ndarray, x0: Optional[np.ndarray] = None
) -> tuple:
    """Readout predictions over a sequence; returns (y_hat, states).

    Steps with a missing input entry still advance the reservoir (missing
    entries enter the update as 0, the standardized mean) but yield NaN, i.e.
    no estimate, in the output.
    """
    if m.w_out is None:
        raise DataError("readout is untrained")
    u = np.asarray(u, dtype=float)
    states = esn_run_states(m, np.nan_to_num(u, nan=0.0), x0=x0)
    design = np.hstack([np.nan_to_num(u, nan=0.0), states])
    y_hat = design @ m.w_out[1:] + m.w_out[0]
    y_hat[np.isnan(u).any(axis=1)] = np.nan
    return y_hat, states


def default_washout(train_len: int) -> int:
    """Initial transient samples excluded from readout regression."""
    return min(100, train_len // 10)


def esn_to_fields(m: EsnModel) -> dict:
    fields = {
        "kind": "esn",
        "reservoir_units": m.reservoir_units,
        "input_dim": m.input_dim,
        "spectral_radius": m.spectral_radius,
        "input_scaling": m.input_scaling,
        "leaking_rate": m.leaking_rate,
        "seed": m.seed,
        "w_in": m.w_in,
        "w": m.w,
    }
    if m.w_out is not None:
        fields["w_out"] = m.w_out
    return fields


def esn_from_fields(fields: dict) -> EsnModel:
    return EsnModel(
        w_in=fields["w_in"],
        w=fields["w"],
        spectral_radius=fields["spectral_radius"],
        input_scaling=fields["input_scaling"],
        seed=fields.get("seed", 0),
        leaking_rate=fields.get("leaking_rate", 1.0),
        w_out=fields.get("w_out"),
    )
