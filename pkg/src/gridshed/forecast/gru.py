"""Single-layer GRU with a linear head, trained by full-batch BPTT and Adam.

    z_t  = sigmoid(W_z x_t + U_z h_{t-1} + b_z)
    r_t  = sigmoid(W_r x_t + U_r h_{t-1} + b_r)
    h~_t = tanh(W_h x_t + U_h (r_t * h_{t-1}) + b_h)
    h_t  = (1 - z_t) * h_{t-1} + z_t * h~_t

The prediction is ``w_o . h_T + b_o`` after ``lookback`` scalar inputs.
Setting ``GRIDSHED_CHECK_GATES=1`` asserts the gate ranges on every
forward pass (the test suite turns it on).
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from .metrics import ForecastResult

GATE_GROUPS = ("W_z", "U_z", "b_z", "W_r", "U_r", "b_r", "W_h", "U_h", "b_h")
PARAM_GROUPS = GATE_GROUPS + ("w_o", "b_o")


def _check_gates_enabled() -> bool:
    return os.environ.get("GRIDSHED_CHECK_GATES", "").strip().lower() in {"1", "true", "yes", "on"}


@dataclass(frozen=True)
class GruSpec:
    hidden_size: int = 32
    lookback: int = 24
    epochs: int = 200
    learning_rate: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.hidden_size < 1:
            raise ValueError("hidden_size must be >= 1")
        if self.lookback < 1:
            raise ValueError("lookback must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")

    @property
    def n_params(self) -> int:
        h = self.hidden_size
        return 3 * (h + h * h + h) + h + 1

    def __str__(self):
        return f"gru(hidden={self.hidden_size},lookback={self.lookback},epochs={self.epochs},lr={self.learning_rate:g})"


def init_params(hidden_size: int, seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(hidden_size)
    p = {}
    for gate in "zrh":
        p[f"W_{gate}"] = rng.uniform(-bound, bound, size=(hidden_size, 1))
        p[f"U_{gate}"] = rng.uniform(-bound, bound, size=(hidden_size, hidden_size))
        p[f"b_{gate}"] = np.zeros(hidden_size)
    p["w_o"] = rng.uniform(-bound, bound, size=hidden_size)
    p["b_o"] = np.zeros(1)
    return p


def _sigmoid(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def forward(params: dict, x: np.ndarray, check_gates: bool | None = None):
    """Run windows ``x`` of shape (batch, lookback); return predictions and the tape."""
    if check_gates is None:
        check_gates = _check_gates_enabled()
    x = np.asarray(x, dtype=np.float64)
    batch, steps = x.shape
    hidden = params["U_z"].shape[0]
    # input projections for all steps at once: (steps, batch, 3 * hidden)
    w_in = np.concatenate([params["W_z"], params["W_r"], params["W_h"]], axis=0)[:, 0]
    bias = np.concatenate([params["b_z"], params["b_r"], params["b_h"]])
    pre = x.T[:, :, None] * w_in + bias
    u_zr = np.concatenate([params["U_z"], params["U_r"]], axis=0).T
    u_h = params["U_h"].T
    hs = np.zeros((steps + 1, batch, hidden))
    zs = np.empty((steps, batch, hidden))
    rs = np.empty_like(zs)
    cands = np.empty_like(zs)
    for t in range(steps):
        h = hs[t]
        zr = _sigmoid(pre[t, :, : 2 * hidden] + h @ u_zr)
        z, r = zr[:, :hidden], zr[:, hidden:]
        cand = np.tanh(pre[t, :, 2 * hidden :] + (r * h) @ u_h)
        if check_gates:
            # saturation in float64 can reach the closed endpoints exactly
            assert np.all((z >= 0) & (z <= 1)), "update gate outside [0, 1]"
            assert np.all((r >= 0) & (r <= 1)), "reset gate outside [0, 1]"
            assert np.all(np.abs(cand) <= 1), "candidate state outside [-1, 1]"
        zs[t], rs[t], cands[t] = z, r, cand
        hs[t + 1] = h + z * (cand - h)
    y = hs[steps] @ params["w_o"] + params["b_o"][0]
    return y, (x, hs, zs, rs, cands)


def loss_and_grads(params: dict, x: np.ndarray, y: np.ndarray):
    """Mean squared error over the batch and its gradient for every parameter group."""
    pred, (x, hs, zs, rs, cands) = forward(params, x)
    steps = x.shape[1]
    y = np.asarray(y, dtype=np.float64)
    err = pred - y
    loss = float(np.mean(err**2))
    dy = 2.0 * err / err.size
    grads = {"w_o": hs[steps].T @ dy, "b_o": np.array([dy.sum()])}
    da_z = np.empty_like(zs)
    da_r = np.empty_like(zs)
    da_h = np.empty_like(zs)
    u_z, u_r, u_h = params["U_z"], params["U_r"], params["U_h"]
    dh = dy[:, None] * params["w_o"][None, :]
    for t in range(steps - 1, -1, -1):
        h_prev, z, r, cand = hs[t], zs[t], rs[t], cands[t]
        dh_prev = dh * (1.0 - z)
        a_h = dh * z * (1.0 - cand * cand)
        drh = a_h @ u_h
        dh_prev += drh * r
        a_r = drh * h_prev * r * (1.0 - r)
        a_z = dh * (cand - h_prev) * z * (1.0 - z)
        dh_prev += a_r @ u_r + a_z @ u_z
        da_z[t], da_r[t], da_h[t] = a_z, a_r, a_h
        dh = dh_prev
    xs = x.T  # (steps, batch)
    h_prev = hs[:steps]
    for gate, da, src in (("z", da_z, h_prev), ("r", da_r, h_prev), ("h", da_h, rs * h_prev)):
        grads[f"W_{gate}"] = np.einsum("tbh,tb->h", da, xs)[:, None]
        grads[f"U_{gate}"] = np.tensordot(da, src, axes=([0, 1], [0, 1]))
        grads[f"b_{gate}"] = da.sum(axis=(0, 1))
    return loss, grads


def make_windows(scaled: np.ndarray, lookback: int):
    """Sliding (lookback -> next) pairs; any window touching a gap is dropped."""
    n = scaled.shape[0]
    if n <= lookback:
        raise ValueError(f"lookback {lookback} must be smaller than the series length {n}")
    idx = np.arange(lookback + 1)[None, :] + np.arange(n - lookback)[:, None]
    win = scaled[idx]
    ok = ~np.any(np.isnan(win), axis=1)
    return win[ok, :lookback], win[ok, lookback]


@dataclass(frozen=True, eq=False)
class FittedGru:
    spec: GruSpec
    params: dict
    lo: float
    scale: float
    history: np.ndarray  # last ``lookback`` scaled inputs
    losses: np.ndarray

    def predict_next(self, window: np.ndarray) -> float:
        pred, _ = forward(self.params, window[None, :])
        return float(pred[0])


def _minmax(y):
    obs = y[~np.isnan(y)]
    lo = float(obs.min())
    span = float(obs.max()) - lo
    # a constant series maps to 0 instead of dividing by zero
    return lo, span if span > 0 else 1.0


def _values(train):
    if hasattr(train, "series"):
        train = train.series
    if hasattr(train, "values"):
        train = train.values
    return np.asarray(train, dtype=np.float64)


def fit_gru(train, spec: GruSpec = GruSpec()) -> FittedGru:
    y = _values(train)
    if spec.lookback >= len(y):
        raise ValueError(f"lookback {spec.lookback} must be smaller than the series length {len(y)}")
    if np.all(np.isnan(y)):
        raise ValidationError("series is entirely gaps")
    lo, scale = _minmax(y)
    scaled = (y - lo) / scale
    x, target = make_windows(scaled, spec.lookback)
    if x.shape[0] == 0:
        raise ValidationError("no gap-free training windows")
    params = init_params(spec.hidden_size, spec.seed)
    m = {k: np.zeros_like(v) for k, v in params.items()}
    v = {k: np.zeros_like(val) for k, val in params.items()}
    b1, b2, eps = 0.9, 0.999, 1e-8
    losses = np.empty(spec.epochs)
    for epoch in range(1, spec.epochs + 1):
        loss, grads = loss_and_grads(params, x, target)
        losses[epoch - 1] = loss
        for k in params:
            m[k] = b1 * m[k] + (1 - b1) * grads[k]
            v[k] = b2 * v[k] + (1 - b2) * grads[k] ** 2
            mhat = m[k] / (1 - b1**epoch)
            vhat = v[k] / (1 - b2**epoch)
            params[k] = params[k] - spec.learning_rate * mhat / (np.sqrt(vhat) + eps)
    tail = scaled[-spec.lookback :]
    if np.any(np.isnan(tail)):
        # the seed window must be complete; fill from the nearest observations
        idx = np.arange(len(scaled))
        obs = ~np.isnan(scaled)
        tail = np.interp(idx[-spec.lookback :], idx[obs], scaled[obs])
    return FittedGru(spec, params, lo, scale, tail.copy(), losses)


def forecast_gru(model: FittedGru, horizon: int) -> ForecastResult:
    """Recursive one-step forecasts; point only."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    window = model.history.copy()
    out = np.empty(horizon)
    for i in range(horizon):
        nxt = model.predict_next(window)
        out[i] = nxt
        window = np.append(window[1:], nxt)
    return ForecastResult(out * model.scale + model.lo)
