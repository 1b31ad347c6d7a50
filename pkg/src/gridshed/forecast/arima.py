"""(Seasonal) ARIMA by Hannan-Rissanen initialisation and Gauss-Newton CSS.

The model on the differenced series ``w`` is

    phi(B) Phi(B^s) (w_t - mu) = theta(B) Theta(B^s) e_t

with ``mu`` estimated only when there is no differencing. Estimation
minimises the conditional sum of squares (presample residuals zero), not
the exact likelihood.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..errors import FitError, ValidationError
from .metrics import Z80, ForecastResult


@dataclass(frozen=True)
class ArimaSpec:
    p: int = 1
    d: int = 0
    q: int = 0
    seasonal: tuple | None = None  # (P, D, Q, s)

    def __post_init__(self):
        for name in ("p", "d", "q"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"{name} must be a non-negative integer")
        if self.seasonal is not None:
            if len(self.seasonal) != 4:
                raise ValueError("seasonal must be (P, D, Q, s)")
            P, D, Q, s = (int(v) for v in self.seasonal)
            if min(P, D, Q) < 0:
                raise ValueError("seasonal orders must be non-negative")
            if s < 2:
                raise ValueError("seasonal period s must be >= 2")
            object.__setattr__(self, "seasonal", (P, D, Q, s))
        P, D, Q, _ = self.seasonal_orders
        if self.p + self.q + P + Q == 0 and self.d + D == 0:
            raise ValueError("model has no AR, MA or differencing terms")

    @property
    def seasonal_orders(self) -> tuple:
        return self.seasonal if self.seasonal is not None else (0, 0, 0, 0)

    @property
    def n_params(self) -> int:
        P, _, Q, _ = self.seasonal_orders
        return self.p + self.q + P + Q

    @property
    def min_length(self) -> int:
        P, D, Q, s = self.seasonal_orders
        return 10 * (self.p + self.q + 1) + s * (D + P + Q)

    def __str__(self):
        base = f"({self.p},{self.d},{self.q})"
        if self.seasonal is None:
            return base
        P, D, Q, s = self.seasonal
        return f"{base}({P},{D},{Q})_{s}"


def ar_polynomial(phi, sphi, s) -> np.ndarray:
    """Coefficients of phi(B) Phi(B^s), constant term first."""
    a = np.concatenate(([1.0], -np.asarray(phi, dtype=np.float64)))
    if len(sphi):
        b = np.zeros(s * len(sphi) + 1)
        b[0] = 1.0
        b[s::s] = -np.asarray(sphi, dtype=np.float64)
        a = np.convolve(a, b)
    return a


def ma_polynomial(theta, stheta, s) -> np.ndarray:
    a = np.concatenate(([1.0], np.asarray(theta, dtype=np.float64)))
    if len(stheta):
        b = np.zeros(s * len(stheta) + 1)
        b[0] = 1.0
        b[s::s] = np.asarray(stheta, dtype=np.float64)
        a = np.convolve(a, b)
    return a


def difference_polynomial(d, D, s) -> np.ndarray:
    poly = np.array([1.0])
    for _ in range(d):
        poly = np.convolve(poly, [1.0, -1.0])
    for _ in range(D):
        seas = np.zeros(s + 1)
        seas[0], seas[s] = 1.0, -1.0
        poly = np.convolve(poly, seas)
    return poly


def difference(y, d, D=0, s=1) -> np.ndarray:
    w = np.asarray(y, dtype=np.float64)
    for _ in range(d):
        w = np.diff(w)
    for _ in range(D):
        w = w[s:] - w[:-s]
    return w


def interpolate_gaps(y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    gap = np.isnan(y)
    if not gap.any():
        return y.copy()
    if gap.all():
        raise ValidationError("series is entirely gaps")
    idx = np.arange(len(y))
    out = y.copy()
    out[gap] = np.interp(idx[gap], idx[~gap], y[~gap])
    return out


def _values(train) -> np.ndarray:
    if hasattr(train, "series"):
        train = train.series
    if hasattr(train, "values"):
        train = train.values
    return np.asarray(train, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class FittedArima:
    spec: ArimaSpec
    phi: np.ndarray
    sphi: np.ndarray
    theta: np.ndarray
    stheta: np.ndarray
    mean: float
    sigma2: float
    y: np.ndarray  # training series after gap interpolation
    resid: np.ndarray  # innovations aligned with y; zero in the conditioning prefix
    sse: float = 0.0
    n_iter: int = 0
    sse_history: list = field(default_factory=list)

    @property
    def has_mean(self) -> bool:
        _, D, _, _ = self.spec.seasonal_orders
        return self.spec.d + D == 0

    @classmethod
    def from_coefficients(cls, spec, y, phi=(), sphi=(), theta=(), stheta=(), mean=0.0, sigma2=1.0, resid=None):
        """Build a model with given coefficients (no estimation)."""
        y = np.asarray(y, dtype=np.float64)
        resid = np.zeros_like(y) if resid is None else np.asarray(resid, dtype=np.float64)
        return cls(spec, np.asarray(phi, float), np.asarray(sphi, float), np.asarray(theta, float),
                   np.asarray(stheta, float), float(mean), float(sigma2), y, resid)


def _unpack(beta, spec):
    P, _, Q, _ = spec.seasonal_orders
    p, q = spec.p, spec.q
    return beta[:p], beta[p : p + P], beta[p + P : p + P + q], beta[p + P + q : p + P + q + Q]


def _residuals(wc, beta, spec):
    s = spec.seasonal_orders[3]
    phi, sphi, theta, stheta = _unpack(beta, spec)
    ar = -ar_polynomial(phi, sphi, s)[1:]
    ma = ma_polynomial(theta, stheta, s)[1:]
    start = len(ar)
    e = kernels.css_residuals(np.ascontiguousarray(wc), np.ascontiguousarray(ar), np.ascontiguousarray(ma), start)
    return e, start


def _sse(wc, beta, spec):
    e, start = _residuals(wc, beta, spec)
    r = e[start:]
    # trial steps outside the invertible region can blow up; treat as rejected
    with np.errstate(over="ignore", invalid="ignore"):
        val = float(r @ r)
    return val if np.isfinite(val) else np.inf


def hannan_rissanen(wc, spec) -> np.ndarray:
    """Initial coefficients from a long-AR residual proxy and least squares.

    Seasonal and non-seasonal lags enter additively; the multiplicative
    cross terms are left to the Gauss-Newton refinement.
    """
    P, _, Q, s = spec.seasonal_orders
    ar_lags = list(range(1, spec.p + 1)) + [s * j for j in range(1, P + 1)]
    ma_lags = list(range(1, spec.q + 1)) + [s * j for j in range(1, Q + 1)]
    if not ar_lags and not ma_lags:
        return np.empty(0)
    n = len(wc)
    offset = 0
    eps = None
    if ma_lags:
        m = min(max(2 * max(ar_lags + ma_lags), 20), n // 3)
        x = np.column_stack([wc[m - i : n - i] for i in range(1, m + 1)])
        coef, *_ = np.linalg.lstsq(x, wc[m:], rcond=None)
        eps = np.zeros(n)
        eps[m:] = wc[m:] - x @ coef
        offset = m
    t0 = offset + max(ar_lags + ma_lags)
    cols = [wc[t0 - lag : n - lag] for lag in ar_lags]
    if eps is not None:
        cols += [eps[t0 - lag : n - lag] for lag in ma_lags]
    coef, *_ = np.linalg.lstsq(np.column_stack(cols), wc[t0:], rcond=None)
    na = len(ar_lags)
    # keep the start inside the stationary / invertible region
    coef[:na] = np.clip(coef[:na], -0.95, 0.95)
    coef[na:] = np.clip(coef[na:], -0.9, 0.9)
    p, q = spec.p, spec.q
    phi, sphi = coef[:p], coef[p:na]
    theta, stheta = coef[na : na + q], coef[na + q :]
    return np.concatenate([phi, sphi, theta, stheta])


def gauss_newton(wc, spec, beta0, max_iter: int = 100, rtol: float = 1e-10):
    """Levenberg-damped Gauss-Newton on the CSS with a central-difference Jacobian."""
    beta = np.array(beta0, dtype=np.float64)
    sse = _sse(wc, beta, spec)
    history = [sse]
    if beta.size == 0:
        return beta, sse, history, 0
    if not np.isfinite(sse):
        beta = np.zeros_like(beta)
        sse = _sse(wc, beta, spec)
    lam = 1e-3
    it = 0
    for it in range(1, max_iter + 1):
        r, start = _residuals(wc, beta, spec)
        r = r[start:]
        jac = np.empty((r.size, beta.size))
        for i in range(beta.size):
            h = 1e-6 * max(1.0, abs(beta[i]))
            bp = beta.copy()
            bm = beta.copy()
            bp[i] += h
            bm[i] -= h
            jac[:, i] = (_residuals(wc, bp, spec)[0][start:] - _residuals(wc, bm, spec)[0][start:]) / (2 * h)
        if not np.all(np.isfinite(jac)):
            break
        g = jac.T @ r
        h_mat = jac.T @ jac
        improved = False
        while lam < 1e10:
            step = np.linalg.solve(h_mat + lam * np.diag(np.diag(h_mat) + 1e-12), -g)
            cand = beta + step
            new = _sse(wc, cand, spec)
            if new < sse:
                lam = max(lam / 10.0, 1e-12)
                improved = True
                break
            lam *= 10.0
        if not improved:
            break
        rel = (sse - new) / max(sse, 1e-300)
        beta, sse = cand, new
        history.append(sse)
        if rel < rtol:
            break
    return beta, sse, history, it


def _check_stationary(phi, sphi, s):
    poly = ar_polynomial(phi, sphi, s)
    if len(poly) <= 1:
        return
    roots = np.roots(poly[::-1])
    if np.any(np.abs(roots) <= 1.0 + 1e-8):
        warnings.warn("AR polynomial has roots on or inside the unit circle", RuntimeWarning, stacklevel=3)


def fit_arima(train, spec: ArimaSpec) -> FittedArima:
    y = _values(train)
    if len(y) < spec.min_length:
        raise ValueError(f"series length {len(y)} < {spec.min_length} required for ARIMA{spec}")
    y = interpolate_gaps(y)
    if not np.all(np.isfinite(y)):
        raise ValidationError("non-finite values after gap interpolation")
    P, D, Q, s = spec.seasonal_orders
    w = difference(y, spec.d, D, s)
    has_mean = spec.d + D == 0
    mu = float(w.mean()) if has_mean else 0.0
    wc = w - mu
    beta0 = hannan_rissanen(wc, spec)
    with np.errstate(over="ignore", invalid="ignore"):
        beta, sse, history, n_iter = gauss_newton(wc, spec, beta0)
    if not np.isfinite(sse):
        raise FitError(f"ARIMA{spec}: conditional sum of squares diverged")
    e, start = _residuals(wc, beta, spec)
    n_eff = len(wc) - start
    sigma2 = sse / max(n_eff - beta.size, 1)
    resid = np.zeros(len(y))
    resid[len(y) - len(wc) :] = e
    phi, sphi, theta, stheta = _unpack(beta, spec)
    _check_stationary(phi, sphi, s)
    return FittedArima(spec, phi.copy(), sphi.copy(), theta.copy(), stheta.copy(), mu, float(sigma2),
                       y, resid, float(sse), n_iter, history)


def forecast_arima(model: FittedArima, horizon: int) -> ForecastResult:
    """Recursive forecasts with future innovations at zero; 80% intervals
    from the psi-weights of the integrated model."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    spec = model.spec
    P, D, Q, s = spec.seasonal_orders
    stat = ar_polynomial(model.phi, model.sphi, s)
    full = np.convolve(stat, difference_polynomial(spec.d, D, s))
    a = -full[1:]
    m = ma_polynomial(model.theta, model.stheta, s)[1:]
    const = model.mean * float(stat.sum()) if model.has_mean else 0.0
    n = len(model.y)
    y = np.concatenate([model.y, np.zeros(horizon)])
    e = np.concatenate([model.resid, np.zeros(horizon)])
    for t in range(n, n + horizon):
        acc = const
        for i in range(min(len(a), t)):
            acc += a[i] * y[t - 1 - i]
        for j in range(min(len(m), t)):
            acc += m[j] * e[t - 1 - j]
        y[t] = acc
    psi = np.zeros(horizon)
    psi[0] = 1.0
    for j in range(1, horizon):
        v = m[j - 1] if j - 1 < len(m) else 0.0
        for i in range(1, min(j, len(a)) + 1):
            v += a[i - 1] * psi[j - i]
        psi[j] = v
    sd = np.sqrt(model.sigma2 * np.cumsum(psi**2))
    point = y[n:]
    return ForecastResult(point, point - Z80 * sd, point + Z80 * sd)


def fit_sarima(train, spec: ArimaSpec) -> FittedArima:
    if spec.seasonal is None:
        raise ValueError("SARIMA needs a seasonal (P, D, Q, s) component")
    s = spec.seasonal[3]
    n = len(_values(train))
    if n < 3 * s:
        raise ValueError(f"SARIMA needs at least 3 seasonal periods ({3 * s} points), got {n}")
    return fit_arima(train, spec)


def forecast_sarima(model: FittedArima, horizon: int) -> ForecastResult:
    return forecast_arima(model, horizon)
