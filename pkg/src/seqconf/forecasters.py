"""Classical forecasters producing multi-step nominal interval families.

GARCH(1,1) with Gaussian innovations, fitted by maximum likelihood, and an
AR(p) model fitted by least squares. Both produce a :class:`ForecastBundle`
of ``horizon`` monotone interval families for the next steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import optimize, signal

from .errors import ParameterDomainError
from .intervals import (
    GaussianFamily,
    IntervalFamily,
    ScaledChiSquareFamily,
    enforce_assumption1,
)

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class ForecastBundle:
    """Interval families for steps ``t, ..., t + horizon - 1`` issued at ``t``."""

    families: tuple

    def __post_init__(self):
        if len(self.families) < 1:
            raise ValueError("a bundle needs at least one family")
        object.__setattr__(
            self, "families", tuple(enforce_assumption1(f) for f in self.families)
        )

    @property
    def horizon(self) -> int:
        return len(self.families)

    def __getitem__(self, h: int) -> IntervalFamily:
        return self.families[h]

    def length_table(self, alphas) -> np.ndarray:
        """Interval lengths, shape ``(horizon, len(alphas))``."""
        alphas = np.asarray(alphas, dtype=float)
        rows = []
        for h, f in enumerate(self.families):
            if h and f is self.families[h - 1]:
                rows.append(rows[-1])
            else:
                rows.append(np.asarray(f.length(alphas), dtype=float))
        return np.vstack(rows)


# --------------------------------------------------------------------------
# GARCH(1,1)


@dataclass(frozen=True)
class GarchParams:
    mu: float
    omega: float
    a: float
    b: float

    def __post_init__(self):
        for name in ("mu", "omega", "a", "b"):
            object.__setattr__(self, name, float(getattr(self, name)))
        problems = []
        if not self.omega > 0:
            problems.append("omega must be > 0")
        if not self.a >= 0:
            problems.append("a must be >= 0")
        if not self.b >= 0:
            problems.append("b must be >= 0")
        if not self.a + self.b < 1:
            problems.append("a + b must be < 1")
        if not math.isfinite(self.mu):
            problems.append("mu must be finite")
        if problems:
            raise ParameterDomainError(f"invalid GARCH parameters {self}: " + ", ".join(problems))

    @property
    def persistence(self) -> float:
        return self.a + self.b

    @property
    def unconditional_variance(self) -> float:
        return self.omega / (1.0 - self.a - self.b)


def garch_variance_path(params: GarchParams, returns) -> np.ndarray:
    """Conditional variances ``sigma_1^2 .. sigma_{K+1}^2`` for ``K`` returns.

    Uses ``eps_0 = sigma_0 = 0`` so that ``sigma_1^2 = omega``. The last entry
    is the one-step-ahead forecast variance.
    """
    r = np.asarray(returns, dtype=float)
    drive = np.empty(r.size + 1)
    drive[0] = params.omega
    drive[1:] = params.omega + params.a * (r - params.mu) ** 2
    return signal.lfilter([1.0], [1.0, -params.b], drive)


def garch_filter(params: GarchParams, returns) -> np.ndarray:
    """Conditional variance ``sigma_k^2`` for each of the ``K`` returns."""
    r = np.asarray(returns, dtype=float)
    if r.size < 1:
        raise ParameterDomainError("garch_filter needs at least one return")
    return garch_variance_path(params, r[:-1])


def garch_loglik(params: GarchParams, returns) -> float:
    r = np.asarray(returns, dtype=float)
    var = garch_filter(params, r)
    return float(-0.5 * np.sum(LOG_2PI + np.log(var) + (r - params.mu) ** 2 / var))


@dataclass(frozen=True)
class GarchFit:
    params: GarchParams
    loglik: float
    converged: bool
    degenerate: bool = False
    n_obs: int = 0


# Floor on omega in standardized units; constant series drive omega onto it.
_OMEGA_FLOOR = 1e-8


def _unpack(theta) -> tuple:
    mu, log_omega, ta, tb = theta
    m = max(ta, tb, 0.0)
    ea, eb, e0 = math.exp(ta - m), math.exp(tb - m), math.exp(-m)
    total = ea + eb + e0
    omega = _OMEGA_FLOOR + math.exp(min(log_omega, 700.0))
    return mu, omega, ea / total, eb / total


def _pack(mu, omega, a, b) -> np.ndarray:
    a = max(a, 1e-6)
    b = max(b, 1e-6)
    rest = max(1.0 - a - b, 1e-6)
    return np.array([mu, math.log(max(omega - _OMEGA_FLOOR, 1e-300)), math.log(a / rest), math.log(b / rest)])


def _negloglik(theta, x) -> float:
    mu, omega, a, b = _unpack(theta)
    drive = np.empty(x.size)
    drive[0] = omega
    drive[1:] = omega + a * (x[:-1] - mu) ** 2
    var = signal.lfilter([1.0], [1.0, -b], drive)
    value = 0.5 * np.sum(LOG_2PI + np.log(var) + (x - mu) ** 2 / var)
    return float(value) if np.isfinite(value) else 1e300


def garch_fit(
    returns,
    init: Optional[GarchParams] = None,
    max_iter: int = 500,
    n_starts: int = 3,
    seed: int = 0,
) -> GarchFit:
    """Approximate Gaussian MLE of GARCH(1,1) parameters.

    Nelder-Mead in an unconstrained space: ``omega = floor + exp(.)`` and
    ``(a, b, 1 - a - b)`` as a softmax, so every iterate is admissible. The
    data are standardized first. Restarts use jitter drawn from ``seed``.
    """
    r = np.asarray(returns, dtype=float)
    if r.size < 50:
        raise ParameterDomainError("garch_fit needs at least 50 returns")
    if not np.all(np.isfinite(r)):
        raise ParameterDomainError("returns contain non-finite values")
    center = float(r.mean())
    scale = float(r.std())
    constant = scale == 0.0
    if constant:
        scale = 1.0
    x = (r - center) / scale

    if init is None:
        start = _pack(0.0, 0.05, 0.05, 0.90)
    else:
        start = _pack((init.mu - center) / scale, init.omega / scale**2, init.a, init.b)

    rng = np.random.default_rng(seed)
    starts = [start] + [start + rng.normal(0.0, 0.5, size=4) for _ in range(max(n_starts, 1) - 1)]
    best_theta, best_value, converged = start, _negloglik(start, x), False
    for theta0 in starts:
        res = optimize.minimize(
            _negloglik,
            theta0,
            args=(x,),
            method="Nelder-Mead",
            options={"maxiter": max_iter, "xatol": 1e-7, "fatol": 1e-9},
        )
        converged = converged or bool(res.success)
        if res.fun < best_value:
            best_theta, best_value = res.x, float(res.fun)

    mu_x, omega_x, a, b = _unpack(best_theta)
    params = GarchParams(center + scale * mu_x, omega_x * scale**2, a, b)
    degenerate = constant or omega_x <= 100 * _OMEGA_FLOOR
    return GarchFit(
        params=params,
        loglik=garch_loglik(params, r),
        converged=converged,
        degenerate=degenerate,
        n_obs=int(r.size),
    )


def garch_variance_forecast(params: GarchParams, history, horizon: int) -> np.ndarray:
    """``sigma^2_{t+h|t}`` for ``h = 1..horizon`` by the usual mean-reverting iteration."""
    if horizon < 1:
        raise ParameterDomainError("horizon must be >= 1")
    out = np.empty(horizon)
    out[0] = garch_variance_path(params, history)[-1]
    for h in range(1, horizon):
        out[h] = params.omega + params.persistence * out[h - 1]
    return out


def _garch_families(params: GarchParams, variances, target: str) -> tuple:
    if target == "volatility":
        return tuple(ScaledChiSquareFamily(v) for v in variances)
    return tuple(GaussianFamily(params.mu, math.sqrt(v)) for v in variances)


def garch_forecast_bundle(
    params: GarchParams, history, horizon: int, target: str = "volatility"
) -> ForecastBundle:
    """Interval families for the squared return (``target="volatility"``)
    or the return itself (any other target)."""
    variances = garch_variance_forecast(params, history, horizon)
    return ForecastBundle(_garch_families(params, variances, target))


def synth_garch(
    params: GarchParams, n: int, seed: int, return_variance: bool = False
):
    """Simulate ``n`` returns: ``r_k = mu + sigma_k e_k`` with ``e_k ~ N(0, 1)``."""
    return synth_garch_regimes([(params, n)], seed, return_variance=return_variance)


def synth_garch_regimes(regimes: Sequence[tuple], seed: int, return_variance: bool = False):
    """Simulate consecutive GARCH regimes ``[(params, length), ...]``.

    The variance recursion carries over across a switch, so the path is
    continuous and only the parameters change.
    """
    total = sum(int(n) for _, n in regimes)
    if total < 1:
        raise ParameterDomainError("n must be >= 1")
    e = np.random.default_rng(seed).standard_normal(total)
    r = np.empty(total)
    var = np.empty(total)
    eps_prev = sig2_prev = 0.0
    k = 0
    for params, n in regimes:
        for _ in range(int(n)):
            sig2 = params.omega + params.a * eps_prev**2 + params.b * sig2_prev
            eps = math.sqrt(sig2) * e[k]
            r[k] = eps + params.mu
            var[k] = sig2
            eps_prev, sig2_prev = eps, sig2
            k += 1
    return (r, var) if return_variance else r


# --------------------------------------------------------------------------
# AR(p)


@dataclass(frozen=True)
class ArParams:
    coeffs: tuple
    intercept: float
    noise_sd: float

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        object.__setattr__(self, "intercept", float(self.intercept))
        object.__setattr__(self, "noise_sd", float(self.noise_sd))
        if len(self.coeffs) < 1:
            raise ParameterDomainError("AR order p must be >= 1")
        # 0 is allowed: a noiseless fit is a legitimate least-squares outcome
        if not self.noise_sd >= 0:
            raise ParameterDomainError("noise_sd must be >= 0")

    @property
    def order(self) -> int:
        return len(self.coeffs)


@dataclass(frozen=True)
class ArFit:
    params: ArParams
    ridge: bool
    n_obs: int = 0


RIDGE_PENALTY = 1e-8


def ar_fit(history, p: int) -> ArFit:
    """OLS of ``Y_t`` on ``(Y_{t-1}, ..., Y_{t-p}, 1)``.

    A rank-deficient design falls back to a ridge penalty on the lag
    coefficients (the intercept is not penalized) and sets ``ridge``.
    """
    y = np.asarray(history, dtype=float)
    if p < 1:
        raise ParameterDomainError("AR order p must be >= 1")
    if y.size < 10 * p:
        raise ParameterDomainError(f"ar_fit needs at least {10 * p} observations, got {y.size}")
    m = y.size - p
    X = np.empty((m, p + 1))
    for i in range(p):
        X[:, i] = y[p - 1 - i : y.size - 1 - i]
    X[:, p] = 1.0
    target = y[p:]
    ridge = np.linalg.matrix_rank(X) < p + 1
    if ridge:
        # augmented least squares avoids forming the ill-conditioned X'X
        rows = np.hstack([math.sqrt(RIDGE_PENALTY) * np.eye(p), np.zeros((p, 1))])
        beta = np.linalg.lstsq(np.vstack([X, rows]), np.concatenate([target, np.zeros(p)]), rcond=None)[0]
    else:
        beta = np.linalg.lstsq(X, target, rcond=None)[0]
    resid = target - X @ beta
    dof = m - (p + 1) if m > p + 1 else m
    noise_sd = math.sqrt(float(resid @ resid) / dof)
    return ArFit(ArParams(tuple(beta[:p]), float(beta[p]), noise_sd), bool(ridge), int(y.size))


def ar_psi_weights(coeffs, n: int) -> np.ndarray:
    """Moving-average weights ``psi_0 .. psi_{n-1}`` of an AR recursion."""
    b = np.asarray(coeffs, dtype=float)
    psi = np.zeros(n)
    psi[0] = 1.0
    for j in range(1, n):
        k = min(j, b.size)
        psi[j] = float(b[:k] @ psi[j - 1 :: -1][:k])
    return psi


def ar_forecast_moments(params: ArParams, history, horizon: int) -> tuple:
    if horizon < 1:
        raise ParameterDomainError("horizon must be >= 1")
    p = params.order
    past = list(np.asarray(history, dtype=float)[-p:])
    if len(past) < p:
        raise ParameterDomainError(f"AR({p}) forecast needs {p} past values")
    b = np.asarray(params.coeffs)
    means = np.empty(horizon)
    for h in range(horizon):
        lags = np.asarray(past[::-1][:p])
        means[h] = params.intercept + float(b @ lags)
        past.append(means[h])
    psi = ar_psi_weights(params.coeffs, horizon)
    sds = params.noise_sd * np.sqrt(np.cumsum(psi**2))
    return means, sds


def ar_forecast_bundle(params: ArParams, history, horizon: int) -> ForecastBundle:
    means, sds = ar_forecast_moments(params, history, horizon)
    return ForecastBundle(tuple(GaussianFamily(m, s) for m, s in zip(means, sds)))


def synth_ar(params: ArParams, n: int, seed: int, burn: int = 200) -> np.ndarray:
    """Simulate ``n`` values of the AR recursion after a burn-in."""
    if n < 1:
        raise ParameterDomainError("n must be >= 1")
    p = params.order
    b = np.asarray(params.coeffs)
    noise = np.random.default_rng(seed).normal(0.0, params.noise_sd, size=n + burn)
    y = np.zeros(n + burn + p)
    for k in range(n + burn):
        y[p + k] = params.intercept + float(b @ y[p + k - 1 :: -1][:p]) + noise[k]
    return y[p + burn :]


# --------------------------------------------------------------------------
# Stateful forecasters used by the online runner. Each one sees the full
# driver series but only reads entries strictly before the step it serves.


class GarchForecaster:
    """GARCH(1,1) forecaster for a return series.

    ``target`` selects the outcome the intervals are for: ``"volatility"``
    means the squared return, anything else the return itself. Passing
    ``params`` freezes the model (no refits), which is also how the
    true-parameter oracle is built.
    """

    name = "garch"

    def __init__(
        self,
        returns,
        target: str = "volatility",
        refit_every: int = 1,
        fit_window: Optional[int] = None,
        params: Optional[GarchParams] = None,
        seed: int = 0,
        min_history: int = 100,
    ):
        self.returns = np.asarray(returns, dtype=float)
        self.target = target
        self.refit_every = max(int(refit_every), 1)
        self.fit_window = fit_window
        self.seed = seed
        self.fixed = params is not None
        self.params = params
        self.min_history = 0 if self.fixed else max(int(min_history), 50)
        self.fits = []
        self._fit_at = None
        self._cursor = None  # (t, sigma^2_t) for the current parameter segment
        self._path = garch_variance_path(params, self.returns) if self.fixed else None

    def _refit(self, t: int):
        lo = 0 if self.fit_window is None else max(0, t - self.fit_window)
        # warm refits start from the previous optimum, so restarts add little
        starts = 3 if self.params is None else 1
        fit = garch_fit(self.returns[lo:t], init=self.params, n_starts=starts, seed=self.seed)
        self.params = fit.params
        self.fits.append((t, fit))
        self._fit_at = t
        self._cursor = (t, float(garch_variance_path(fit.params, self.returns[lo:t])[-1]))

    def variance(self, t: int) -> float:
        """One-step-ahead variance for step ``t`` from returns before ``t``."""
        if self.fixed:
            return float(self._path[t])
        if self._fit_at is None or t - self._fit_at >= self.refit_every or t < self._cursor[0]:
            self._refit(t)
        s, var = self._cursor
        p = self.params
        while s < t:
            var = p.omega + p.a * (self.returns[s] - p.mu) ** 2 + p.b * var
            s += 1
        self._cursor = (s, var)
        return var

    def bundle(self, t: int, horizon: int) -> ForecastBundle:
        first = self.variance(t)
        p = self.params
        variances = [first]
        for _ in range(1, horizon):
            variances.append(p.omega + p.persistence * variances[-1])
        return ForecastBundle(_garch_families(p, variances, self.target))

    def describe(self) -> dict:
        p = self.params
        info = {"forecaster": self.name, "target": self.target, "refits": len(self.fits)}
        if p is not None:
            info.update(mu=p.mu, omega=p.omega, a=p.a, b=p.b)
        return info


class ArForecaster:
    """AR(p) forecaster with Gaussian multi-step intervals."""

    name = "ar"

    def __init__(
        self,
        series,
        p: int = 1,
        refit_every: int = 1,
        fit_window: Optional[int] = None,
        params: Optional[ArParams] = None,
        min_history: int = 100,
    ):
        self.series = np.asarray(series, dtype=float)
        self.p = p if params is None else params.order
        self.refit_every = max(int(refit_every), 1)
        self.fit_window = fit_window
        self.fixed = params is not None
        self.params = params
        self.min_history = self.p if self.fixed else max(int(min_history), 10 * self.p)
        self.fits = []
        self._fit_at = None

    def bundle(self, t: int, horizon: int) -> ForecastBundle:
        if not self.fixed and (self._fit_at is None or t - self._fit_at >= self.refit_every or t < self._fit_at):
            lo = 0 if self.fit_window is None else max(0, t - self.fit_window)
            fit = ar_fit(self.series[lo:t], self.p)
            self.params = fit.params
            self.fits.append((t, fit))
            self._fit_at = t
        return ar_forecast_bundle(self.params, self.series[:t], horizon)

    def describe(self) -> dict:
        info = {"forecaster": self.name, "p": self.p, "refits": len(self.fits)}
        if self.params is not None:
            info.update(intercept=self.params.intercept, noise_sd=self.params.noise_sd,
                        coeffs=list(self.params.coeffs))
        return info


class FixedFamilyForecaster:
    """Issues the same bundle at every step. For PIT-stream simulations."""

    name = "fixed"
    min_history = 0

    def __init__(self, bundle: ForecastBundle):
        self._bundle = bundle

    def bundle(self, t: int, horizon: int) -> ForecastBundle:
        if horizon != self._bundle.horizon:
            return ForecastBundle(tuple(self._bundle.families[min(h, self._bundle.horizon - 1)] for h in range(horizon)))
        return self._bundle

    def describe(self) -> dict:
        return {"forecaster": self.name}
