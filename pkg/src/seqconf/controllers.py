"""Online controllers for the nominal miscoverage rate and the run loop.

Three controllers share one interface (``propose`` then ``observe``):

* :class:`NaiveController` always uses the target rate.
* :class:`AciController` moves the rate by online gradient steps.
* :class:`BciController` moves a penalty weight ``lam`` by gradient steps
  and picks the rate by solving the receding-horizon problem in
  :mod:`seqconf.scp`, falling back to the full line once ``lam`` reaches
  ``lambda_max``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import InvariantViolation, NotReadyError
from .forecasters import ForecastBundle
from .intervals import compute_pit, err_indicator
from .pit import PitWindow
from .scp import PolicyTables, ScpProblem, first_action, solve

BOUNDARY_TOL = 1e-9


@dataclass(frozen=True)
class AciState:
    """``alpha`` is the applied rate, always in [0, 1].

    ``raw`` is the unclipped gradient iterate. Keeping it lets the controller
    remember how far below 0 (or above 1) it was pushed, which the long-run
    coverage bound relies on.
    """

    alpha: float
    gamma: float
    alpha_bar: float
    raw: Optional[float] = None

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be > 0")
        if self.raw is None:
            object.__setattr__(self, "raw", self.alpha)
        object.__setattr__(self, "alpha", min(max(self.alpha, 0.0), 1.0))


def aci_step(state: AciState, err_prev: int) -> AciState:
    raw = state.raw + state.gamma * (state.alpha_bar - err_prev)
    return replace(state, alpha=min(max(raw, 0.0), 1.0), raw=raw)


@dataclass(frozen=True)
class BciState:
    lam: float
    lambda_max: float
    c: float
    alpha_bar: float

    def __post_init__(self):
        if not self.lambda_max > 0:
            raise ValueError("lambda_max must be > 0")
        if not 0 < self.c < 1:
            raise ValueError("c must lie in (0, 1)")

    @property
    def gamma(self) -> float:
        return self.c * self.lambda_max

    def lambda_bounds(self) -> tuple:
        """Range that ``lam`` provably stays in once started in [0, lambda_max]."""
        return -(self.gamma * self.alpha_bar), self.lambda_max + self.gamma * (1.0 - self.alpha_bar)


def bci_lambda_step(state: BciState, err_prev: int) -> BciState:
    return replace(state, lam=state.lam - state.gamma * (state.alpha_bar - err_prev))


def bci_select_alpha(state: BciState, tables: Optional[PolicyTables]) -> float:
    """0 (the full line) once ``lam >= lambda_max``, else the planned first action."""
    if state.lam >= state.lambda_max:
        return 0.0
    if state.lam <= 0:
        return 1.0
    return first_action(tables)


class NaiveController:
    kind = "naive"

    def __init__(self, alpha_bar: float = 0.1):
        self.alpha_bar = alpha_bar

    def start(self, warmup_lengths=None):
        pass

    def propose(self, bundle: ForecastBundle, window: PitWindow) -> float:
        return self.alpha_bar

    def observe(self, err: int):
        pass

    @property
    def state_value(self) -> float:
        return math.nan

    def describe(self) -> dict:
        return {"controller": self.kind, "alpha_bar": self.alpha_bar}


class AciController:
    kind = "aci"

    def __init__(self, alpha_bar: float = 0.1, gamma: float = 0.1, alpha_init: Optional[float] = None):
        self.alpha_bar = alpha_bar
        self.gamma = gamma
        first = alpha_bar if alpha_init is None else alpha_init
        self.state = AciState(first, gamma, alpha_bar)

    def start(self, warmup_lengths=None):
        pass

    def propose(self, bundle: ForecastBundle, window: PitWindow) -> float:
        return self.state.alpha

    def observe(self, err: int):
        self.state = aci_step(self.state, err)

    @property
    def state_value(self) -> float:
        return self.state.raw

    def describe(self) -> dict:
        return {"controller": self.kind, "alpha_bar": self.alpha_bar, "gamma": self.gamma}


class BciController:
    """Receding-horizon controller.

    If ``lambda_max`` is None it is set when the warmup ends, to
    ``lambda_max_scale`` times the mean warmup length ``L_{t|t}(alpha_bar)``.
    ``lambda_init`` is the starting weight as a fraction of ``lambda_max``.
    """

    kind = "bci"

    def __init__(
        self,
        alpha_bar: float = 0.1,
        horizon: int = 3,
        c: float = 0.5,
        lambda_max: Optional[float] = None,
        lambda_max_scale: float = 10.0,
        lambda_init: float = 0.5,
    ):
        if horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not 0 <= lambda_init <= 1:
            raise ValueError("lambda_init must lie in [0, 1] (fraction of lambda_max)")
        self.alpha_bar = alpha_bar
        self.horizon = horizon
        self.c = c
        self.lambda_max_scale = lambda_max_scale
        self.lambda_init = lambda_init
        self.state = None
        self.last_tables = None
        if lambda_max is not None:
            self._init_state(lambda_max)

    def _init_state(self, lambda_max: float):
        self.state = BciState(self.lambda_init * lambda_max, lambda_max, self.c, self.alpha_bar)

    def start(self, warmup_lengths=None):
        if self.state is not None:
            return
        lengths = np.asarray(warmup_lengths if warmup_lengths is not None else [], dtype=float)
        lengths = lengths[np.isfinite(lengths)]
        if lengths.size == 0:
            raise NotReadyError("cannot scale lambda_max without finite warmup lengths")
        scale = float(lengths.mean())
        if not scale > 0:
            raise NotReadyError("warmup lengths are all zero; set lambda_max explicitly")
        self._init_state(self.lambda_max_scale * scale)

    def build_problem(self, bundle: ForecastBundle, window: PitWindow) -> ScpProblem:
        atoms = window.atoms()
        cand = np.concatenate([atoms[(atoms > 0) & (atoms < 1)], [1.0]])
        lengths = bundle.length_table(cand)[: self.horizon]
        if lengths.shape[0] < self.horizon:
            raise ValueError("forecast bundle shorter than the planning horizon")
        F = np.repeat(window.cdf(cand)[None, :], self.horizon, axis=0)
        return ScpProblem.trusted(self.state.lam, self.alpha_bar, cand, lengths, F)

    def propose(self, bundle: ForecastBundle, window: PitWindow) -> float:
        if self.state is None:
            raise NotReadyError("BCI controller not started")
        s = self.state
        self.last_tables = None
        if 0 < s.lam < s.lambda_max:
            self.last_tables = solve(self.build_problem(bundle, window))
        return bci_select_alpha(s, self.last_tables)

    def observe(self, err: int):
        self.state = bci_lambda_step(self.state, err)

    @property
    def state_value(self) -> float:
        return self.state.lam if self.state is not None else math.nan

    def describe(self) -> dict:
        info = {"controller": self.kind, "alpha_bar": self.alpha_bar, "T": self.horizon, "c": self.c}
        if self.state is not None:
            info.update(lambda_max=self.state.lambda_max, gamma=self.state.gamma)
        return info


@dataclass
class RunRecord:
    """Per-step log. ``state`` holds ``lam_t`` for BCI and the raw ACI iterate."""

    t: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    err: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    length: np.ndarray
    state: np.ndarray
    warmup: np.ndarray
    y: np.ndarray
    alpha_bar: float
    kind: str
    config: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.t.size

    @property
    def active(self) -> np.ndarray:
        return ~self.warmup

    def select(self, mask) -> "RunRecord":
        mask = np.asarray(mask)
        arrays = {k: getattr(self, k)[mask] for k in _ROW_FIELDS}
        return RunRecord(**arrays, alpha_bar=self.alpha_bar, kind=self.kind, config=dict(self.config))

    def controlled(self) -> "RunRecord":
        return self.select(self.active)

    def check(self):
        recomputed = (self.alpha > self.beta).astype(int)
        bad = np.flatnonzero(recomputed != self.err)
        if bad.size:
            raise InvariantViolation("err does not match 1(alpha > beta)", row=int(self.t[bad[0]]))
        bad = np.flatnonzero(~(self.length >= 0))
        if bad.size:
            raise InvariantViolation("negative interval length", row=int(self.t[bad[0]]))


_ROW_FIELDS = ("t", "alpha", "beta", "err", "lower", "upper", "length", "state", "warmup", "y")


def simulate(
    controller,
    bundles: Callable[[int], ForecastBundle],
    outcome: Callable[[int, float, ForecastBundle], tuple],
    steps,
    B: int = 100,
    horizon: int = 3,
    window: Optional[PitWindow] = None,
) -> RunRecord:
    """Generic online loop.

    For each ``t`` in ``steps``: get the bundle, choose ``alpha_t`` (fixed at
    ``alpha_bar`` until the PIT window holds ``B`` values), record the
    interval, ask ``outcome(t, alpha_t, bundle)`` for ``(beta_t, y_t)``,
    score the miss, update the controller and push ``beta_t``.
    """
    steps = list(steps)
    window = window if window is not None else PitWindow(B)
    rows = {k: [] for k in _ROW_FIELDS}
    warm_lengths = []
    started = False
    abar = controller.alpha_bar
    for t in steps:
        bundle = bundles(t)
        family = bundle.families[0]
        warm = not window.full
        if warm:
            alpha = abar
            warm_lengths.append(float(family.length(abar)))
        else:
            if not started:
                controller.start(warm_lengths)
                started = True
            alpha = float(controller.propose(bundle, window))
        state = controller.state_value if not warm else math.nan
        interval = family.evaluate(alpha)
        beta, y = outcome(t, alpha, bundle)
        err = err_indicator(alpha, beta)
        if not math.isnan(y):
            missed = not interval.contains(y)
            if missed != bool(err) and abs(alpha - beta) > BOUNDARY_TOL:
                raise InvariantViolation(
                    f"PIT {beta!r} disagrees with membership at alpha={alpha!r}", row=t
                )
        if not warm:
            controller.observe(err)
        window.push(beta)
        for key, value in zip(
            _ROW_FIELDS,
            (t, alpha, beta, err, interval.lower, interval.upper, interval.length, state, warm, y),
        ):
            rows[key].append(value)
    dtypes = {"t": int, "err": int, "warmup": bool}
    arrays = {k: np.asarray(v, dtype=dtypes.get(k, float)) for k, v in rows.items()}
    return RunRecord(**arrays, alpha_bar=abar, kind=controller.kind, config=controller.describe())


def run_online(
    controller,
    forecaster,
    target,
    B: int = 100,
    horizon: int = 3,
    start: Optional[int] = None,
    stop: Optional[int] = None,
) -> RunRecord:
    """Run ``controller`` over the outcome series ``target``.

    ``forecaster.bundle(t, horizon)`` must only use data before ``t``. The
    loop starts at ``start`` (default: the forecaster's minimum history) and
    its first ``B`` steps are warmup.
    """
    y = np.asarray(target, dtype=float)
    first = forecaster.min_history if start is None else start
    last = y.size if stop is None else stop
    if last - first <= B:
        raise NotReadyError(
            f"series too short: {last - first} usable steps for a PIT window of {B}"
        )

    def outcome(t, alpha, bundle):
        return compute_pit(bundle.families[0], y[t]), float(y[t])

    record = simulate(
        controller,
        lambda t: forecaster.bundle(t, horizon),
        outcome,
        range(first, last),
        B=B,
        horizon=horizon,
    )
    record.config.update(forecaster.describe())
    return record


def run_pit_stream(
    controller,
    bundle: ForecastBundle,
    pit_source: Callable[[int, float], float],
    n_steps: int,
    B: int = 100,
) -> RunRecord:
    """Drive a controller with PITs supplied directly (possibly adaptively,
    as a function of ``(t, alpha_t)``) and fixed interval families."""
    horizon = getattr(controller, "horizon", bundle.horizon)

    def outcome(t, alpha, _bundle):
        beta = float(pit_source(t, alpha))
        if not 0.0 <= beta <= 1.0:
            raise InvariantViolation(f"PIT source produced {beta!r}", row=t)
        return beta, math.nan

    return simulate(controller, lambda t: bundle, outcome, range(n_steps + B), B=B, horizon=horizon)


def make_controller(kind: str, alpha_bar: float = 0.1, **kwargs):
    if kind == "naive":
        return NaiveController(alpha_bar)
    if kind == "aci":
        return AciController(alpha_bar, gamma=kwargs.get("gamma", 0.1))
    if kind == "bci":
        keys = ("horizon", "c", "lambda_max", "lambda_max_scale", "lambda_init")
        return BciController(alpha_bar, **{k: kwargs[k] for k in keys if k in kwargs})
    raise ValueError(f"unknown controller {kind!r}")
