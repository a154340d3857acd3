"""Online calibration of prediction intervals for time series.

Two controllers adjust the nominal miscoverage rate of a forecaster's
interval family online: an adaptive gradient baseline (ACI) and a
receding-horizon dynamic-programming controller (BCI) that trades interval
length against coverage.
"""

from .controllers import (
    AciController,
    BciController,
    NaiveController,
    RunRecord,
    make_controller,
    run_online,
    run_pit_stream,
)
from .errors import (
    ConfigError,
    DataError,
    InvariantViolation,
    NotReadyError,
    ParameterDomainError,
    SeqconfError,
)
from .evaluation import ecc, local_metrics, match_stepsize, summarize
from .forecasters import (
    ArForecaster,
    ArParams,
    ForecastBundle,
    GarchForecaster,
    GarchParams,
    ar_fit,
    garch_fit,
)
from .intervals import GaussianFamily, IntervalFamily, PredictionInterval, ScaledChiSquareFamily, compute_pit
from .pit import PitWindow
from .scp import ScpProblem, brute_force_oracle, solve

__version__ = "0.1.0"
