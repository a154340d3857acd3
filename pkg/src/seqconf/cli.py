"""Command-line harness: ``seqconf {run,match,ecc,synth,fit}``.

Every subcommand reads an :class:`ExperimentConfig`, writes CSV files into
the output directory and exits with 0 on success, 2 on a configuration
error, 3 on a data or parameter-domain error and 4 on an invariant
violation.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Optional

import numpy as np

from . import data as data_io
from .config import ExperimentConfig, format_config, load_config
from .controllers import make_controller, run_online
from .errors import ConfigError, DataError, InvariantViolation, NotReadyError, ParameterDomainError
from .evaluation import (
    _fmt,
    ecc,
    match_stepsize,
    summarize,
    write_metrics_csv,
    write_summary_csv,
)
from .forecasters import (
    ArForecaster,
    ArParams,
    GarchForecaster,
    GarchParams,
    ar_fit,
    garch_fit,
    synth_ar,
    synth_garch,
)

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_INVARIANT = 0, 2, 3, 4


@dataclass(frozen=True)
class Inputs:
    """``driver`` feeds the forecaster; ``target`` is what intervals cover."""

    driver: np.ndarray
    target: np.ndarray


def synth_params(cfg: ExperimentConfig):
    if cfg.synth_model == "garch":
        return GarchParams(cfg.synth_mu, cfg.synth_omega, cfg.synth_a, cfg.synth_b)
    return ArParams(np.asarray(cfg.synth_phi), cfg.synth_intercept, cfg.synth_sd)


def synth_values(cfg: ExperimentConfig) -> np.ndarray:
    """Synthetic raw values: a price path for GARCH, levels for AR.

    The GARCH price path is ``100 * exp(cumsum(r))`` so its log returns are
    exactly the simulated returns.
    """
    params = synth_params(cfg)
    if cfg.synth_model == "garch":
        r = synth_garch(params, cfg.n - 1, seed=cfg.seed)
        return 100.0 * np.exp(np.concatenate([[0.0], np.cumsum(r)]))
    return synth_ar(params, cfg.n, seed=cfg.seed)


def load_values(cfg: ExperimentConfig) -> np.ndarray:
    if cfg.data is None:
        return synth_values(cfg)
    return data_io.ingest_csv(cfg.data).values


def prepare_inputs(cfg: ExperimentConfig, values: np.ndarray) -> Inputs:
    if cfg.task == "return":
        r = data_io.transform_return(values)
        return Inputs(r, r)
    if cfg.task == "volatility":
        if cfg.forecaster == "ar":
            v = data_io.transform_volatility(values)
            return Inputs(v, v)
        r = data_io.simple_returns(values)
        return Inputs(r, r**2)
    return Inputs(np.asarray(values, dtype=float), np.asarray(values, dtype=float))


def fit_model(cfg: ExperimentConfig, driver: np.ndarray):
    lo = 0 if cfg.fit_window is None else max(0, driver.size - cfg.fit_window)
    if cfg.forecaster == "ar" or (cfg.forecaster == "oracle-gaussian" and cfg.synth_model == "ar"):
        return ar_fit(driver[lo:], cfg.ar_order)
    return garch_fit(driver[lo:], seed=cfg.seed)


def build_forecaster(cfg: ExperimentConfig, inputs: Inputs):
    """Returns ``(forecaster, start)``.

    With ``fit_end`` the model is fit once on ``driver[:fit_end]``, frozen
    and run from ``fit_end`` on.
    """
    driver = inputs.driver
    target = "volatility" if cfg.task == "volatility" else "return"
    start = cfg.start
    if cfg.forecaster == "oracle-gaussian":
        params = synth_params(cfg)
        if isinstance(params, GarchParams):
            return GarchForecaster(driver, target=target, params=params), start
        return ArForecaster(driver, params=params), start
    if cfg.fit_end is not None:
        if cfg.fit_end >= driver.size:
            raise DataError(f"fit_end={cfg.fit_end} leaves no data to run on (n={driver.size})")
        frozen = fit_model(cfg.replace(fit_window=None), driver[: cfg.fit_end]).params
        start = cfg.fit_end if start is None else max(start, cfg.fit_end)
        if cfg.forecaster == "garch":
            return GarchForecaster(driver, target=target, params=frozen), start
        return ArForecaster(driver, params=frozen), start
    if cfg.forecaster == "garch":
        fc = GarchForecaster(driver, target=target, refit_every=cfg.refit_every,
                             fit_window=cfg.fit_window, seed=cfg.seed)
    else:
        fc = ArForecaster(driver, p=cfg.ar_order, refit_every=cfg.refit_every, fit_window=cfg.fit_window)
    return fc, start


def controller_for(cfg: ExperimentConfig, kind: Optional[str] = None, c: Optional[float] = None):
    kind = kind or cfg.controller
    return make_controller(
        kind,
        cfg.alpha_bar,
        gamma=cfg.gamma_aci,
        horizon=cfg.T,
        c=cfg.c if c is None else c,
        lambda_max=cfg.lambda_max,
        lambda_max_scale=cfg.lambda_max_scale,
        lambda_init=cfg.lambda_init,
    )


def execute(cfg: ExperimentConfig, inputs: Inputs, kind: Optional[str] = None, c: Optional[float] = None):
    forecaster, start = build_forecaster(cfg, inputs)
    record = run_online(controller_for(cfg, kind, c), forecaster, inputs.target,
                        B=cfg.B, horizon=cfg.T, start=start)
    record.check()
    return record


def _bci_grid_run(c: float, cfg: ExperimentConfig, inputs: Inputs):
    return execute(cfg, inputs, "bci", c).controlled()


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow(_fmt(v) if not isinstance(v, str) else v for v in row)


# --------------------------------------------------------------------------
# subcommands


def cmd_run(cfg, out, log):
    inputs = prepare_inputs(cfg, load_values(cfg))
    record = execute(cfg, inputs)
    write_metrics_csv(os.path.join(out, "metrics.csv"), record, cfg.window)
    stats = summarize(record.controlled())
    write_summary_csv(os.path.join(out, "summary.csv"), {cfg.controller: stats})
    log(f"{cfg.controller}: miscoverage {stats.miscoverage_rate:.4f}, "
        f"mean finite length {stats.avg_length_finite:.6g}, infinite {stats.frac_infinite:.2%}")


def cmd_match(cfg, out, log):
    inputs = prepare_inputs(cfg, load_values(cfg))
    aci = execute(cfg, inputs, "aci").controlled()
    runner = partial(_bci_grid_run, cfg=cfg, inputs=inputs)
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            result = match_stepsize(aci, runner, cfg.c_grid, cfg.window, executor=pool)
    else:
        result = match_stepsize(aci, runner, cfg.c_grid, cfg.window)
    rows = [
        (c, v, abs(v - result.target_variance), int(c == result.c))
        for c, v in zip(result.grid, result.variances)
    ]
    _write_rows(os.path.join(out, "match.csv"), ("c", "variance", "gap", "chosen"), rows)
    write_metrics_csv(os.path.join(out, "metrics_aci.csv"), aci, cfg.window)
    write_metrics_csv(os.path.join(out, "metrics_bci.csv"), result.record, cfg.window)
    summaries = {"aci": summarize(aci), "bci": summarize(result.record)}
    write_summary_csv(os.path.join(out, "summary.csv"), summaries)
    log(f"matched c = {result.c} (ACI local-miss variance {result.target_variance:.3g})")
    for name, s in summaries.items():
        log(f"{name}: miscoverage {s.miscoverage_rate:.4f}, infinite {s.frac_infinite:.2%}")


def cmd_ecc(cfg, out, log):
    inputs = prepare_inputs(cfg, load_values(cfg))
    record = execute(cfg, inputs, "naive")
    grid, curve = ecc(record.beta)
    _write_rows(os.path.join(out, "ecc.csv"), ("alpha", "ecc"), zip(grid, curve))
    log(f"max |ecc(alpha) - alpha| = {np.max(np.abs(curve - grid)):.4f} over {len(record)} PITs")


def cmd_synth(cfg, out, log):
    values = synth_values(cfg)
    path = os.path.join(out, "synth.csv")
    data_io.write_series_csv(path, data_io.synthetic_dates(values.size), values)
    log(f"wrote {values.size} {cfg.synth_model} values to {path}")


def cmd_fit(cfg, out, log):
    inputs = prepare_inputs(cfg, load_values(cfg))
    fit = fit_model(cfg, inputs.driver)
    p = fit.params
    if isinstance(p, GarchParams):
        rows = [("mu", p.mu), ("omega", p.omega), ("a", p.a), ("b", p.b),
                ("loglik", fit.loglik), ("converged", int(fit.converged)), ("n_obs", fit.n_obs)]
    else:
        rows = [("intercept", p.intercept)]
        rows += [(f"phi{k + 1}", v) for k, v in enumerate(p.coeffs)]
        rows += [("noise_sd", p.noise_sd), ("ridge", fit.ridge), ("n_obs", fit.n_obs)]
    _write_rows(os.path.join(out, "fit.csv"), ("parameter", "value"), rows)
    for name, value in rows:
        log(f"{name} = {_fmt(value)}")


COMMANDS = {"run": cmd_run, "match": cmd_match, "ecc": cmd_ecc, "synth": cmd_synth, "fit": cmd_fit}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seqconf", description="Online conformal interval experiments.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="key = value config file (defaults apply when omitted)")
    parser.add_argument("--out", default=".", help="output directory (created if missing)")
    parser.add_argument("--seed", type=int, help="overrides the config seed")
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    log = (lambda msg: None) if args.quiet else (lambda msg: print(msg))
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        if args.seed is not None:
            cfg = cfg.replace(seed=args.seed)
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "config.txt"), "w") as fh:
            fh.write(format_config(cfg))
        COMMANDS[args.command](cfg, args.out, log)
    except ConfigError as exc:
        print(f"config error: {'; '.join(exc.problems)}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ParameterDomainError, NotReadyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
