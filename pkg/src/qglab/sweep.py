"""Rossby-number sweep: runs, convergence metrics, rate fits, export.

One limit-system run serves as the reference for every epsilon. Each full
run records, on the shared time grid, the oscillating-part norms, the
vorticity gap to the reference and the balanced-part gap; per epsilon the
sweep reduces these to

* ||U_osc||_{E^s} for s in {-1, 0, 1/2},
* sup_t ||osc part||_{L2},
* sup_t ||pv gap||_{L2},
* ||balanced gap||_{E^s} for s in {1/2, 1},

and fits log(metric) against log(epsilon) by least squares. With the
oscillating amplitude scaled proportionally to epsilon the dissipation-norm
metrics are expected to shrink like eps^((1-s)/2).

Exports are CSV (%.17g, exact float64 round-trip) plus a gnuplot script for
the log-log figures.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ConfigError
from .diagnostics import NormSeries, hs_channel, sobolev_norm, space_time_norm
from .initial_data import make_well_prepared_data
from .operators import biot_savart, potential_vorticity, project_qg
from .pe_solver import BlowUpError, default_dt, pe_run
from .qg_solver import qg_run
from .spectral import Grid, Params, l2_norm

__all__ = ["SweepResult", "run_convergence_sweep", "fit_rate", "export",
           "resolve_time", "params_from_config"]

log = logging.getLogger(__name__)

METRIC_NAMES = (
    "osc_es_-1",
    "osc_es_0",
    "osc_es_0.5",
    "sup_osc_l2",
    "omega_diff_sup_l2",
    "qg_diff_es_0.5",
    "qg_diff_es_1",
)

_QGDIFF_S = (0.5, 1.0, 1.5, 2.0)


def params_from_config(config, epsilon=None):
    p = config.params
    return Params(
        epsilon=p.epsilon if epsilon is None else epsilon,
        nu=p.nu,
        nu_prime=p.nu_prime,
        froude=p.froude,
    )


def resolve_time(config, grid, U0):
    """Fixed step size and count: explicit dt must tile t_end in whole
    diagnostic periods; auto dt is rounded down to do so."""
    t_end = config.time.t_end
    cadence = config.diag.cadence
    if config.time.dt is not None:
        dt = config.time.dt
        n_steps = int(round(t_end / dt))
        if n_steps < 1 or abs(n_steps * dt - t_end) > 1e-8 * t_end:
            raise ConfigError(f"time.dt={dt} does not divide t_end={t_end}")
        if n_steps % cadence:
            raise ConfigError(
                f"t_end/dt={n_steps} steps is not a multiple of diag.cadence={cadence}"
            )
        return dt, n_steps
    dt_raw = default_dt(grid, U0, t_end)
    n_steps = int(math.ceil(t_end / dt_raw / cadence)) * cadence
    return t_end / n_steps, n_steps


@dataclass
class SweepResult:
    """Per-epsilon convergence metrics with fitted log-log rates."""

    epsilons: tuple
    metrics: dict
    rates: dict
    pe_records: list
    qg_record: object

    def metric_row(self, i):
        return {name: self.metrics[name][i] for name in METRIC_NAMES}


def fit_rate(eps_list, metric_list):
    """Least-squares slope of log(metric) vs log(eps).

    Nonpositive or non-finite metric values are excluded (logged); fewer
    than two usable points yields NaNs. Returns (slope, intercept,
    rms_residual).
    """
    eps = np.asarray(eps_list, dtype=float)
    met = np.asarray(metric_list, dtype=float)
    if eps.shape != met.shape:
        raise ValueError("epsilon and metric lists differ in length")
    if np.any(eps <= 0):
        raise ValueError("epsilons must be positive")
    good = np.isfinite(met) & (met > 0)
    if not good.all():
        log.warning("fit_rate: excluding %d nonpositive metric point(s)",
                    int((~good).sum()))
    if good.sum() < 2:
        return (math.nan, math.nan, math.nan)
    x = np.log(eps[good])
    y = np.log(met[good])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return (float(slope), float(intercept), float(np.sqrt(np.mean(resid**2))))


def run_convergence_sweep(config, *, progress=None):
    """Run the reference and one full run per epsilon; reduce and fit.

    A blow-up in any run aborts the sweep, naming the offending epsilon.
    """
    grid = Grid(config.grid.n, config.grid.box_length)
    epsilons = tuple(config.sweep.epsilons)
    froude = config.params.froude
    cadence = config.diag.cadence

    initial = {
        eps: make_well_prepared_data(grid, config.with_epsilon(eps))
        for eps in epsilons
    }
    dt, _ = resolve_time(config, grid, initial[epsilons[0]])

    omega0 = potential_vorticity(grid, initial[epsilons[0]], froude)
    qg_record = qg_run(
        grid, omega0, params_from_config(config), config.time.t_end, dt,
        config.diag,
    )
    qg_times = np.asarray(qg_record.snapshot_times)

    def reference_diag(step, t, U):
        idx = step // cadence
        if abs(qg_times[idx] - t) > 1e-9 * max(1.0, t):
            raise RuntimeError(
                f"reference misalignment at t={t} (reference {qg_times[idx]})"
            )
        om_ref = qg_record.omega_snapshots[idx]
        u_ref = biot_savart(grid, om_ref, froude)
        dqg = project_qg(grid, U, froude) - u_ref
        values = {
            "l2_omega_diff": l2_norm(potential_vorticity(grid, U, froude) - om_ref)
        }
        for s in _QGDIFF_S:
            values[hs_channel("qgdiff", s)] = sobolev_norm(grid, dqg, s)
        return values

    metrics = {name: [] for name in METRIC_NAMES}
    pe_records = []
    for eps in epsilons:
        if progress is not None:
            progress(f"running epsilon={eps:g}")
        params = params_from_config(config, epsilon=eps)
        try:
            record = pe_run(
                grid, initial[eps], params, config.time.t_end, dt, config.diag,
                extra_diag=reference_diag,
            )
        except BlowUpError as err:
            raise BlowUpError(err.time, f"epsilon={eps:g}: {err.reason}") from None
        pe_records.append(record)
        series = record.series
        nu, nup = params.nu, params.nu_prime
        metrics["osc_es_-1"].append(space_time_norm(series, "Uosc", -1.0, nu, nup))
        metrics["osc_es_0"].append(space_time_norm(series, "Uosc", 0.0, nu, nup))
        metrics["osc_es_0.5"].append(space_time_norm(series, "Uosc", 0.5, nu, nup))
        metrics["sup_osc_l2"].append(float(series.channel(hs_channel("Uosc", 0)).max()))
        metrics["omega_diff_sup_l2"].append(float(series.channel("l2_omega_diff").max()))
        metrics["qg_diff_es_0.5"].append(space_time_norm(series, "qgdiff", 0.5, nu, nup))
        metrics["qg_diff_es_1"].append(space_time_norm(series, "qgdiff", 1.0, nu, nup))

    rates = {name: fit_rate(epsilons, metrics[name]) for name in METRIC_NAMES}
    return SweepResult(
        epsilons=epsilons,
        metrics=metrics,
        rates=rates,
        pe_records=pe_records,
        qg_record=qg_record,
    )


_GNUPLOT_TEMPLATE = """\
# log-log convergence figure for the epsilon sweep
set datafile separator ","
set terminal pngcairo size 900,600
set output "sweep.png"
set logscale xy
set xlabel "epsilon"
set ylabel "metric"
set key outside right
set grid
plot \\
{plot_lines}
"""


def export(result, out_dir):
    """Write CSV files (and, for sweeps, a gnuplot script); returns paths."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if isinstance(result, NormSeries):
            path = out / "series.csv"
            result.to_csv(path)
            return [path]
        if not isinstance(result, SweepResult):
            raise TypeError(f"cannot export {type(result).__name__}")

        written = []
        sweep_csv = out / "sweep.csv"
        with open(sweep_csv, "w", encoding="utf-8") as fh:
            fh.write(",".join(["eps"] + list(METRIC_NAMES)) + "\n")
            for i, eps in enumerate(result.epsilons):
                row = [eps] + [result.metrics[m][i] for m in METRIC_NAMES]
                fh.write(",".join(f"{x:.17g}" for x in row) + "\n")
        written.append(sweep_csv)

        rates_csv = out / "rates.csv"
        with open(rates_csv, "w", encoding="utf-8") as fh:
            fh.write("metric,slope,intercept,rms_residual\n")
            for name in METRIC_NAMES:
                slope, intercept, resid = result.rates[name]
                fh.write(
                    f"{name},{slope:.17g},{intercept:.17g},{resid:.17g}\n"
                )
        written.append(rates_csv)

        plot_lines = ", \\\n".join(
            f'    "sweep.csv" using 1:{i + 2} with linespoints title "{name}"'
            for i, name in enumerate(METRIC_NAMES)
        )
        gp = out / "sweep.gp"
        gp.write_text(_GNUPLOT_TEMPLATE.format(plot_lines=plot_lines),
                      encoding="utf-8")
        written.append(gp)

        for record, eps in zip(result.pe_records, result.epsilons):
            path = out / f"series_pe_eps{eps:g}.csv"
            record.series.to_csv(path)
            written.append(path)
        qg_path = out / "series_qg.csv"
        result.qg_record.series.to_csv(qg_path)
        written.append(qg_path)
        return written
    except OSError as err:
        raise OSError(f"export to {out} failed: {err}") from err
