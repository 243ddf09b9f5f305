"""Reproduction harness: fidelity sweeps, stability scans, and persistence.

Grids of (protocol time x amplitude scaling) infidelities for the eCD and
optimized gates, and static-error stability scans for the original, eCD,
and optimized protocols, all carried by ScanTable with lossless CSV/JSON
round-trips.  Cells are independent jobs keyed by deterministic per-cell
seeds, so results do not depend on worker scheduling.
"""

from __future__ import annotations

import csv
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, dynamics, optimizer, pulses
from .optimizer import OptimizerConfig
from .pulses import DELTA_MAX_REF, OMEGA_MAX_REF, TWO_PI, ECDParams, ErrorModel, SweepParams

log = logging.getLogger(__name__)

WORKERS_ENV = optimizer.WORKERS_ENV

METHODS_FIG1 = ("ecd", "optimized")
METHODS_FIG2 = ("original", "ecd", "optimized")

#: Default Rydberg blockade, V/(2 pi) = 500 MHz.
DEFAULT_V = TWO_PI * 500e6
DEFAULT_T_RANGE = (0.027e-6, 0.54e-6)
DEFAULT_S_RANGE = (1.0, 4.8)


def _repr_float(x: float) -> str:
    return repr(float(x))


@dataclass(frozen=True)
class SweepGrid:
    """Protocol-time and amplitude-scaling grid at fixed blockade."""

    T_values: np.ndarray = field(
        default_factory=lambda: np.geomspace(*DEFAULT_T_RANGE, 24))
    s_values: np.ndarray = field(
        default_factory=lambda: np.linspace(*DEFAULT_S_RANGE, 8))
    V: float = DEFAULT_V

    def __post_init__(self):
        tv = np.asarray(self.T_values, dtype=float)
        sv = np.asarray(self.s_values, dtype=float)
        if np.any(sv <= 0) or np.any(tv <= 0):
            raise ValueError("grid values must be positive")
        tv.setflags(write=False)
        sv.setflags(write=False)
        object.__setattr__(self, "T_values", tv)
        object.__setattr__(self, "s_values", sv)


@dataclass
class ScanTable:
    """Gridded infidelity results with axis labels and run metadata."""

    x_label: str
    x_values: np.ndarray
    y_label: str
    y_values: np.ndarray
    values: np.ndarray
    method: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x_values = np.asarray(self.x_values, dtype=float)
        self.y_values = np.asarray(self.y_values, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.x_values.size, self.y_values.size):
            raise ValueError(
                f"values shape {self.values.shape} does not match axes "
                f"({self.x_values.size}, {self.y_values.size})")
        finite = self.values[np.isfinite(self.values)]
        if finite.size and (finite.min() < -1e-12 or finite.max() > 1.0 + 1e-12):
            raise ValueError("infidelities must lie in [0, 1]")

    # -- CSV ---------------------------------------------------------------
    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([self.x_label] + [_repr_float(y) for y in self.y_values])
            for i, x in enumerate(self.x_values):
                writer.writerow([_repr_float(x)] + [_repr_float(v) for v in self.values[i]])

    @classmethod
    def from_csv(cls, path, method: str = "", metadata: dict | None = None,
                 y_label: str = ""):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or len(rows) < 2:
            raise ValueError(f"{path}: empty or headerless scan table")
        header = rows[0]
        x_label = header[0]
        y_values = [float(c) for c in header[1:]]
        x_values, values = [], []
        for row in rows[1:]:
            x_values.append(float(row[0]))
            values.append([float(c) for c in row[1:]])
        return cls(x_label=x_label, x_values=np.asarray(x_values),
                   y_label=y_label, y_values=np.asarray(y_values),
                   values=np.asarray(values), method=method,
                   metadata=metadata or {})

    # -- JSON ----------------------------------------------------------------
    def to_json(self, path):
        doc = {
            "x_label": self.x_label,
            "x_values": self.x_values.tolist(),
            "y_label": self.y_label,
            "y_values": self.y_values.tolist(),
            "values": self.values.tolist(),
            "method": self.method,
            "metadata": self.metadata,
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            doc = json.load(fh)
        return cls(x_label=doc["x_label"], x_values=np.asarray(doc["x_values"]),
                   y_label=doc["y_label"], y_values=np.asarray(doc["y_values"]),
                   values=np.asarray(doc["values"]), method=doc["method"],
                   metadata=doc.get("metadata", {}))

    def save(self, directory, stem: str):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        self.to_csv(directory / f"{stem}.csv")
        self.to_json(directory / f"{stem}.json")


# ---------------------------------------------------------------------------
# piecewise-control serialization (schema shared with the optimizer output)
# ---------------------------------------------------------------------------

def piecewise_to_csv(ctrl: pulses.PiecewiseControl, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_start", "value"])
        for t, v in zip(ctrl.t_start, ctrl.values):
            writer.writerow([_repr_float(t), _repr_float(v)])


def piecewise_to_json(ctrl: pulses.PiecewiseControl, path):
    doc = {"n_segments": ctrl.n_segments, "T": ctrl.T, "cutoff": ctrl.cutoff,
           "values": ctrl.values.tolist()}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def piecewise_from_json(path) -> pulses.PiecewiseControl:
    with open(path) as fh:
        doc = json.load(fh)
    return pulses.PiecewiseControl(doc["n_segments"], np.asarray(doc["values"]),
                                   doc["T"], doc["cutoff"])


# ---------------------------------------------------------------------------
# cell evaluations (module-level for process pools)
# ---------------------------------------------------------------------------

def _metric(result: dynamics.GateResult, metric: str) -> float:
    if metric == "phase_optimized":
        return result.infidelity_phase_opt
    if metric == "raw":
        return result.infidelity_raw
    raise ValueError(f"unknown metric {metric!r}")


def _cell_seed(seed: int, i: int, j: int) -> int:
    return int(np.random.SeedSequence([seed, i, j]).generate_state(1)[0])


def optimizer_config_for(T: float, s: float, seed: int,
                         opts: dict | None = None) -> OptimizerConfig:
    opts = dict(opts or {})
    return OptimizerConfig(T=T, omega_bound=s * OMEGA_MAX_REF,
                           delta_bound=s * DELTA_MAX_REF, rng_seed=seed, **opts)


def fig1_cell(method: str, T: float, s: float, V: float, cell_seed: int,
              metric: str = "phase_optimized", optimizer_opts: dict | None = None) -> float:
    """Infidelity of one (T, s) grid cell for the given method."""
    sweep = SweepParams.from_scale(s, T)
    if method == "ecd":
        omega = pulses.calibrate_osc_freq(sweep.omega_max, sweep)
        res = dynamics.simulate_ecd(sweep, ECDParams(osc_freq=omega, blockade=V))
        return _metric(res, metric)
    if method == "optimized":
        cfg = optimizer_config_for(T, s, cell_seed, optimizer_opts)
        return optimizer.optimize(V, cfg, workers=1).final_infidelity
    if method == "original":
        return _metric(dynamics.simulate_adiabatic(sweep, V), metric)
    raise ValueError(f"unknown method {method!r}")


def _fig1_job(args):
    method, i, j, T, s, V, seed, metric, optimizer_opts = args
    try:
        return i, j, fig1_cell(method, T, s, V, _cell_seed(seed, i, j), metric, optimizer_opts)
    except Exception:
        log.warning("fig1 cell failed: method=%s T=%.4e s=%.3f", method, T, s, exc_info=True)
        return i, j, float("nan")


def _pool_map(jobs, job_fn, workers):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(job_fn, jobs))
    return [job_fn(j) for j in jobs]


def run_fig1(grid: SweepGrid, methods=METHODS_FIG1, seed: int = 0,
             metric: str = "phase_optimized", optimizer_opts: dict | None = None,
             workers: int | None = None) -> dict[str, ScanTable]:
    """Infidelity tables over the (T, s) grid, one per method."""
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    tables = {}
    for method in methods:
        jobs = [(method, i, j, float(T), float(s), grid.V, seed, metric, optimizer_opts)
                for i, T in enumerate(grid.T_values)
                for j, s in enumerate(grid.s_values)]
        values = np.full((grid.T_values.size, grid.s_values.size), np.nan)
        for i, j, v in _pool_map(jobs, _fig1_job, workers):
            values[i, j] = v
        tables[method] = ScanTable(
            x_label="T_s", x_values=grid.T_values,
            y_label="s", y_values=grid.s_values,
            values=values, method=method,
            metadata=_base_metadata(method, grid.V, seed, metric, optimizer_opts,
                                    kind="fig1"))
    return tables


def stability_curve(method: str, axis: str, err_values, T: float, s: float, V: float,
                    seed: int, metric: str = "phase_optimized",
                    optimizer_opts: dict | None = None,
                    opt_pulse: optimizer.OptimizedPulse | None = None) -> np.ndarray:
    """Infidelity vs static error for one method along one error axis."""
    if axis not in ("detuning", "amplitude"):
        raise ValueError(f"unknown error axis {axis!r}")
    err_values = np.asarray(err_values, dtype=float)
    sweep = SweepParams.from_scale(s, T)

    def model(e):
        return (ErrorModel(delta_offset=e) if axis == "detuning"
                else ErrorModel(omega_rel=e))

    out = np.empty(err_values.size)
    if method == "original":
        for k, e in enumerate(err_values):
            out[k] = _metric(dynamics.simulate_adiabatic(sweep, V, errors=model(e)), metric)
    elif method == "ecd":
        omega = pulses.calibrate_osc_freq(sweep.omega_max, sweep)
        ecd = ECDParams(osc_freq=omega, blockade=V)
        for k, e in enumerate(err_values):
            out[k] = _metric(dynamics.simulate_ecd(sweep, ecd, errors=model(e)), metric)
    elif method == "optimized":
        if opt_pulse is None:
            cfg = optimizer_config_for(T, s, _cell_seed(seed, 0, 0), optimizer_opts)
            opt_pulse = optimizer.optimize(V, cfg)
        cfg = optimizer_config_for(T, s, _cell_seed(seed, 0, 0), optimizer_opts)
        om = opt_pulse.omega_ctrl.values
        de = opt_pulse.delta_ctrl.values
        for k, e in enumerate(err_values):
            om_e, de_e = pulses.apply_drive_errors((om, de), model(e))
            out[k] = _metric(optimizer.evaluate_physical(om_e, de_e, V, cfg), metric)
    else:
        raise ValueError(f"unknown method {method!r}")
    return out


def run_fig2(err_detuning=None, err_amplitude=None, methods=METHODS_FIG2,
             T: float = 0.54e-6, s: float = 1.0, V: float = DEFAULT_V,
             seed: int = 0, metric: str = "phase_optimized",
             optimizer_opts: dict | None = None,
             workers: int | None = None) -> dict[str, ScanTable]:
    """Stability scans: detuning axis (no amplitude error) and vice versa.

    The optimized pulse is computed once at zero error and then evaluated
    under the static error transforms; the analytic protocols are
    re-simulated with transformed waveforms.  Returns tables keyed by
    "<method>_<axis>".
    """
    if err_detuning is None:
        err_detuning = np.linspace(-TWO_PI * 2e6, TWO_PI * 2e6, 17)
    if err_amplitude is None:
        err_amplitude = np.linspace(-0.10, 0.10, 17)
    opt_pulse = None
    if "optimized" in methods:
        cfg = optimizer_config_for(T, s, _cell_seed(seed, 0, 0), optimizer_opts)
        opt_pulse = optimizer.optimize(V, cfg, workers=workers)
    tables = {}
    axes = [("detuning", np.asarray(err_detuning, dtype=float), "detuning_offset_rad_s"),
            ("amplitude", np.asarray(err_amplitude, dtype=float), "relative_amplitude_error")]
    for axis, err_values, label in axes:
        for method in methods:
            vals = stability_curve(method, axis, err_values, T, s, V, seed, metric,
                                   optimizer_opts, opt_pulse=opt_pulse)
            meta = _base_metadata(method, V, seed, metric, optimizer_opts, kind="fig2")
            meta.update({"T_s": T, "s": s, "error_axis": axis})
            tables[f"{method}_{axis}"] = ScanTable(
                x_label=label, x_values=err_values,
                y_label="", y_values=np.array([0.0]),
                values=vals.reshape(-1, 1), method=method, metadata=meta)
    return tables


def rerun_cell(table: ScanTable, i: int, j: int = 0) -> float:
    """Recompute one fig1 cell from the recorded metadata (bit-exact)."""
    meta = table.metadata
    if meta.get("kind") != "fig1":
        raise ValueError("rerun_cell requires a fig1 table with metadata")
    return fig1_cell(table.method, float(table.x_values[i]), float(table.y_values[j]),
                     meta["V_rad_s"], _cell_seed(meta["seed"], i, j), meta["metric"],
                     meta.get("optimizer_opts") or None)


def _base_metadata(method, V, seed, metric, optimizer_opts, kind):
    return {
        "kind": kind,
        "method": method,
        "V_rad_s": float(V),
        "seed": int(seed),
        "metric": metric,
        "optimizer_opts": dict(optimizer_opts or {}),
        "code_version": __version__,
        "omega_max_ref_rad_s": OMEGA_MAX_REF,
        "delta_max_ref_rad_s": DELTA_MAX_REF,
    }
