"""Parameter sweeps, method dispatch and CSV emission.

A sweep evaluates one steady-state row per grid point, with the method
(direct superoperator solve, trajectory ensemble, cavity-eliminated model,
or closed form) chosen up front or per point by the auto rule.  Rows always
come back in grid order; per-point failures land in the ``error`` column
instead of aborting the run.
"""

from __future__ import annotations

import csv
import math
import multiprocessing as mp
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import collective, liouville, mcwf, observables
from .errors import ConfigError, CutoffConvergenceError, SpaceTooLargeError
from .operators import SystemParams, build_space

SWEEPABLE = ("kappa", "n_emitters", "dephasing", "pump_px")
METHODS = ("direct", "mcwf", "adiabatic", "analytic", "auto")
AUTO_DIRECT_DIM = 4096

CSV_COLUMNS = [
    "N", "kappa_over_g", "gamma_over_g", "px_over_g", "gstar_over_g",
    "method_used", "n_max_used", "n_a", "n_J", "total_nx",
    "g2_cavity", "g2_collective", "g2_err", "error",
]


@dataclass(frozen=True)
class SweepSpec:
    """One sweep: the grid, the fixed parameters, and the method options."""

    parameter: str
    grid: tuple[float, ...]
    n_emitters: int
    kappa: float | None = None
    gamma: float = 0.0
    pump_px: float = 0.0
    dephasing: float = 0.0
    n_max: int | None = None
    method: str = "direct"
    trajectories: int = 1000
    t_total: float | None = None
    t_burn_in: float | None = None
    sample_interval: float | None = None
    seed: int = 0
    workers: int = 1
    output: str | None = None
    figures: str | None = None

    def __post_init__(self):
        if self.parameter not in SWEEPABLE:
            raise ConfigError(f"cannot sweep {self.parameter!r}; choose one of {SWEEPABLE}")
        if len(self.grid) == 0:
            raise ConfigError("sweep grid is empty")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose one of {METHODS}")

    def params_at(self, value: float) -> SystemParams:
        fields = {
            "n_emitters": self.n_emitters,
            "kappa": self.kappa,
            "gamma": self.gamma,
            "pump_px": self.pump_px,
            "dephasing": self.dephasing,
        }
        fields[self.parameter] = int(value) if self.parameter == "n_emitters" else value
        if fields["kappa"] is None:
            raise ConfigError("missing required field 'kappa' (set it or sweep it)")
        try:
            return SystemParams(coupling_g=1.0, **fields)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def make_grid(kind: str, spec_fields: Sequence[str]) -> tuple[float, ...]:
    """Grid from the sweep token fields after ``name:kind:``."""
    if kind == "list":
        if len(spec_fields) != 1:
            raise ConfigError("list grid expects a single comma-separated field")
        try:
            return tuple(float(v) for v in spec_fields[0].split(","))
        except ValueError as exc:
            raise ConfigError(f"malformed list grid value: {exc}") from exc
    if kind not in ("log", "linear"):
        raise ConfigError(f"unknown grid type {kind!r}; choose log, linear or list")
    if len(spec_fields) != 3:
        raise ConfigError(f"{kind} grid expects lo:hi:count")
    try:
        lo, hi = float(spec_fields[0]), float(spec_fields[1])
        count = int(spec_fields[2])
    except ValueError as exc:
        raise ConfigError(f"malformed grid bound: {exc}") from exc
    if count < 1:
        raise ConfigError("grid point count must be >= 1")
    if kind == "log":
        if lo <= 0 or hi <= 0:
            raise ConfigError("log grid requires positive bounds")
        if count == 1:
            return (lo,)
        return tuple(np.logspace(math.log10(lo), math.log10(hi), count))
    if count == 1:
        return (lo,)
    return tuple(np.linspace(lo, hi, count))


def parse_sweep_token(token: str) -> tuple[str, tuple[float, ...]]:
    """Parse ``param:type:...`` into a parameter name and its grid."""
    parts = token.split(":")
    if len(parts) < 2:
        raise ConfigError(f"malformed sweep token {token!r}; expected param:type:...")
    name = parts[0].replace("-", "_")
    if name == "pump":
        name = "pump_px"
    if name not in SWEEPABLE:
        raise ConfigError(f"cannot sweep {parts[0]!r}; choose one of {SWEEPABLE}")
    grid = make_grid(parts[1], parts[2:])
    if name == "n_emitters":
        if any(v != int(v) or v < 1 for v in grid):
            raise ConfigError("n_emitters sweep values must be positive integers")
        grid = tuple(int(v) for v in grid)
    return name, grid


def _empty_row(params: SystemParams) -> dict:
    return {
        "N": params.n_emitters,
        "kappa_over_g": params.kappa,
        "gamma_over_g": params.gamma,
        "px_over_g": params.pump_px,
        "gstar_over_g": params.dephasing,
        "method_used": None,
        "n_max_used": None,
        "n_a": None, "n_J": None, "total_nx": None,
        "g2_cavity": None, "g2_collective": None, "g2_err": None,
        "error": None,
    }


def _fill_from_state(row: dict, rho) -> None:
    pops = observables.populations(rho)
    row["n_a"] = pops.n_a
    row["n_J"] = pops.n_J
    row["total_nx"] = pops.total_nx
    row["g2_cavity"] = observables.compute_named("g2_cavity", rho)
    row["g2_collective"] = observables.compute_named("g2_collective", rho)


def _run_direct(row: dict, spec: SweepSpec, params: SystemParams) -> None:
    if spec.n_max is not None:
        space = build_space(params.n_emitters, spec.n_max)
        rho = liouville.steady_state(liouville.build_liouvillian(space, params))
        row["n_max_used"] = spec.n_max
    else:
        n_used, rho = liouville.converge_cutoff(params)
        row["n_max_used"] = n_used
    _fill_from_state(row, rho)


def _run_mcwf(row: dict, spec: SweepSpec, params: SystemParams) -> None:
    if spec.n_max is None:
        raise ConfigError("method mcwf needs an explicit photon cutoff (nmax)")
    space = build_space(params.n_emitters, spec.n_max)
    config = _trajectory_config(spec, params)
    names = ["n_a", "n_J", "total_nx", "g2_cavity", "g2_collective"]
    est = mcwf.estimate_steady(params, space, config, names)
    row["n_max_used"] = spec.n_max
    for name in names:
        row[name] = est.means[name]
    err = est.std_errors["g2_cavity"]
    row["g2_err"] = err if np.isfinite(err) else est.std_errors["g2_collective"]


def _trajectory_config(spec: SweepSpec, params: SystemParams) -> mcwf.TrajectoryConfig:
    base = mcwf.default_trajectory_config(params, seed=spec.seed,
                                          n_trajectories=spec.trajectories)
    updates: dict = {}
    if spec.t_total is not None:
        updates["t_total"] = spec.t_total
    if spec.t_burn_in is not None:
        updates["t_burn_in"] = spec.t_burn_in
    if spec.sample_interval is not None:
        updates["sample_interval"] = spec.sample_interval
    return replace(base, **updates) if updates else base


def _run_adiabatic(row: dict, params: SystemParams) -> None:
    # the eliminated cavity leaves no photon observables to report
    rp = collective.ReducedParams.from_system(params)
    rho = liouville.steady_state(collective.build_reduced_liouvillian(rp))
    pops = observables.populations(rho)
    row["n_J"] = pops.n_J
    row["total_nx"] = pops.total_nx
    g2 = observables.compute_named("g2_collective", rho)
    row["g2_collective"] = g2 if np.isfinite(g2) else None


def _run_analytic(row: dict, params: SystemParams) -> None:
    gamma_coll = 4.0 * params.coupling_g**2 / params.kappa
    if params.n_emitters == 2:
        row["g2_collective"] = collective.analytic_g2_two(
            gamma_coll, params.pump_px, order="series")
    elif params.n_emitters == 3:
        row["g2_collective"] = collective.analytic_g2_three(gamma_coll, params.pump_px)
    else:
        raise ConfigError("analytic method covers N=2 and N=3 only")


def run_point(spec: SweepSpec, value: float) -> dict:
    """Evaluate one grid point; never raises, failures go to the error column."""
    try:
        params = spec.params_at(value)
    except ConfigError as exc:
        fields = {name: None for name in CSV_COLUMNS}
        fields.update(N=spec.n_emitters, error=str(exc))
        return fields
    row = _empty_row(params)
    method = spec.method
    try:
        if method == "auto":
            method = _auto_method(spec, params)
        row["method_used"] = method
        if method == "direct":
            _run_direct(row, spec, params)
        elif method == "mcwf":
            _run_mcwf(row, spec, params)
        elif method == "adiabatic":
            _run_adiabatic(row, params)
        elif method == "analytic":
            _run_analytic(row, params)
    except Exception as exc:  # per-point isolation is the contract here
        row["error"] = str(exc)
    return row


def _auto_method(spec: SweepSpec, params: SystemParams) -> str:
    """direct when the space fits a comfortable superoperator solve, else mcwf.

    The cavity-eliminated model is never auto-selected because its validity
    depends on the parameter point, not on size.
    """
    if spec.n_max is not None:
        dim = (spec.n_max + 1) * 2**params.n_emitters
        return "direct" if dim <= AUTO_DIRECT_DIM else "mcwf"
    try:
        liouville.converge_cutoff(params, max_vec_entries=AUTO_DIRECT_DIM**2)
        return "direct"
    except (CutoffConvergenceError, SpaceTooLargeError):
        return "mcwf"


_POINT_CTX: dict = {}


def _point_init(spec: SweepSpec):
    _POINT_CTX["spec"] = spec


def _point_run(value: float) -> dict:
    return run_point(_POINT_CTX["spec"], value)


def run_sweep(spec: SweepSpec) -> list[dict]:
    """All grid points, in grid order; points run independently."""
    if spec.workers <= 1 or len(spec.grid) == 1:
        return [run_point(spec, v) for v in spec.grid]
    ctx = mp.get_context("fork")
    with ProcessPoolExecutor(max_workers=spec.workers, mp_context=ctx,
                             initializer=_point_init, initargs=(spec,)) as pool:
        return list(pool.map(_point_run, spec.grid))


def _format_cell(name: str, value) -> str:
    if value is None:
        return ""
    if name in ("method_used", "error"):
        return str(value)
    if name in ("N", "n_max_used"):
        return str(int(value))
    if isinstance(value, float) and math.isnan(value):
        return ""
    return format(float(value), ".12g")


def emit_csv(rows: Sequence[dict], path: str) -> str:
    """Write the result table with a fixed column set and 12-digit floats."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_format_cell(name, row.get(name)) for name in CSV_COLUMNS])
    return path
