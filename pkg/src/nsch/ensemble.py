"""Monte Carlo driver: independent trajectories, moment statistics, martingale test.

Each path owns a generator derived from (base seed, path index), so the
ensemble is reproducible for any worker count and any path ordering.  Failed
paths (positivity loss, stalled velocity recovery, stability aborts) are
recorded with their failure time and excluded from the survivor statistics;
the survivor fraction is itself a first-class output.
"""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .diagnostics import (
    EnergyLedger,
    artificial_energy,
    energy_ledger_step,
    initial_ledger_row,
    total_energy,
    v15_functional,
)
from .errors import CutoffSaturatedWarning, GramSolveError, PositivityError, SchemeError, TimeStepError
from .noise import path_generator
from .scheme import ApproxParams, InitialData, SchemeState, step
from .spectral import (
    SpectralField,
    TorusGrid,
    gradient,
    laplacian,
    multiply,
    norm_l2,
)

__all__ = [
    "EnsembleConfig",
    "TrajectoryResult",
    "run_trajectory",
    "run_paths",
    "EnsembleReport",
    "MartingaleReport",
    "martingale_test",
    "sweep",
    "SCHEMA_VERSION",
]

SCHEMA_VERSION = 1

SUP_STATS = ("c_l2_sq", "grad_c_l2_sq", "lap_c_l2_sq", "v15")


@dataclass(frozen=True)
class EnsembleConfig:
    grid: TorusGrid
    params: ApproxParams
    initial: InitialData
    paths: int
    horizon: float
    snapshot_stride: int = 0
    betas: tuple[int, ...] = (1, 2)
    base_seed: int | None = None
    workers: int = 1
    keep_final_state: bool = False
    cutoff_warn_fraction: float = 0.5

    def __post_init__(self):
        if self.paths < 1:
            raise ValueError("ensemble needs at least one path")
        steps = self.horizon / self.params.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ValueError(f"horizon {self.horizon} is not an integral number of steps at dt = {self.params.dt}")
        if round(steps) < 1:
            raise ValueError(f"horizon {self.horizon} covers no steps at dt = {self.params.dt}")
        if self.base_seed is None:
            object.__setattr__(self, "base_seed", self.params.noise.seed)

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.params.dt))


@dataclass
class TrajectoryResult:
    path_index: int
    rows: list[EnergyLedger]
    sup_stats: dict[str, float]
    initial_stats: dict[str, float]
    final_energy: float
    final_artificial: float
    failure: dict | None
    chi_min: float
    chi_zero_fraction: float
    steps_done: int
    final_state: SchemeState | None = None
    rho_c_snapshots: list[tuple[float, SpectralField]] = field(default_factory=list)


def _state_functionals(state: SchemeState, gamma: float) -> dict[str, float]:
    c = state.c
    return {
        "c_l2_sq": norm_l2(c) ** 2,
        "grad_c_l2_sq": norm_l2(gradient(c)) ** 2,
        "lap_c_l2_sq": norm_l2(laplacian(c)) ** 2,
        "v15": v15_functional(state, gamma),
    }


def run_trajectory(
    config: EnsembleConfig,
    path_index: int,
    initial_state: SchemeState | None = None,
    on_step=None,
) -> TrajectoryResult:
    """One seeded path: ledger rows, running sup functionals, failure record."""
    params = config.params
    base = config.base_seed
    if initial_state is None:
        initial_state = config.initial.build(config.grid, params, path_generator(base, 0, stream=1))
    state = initial_state
    gen = path_generator(base, path_index, stream=0)

    gamma = params.fspec.gamma
    stats0 = _state_functionals(state, gamma)
    sup = dict(stats0)
    rows = [initial_ledger_row(state, params)]
    snaps: list[tuple[float, SpectralField]] = []
    if config.snapshot_stride > 0:
        snaps.append((state.t, multiply(state.rho, state.c)))

    failure = None
    chi_min = 1.0
    chi_zero = 0
    done = 0
    for i in range(config.steps):
        try:
            new, rep = step(state, params, gen)
        except (PositivityError, GramSolveError, TimeStepError) as exc:
            failure = {
                "kind": {
                    PositivityError: "positivity_loss",
                    GramSolveError: "gram_failure",
                    TimeStepError: "timestep",
                }[type(exc)],
                "t": state.t,
                "step": i,
                "message": str(exc),
            }
            break
        rows.append(energy_ledger_step(state, new, rep.increment, params))
        state = new
        done = i + 1
        chi_min = min(chi_min, rep.chi)
        if rep.chi == 0.0:
            chi_zero += 1
        for k, v in _state_functionals(state, gamma).items():
            sup[k] = max(sup[k], v)
        if config.snapshot_stride > 0 and done % config.snapshot_stride == 0:
            snaps.append((state.t, multiply(state.rho, state.c)))
        if on_step is not None:
            on_step(done, state, gen, rep)

    frac = chi_zero / max(done, 1)
    if failure is None and frac > config.cutoff_warn_fraction:
        warnings.warn(
            f"velocity cut-off fully engaged on {frac:.0%} of steps (path {path_index})",
            CutoffSaturatedWarning,
            stacklevel=2,
        )
    return TrajectoryResult(
        path_index=path_index,
        rows=rows,
        sup_stats=sup,
        initial_stats=stats0,
        final_energy=total_energy(state, params.fspec) if failure is None else float("nan"),
        final_artificial=artificial_energy(state, params) if failure is None else float("nan"),
        failure=failure,
        chi_min=chi_min,
        chi_zero_fraction=frac,
        steps_done=done,
        final_state=state if config.keep_final_state else None,
        rho_c_snapshots=snaps,
    )


@dataclass(frozen=True)
class MartingaleReport:
    kind: str  # "stochastic" or "deterministic"
    paths: int
    value: float  # z score, or the bias itself in the deterministic channel
    passed: bool

    def as_dict(self) -> dict:
        return {"kind": self.kind, "paths": self.paths, "value": self.value, "passed": self.passed}


def martingale_test(per_path_residuals) -> MartingaleReport:
    """z score of the per-path total compensated ledger residual.

    The residual already subtracts the Ito corrections and the stochastic
    increment, so its total is a martingale up to O(dt) discretization bias;
    the ensemble mean must sit within 3 standard errors of zero.  With no
    dispersion across paths (deterministic runs) the z channel is undefined
    and the raw bias is reported, flagged instead of scored.
    """
    totals = np.array([float(np.sum(np.asarray(r, dtype=float))) for r in per_path_residuals])
    p = len(totals)
    if p < 8:
        raise ValueError(f"martingale test needs at least 8 paths, got {p}")
    sd = float(np.std(totals, ddof=1))
    mean = float(np.mean(totals))
    if sd == 0.0:
        return MartingaleReport(kind="deterministic", paths=p, value=mean, passed=True)
    z = mean / (sd / math.sqrt(p))
    return MartingaleReport(kind="stochastic", paths=p, value=z, passed=abs(z) < 3.0)


@dataclass(frozen=True)
class EnsembleReport:
    schema_version: int
    paths: int
    survivors: int
    survivor_fraction: float
    failures: dict
    statistics: dict
    martingale: dict
    mean_final_energy: float
    mean_final_artificial: float
    bound_ratios: dict

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema_version": self.schema_version,
                "paths": self.paths,
                "survivors": self.survivors,
                "survivor_fraction": self.survivor_fraction,
                "failures": self.failures,
                "statistics": self.statistics,
                "martingale": self.martingale,
                "mean_final_energy": self.mean_final_energy,
                "mean_final_artificial": self.mean_final_artificial,
                "bound_ratios": self.bound_ratios,
            },
            indent=2,
        )


def _moment_summary(values: np.ndarray, betas) -> dict:
    out = {}
    for beta in betas:
        powered = values**beta
        n = len(powered)
        mean = float(np.mean(powered))
        se = float(np.std(powered, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        out[f"beta{beta}"] = {
            "mean": mean,
            "se": se,
            "min": float(np.min(powered)),
            "max": float(np.max(powered)),
        }
    return out


def _one_path(args) -> TrajectoryResult:
    config, index, state = args
    return run_trajectory(config, index, initial_state=state)


def run_paths(config: EnsembleConfig) -> tuple[EnsembleReport, list[TrajectoryResult]]:
    """Run the ensemble and aggregate; results are merged by path index."""
    state0 = config.initial.build(config.grid, config.params, path_generator(config.base_seed, 0, stream=1))
    jobs = [(config, i, state0) for i in range(config.paths)]
    if config.workers > 1 and config.paths > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_one_path, jobs, chunksize=1))
    else:
        results = [_one_path(j) for j in jobs]
    results.sort(key=lambda r: r.path_index)

    survivors = [r for r in results if r.failure is None]
    if not survivors:
        raise SchemeError("all ensemble paths failed")
    failures: dict[str, list] = {}
    for r in results:
        if r.failure is not None:
            failures.setdefault(r.failure["kind"], []).append(
                {"path": r.path_index, "t": r.failure["t"], "step": r.failure["step"]}
            )

    stats = {}
    for name in SUP_STATS:
        vals = np.array([r.sup_stats[name] for r in survivors])
        stats[f"sup_{name}"] = _moment_summary(vals, config.betas)

    init0 = survivors[0].initial_stats
    bound_ratios = {}
    for name in SUP_STATS:
        base = max(init0[name], 1e-30)
        worst = max(r.sup_stats[name] for r in survivors)
        bound_ratios[name] = worst / base

    if len(survivors) >= 8:
        mart = martingale_test([[row.residual for row in r.rows] for r in survivors]).as_dict()
    else:
        mart = {"kind": "skipped", "paths": len(survivors), "value": float("nan"), "passed": True}

    report = EnsembleReport(
        schema_version=SCHEMA_VERSION,
        paths=config.paths,
        survivors=len(survivors),
        survivor_fraction=len(survivors) / config.paths,
        failures=failures,
        statistics=stats,
        martingale=mart,
        mean_final_energy=float(np.mean([r.final_energy for r in survivors])),
        mean_final_artificial=float(np.mean([r.final_artificial for r in survivors])),
        bound_ratios=bound_ratios,
    )
    return report, results


_SWEEPABLE = ("eps", "m", "n", "R", "dt")


@dataclass(frozen=True)
class SweepCell:
    parameter: str
    value: float
    report: EnsembleReport
    final_state: SchemeState | None
    accumulated_residual: float

    def trend_columns(self) -> dict:
        return {
            "value": self.value,
            "survivor_fraction": self.report.survivor_fraction,
            "mean_final_energy": self.report.mean_final_energy,
            "mean_final_artificial": self.report.mean_final_artificial,
            "accumulated_residual": self.accumulated_residual,
        }


def sweep(config: EnsembleConfig, parameter: str, values) -> list[SweepCell]:
    """One ensemble per value with common random numbers across cells."""
    if parameter not in _SWEEPABLE:
        raise ValueError(f"parameter must be one of {_SWEEPABLE}, got {parameter!r}")
    cells = []
    for v in values:
        if not np.isfinite(v):
            raise ValueError(f"sweep value {v} is not finite")
        params = replace(config.params, **{parameter: type(getattr(config.params, parameter))(v)})
        cell_config = replace(config, params=params, keep_final_state=True)
        report, results = run_paths(cell_config)
        survivors = [r for r in results if r.failure is None]
        acc = float(np.mean([abs(sum(row.residual for row in r.rows)) for r in survivors]))
        cells.append(
            SweepCell(
                parameter=parameter,
                value=float(v),
                report=report,
                final_state=survivors[0].final_state,
                accumulated_residual=acc,
            )
        )
    return cells


def sweep_trend_csv(cells: list[SweepCell]) -> str:
    """Trend table, one row per swept value."""
    import csv as _csv
    import io as _io

    buf = _io.StringIO()
    writer = _csv.writer(buf, lineterminator="\n")
    cols = ["parameter", "value", "survivor_fraction", "mean_final_energy", "mean_final_artificial",
            "accumulated_residual", "final_state_l2_diff_prev"]
    writer.writerow(cols)
    prev = None
    for cell in cells:
        diff = ""
        if prev is not None and prev.final_state is not None and cell.final_state is not None:
            d = 0.0
            for a, b in (
                (prev.final_state.rho, cell.final_state.rho),
                (prev.final_state.u, cell.final_state.u),
                (prev.final_state.c, cell.final_state.c),
            ):
                d += norm_l2(SpectralField(a.grid, a.coeffs - b.coeffs)) ** 2
            diff = f"{math.sqrt(d):.17g}"
        row = cell.trend_columns()
        writer.writerow(
            [cell.parameter]
            + [f"{row[c]:.17g}" if isinstance(row[c], float) else row[c] for c in cols[1:-1]]
            + [diff]
        )
        prev = cell
    return buf.getvalue()
