"""Steady-state observables over parameter grids and closed-form trajectories."""
from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from multiprocessing import get_context

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .hilbert import DEFAULT_CUTOFF, Space
from .liouville import RESIDUAL_TOL, NoEmissionError, SteadyStateError, liouvillian_for, solve_steady_state
from .model import DELTA_MODES, FREQUENCY_FIELDS, ModelParams, auto_gamma_e, resolve_delta
from .observables import normal_moment, photon_statistics, spin_statistics

log = logging.getLogger(__name__)

OBSERVABLES = ("n_s", "g2_1", "g3_1", "g2_2", "p_tilde", "Cxx", "Czz")
G_OBSERVABLES = ("g2_1", "g3_1", "g2_2")
AXIS_PARAMS = tuple(f for f in FREQUENCY_FIELDS if f != "g_a") + ("phi", "delta_ratio")
TRAJECTORIES = ("none", "blue_sideband_rabi", "blue_two_photon", "red_two_photon")
CONVERGENCE_RTOL = 1e-3
# normal-ordered moments below this are treated as unresolved
MOMENT_FLOOR = 1e-20
_NUMERATOR = {"g2_1": 2, "g3_1": 3, "g2_2": 4}
MAX_EXTRA_CUTOFF = 6


@dataclass(frozen=True)
class Axis:
    name: str
    start: float
    stop: float
    points: int

    def __post_init__(self):
        if self.name not in AXIS_PARAMS:
            raise ValueError(f"cannot sweep {self.name!r}; choose from {AXIS_PARAMS}")
        if self.points < 2:
            raise ValueError("an axis needs at least 2 points")
        if not (math.isfinite(self.start) and math.isfinite(self.stop)):
            raise ValueError("axis range must be finite")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points)


@dataclass(frozen=True)
class SweepSpec:
    axis1: Axis
    axis2: Axis | None = None
    base: ModelParams = field(default_factory=ModelParams)
    delta_mode: str = "fixed"
    delta_ratio: float | None = None
    gamma_e: str | float = "auto"
    trajectory: str = "none"
    observables: tuple[str, ...] = OBSERVABLES
    photon_cutoff: int = DEFAULT_CUTOFF
    converge: bool = True
    rtol: float = CONVERGENCE_RTOL

    def __post_init__(self):
        if not self.rtol > 0:
            raise ValueError("rtol must be positive")
        if self.axis2 is not None and self.axis2.name == self.axis1.name:
            raise ValueError("sweep axes must be distinct")
        if self.delta_mode not in DELTA_MODES:
            raise ValueError(f"delta_mode must be one of {DELTA_MODES}")
        if self.delta_mode != "fixed" and self.delta_ratio is None and "delta_ratio" not in self.axis_names:
            raise ValueError(f"delta_mode {self.delta_mode!r} needs delta_ratio")
        if "delta" in self.axis_names and self.delta_mode != "fixed":
            raise ValueError("sweeping delta requires delta_mode = fixed")
        if self.trajectory not in TRAJECTORIES:
            raise ValueError(f"trajectory must be one of {TRAJECTORIES}")
        if self.trajectory != "none" and "Delta_a" in self.axis_names:
            raise ValueError("a trajectory fixes Delta_a; do not sweep it as well")
        bad = set(self.observables) - set(OBSERVABLES)
        if bad:
            raise ValueError(f"unknown observables {sorted(bad)}")
        if not isinstance(self.gamma_e, str):
            object.__setattr__(self, "gamma_e", float(self.gamma_e))
        elif self.gamma_e != "auto":
            raise ValueError("gamma_e must be 'auto' or a number")
        if self.base.units != "dimensionless":
            object.__setattr__(self, "base", self.base.to_dimensionless())
        Space(self.photon_cutoff)

    @property
    def axes(self) -> tuple[Axis, ...]:
        return (self.axis1,) if self.axis2 is None else (self.axis1, self.axis2)

    @property
    def axis_names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.axes)

    def grid(self) -> list[tuple[tuple[int, ...], tuple[float, ...]]]:
        """(index, values) pairs in lexicographic index order."""
        if self.axis2 is None:
            return [((i,), (float(x),)) for i, x in enumerate(self.axis1.values)]
        return [((i, j), (float(x), float(y)))
                for i, x in enumerate(self.axis1.values)
                for j, y in enumerate(self.axis2.values)]


def trajectory_detuning(name: str, V: float, g_a: float = 1.0) -> float:
    if name == "blue_sideband_rabi":
        return -V - math.sqrt(V * V + 4 * g_a * g_a)
    if name == "blue_two_photon":
        if V == 0:
            raise ValueError("blue two-photon resonance at infinity for V = 0")
        return -g_a * g_a / V
    if name == "red_two_photon":
        return 2 * V
    raise ValueError(f"unknown trajectory {name!r}")


def resolve_params(base: ModelParams, delta_mode: str = "fixed", delta_ratio: float | None = None,
                   gamma_e: str | float = "auto", trajectory: str = "none") -> ModelParams:
    """Apply trajectory, delta convention and gamma_e to a dimensionless parameter set."""
    p = base.to_dimensionless()
    if trajectory != "none":
        p = p.replace(Delta_a=trajectory_detuning(trajectory, p.V, p.g_a))
    delta = resolve_delta(delta_mode, p.Delta_a, p.V, p.delta, delta_ratio)
    ge = auto_gamma_e(p.V) if gamma_e == "auto" else float(gamma_e)
    return p.replace(delta=delta, gamma_e=ge)


def resolve_point(spec: SweepSpec, values: dict[str, float]) -> ModelParams:
    """Model parameters at one grid point: overrides, trajectory, delta, gamma_e."""
    changes = {k: v for k, v in values.items() if k != "delta_ratio"}
    ratio = values.get("delta_ratio", spec.delta_ratio)
    return resolve_params(spec.base.replace(**changes), spec.delta_mode, ratio,
                          spec.gamma_e, spec.trajectory)


def observable_columns(spec: SweepSpec) -> list[str]:
    cols = []
    for name in spec.observables:
        if name == "p_tilde":
            cols += [f"p_tilde_{q}" for q in range(spec.photon_cutoff + 1)]
        else:
            cols.append(name)
    cols += [f"log10_{g}" for g in spec.observables if g in G_OBSERVABLES]
    return cols


def measure(params: ModelParams, cutoff: int, observables=OBSERVABLES):
    """Steady state at one cutoff; returns (values, residual).

    ``values`` also carries the normal-ordered moments under keys "m1".."m4".
    """
    ss = solve_steady_state(liouvillian_for(params, Space(cutoff)))
    rho = ss.rho
    out: dict[str, float] = {}
    wanted = set(observables)
    if wanted & {"n_s", "p_tilde", *G_OBSERVABLES}:
        st = photon_statistics(rho)
        out.update(n_s=st.n_s, g2_1=st.g2_1, g3_1=st.g3_1, g2_2=st.g2_2)
        for m in range(1, 5):
            out[f"m{m}"] = normal_moment(rho, m)
        pt = st.p_tilde if st.p_tilde is not None else np.full(cutoff + 1, np.nan)
        for q, val in enumerate(pt):
            out[f"p_tilde_{q}"] = float(val)
    if wanted & {"Cxx", "Czz"}:
        sc = spin_statistics(rho)
        out.update(Cxx=sc.Cxx, Czz=sc.Czz)
    return out, ss.residual


def _close(a: float, b: float, rtol: float) -> bool:
    if math.isnan(a) and math.isnan(b):
        return True
    if a == b:
        return True
    return abs(a - b) <= rtol * max(abs(a), abs(b))


def _settled(key: str, a: dict, b: dict, rtol: float = CONVERGENCE_RTOL) -> bool:
    m = _NUMERATOR.get(key)
    if m is not None and max(abs(a[f"m{m}"]), abs(b[f"m{m}"])) < MOMENT_FLOOR:
        return True
    return _close(a[key], b[key], rtol)


def converged_measure(params: ModelParams, cutoff: int, observables=OBSERVABLES,
                      converge: bool = True, rtol: float = CONVERGENCE_RTOL):
    """Measure with cutoff escalation.

    The result at cutoff c is accepted when c + 2 changes n_s and each g by
    less than ``rtol`` (0.1 % by default); otherwise c is raised by 2 up to
    the start value + 6.
    A g whose numerator moment is below MOMENT_FLOOR at both cutoffs is
    unresolvable and does not block acceptance.
    Returns (values, residual, cutoff_used, converged).
    """
    vals, res = measure(params, cutoff, observables)
    if not converge:
        return vals, res, cutoff, True
    checked = [k for k in ("n_s",) + G_OBSERVABLES if k in vals]
    c = cutoff
    while True:
        nxt_vals, nxt_res = measure(params, c + 2, observables)
        if all(_settled(k, vals, nxt_vals, rtol) for k in checked):
            return vals, res, c, True
        c += 2
        vals, res = nxt_vals, nxt_res
        if c >= cutoff + MAX_EXTRA_CUTOFF:
            return vals, res, c, False


@dataclass
class SweepRow:
    index: tuple[int, ...]
    axes: dict[str, float]
    Delta_a: float
    delta: float
    values: dict[str, float]
    cutoff: int
    residual: float
    status: str

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def evaluate_point(spec: SweepSpec, index, axis_values) -> SweepRow:
    axes = dict(zip(spec.axis_names, axis_values))
    cols = observable_columns(spec)
    nan_row = {c: math.nan for c in cols}
    try:
        p = resolve_point(spec, axes)
    except ValueError as exc:
        return SweepRow(tuple(index), axes, math.nan, math.nan, nan_row, spec.photon_cutoff, math.nan,
                        f"error: {exc}")
    try:
        vals, res, cutoff, conv = converged_measure(p, spec.photon_cutoff, spec.observables, spec.converge,
                                                     spec.rtol)
    except (SteadyStateError, NoEmissionError, ValueError) as exc:
        return SweepRow(tuple(index), axes, p.Delta_a, p.delta, nan_row, spec.photon_cutoff, math.nan,
                        f"error: {exc}")
    row = {}
    for c in cols:
        if c.startswith("log10_"):
            g = vals.get(c[6:], math.nan)
            row[c] = math.log10(g) if g > 0 else (-math.inf if g == 0 else math.nan)
        elif c.startswith("p_tilde_"):
            row[c] = vals.get(c, 0.0)
        else:
            row[c] = vals[c]
    status = "ok" if conv else "nonconverged"
    if not res < RESIDUAL_TOL:
        status = "residual"
    return SweepRow(tuple(index), axes, p.Delta_a, p.delta, row, cutoff, res, status)


def _evaluate_chunk(spec: SweepSpec, chunk):
    with threadpool_limits(limits=1):
        return [(slot, evaluate_point(spec, idx, vals)) for slot, idx, vals in chunk]


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list[SweepRow]
    metadata: dict

    @property
    def columns(self) -> list[str]:
        return list(self.spec.axis_names) + self._extra_columns()

    def _extra_columns(self) -> list[str]:
        extra = [c for c in ("Delta_a", "delta") if c not in self.spec.axis_names]
        return extra + observable_columns(self.spec) + ["cutoff", "residual", "status"]

    def column(self, name: str) -> np.ndarray:
        if name in self.spec.axis_names:
            return np.array([r.axes[name] for r in self.rows])
        if name == "Delta_a":
            return np.array([r.Delta_a for r in self.rows])
        if name == "delta":
            return np.array([r.delta for r in self.rows])
        if name == "cutoff":
            return np.array([r.cutoff for r in self.rows])
        return np.array([r.values.get(name, math.nan) for r in self.rows])

    @property
    def failures(self) -> list[SweepRow]:
        return [r for r in self.rows if not r.ok]

    def table(self) -> list[list]:
        out = []
        for r in self.rows:
            line = [r.axes[n] for n in self.spec.axis_names]
            for c in self._extra_columns():
                if c == "Delta_a":
                    line.append(r.Delta_a)
                elif c == "delta":
                    line.append(r.delta)
                elif c == "cutoff":
                    line.append(r.cutoff)
                elif c == "residual":
                    line.append(r.residual)
                elif c == "status":
                    line.append(r.status)
                else:
                    line.append(r.values[c])
            out.append(line)
        return out


def run_sweep(spec: SweepSpec, threads: int = 1) -> SweepResult:
    """Evaluate every grid point; failures are recorded in-row.

    With ``threads > 1`` points are statically partitioned over a process
    pool. Each point runs with single-threaded BLAS, so the output does not
    depend on the worker count.
    """
    t0 = time.perf_counter()
    grid = spec.grid()
    slots: list[SweepRow | None] = [None] * len(grid)
    work = [(k, idx, vals) for k, (idx, vals) in enumerate(grid)]
    threads = max(1, int(threads))
    if threads == 1 or len(work) == 1:
        for slot, row in _evaluate_chunk(spec, work):
            slots[slot] = row
    else:
        nworkers = min(threads, len(work))
        chunks = [work[w::nworkers] for w in range(nworkers)]
        with ProcessPoolExecutor(max_workers=nworkers, mp_context=get_context("spawn")) as pool:
            for part in pool.map(_evaluate_chunk, [spec] * nworkers, chunks):
                for slot, row in part:
                    slots[slot] = row
    rows = [r for r in slots if r is not None]
    meta = {
        "package": f"cavsei {__version__}",
        "base_params": spec.base.as_dict(),
        "axes": [asdict(a) for a in spec.axes],
        "delta_mode": spec.delta_mode,
        "delta_ratio": spec.delta_ratio,
        "gamma_e": spec.gamma_e,
        "trajectory": spec.trajectory,
        "photon_cutoff": spec.photon_cutoff,
        "converge": spec.converge,
        "convergence_rtol": spec.rtol,
        "residual_tol": RESIDUAL_TOL,
        "points": len(rows),
        "failures": sum(not r.ok for r in rows),
        "threads": threads,
        "wall_time_s": round(time.perf_counter() - t0, 3),
    }
    return SweepResult(spec, rows, meta)


# -- optima -----------------------------------------------------------------

@dataclass(frozen=True)
class Optimum:
    slice_value: float | None
    axis_value: float
    value: float
    others: dict[str, float]


def extract_optimum(result: SweepResult, observable: str, mode: str = "min",
                    along_axis: str | None = None) -> list[Optimum]:
    """Optimum of ``observable`` along one axis for each value of the other.

    Ties go to the smaller |axis value|. Slices where every row failed are
    skipped with a log notice.
    """
    if mode not in ("min", "max"):
        raise ValueError("mode must be 'min' or 'max'")
    names = result.spec.axis_names
    along = along_axis or names[-1]
    if along not in names:
        raise ValueError(f"{along!r} is not a sweep axis of this result")
    other = next((n for n in names if n != along), None)
    slices: dict = {}
    for r in result.rows:
        key = r.axes[other] if other else None
        slices.setdefault(key, []).append(r)
    out = []
    sign = 1.0 if mode == "min" else -1.0
    for key, rows in slices.items():
        good = [r for r in rows if r.ok and not math.isnan(r.values.get(observable, math.nan))]
        if not good:
            log.warning("slice %s=%r has no valid rows; omitted", other, key)
            continue
        best = min(good, key=lambda r: (sign * r.values[observable], abs(r.axes[along])))
        others = {k: v for k, v in best.values.items() if k != observable}
        others.update(Delta_a=best.Delta_a, delta=best.delta)
        out.append(Optimum(key, best.axes[along], best.values[observable], others))
    return out


def refine_optimum(spec: SweepSpec, observable: str, axis: str, bracket: tuple[float, float],
                   fixed: dict[str, float] | None = None, mode: str = "min", log_scale: bool = True,
                   xtol: float = 1e-4) -> Optimum:
    """Bounded scalar refinement of a grid optimum along ``axis``."""
    from scipy.optimize import minimize_scalar

    fixed = dict(fixed or {})
    sign = 1.0 if mode == "min" else -1.0

    def f(x):
        p = resolve_point(spec, {**fixed, axis: x})
        vals, _ = measure(p, spec.photon_cutoff, spec.observables)
        v = vals[observable]
        if log_scale:
            v = math.log10(v) if v > 0 else -400.0
        return sign * v

    res = minimize_scalar(f, bounds=bracket, method="bounded", options={"xatol": xtol})
    p = resolve_point(spec, {**fixed, axis: res.x})
    vals, _ = measure(p, spec.photon_cutoff, spec.observables)
    others = {k: v for k, v in vals.items() if k != observable}
    others.update(Delta_a=p.Delta_a, delta=p.delta)
    slice_value = next(iter(fixed.values())) if len(fixed) == 1 else None
    return Optimum(slice_value, float(res.x), vals[observable], others)


# -- output -----------------------------------------------------------------

def format_value(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return f"{float(x):.9g}"


def csv_text(result: SweepResult) -> str:
    lines = [f"# {k}: {json.dumps(v, sort_keys=True)}" for k, v in result.metadata.items()]
    lines.append(",".join(result.columns))
    for row in result.table():
        lines.append(",".join(format_value(x) for x in row))
    return "\n".join(lines) + "\n"


def csv_body(text: str) -> str:
    """CSV without the '#' metadata lines."""
    return "".join(l for l in text.splitlines(keepends=True) if not l.startswith("#"))


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, (np.floating,)):
        return _jsonable(float(x))
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


def json_text(result: SweepResult) -> str:
    doc = {
        "metadata": result.metadata,
        "columns": result.columns,
        "rows": [[_jsonable(x) for x in row] for row in result.table()],
    }
    return json.dumps(doc, indent=1, sort_keys=False)
