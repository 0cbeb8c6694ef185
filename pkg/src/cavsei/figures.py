"""Built-in parameter presets for the published figures, plus delayed
correlation tables.

Each preset returns a :class:`FigureResult` holding one table (sweep output or
a delay series) and a one-line headline with the figure's key number.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from . import __version__
from .hilbert import DEFAULT_CUTOFF, Space
from .liouville import Propagator, liouvillian_for, regression_g2, solve_steady_state
from .model import ModelParams, default_params
from .observables import photon_statistics
from .sweep import (CONVERGENCE_RTOL, Axis, SweepResult, SweepSpec, _jsonable, csv_text,
                    extract_optimum, format_value, json_text, refine_optimum, resolve_params,
                    run_sweep)

FIGURES = ("fig2a", "fig2b", "fig2c", "fig2d", "fig2e", "fig2f", "fig3",
           "fig4abc", "fig4d", "fig4e", "fig4f", "fig4g", "fig4h")
RES_1D = 121
RES_2D = 61
TAU_POINTS = 101
TAU_MAX_KAPPA = 5.0
TAU_LONG_KAPPA = 20.0


@dataclass
class Table:
    """Plain table with '#' metadata, written in the same dialect as sweeps."""
    columns: list[str]
    rows: list[list]
    metadata: dict = field(default_factory=dict)

    def csv(self) -> str:
        lines = [f"# {k}: {json.dumps(v, sort_keys=True)}" for k, v in self.metadata.items()]
        lines.append(",".join(self.columns))
        lines += [",".join(format_value(x) for x in row) for row in self.rows]
        return "\n".join(lines) + "\n"

    def json(self) -> str:
        return json.dumps({"metadata": self.metadata, "columns": self.columns,
                           "rows": [[_jsonable(x) for x in r] for r in self.rows]}, indent=1)


@dataclass
class FigureResult:
    name: str
    headline: str
    sweep: SweepResult | None = None
    table: Table | None = None
    ok: bool = True

    def render(self, fmt: str) -> str:
        if self.sweep is not None:
            return csv_text(self.sweep) if fmt == "csv" else json_text(self.sweep)
        return self.table.csv() if fmt == "csv" else self.table.json()


# -- delayed correlations ---------------------------------------------------

@dataclass
class CorrelationSeries:
    params: ModelParams
    cutoff: int
    tau: np.ndarray                 # units of 1/g_a
    g: dict[int, np.ndarray]        # n -> g_n^(2)(tau)
    p_tilde: np.ndarray | None
    residual: float
    cutoff_change: float            # max relative change vs. cutoff + 2

    def table(self) -> Table:
        kappa = self.params.kappa_a
        cols = ["tau_kappa", "tau"] + [f"g2_{n}_tau" for n in sorted(self.g)]
        rows = [[t * kappa, t] + [self.g[n][k] for n in sorted(self.g)]
                for k, t in enumerate(self.tau)]
        meta = {
            "package": f"cavsei {__version__}",
            "params": self.params.as_dict(),
            "photon_cutoff": self.cutoff,
            "residual": self.residual,
            "cutoff_change": self.cutoff_change,
            "p_tilde": None if self.p_tilde is None else [float(x) for x in self.p_tilde],
        }
        return Table(cols, rows, meta)


def correlation_series(params: ModelParams, ns=(1, 2), tau=None, cutoff: int = DEFAULT_CUTOFF,
                       check_cutoff: bool = True) -> CorrelationSeries:
    """g_n^(2)(tau) for each n in ``ns`` at one parameter point.

    ``tau`` is in units of 1/g_a. With ``check_cutoff`` the series is
    recomputed at cutoff + 2 and the largest relative change is recorded.
    """
    tau = np.asarray(tau if tau is not None else
                     np.linspace(0, TAU_MAX_KAPPA, TAU_POINTS) / params.kappa_a, dtype=float)

    def at(c):
        L = liouvillian_for(params, Space(c))
        ss = solve_steady_state(L)
        prop = Propagator(L)
        return ss, {n: regression_g2(L, ss.rho, n, tau, propagator=prop) for n in ns}

    ss, g = at(cutoff)
    change = math.nan
    if check_cutoff:
        _, g_hi = at(cutoff + 2)
        change = max(float(np.max(np.abs(g[n] - g_hi[n]) / np.maximum(np.abs(g_hi[n]), 1e-300)))
                     for n in ns)
    return CorrelationSeries(params, cutoff, tau, g, photon_statistics(ss.rho).p_tilde,
                             ss.residual, change)


# -- presets ----------------------------------------------------------------

def _peaks(x: np.ndarray, y: np.ndarray) -> list[float]:
    idx, _ = find_peaks(np.nan_to_num(y, nan=-np.inf))
    return [float(x[i]) for i in idx]


def _slice(result: SweepResult, axis: str, target: float):
    """Rows of a 2D sweep whose ``axis`` value is closest to ``target``."""
    vals = result.column(axis)
    best = vals[np.argmin(np.abs(vals - target))]
    mask = vals == best
    return float(best), mask


def _fmt_list(xs) -> str:
    return "[" + ", ".join(f"{x:.3g}" for x in xs) + "]"


def _spec(axis1, axis2=None, *, observables, **kw) -> SweepSpec:
    return SweepSpec(axis1, axis2, observables=tuple(observables), **kw)


def _fig2ab(name, res, cutoff, threads):
    r1, r2 = res or RES_2D, res or RES_2D
    spec = _spec(Axis("phi", 0.0, math.pi, r1), Axis("Delta_a", -3.0, 3.0, r2),
                 base=default_params(V=0.0), delta_mode="ratio_of_Delta_a", delta_ratio=0.5,
                 observables=("n_s", "g2_1", "g3_1"), photon_cutoff=cutoff)
    result = run_sweep(spec, threads)
    D, ns, g2 = result.column("Delta_a"), result.column("n_s"), result.column("g2_1")
    parts = []
    for phi in (0.0, math.pi):
        at, m = _slice(result, "phi", phi)
        pred = [-math.sqrt(2 * (1 + math.cos(at) ** 2)), 0.0, math.sqrt(2 * (1 + math.cos(at) ** 2))]
        if name == "fig2a":
            parts.append(f"phi={at:.3g}: n_s peaks at Delta_a={_fmt_list(_peaks(D[m], ns[m]))} "
                         f"(resonances {_fmt_list(pred)})")
        else:
            target = pred[2] if phi == 0.0 else 0.0
            k = np.argmin(np.abs(D[m] - target))
            parts.append(f"phi={at:.3g}, Delta_a={D[m][k]:.3g}: g2_1={g2[m][k]:.3g}")
    return result, "; ".join(parts)


def _fig2cd(name, res, cutoff, threads):
    r = res or RES_2D
    spec = _spec(Axis("V", -2.0, 2.0, r), Axis("Delta_a", -3.0, 3.0, r),
                 base=default_params(phi=0.0), delta_mode="ratio_of_Delta_a", delta_ratio=0.5,
                 observables=("n_s", "g2_1", "g3_1"), photon_cutoff=cutoff)
    result = run_sweep(spec, threads)
    D, ns, g2 = result.column("Delta_a"), result.column("n_s"), result.column("g2_1")
    at, m = _slice(result, "V", 1.0)
    if name == "fig2c":
        pred = [-at - math.sqrt(at * at + 4), -at + math.sqrt(at * at + 4)]
        return result, (f"V={at:.3g}: n_s peaks at Delta_a={_fmt_list(_peaks(D[m], ns[m]))} "
                        f"(vacuum Rabi sidebands {_fmt_list(pred)})")
    at, m = _slice(result, "V", 2.0)
    k = int(np.nanargmin(g2[m]))
    return result, f"V={at:.3g}: min g2_1={g2[m][k]:.3g} at Delta_a={D[m][k]:.3g}"


def _fig2e(name, res, cutoff, threads):
    spec = _spec(Axis("V", -2.0, 2.0, res or RES_1D), None, base=default_params(phi=0.0),
                 delta_mode="ratio_of_Delta_a", delta_ratio=0.5, trajectory="blue_sideband_rabi",
                 observables=("n_s", "g2_1", "g3_1", "g2_2", "p_tilde"), photon_cutoff=cutoff)
    result = run_sweep(spec, threads)
    V, g2, ns = result.column("V"), result.column("g2_1"), result.column("n_s")
    k = int(np.argmin(np.abs(V - 2.0)))
    j = int(np.nanargmin(g2))
    return result, (f"g_opt^(2)(0)={g2[k]:.3g} (n_s={ns[k]:.3g}) at V={V[k]:.3g}; "
                    f"curve minimum {g2[j]:.3g} at V={V[j]:.3g}")


def _series_figure(params, ns, cutoff):
    tau = np.append(np.linspace(0.0, TAU_MAX_KAPPA, TAU_POINTS), TAU_LONG_KAPPA) / params.kappa_a
    return correlation_series(params, ns, tau, cutoff)


def fig2f_params() -> ModelParams:
    return resolve_params(default_params(V=2.0, phi=0.0), "ratio_of_Delta_a", 0.5,
                          trajectory="blue_sideband_rabi")


def fig4h_params() -> ModelParams:
    return resolve_params(default_params(V=0.4, phi=math.pi, Delta_a=0.8), "ratio_of_V", -1.0)


def _fig2f(name, res, cutoff, threads):
    s = _series_figure(fig2f_params(), (1,), cutoff)
    g = s.g[1]
    head = (f"p_tilde(1)={s.p_tilde[1]:.6f}; g2_1(0)={g[0]:.3g}, "
            f"min over tau={np.min(g[1:]):.3g}, g2_1(20/kappa)={g[-1]:.4f}")
    return s, head


def _fig4h(name, res, cutoff, threads):
    s = _series_figure(fig4h_params(), (1, 2), cutoff)
    g1, g2 = s.g[1], s.g[2]
    window = (s.tau * s.params.kappa_a > 0) & (s.tau * s.params.kappa_a <= 1.0)
    ordered = bool(np.all(g1[window] < g1[0]) and np.all(g2[window] > g2[0]))
    head = (f"g2_1(0)={g1[0]:.3g}, g2_2(0)={g2[0]:.3g}, bundle ordering on (0,1/kappa]: "
            f"{'yes' if ordered else 'no'}; sum p_tilde(q>2)={float(np.sum(s.p_tilde[3:])):.3g}")
    return s, head


def _fig3(name, res, cutoff, threads):
    spec = _spec(Axis("delta", -2.2, -1.0, 13), Axis("Delta_a", 1.5, 4.5, res or 21),
                 base=default_params(V=2.0, phi=0.0), delta_mode="fixed",
                 observables=("n_s", "g2_1", "Cxx", "Czz"), photon_cutoff=cutoff)
    result = run_sweep(spec, threads)
    best = fig3_optimum(result)
    if best is None:
        return result, "no slice reached g2_1 <= 3e-5"
    return result, (f"delta={best.slice_value:.3g}: g2_1={best.value:.3g} at Delta_a={best.axis_value:.4g}, "
                    f"n_s={best.others['n_s']:.3g}, Cxx={best.others['Cxx']:.3g}, "
                    f"Czz={best.others['Czz']:.3g}")


def fig3_optimum(result: SweepResult, refine: bool = True):
    """Lowest-g2 slice of the delta scan, refined along Delta_a."""
    opts = extract_optimum(result, "g2_1", "min", along_axis="Delta_a")
    if not opts:
        return None
    best = min(opts, key=lambda o: o.value)
    if not refine:
        return best
    step = result.spec.axis2.values[1] - result.spec.axis2.values[0]
    lo = max(result.spec.axis2.start, best.axis_value - step)
    hi = min(result.spec.axis2.stop, best.axis_value + step)
    return refine_optimum(result.spec, "g2_1", "Delta_a", (lo, hi), {"delta": best.slice_value})


def _fig4abc(name, res, cutoff, threads):
    r = res or RES_2D
    spec = _spec(Axis("V", 0.0, 2.0, r), Axis("Delta_a", -4.0, 4.0, r),
                 base=default_params(phi=math.pi), delta_mode="ratio_of_V", delta_ratio=-1.0,
                 observables=("n_s", "g2_1", "g3_1"), photon_cutoff=cutoff)
    result = run_sweep(spec, threads)
    D, ns = result.column("Delta_a"), result.column("n_s")
    at, m = _slice(result, "V", 1.0)
    return result, (f"V={at:.3g}: n_s peaks at Delta_a={_fmt_list(_peaks(D[m], ns[m]))} "
                    f"(two-photon resonances {_fmt_list([-1 / at, 2 * at])})")


def _fig4de(name, res, cutoff, threads):
    traj = "blue_two_photon" if name == "fig4d" else "red_two_photon"
    spec = _spec(Axis("V", 0.1, 2.5, res or RES_1D), None, base=default_params(phi=math.pi),
                 delta_mode="ratio_of_V", delta_ratio=-1.0, trajectory=traj,
                 observables=("n_s", "g2_1", "g3_1", "g2_2", "Cxx", "Czz"), photon_cutoff=cutoff)
    result = run_sweep(spec, threads)
    V, g2, g3, ns = (result.column(c) for c in ("V", "g2_1", "g3_1", "n_s"))
    if name == "fig4d":
        k = int(np.argmin(np.abs(V - 0.3)))
        below = V[np.nan_to_num(g3, nan=np.inf) <= 1e-3]
        reach = f"g3_1 <= 1e-3 up to V={below.max():.3g}" if below.size else "g3_1 never <= 1e-3"
        return result, f"V={V[k]:.3g}: g2_1={g2[k]:.3g}, g3_1={g3[k]:.3g}; {reach}"
    j = int(np.nanargmin(g3))
    return result, f"min g3_1={g3[j]:.3g} at V={V[j]:.3g} with n_s={ns[j]:.3g}"


def _fig4fg(name, res, cutoff, threads):
    spec = _spec(Axis("Delta_a", -4.0, 2.0, res or RES_1D), None,
                 base=default_params(V=0.4, phi=math.pi), delta_mode="ratio_of_V", delta_ratio=-1.0,
                 observables=("n_s", "g2_1", "g3_1", "g2_2", "p_tilde", "Cxx", "Czz"),
                 photon_cutoff=cutoff)
    result = run_sweep(spec, threads)
    D, ns, cxx, czz = (result.column(c) for c in ("Delta_a", "n_s", "Cxx", "Czz"))
    if name == "fig4f":
        return result, (f"n_s peaks at Delta_a={_fmt_list(_peaks(D, ns))} "
                        f"(two-photon resonances {_fmt_list([-2.5, 0.8])})")
    k = int(np.argmin(np.abs(D - 0.8)))
    return result, f"Delta_a={D[k]:.3g}: Cxx={cxx[k]:.3g}, Czz={czz[k]:.3g}"


_BUILDERS = {
    "fig2a": _fig2ab, "fig2b": _fig2ab, "fig2c": _fig2cd, "fig2d": _fig2cd,
    "fig2e": _fig2e, "fig2f": _fig2f, "fig3": _fig3, "fig4abc": _fig4abc,
    "fig4d": _fig4de, "fig4e": _fig4de, "fig4f": _fig4fg, "fig4g": _fig4fg, "fig4h": _fig4h,
}


def reproduce(name: str, resolution: int | None = None, cutoff: int = DEFAULT_CUTOFF,
              threads: int = 1) -> FigureResult:
    """Run the preset for figure ``name``.

    ``resolution`` overrides the number of points per axis (121 for curves,
    61 per axis for maps) and does not apply to delay series.
    """
    if name not in _BUILDERS:
        raise ValueError(f"unknown figure {name!r}; choose from {', '.join(FIGURES)}")
    if resolution is not None and resolution < 2:
        raise ValueError("resolution must be >= 2")
    t0 = time.perf_counter()
    out, headline = _BUILDERS[name](name, resolution, cutoff, threads)
    if isinstance(out, SweepResult):
        out.metadata["figure"] = name
        return FigureResult(name, headline, sweep=out, ok=not out.failures)
    table = out.table()
    table.metadata.update(figure=name, wall_time_s=round(time.perf_counter() - t0, 3))
    ok = not (out.cutoff_change > CONVERGENCE_RTOL)
    return FigureResult(name, headline, table=table, ok=ok)
