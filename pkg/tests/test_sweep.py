import json
import logging
import math

import numpy as np
import pytest

from cavsei import sweep as sw
from cavsei.model import default_params
from cavsei.sweep import (Axis, SweepResult, SweepRow, SweepSpec, converged_measure, csv_body,
                          csv_text, evaluate_point, extract_optimum, json_text, measure,
                          observable_columns, refine_optimum, resolve_point, run_sweep,
                          trajectory_detuning)


def test_axis_validation():
    with pytest.raises(ValueError):
        Axis("Delta_a", 0, 1, 1)
    with pytest.raises(ValueError):
        Axis("g_a", 0, 1, 3)
    with pytest.raises(ValueError):
        Axis("V", 0, math.inf, 3)
    assert np.allclose(Axis("V", 0, 1, 3).values, [0, 0.5, 1])


def test_spec_validation():
    ax = Axis("V", 0, 1, 3)
    with pytest.raises(ValueError):
        SweepSpec(ax, Axis("V", 0, 2, 3))
    with pytest.raises(ValueError):
        SweepSpec(ax, delta_mode="ratio_of_V")
    with pytest.raises(ValueError):
        SweepSpec(Axis("Delta_a", 0, 1, 3), trajectory="red_two_photon")
    with pytest.raises(ValueError):
        SweepSpec(ax, observables=("n_s", "g4"))
    with pytest.raises(ValueError):
        SweepSpec(Axis("delta", 0, 1, 3), delta_mode="ratio_of_Delta_a", delta_ratio=0.5)
    with pytest.raises(ValueError):
        SweepSpec(ax, gamma_e="sometimes")
    with pytest.raises(ValueError):
        SweepSpec(ax, photon_cutoff=0)
    # physical base parameters are converted on construction
    spec = SweepSpec(ax, base=default_params().to_physical())
    assert spec.base.units == "dimensionless" and spec.base.g_a == 1.0


def test_grid_is_lexicographic():
    spec = SweepSpec(Axis("V", 0, 1, 2), Axis("Delta_a", -1, 1, 3))
    idx = [i for i, _ in spec.grid()]
    assert idx == sorted(idx) and len(idx) == 6
    assert spec.grid()[1][1] == (0.0, 0.0)


def test_trajectories():
    assert trajectory_detuning("blue_sideband_rabi", 2.0) == pytest.approx(-2 - math.sqrt(8))
    assert trajectory_detuning("blue_two_photon", 0.4) == pytest.approx(-2.5)
    assert trajectory_detuning("red_two_photon", 0.4) == pytest.approx(0.8)
    with pytest.raises(ValueError):
        trajectory_detuning("blue_two_photon", 0.0)
    with pytest.raises(ValueError):
        trajectory_detuning("sideways", 1.0)


def test_resolve_point_conventions():
    spec = SweepSpec(Axis("V", 0, 1, 2), base=default_params(phi=math.pi), delta_mode="ratio_of_V",
                     delta_ratio=-1.0, trajectory="red_two_photon")
    p = resolve_point(spec, {"V": 0.4})
    assert (p.Delta_a, p.delta) == pytest.approx((0.8, -0.4))
    assert p.gamma_e > 0
    spec = SweepSpec(Axis("delta_ratio", 0, 1, 2), base=default_params(Delta_a=2.0),
                     delta_mode="ratio_of_Delta_a", gamma_e=0.01)
    p = resolve_point(spec, {"delta_ratio": 0.25})
    assert p.delta == pytest.approx(0.5) and p.gamma_e == 0.01


def test_observable_columns():
    spec = SweepSpec(Axis("V", 0, 1, 2), observables=("n_s", "g2_1", "p_tilde"), photon_cutoff=3)
    assert observable_columns(spec) == ["n_s", "g2_1", "p_tilde_0", "p_tilde_1", "p_tilde_2",
                                        "p_tilde_3", "log10_g2_1"]


def test_single_point_equals_direct_call():
    spec = SweepSpec(Axis("Delta_a", 1.0, 2.0, 2), base=default_params(V=0.5), converge=False,
                     photon_cutoff=5)
    row = evaluate_point(spec, (1,), (2.0,))
    vals, res = measure(resolve_point(spec, {"Delta_a": 2.0}), 5)
    for k in ("n_s", "g2_1", "g3_1", "g2_2", "Cxx", "Czz"):
        assert row.values[k] == vals[k]
    assert row.residual == res


def test_degenerate_point_is_flagged_and_sweep_continues():
    # undriven and without atomic decay the atoms keep any initial excitation
    spec = SweepSpec(Axis("gamma", 0.0, 0.0625, 2),
                     base=default_params(Omega=0.0, phi=0.0), gamma_e=0.0, photon_cutoff=3,
                     converge=False)
    result = run_sweep(spec)
    assert len(result.rows) == 2
    bad, good = result.rows
    assert bad.status.startswith("error") and "non-unique steady state" in bad.status
    assert all(math.isnan(v) for v in bad.values.values())
    assert good.ok and good.values["n_s"] == 0.0
    assert result.failures == [bad]
    assert result.metadata["failures"] == 1


def test_parallel_output_is_identical():
    spec = SweepSpec(Axis("V", -1.0, 1.0, 5), base=default_params(phi=0.0),
                     delta_mode="ratio_of_Delta_a", delta_ratio=0.5,
                     trajectory="blue_sideband_rabi", photon_cutoff=4)
    serial = csv_text(run_sweep(spec, threads=1))
    parallel = csv_text(run_sweep(spec, threads=2))
    assert csv_body(serial) == csv_body(parallel)
    assert serial != csv_body(serial)


def test_csv_and_json_format():
    spec = SweepSpec(Axis("Delta_a", 0.0, 1.0, 2), observables=("n_s", "g2_1"), photon_cutoff=3,
                     converge=False)
    result = run_sweep(spec)
    text = csv_text(result)
    lines = text.splitlines()
    meta = [l for l in lines if l.startswith("#")]
    assert any(l.startswith("# base_params:") for l in meta)
    assert any(l.startswith("# wall_time_s:") for l in meta)
    header, *rows = [l for l in lines if not l.startswith("#")]
    assert header.split(",") == result.columns
    assert header.startswith("Delta_a,delta,n_s,g2_1,log10_g2_1,cutoff,residual,status")
    first = rows[0].split(",")
    mantissa = first[2].split("e")[0].replace(".", "").replace("-", "").lstrip("0")
    assert len(mantissa) <= 9
    assert first[-1] == "ok"
    doc = json.loads(json_text(result))
    assert doc["columns"] == result.columns and len(doc["rows"]) == 2


def test_cutoff_escalation():
    # strong drive on a resonant empty-ish cavity needs more Fock levels than 2
    p = default_params(Omega=0.6, Delta_a=0.0, delta=0.0, V=0.0)
    vals, res, cutoff, ok = converged_measure(p, 2, ("n_s", "g2_1"))
    assert ok and cutoff > 2
    ref, _ = measure(p, cutoff + 2, ("n_s", "g2_1"))
    assert vals["n_s"] == pytest.approx(ref["n_s"], rel=1e-3)


def test_nonconvergence_is_flagged(monkeypatch):
    monkeypatch.setattr(sw, "MAX_EXTRA_CUTOFF", 2)
    spec = SweepSpec(Axis("Omega", 0.8, 1.0, 2), base=default_params(Delta_a=0.0, V=0.0),
                     observables=("n_s", "g2_1"), photon_cutoff=1)
    result = run_sweep(spec)
    assert {r.status for r in result.rows} == {"nonconverged"}
    assert all(r.cutoff == 3 for r in result.rows)


def _synthetic(values, axis_vals, other_vals=None, status=None):
    names = ("x",) if other_vals is None else ("y", "x")
    spec = SweepSpec(Axis("Delta_a", axis_vals[0], axis_vals[-1], len(axis_vals)),
                     None if other_vals is None else Axis("V", other_vals[0], other_vals[-1], len(other_vals)),
                     observables=("n_s",))
    rows = []
    k = 0
    for i, x in enumerate(axis_vals):
        for j, y in enumerate(other_vals or [None]):
            axes = {"Delta_a": x} if y is None else {"Delta_a": x, "V": y}
            st = status[k] if status else "ok"
            rows.append(SweepRow((i,) if y is None else (i, j), axes, x, 0.0,
                                 {"n_s": values[k]}, 7, 0.0, st))
            k += 1
    return SweepResult(spec, rows, {})


def test_extract_optimum_monotone_gives_endpoint():
    xs = list(np.linspace(-1, 1, 5))
    res = _synthetic([1, 2, 3, 4, 5], xs)
    (opt,) = extract_optimum(res, "n_s", "min", "Delta_a")
    assert opt.axis_value == -1 and opt.value == 1
    (opt,) = extract_optimum(res, "n_s", "max", "Delta_a")
    assert opt.axis_value == 1 and opt.value == 5


def test_extract_optimum_ties_prefer_small_detuning():
    xs = [-2.0, -0.5, 0.5, 2.0]
    (opt,) = extract_optimum(_synthetic([0.0, 1.0, 1.0, 0.0], xs), "n_s", "min", "Delta_a")
    assert opt.axis_value == -2.0  # equal |x|: first in grid order
    (opt,) = extract_optimum(_synthetic([3.0, 1.0, 1.0, 3.0], xs), "n_s", "min", "Delta_a")
    assert abs(opt.axis_value) == 0.5


def test_extract_optimum_skips_failed_slices(caplog):
    xs, ys = [0.0, 1.0, 2.0], [0.0, 1.0]
    # rows ordered (x, y): slice y=1 entirely failed
    status = ["ok", "error: x", "ok", "error: x", "ok", "error: x"]
    res = _synthetic([3, 9, 1, 9, 2, 9], xs, ys, status)
    with caplog.at_level(logging.WARNING):
        opts = extract_optimum(res, "n_s", "min", "Delta_a")
    assert [o.slice_value for o in opts] == [0.0]
    assert opts[0].axis_value == 1.0
    assert "no valid rows" in caplog.text
    with pytest.raises(ValueError):
        extract_optimum(res, "n_s", "median", "Delta_a")
    with pytest.raises(ValueError):
        extract_optimum(res, "n_s", "min", "phi")


def test_sideband_peaks_follow_resonances():
    # no-exchange scan: sidebands carry the emission near phi = 0, the middle
    # branch takes over at phi = pi
    middle = {}
    for phi in (0.0, math.pi / 2, math.pi):
        spec = SweepSpec(Axis("Delta_a", -3.0, 3.0, 61), base=default_params(V=0.0, phi=phi),
                         delta_mode="ratio_of_Delta_a", delta_ratio=0.5, observables=("n_s",),
                         photon_cutoff=4, converge=False)
        result = run_sweep(spec)
        D, ns = result.column("Delta_a"), result.column("n_s")
        peaks = [D[k] for k in range(1, len(D) - 1) if ns[k] > ns[k - 1] and ns[k] > ns[k + 1]]
        side = math.sqrt(2 * (1 + math.cos(phi) ** 2))
        targets = (0.0,) if phi == math.pi else (-side, side)
        for target in targets:
            assert min(abs(x - target) for x in peaks) <= 0.1 + 1e-9
        middle[phi] = ns[30]
    assert middle[math.pi] > 10 * max(middle[0.0], middle[math.pi / 2])


def test_refined_optimum_stable_under_grid_doubling():
    base = dict(base=default_params(V=2.0, phi=0.0), delta_mode="ratio_of_Delta_a", delta_ratio=0.5,
                observables=("n_s", "g2_1"), photon_cutoff=5, converge=False)
    found = []
    for pts in (9, 17):
        spec = SweepSpec(Axis("Delta_a", -5.6, -4.0, pts), **base)
        (opt,) = extract_optimum(run_sweep(spec), "n_s", "max", "Delta_a")
        step = 1.6 / (pts - 1)
        ref = refine_optimum(spec, "n_s", "Delta_a", (opt.axis_value - step, opt.axis_value + step),
                             mode="max", log_scale=False)
        found.append(ref)
    a, b = found
    assert b.axis_value == pytest.approx(a.axis_value, rel=0.05)
    assert b.value == pytest.approx(a.value, rel=0.05)
    # the emission peak sits on the vacuum Rabi sideband
    assert a.axis_value == pytest.approx(-2 - math.sqrt(8), abs=0.05)


def test_weak_exchange_three_photon_blockade():
    spec = SweepSpec(Axis("V", 0.2, 0.45, 3), base=default_params(phi=math.pi), delta_mode="ratio_of_V",
                     delta_ratio=-1.0, trajectory="blue_two_photon", observables=("g2_1", "g3_1"))
    result = run_sweep(spec)
    assert not result.failures
    assert np.all(result.column("g3_1") < 1e-3)
    assert np.all(result.column("g2_1") > 1)
