"""Command-line front end.

    cavsei steady     --config run.ini
    cavsei sweep      --config run.ini --threads 4 --out scan.csv
    cavsei spectrum   --config run.ini [--bundles]
    cavsei g2tau      --config run.ini
    cavsei reproduce  fig2e [--resolution 41]

Exit status is 0 when every point solved and converged, 1 when any point
failed or was flagged, and 2 on usage or configuration errors.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
import time

from .config import SCHEMA, ConfigError, load_config
from .figures import FIGURES, Table, correlation_series, reproduce
from .liouville import NoEmissionError, SteadyStateError
from .spectrum import spectrum_rows, verify_bundle_eigenstates
from .sweep import OBSERVABLES, converged_measure, csv_text, json_text, run_sweep

log = logging.getLogger("cavsei")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="run configuration file (INI)")
    p.add_argument("--out", help="output file (default: <command>_<timestamp>.<format>)")
    p.add_argument("--cutoff", type=int, help="starting photon-number cutoff")
    p.add_argument("--threads", type=int, help="worker processes for sweeps")
    p.add_argument("--format", choices=("csv", "json"), help="output format")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override one config value (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cavsei", description=__doc__.split("\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("steady", help="steady-state report at one parameter point"))
    _common(sub.add_parser("sweep", help="1D/2D parameter scan"))
    sp = sub.add_parser("spectrum", help="dressed-state energies of the n-excitation manifolds")
    _common(sp)
    sp.add_argument("--bundles", action="store_true",
                    help="also check the closed-form two-excitation eigenstates")
    _common(sub.add_parser("g2tau", help="delayed n-photon correlations"))
    rp = sub.add_parser("reproduce", help="run a built-in figure preset")
    rp.add_argument("figure", choices=FIGURES)
    rp.add_argument("--resolution", type=int, help="points per axis (overrides the preset)")
    _common(rp)
    return ap


def _overrides(args) -> dict[tuple[str, str], str]:
    out = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        section, dot, name = key.strip().partition(".")
        if not sep or not dot:
            raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        out[(section, name)] = value
    for (section, name) in out:
        if section not in SCHEMA or name not in SCHEMA[section]:
            raise ConfigError(f"--set: unknown key {name!r} in [{section}]")
    if args.cutoff is not None:
        out[("sweep", "photon_cutoff")] = str(args.cutoff)
    if args.threads is not None:
        out[("sweep", "threads")] = str(args.threads)
    if args.format is not None:
        out[("output", "format")] = args.format
    if args.out is not None:
        out[("output", "path")] = args.out
    return out


def _write(text: str, cfg, command: str) -> str:
    path = cfg.out_path or f"{command}_{time.strftime('%Y%m%d-%H%M%S')}.{cfg.fmt}"
    with open(path, "w") as fh:
        fh.write(text)
    return path


def cmd_steady(cfg) -> int:
    p = cfg.resolved_params()
    try:
        vals, res, cutoff, conv = converged_measure(p, cfg.photon_cutoff, OBSERVABLES,
                                                    cfg.converge, cfg.rtol)
    except SteadyStateError as exc:
        print(f"steady state failed: {exc}", file=sys.stderr)
        return 1
    print("parameters (units of g_a): " + ", ".join(f"{k}={v:.6g}" for k, v in p.as_dict().items()
                                                   if isinstance(v, float)))
    for k in ("n_s", "g2_1", "g3_1", "g2_2", "Cxx", "Czz"):
        print(f"{k:>6} = {vals[k]:.6g}")
    if vals["n_s"] == 0.0:
        print("vacuum steady state: n_s = 0, so g and p_tilde are undefined")
    print(" q   p_tilde(q)")
    pt = [vals.get(f"p_tilde_{q}", math.nan) for q in range(cutoff + 1)]
    for q, v in enumerate(pt):
        print(f"{q:2d}   {v:.6g}")
    print(f"residual = {res:.3e}")
    print(f"cutoff = {cutoff}" + ("" if conv else " (not converged)"))
    if cfg.out_path:
        cols = ["n_s", "g2_1", "g3_1", "g2_2", "Cxx", "Czz"]
        row = [vals[c] for c in cols] + pt + [res, cutoff]
        cols = cols + [f"p_tilde_{q}" for q in range(cutoff + 1)] + ["residual", "cutoff"]
        t = Table(cols, [row], {"params": p.as_dict(), "converged": conv})
        _write(t.csv() if cfg.fmt == "csv" else t.json(), cfg, "steady")
    return 0 if conv else 1


def cmd_sweep(cfg) -> int:
    result = run_sweep(cfg.sweep_spec(), cfg.threads)
    path = _write(csv_text(result) if cfg.fmt == "csv" else json_text(result), cfg, "sweep")
    bad = result.failures
    print(f"{len(result.rows)} points, {len(bad)} flagged, wall time "
          f"{result.metadata['wall_time_s']} s -> {path}")
    for r in bad[:10]:
        print(f"  {r.index} {r.axes}: {r.status}")
    return 0 if not bad else 1


def cmd_spectrum(cfg, bundles: bool = False) -> int:
    p = cfg.resolved_params()
    rows = list(spectrum_rows(p, cfg.spectrum_grid(), cfg.n_max, cfg.delta_mode, cfg.delta_ratio))
    meta = {"params": p.as_dict(), "delta_mode": cfg.delta_mode, "delta_ratio": cfg.delta_ratio}
    t = Table(["n", "branch", "Delta_a", "energy", "dark"],
              [[n, b, D, E, int(dk)] for n, b, D, E, dk in rows], meta)
    path = _write(t.csv() if cfg.fmt == "csv" else t.json(), cfg, "spectrum")
    for n in range(1, cfg.n_max + 1):
        branches = {b for m, b, *_ in rows if m == n}
        print(f"n={n}: {len(branches)} branches")
    print(f"-> {path}")
    if bundles:
        for line in verify_bundle_eigenstates(p).lines():
            print(line)
    return 0


def cmd_g2tau(cfg) -> int:
    p = cfg.resolved_params()
    try:
        s = correlation_series(p, cfg.g2tau_n, cfg.tau_grid(), cfg.photon_cutoff)
    except (SteadyStateError, NoEmissionError) as exc:
        print(f"g2tau failed: {exc}", file=sys.stderr)
        return 1
    t = s.table()
    path = _write(t.csv() if cfg.fmt == "csv" else t.json(), cfg, "g2tau")
    for n in sorted(s.g):
        print(f"g2_{n}(0) = {s.g[n][0]:.6g}, g2_{n}(tau_max) = {s.g[n][-1]:.6g}")
    print(f"cutoff = {s.cutoff}, change at cutoff+2 = {s.cutoff_change:.2e} -> {path}")
    return 0 if s.cutoff_change <= cfg.rtol else 1


def cmd_reproduce(cfg, figure: str, resolution: int | None) -> int:
    fig = reproduce(figure, resolution, cfg.photon_cutoff, cfg.threads)
    path = _write(fig.render(cfg.fmt), cfg, f"reproduce_{figure}")
    print(f"{figure}: {fig.headline}")
    print(f"-> {path}")
    return 0 if fig.ok else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, overrides=_overrides(args))
        if args.command == "sweep":
            cfg.sweep_spec()
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.command == "steady":
        return cmd_steady(cfg)
    if args.command == "sweep":
        return cmd_sweep(cfg)
    if args.command == "spectrum":
        return cmd_spectrum(cfg, args.bundles)
    if args.command == "g2tau":
        return cmd_g2tau(cfg)
    return cmd_reproduce(cfg, args.figure, args.resolution)


if __name__ == "__main__":
    sys.exit(main())
