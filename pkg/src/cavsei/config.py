"""Run configuration: an INI file with [model], [sweep], [g2tau], [spectrum]
and [output] sections.

Frequencies are plain numbers in units of g_a when ``units = dimensionless``
and must carry a ``kHz`` or ``MHz`` suffix (read as 2*pi*kHz / 2*pi*MHz) when
``units = physical``. Phases are radians; a trailing ``pi`` multiplies by pi
(``phi = 1 pi``). Environment variables ``CAVSEI_<SECTION>_<KEY>`` override
file values.
"""
from __future__ import annotations

import configparser
import math
import os
import re
from dataclasses import dataclass, field

import numpy as np

from .hilbert import DEFAULT_CUTOFF
from .model import DELTA_MODES, FREQUENCY_FIELDS, ModelParams, default_params
from .sweep import CONVERGENCE_RTOL, OBSERVABLES, TRAJECTORIES, Axis, SweepSpec, resolve_params

ENV_PREFIX = "CAVSEI_"

SCHEMA = {
    "model": {"units", *FREQUENCY_FIELDS, "phi", "delta_mode", "delta_ratio"},
    "sweep": {"axis1", "axis2", "trajectory", "observables", "photon_cutoff", "converge", "rtol", "threads"},
    "g2tau": {"n", "tau_max", "tau_points"},
    "spectrum": {"delta_min", "delta_max", "points", "n_max"},
    "output": {"path", "format"},
}
_SUFFIX = {"khz": 1.0, "mhz": 1000.0}
_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"


class ConfigError(ValueError):
    pass


def parse_frequency(text: str, units: str, key: str = "") -> float:
    t = text.strip()
    m = re.fullmatch(rf"({_NUM})\s*([a-zA-Z]*)", t)
    if not m:
        raise ConfigError(f"{key}: cannot read frequency {text!r}")
    value, suffix = float(m.group(1)), m.group(2).lower()
    if units == "dimensionless":
        if suffix:
            raise ConfigError(f"{key}: unit suffix {m.group(2)!r} given but units = dimensionless")
        return value
    if suffix not in _SUFFIX:
        raise ConfigError(f"{key}: units = physical needs a kHz or MHz suffix, got {text!r}")
    return value * _SUFFIX[suffix]


def parse_phase(text: str, key: str = "phi") -> float:
    t = text.strip().lower()
    m = re.fullmatch(rf"({_NUM})?\s*(pi)?", t)
    if not m or (m.group(1) is None and m.group(2) is None):
        raise ConfigError(f"{key}: cannot read phase {text!r}")
    value = float(m.group(1)) if m.group(1) is not None else 1.0
    return value * math.pi if m.group(2) else value


def _parse_axis(text: str, units: str) -> Axis:
    parts = text.split()
    if len(parts) != 4:
        raise ConfigError(f"axis {text!r}: expected '<name> <start> <stop> <points>'")
    name, lo, hi, pts = parts
    if name == "phi":
        a, b = parse_phase(lo), parse_phase(hi)
    elif name == "delta_ratio":
        a, b = float(lo), float(hi)
    else:
        a, b = parse_frequency(lo, units, name), parse_frequency(hi, units, name)
    try:
        return Axis(name, a, b, int(pts))
    except ValueError as exc:
        raise ConfigError(f"axis {text!r}: {exc}") from None


@dataclass
class RunConfig:
    params: ModelParams = field(default_factory=default_params)
    delta_mode: str = "fixed"
    delta_ratio: float | None = None
    gamma_e: str | float = "auto"
    axis1: Axis | None = None
    axis2: Axis | None = None
    trajectory: str = "none"
    observables: tuple[str, ...] = OBSERVABLES
    photon_cutoff: int = DEFAULT_CUTOFF
    converge: bool = True
    rtol: float = CONVERGENCE_RTOL
    threads: int = 1
    g2tau_n: tuple[int, ...] = (1, 2)
    tau_max: float = 5.0
    tau_points: int = 101
    spectrum_range: tuple[float, float] = (-4.0, 4.0)
    spectrum_points: int = 201
    n_max: int = 2
    out_path: str | None = None
    fmt: str = "csv"

    def dimensionless_params(self) -> ModelParams:
        return self.params.to_dimensionless()

    def sweep_spec(self) -> SweepSpec:
        if self.axis1 is None:
            raise ConfigError("[sweep] axis1 is required for a sweep")
        scale = self._scale
        axes = [self._scaled(a, scale) for a in (self.axis1, self.axis2)]
        return SweepSpec(axes[0], axes[1], self.dimensionless_params(), self.delta_mode,
                         self.delta_ratio, self._gamma_e(), self.trajectory, self.observables,
                         self.photon_cutoff, self.converge, self.rtol)

    def resolved_params(self) -> ModelParams:
        """The single parameter point described by [model] (plus any trajectory)."""
        return resolve_params(self.dimensionless_params(), self.delta_mode, self.delta_ratio,
                              self._gamma_e(), self.trajectory)

    def spectrum_grid(self) -> np.ndarray:
        """Delta_a grid for the spectrum command, in units of g_a."""
        lo, hi = self.spectrum_range
        return np.linspace(lo, hi, self.spectrum_points) / self._scale

    def tau_grid(self) -> np.ndarray:
        """Delays in units of 1/g_a; tau_max is given in units of 1/kappa_a."""
        kappa = self.dimensionless_params().kappa_a
        return np.linspace(0.0, self.tau_max, self.tau_points) / kappa

    @property
    def _scale(self) -> float:
        return self.params.g_a if self.params.units == "physical" else 1.0

    def _gamma_e(self) -> str | float:
        return self.gamma_e if isinstance(self.gamma_e, str) else self.gamma_e / self._scale

    @staticmethod
    def _scaled(axis: Axis | None, scale: float) -> Axis | None:
        if axis is None or scale == 1.0 or axis.name in ("phi", "delta_ratio"):
            return axis
        return Axis(axis.name, axis.start / scale, axis.stop / scale, axis.points)

    # -- serialization --

    def to_text(self) -> str:
        p = self.params
        physical = p.units == "physical"

        def freq(x):
            return f"{x!r} kHz" if physical else repr(x)

        lines = ["[model]", f"units = {p.units}"]
        for k in FREQUENCY_FIELDS:
            if k == "gamma_e":
                continue
            lines.append(f"{k} = {freq(getattr(p, k))}")
        lines.append(f"gamma_e = {self.gamma_e if isinstance(self.gamma_e, str) else freq(self.gamma_e)}")
        lines.append(f"phi = {p.phi!r}")
        lines.append(f"delta_mode = {self.delta_mode}")
        if self.delta_ratio is not None:
            lines.append(f"delta_ratio = {self.delta_ratio!r}")
        lines += ["", "[sweep]"]
        for name, ax in (("axis1", self.axis1), ("axis2", self.axis2)):
            if ax is not None:
                if ax.name in ("phi", "delta_ratio"):
                    lo, hi = repr(ax.start), repr(ax.stop)
                else:
                    lo, hi = freq(ax.start).replace(" ", ""), freq(ax.stop).replace(" ", "")
                lines.append(f"{name} = {ax.name} {lo} {hi} {ax.points}")
        lines += [
            f"trajectory = {self.trajectory}",
            f"observables = {', '.join(self.observables)}",
            f"photon_cutoff = {self.photon_cutoff}",
            f"converge = {'true' if self.converge else 'false'}",
            f"rtol = {self.rtol!r}",
            f"threads = {self.threads}",
            "", "[g2tau]",
            f"n = {', '.join(str(n) for n in self.g2tau_n)}",
            f"tau_max = {self.tau_max!r}",
            f"tau_points = {self.tau_points}",
            "", "[spectrum]",
            f"delta_min = {freq(self.spectrum_range[0])}",
            f"delta_max = {freq(self.spectrum_range[1])}",
            f"points = {self.spectrum_points}",
            f"n_max = {self.n_max}",
            "", "[output]",
            f"format = {self.fmt}",
        ]
        if self.out_path:
            lines.append(f"path = {self.out_path}")
        return "\n".join(lines) + "\n"


def _line_of(text: str, section: str, key: str) -> int | None:
    current = None
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.fullmatch(r"\[([^\]]+)\]", s)
        if m:
            current = m.group(1).strip()
            continue
        if current == section and re.match(rf"{re.escape(key)}\s*[=:]", s, flags=re.IGNORECASE):
            return no
    return None


def _env_overrides(environ) -> dict[tuple[str, str], str]:
    out = {}
    for name, value in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        rest = name[len(ENV_PREFIX):]
        section, _, key = rest.partition("_")
        section = section.lower()
        if section not in SCHEMA:
            continue
        match = next((k for k in SCHEMA[section] if k.lower() == key.lower()), None)
        if match is None:
            raise ConfigError(f"environment variable {name}: unknown key {key!r} in [{section}]")
        out[(section, match)] = value
    return out


def parse_config(text: str = "", environ=None, overrides: dict[tuple[str, str], str] | None = None) -> RunConfig:
    """Parse config text; ``overrides`` (e.g. from CLI flags) beat the environment,
    which beats the file."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error: {exc}") from None
    raw: dict[tuple[str, str], str] = {}
    for section in cp.sections():
        if section not in SCHEMA:
            line = _line_of(text, section, "")
            raise ConfigError(f"unknown section [{section}]" + (f" (line {line})" if line else ""))
        for key, value in cp.items(section):
            if key not in SCHEMA[section]:
                line = _line_of(text, section, key)
                where = f"line {line}: " if line else ""
                raise ConfigError(f"{where}unknown key {key!r} in [{section}]")
            raw[(section, key)] = value
    raw.update(_env_overrides(os.environ if environ is None else environ))
    raw.update(overrides or {})
    return _resolve(raw)


def load_config(path: str | None, environ=None, overrides=None) -> RunConfig:
    text = ""
    if path:
        with open(path) as fh:
            text = fh.read()
    return parse_config(text, environ, overrides)


def _resolve(raw: dict[tuple[str, str], str]) -> RunConfig:
    def get(section, key, default=None):
        return raw.get((section, key), default)

    cfg = RunConfig()
    units = get("model", "units", "dimensionless").strip()
    if units not in ("dimensionless", "physical"):
        raise ConfigError(f"[model] units must be dimensionless or physical, got {units!r}")
    if units == "physical":
        base = default_params().to_physical()
    else:
        base = default_params()
    values = {}
    for k in FREQUENCY_FIELDS:
        if k == "gamma_e":
            continue
        v = get("model", k)
        if v is not None:
            values[k] = parse_frequency(v, units, k)
    if get("model", "phi") is not None:
        values["phi"] = parse_phase(get("model", "phi"))
    ge = get("model", "gamma_e")
    if ge is None or ge.strip().lower() == "auto":
        cfg.gamma_e = "auto"
    else:
        cfg.gamma_e = parse_frequency(ge, units, "gamma_e")
        values["gamma_e"] = cfg.gamma_e
    try:
        cfg.params = base.replace(**values)
    except ValueError as exc:
        raise ConfigError(f"[model] {exc}") from None

    mode = get("model", "delta_mode", "fixed").strip()
    if mode not in DELTA_MODES:
        raise ConfigError(f"[model] delta_mode must be one of {DELTA_MODES}, got {mode!r}")
    cfg.delta_mode = mode
    if get("model", "delta_ratio") is not None:
        cfg.delta_ratio = float(get("model", "delta_ratio"))

    for name in ("axis1", "axis2"):
        if get("sweep", name):
            setattr(cfg, name, _parse_axis(get("sweep", name), units))
    traj = get("sweep", "trajectory", "none").strip()
    if traj not in TRAJECTORIES:
        raise ConfigError(f"[sweep] trajectory must be one of {TRAJECTORIES}")
    cfg.trajectory = traj
    if get("sweep", "observables"):
        obs = tuple(o.strip() for o in get("sweep", "observables").split(",") if o.strip())
        bad = [o for o in obs if o not in OBSERVABLES]
        if bad:
            raise ConfigError(f"[sweep] unknown observables {bad}")
        cfg.observables = obs
    cfg.photon_cutoff = _int(get("sweep", "photon_cutoff", str(DEFAULT_CUTOFF)), "photon_cutoff")
    cfg.converge = _bool(get("sweep", "converge", "true"), "converge")
    cfg.rtol = float(get("sweep", "rtol", repr(CONVERGENCE_RTOL)))
    cfg.threads = _int(get("sweep", "threads", "1"), "threads")

    if get("g2tau", "n"):
        cfg.g2tau_n = tuple(_int(x, "n") for x in get("g2tau", "n").split(","))
    cfg.tau_max = float(get("g2tau", "tau_max", "5.0"))
    cfg.tau_points = _int(get("g2tau", "tau_points", "101"), "tau_points")

    lo, hi = get("spectrum", "delta_min"), get("spectrum", "delta_max")
    scale = cfg.params.g_a if units == "physical" else 1.0
    cfg.spectrum_range = (parse_frequency(lo, units, "delta_min") if lo else -4.0 * scale,
                          parse_frequency(hi, units, "delta_max") if hi else 4.0 * scale)
    cfg.spectrum_points = _int(get("spectrum", "points", "201"), "points")
    cfg.n_max = _int(get("spectrum", "n_max", "2"), "n_max")

    cfg.out_path = get("output", "path")
    cfg.fmt = get("output", "format", "csv").strip()
    if cfg.fmt not in ("csv", "json"):
        raise ConfigError(f"[output] format must be csv or json, got {cfg.fmt!r}")
    try:
        if cfg.axis1 is not None:
            cfg.sweep_spec()
    except ValueError as exc:
        raise ConfigError(f"[sweep] {exc}") from None
    return cfg


def _int(text: str, key: str) -> int:
    try:
        return int(str(text).strip())
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from None


def _bool(text: str, key: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected true/false, got {text!r}")
