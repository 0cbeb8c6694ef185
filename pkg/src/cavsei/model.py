"""Model parameters and the effective two-atom cavity Hamiltonian.

Internal unit: g_a = 1, times in units of 1/g_a. Physical inputs are angular
frequencies quoted as 2*pi*kHz and are converted by dividing through g_a.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .hilbert import Space, annihilation, atom_operator

TWO_PI = 2.0 * math.pi

# Experimental scale, all in (2*pi) kHz.
G_A_KHZ = 120.0
KAPPA_A_KHZ = 15.0
GAMMA_KHZ = 7.5
G_B_KHZ = 5000.0
KAPPA_B_KHZ = 500.0

# H carries Omega/2 * sigma_x per atom. The published figures correspond to a
# drive Omega * sigma_x with Omega = 0.2 kappa_a, i.e. 0.4 kappa_a here.
DEFAULT_OMEGA_OVER_KAPPA = 0.4

UNITS = ("dimensionless", "physical")
DELTA_MODES = ("fixed", "ratio_of_Delta_a", "ratio_of_V")
FREQUENCY_FIELDS = ("g_a", "kappa_a", "Omega", "Delta_a", "delta", "V", "gamma", "gamma_e")


@dataclass(frozen=True)
class ModelParams:
    """All rates and detunings entering H and the dissipators.

    Frequencies share one unit: multiples of g_a when ``units`` is
    "dimensionless", 2*pi*kHz when "physical". ``phi`` is in radians and is
    wrapped into [0, 2*pi).
    """

    g_a: float = 1.0
    kappa_a: float = KAPPA_A_KHZ / G_A_KHZ
    Omega: float = DEFAULT_OMEGA_OVER_KAPPA * KAPPA_A_KHZ / G_A_KHZ
    Delta_a: float = 0.0
    delta: float = 0.0
    phi: float = 0.0
    V: float = 0.0
    gamma: float = GAMMA_KHZ / G_A_KHZ
    gamma_e: float = 0.0
    units: str = "dimensionless"

    def __post_init__(self):
        for name in FREQUENCY_FIELDS + ("phi",):
            val = float(getattr(self, name))
            if not math.isfinite(val):
                raise ValueError(f"{name} must be finite, got {val!r}")
            object.__setattr__(self, name, val)
        if self.g_a <= 0:
            raise ValueError("g_a must be > 0")
        if self.kappa_a <= 0:
            raise ValueError("kappa_a must be > 0")
        if self.gamma < 0 or self.gamma_e < 0:
            raise ValueError("gamma and gamma_e must be >= 0")
        if self.units not in UNITS:
            raise ValueError(f"units must be one of {UNITS}, got {self.units!r}")
        object.__setattr__(self, "phi", wrap_phase(self.phi))

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def to_dimensionless(self) -> "ModelParams":
        if self.units == "dimensionless" and self.g_a == 1.0:
            return self
        scale = self.g_a
        vals = {k: getattr(self, k) / scale for k in FREQUENCY_FIELDS}
        return replace(self, units="dimensionless", **vals)

    def to_physical(self, g_a_khz: float = G_A_KHZ) -> "ModelParams":
        dimless = self.to_dimensionless()
        vals = {k: getattr(dimless, k) * g_a_khz for k in FREQUENCY_FIELDS}
        return replace(dimless, units="physical", **vals)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class AuxCavityParams:
    """Far-detuned auxiliary cavity that mediates the spin exchange."""

    g_b: float
    Delta_b: float
    kappa_b: float


def wrap_phase(phi: float) -> float:
    out = math.fmod(phi, TWO_PI)
    if out < 0:
        out += TWO_PI
    # fmod can round a tiny negative up to exactly 2*pi
    return 0.0 if out >= TWO_PI else out


def derive_sei(aux: AuxCavityParams) -> tuple[float, float]:
    """Spin-exchange strength V and extra atomic decay gamma_e."""
    if aux.kappa_b <= 0:
        raise ValueError("kappa_b must be > 0")
    if abs(aux.Delta_b) < 10.0 * abs(aux.g_b):
        warnings.warn(
            f"|Delta_b| = {abs(aux.Delta_b):g} < 10 g_b: outside the dispersive regime",
            stacklevel=2,
        )
    denom = aux.Delta_b ** 2 + aux.kappa_b ** 2
    V = -aux.g_b ** 2 * aux.Delta_b / denom
    gamma_e = aux.kappa_b * aux.g_b ** 2 / denom
    return V, gamma_e


def sei_bound(g_b: float, kappa_b: float) -> float:
    """Largest |V| reachable for given g_b, kappa_b."""
    return g_b ** 2 / (2.0 * kappa_b)


def invert_sei(V_target: float, g_b: float, kappa_b: float) -> tuple[float, float]:
    """Detuning Delta_b (far-dispersive root) giving ``V_target``, and its gamma_e.

    Solves V*Delta_b**2 + g_b**2*Delta_b + V*kappa_b**2 = 0 and keeps the
    larger-|Delta_b| root.
    """
    if kappa_b <= 0:
        raise ValueError("kappa_b must be > 0")
    bound = sei_bound(g_b, kappa_b)
    if V_target == 0 or abs(V_target) > bound * (1 + 1e-12):
        raise ValueError(
            f"V_target={V_target!r} unsolvable: need 0 < |V| <= g_b^2/(2 kappa_b) = {bound:g}"
        )
    disc = max(g_b ** 4 - 4.0 * V_target ** 2 * kappa_b ** 2, 0.0)
    Delta_b = -(g_b ** 2 + math.sqrt(disc)) / (2.0 * V_target)
    gamma_e = kappa_b * g_b ** 2 / (Delta_b ** 2 + kappa_b ** 2)
    return Delta_b, gamma_e


def default_aux_dimensionless() -> tuple[float, float]:
    """(g_b, kappa_b) of the auxiliary cavity in units of g_a."""
    return G_B_KHZ / G_A_KHZ, KAPPA_B_KHZ / G_A_KHZ


def auto_gamma_e(V: float, g_b: float | None = None, kappa_b: float | None = None) -> float:
    """gamma_e consistent with V for the default auxiliary cavity (units of g_a).

    V = 0 maps to the limit gamma_e = 0.
    """
    if g_b is None or kappa_b is None:
        g_b, kappa_b = default_aux_dimensionless()
    if V == 0:
        return 0.0
    return invert_sei(V, g_b, kappa_b)[1]


def resolve_delta(mode: str, Delta_a: float, V: float, delta: float = 0.0,
                  ratio: float | None = None) -> float:
    """Atom-pump detuning for one grid point under the chosen convention."""
    if mode == "fixed":
        return float(delta)
    if ratio is None:
        raise ValueError(f"delta_mode {mode!r} requires a ratio")
    if mode == "ratio_of_Delta_a":
        return ratio * Delta_a
    if mode == "ratio_of_V":
        return ratio * V
    raise ValueError(f"unknown delta_mode {mode!r}; expected one of {DELTA_MODES}")


def default_params(**overrides) -> ModelParams:
    """Dimensionless parameter set used for the published figures."""
    return ModelParams(**overrides)


def build_hamiltonian(params: ModelParams, space: Space) -> np.ndarray:
    a = annihilation(space)
    ad = a.conj().T
    sm1 = atom_operator(space, 1, "minus")
    sm2 = atom_operator(space, 2, "minus")
    sp1 = atom_operator(space, 1, "plus")
    sp2 = atom_operator(space, 2, "plus")
    p = params
    H = p.Delta_a * (ad @ a)
    H = H + 0.5 * p.delta * (atom_operator(space, 1, "z") + atom_operator(space, 2, "z"))
    H = H + 0.5 * p.Omega * (atom_operator(space, 1, "x") + atom_operator(space, 2, "x"))
    H = H + p.V * (sp1 @ sm2 + sp2 @ sm1)
    coupling = p.g_a * ad @ (sm1 + math.cos(p.phi) * sm2)
    H = H + coupling + coupling.conj().T
    return H
