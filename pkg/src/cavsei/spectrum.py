"""Dressed-state structure of the undriven Hamiltonian.

Without the pump the excitation number is conserved and H splits into
manifolds. Manifold n (n >= 2) is spanned by

    bare:        |n-1,g,e>, |n-1,e,g>, |n-2,e,e>, |n,g,g>
    collective:  |n-1,+>,   |n-1,->,   |n-2,e,e>, |n,g,g>

with |+-> = (|g,e> +- |e,g>)/sqrt2. For n = 1 the |n-2,e,e> state does not
exist and the matrix is 3x3. Matrix entries are energies measured from
|0,g,g>, i.e. the block of H shifted by +delta, so a resonance with the pump
is a zero eigenvalue.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .model import ModelParams, resolve_delta

DARK_TOL = 1e-10
DEGENERACY_TOL = 1e-9
SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class ManifoldMatrix:
    n: int
    basis: str
    matrix: np.ndarray
    labels: tuple[str, ...]

    @property
    def coupling(self) -> np.ndarray:
        """Light-matter part: entries linking the n-1 photon sector to the rest."""
        c = np.zeros_like(self.matrix)
        c[:2, 2:] = self.matrix[:2, 2:]
        c[2:, :2] = self.matrix[2:, :2]
        return c


@dataclass(frozen=True)
class DressedLevel:
    energy: float
    state: np.ndarray
    dark: bool
    manifold: int
    coupling: float


def _labels(n: int, basis: str) -> tuple[str, ...]:
    if basis == "bare":
        first = (f"|{n-1},g,e>", f"|{n-1},e,g>")
    else:
        first = (f"|{n-1},+>", f"|{n-1},->")
    rest = (f"|{n-2},e,e>", f"|{n},g,g>") if n >= 2 else (f"|{n},g,g>",)
    return first + rest


def manifold_matrix(n: int, params: ModelParams, basis: str = "bare") -> ManifoldMatrix:
    if n < 1:
        raise ValueError("manifold index n must be >= 1")
    if basis not in ("bare", "collective"):
        raise ValueError(f"basis must be 'bare' or 'collective', got {basis!r}")
    p = params
    g, c = p.g_a, math.cos(p.phi)
    xi = (n - 1) * p.Delta_a + p.delta
    r_lo, r_hi = math.sqrt(n - 1), math.sqrt(n)
    if basis == "bare":
        M = np.array([
            [xi, p.V, r_lo * g, r_hi * g * c],
            [p.V, xi, r_lo * g * c, r_hi * g],
            [r_lo * g, r_lo * g * c, (n - 2) * p.Delta_a + 2 * p.delta, 0.0],
            [r_hi * g * c, r_hi * g, 0.0, n * p.Delta_a],
        ])
    else:
        gp = g * (1 + c) / SQRT2
        gm = g * (1 - c) / SQRT2
        M = np.array([
            [xi + p.V, 0.0, r_lo * gp, r_hi * gp],
            [0.0, xi - p.V, r_lo * gm, -r_hi * gm],
            [r_lo * gp, r_lo * gm, (n - 2) * p.Delta_a + 2 * p.delta, 0.0],
            [r_hi * gp, -r_hi * gm, 0.0, n * p.Delta_a],
        ])
    if n == 1:
        keep = [0, 1, 3]
        M = M[np.ix_(keep, keep)]
    return ManifoldMatrix(n, basis, M, _labels(n, basis))


def collective_transform(n: int) -> np.ndarray:
    """Columns are the collective basis states written in the bare basis."""
    s = 1.0 / SQRT2
    U = np.array([[s, s, 0, 0], [s, -s, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]])
    if n == 1:
        keep = [0, 1, 3]
        U = U[np.ix_(keep, keep)]
    return U


def coupling_strength(mm: ManifoldMatrix, state: np.ndarray) -> float:
    return float(np.linalg.norm(mm.coupling @ state))


def dressed_levels(mm: ManifoldMatrix) -> list[DressedLevel]:
    """Eigenstates sorted by energy, with darkness classified.

    Inside a degenerate eigenspace the basis is rotated to diagonalize the
    coupling weight, so a dark direction is found whenever one exists.
    """
    w, U = np.linalg.eigh(mm.matrix)
    C = mm.coupling
    scale = max(1.0, float(np.abs(mm.matrix).max()))
    levels = []
    i = 0
    while i < len(w):
        j = i + 1
        while j < len(w) and w[j] - w[i] < DEGENERACY_TOL * scale:
            j += 1
        block = U[:, i:j]
        if j - i > 1:
            cb = C @ block
            _, R = np.linalg.eigh(cb.conj().T @ cb)
            block = block @ R
        for k in range(block.shape[1]):
            v = block[:, k]
            # fix the overall sign so the largest component is positive
            v = v * np.sign(v[np.argmax(np.abs(v))])
            strength = float(np.linalg.norm(C @ v))
            levels.append(DressedLevel(float(w[i + k]), v, strength < DARK_TOL, mm.n, strength))
        i = j
    return levels


def dark_states(n: int, params: ModelParams, basis: str = "bare") -> list[DressedLevel]:
    return [lvl for lvl in dressed_levels(manifold_matrix(n, params, basis)) if lvl.dark]


def closed_form_dark_states(n: int, sign: int) -> dict[str, np.ndarray]:
    """Dark states at V = 0, delta = Delta_a/2 in the bare basis.

    ``sign = -1`` is the phi = 0 family, ``sign = +1`` the phi = pi family.
    The S-type state needs n >= 2.
    """
    s = 1.0 / SQRT2
    out = {}
    if n == 1:
        out["A"] = np.array([s, sign * s, 0.0])
        return out
    out["A"] = np.array([s, sign * s, 0.0, 0.0])
    den = 2 * n - 1
    out["S"] = np.array([0.0, 0.0, sign * math.sqrt(n / den), math.sqrt((n - 1) / den)])
    return out


def sideband_energies(params: ModelParams) -> tuple[float, float]:
    """Bright single-excitation energies (E+, E-); valid for phi = 0 only."""
    if abs(math.cos(params.phi) - 1.0) > 1e-12:
        raise ValueError("closed-form sideband energies hold only for phi = 0")
    p = params
    mid = 0.5 * (p.Delta_a + p.delta + p.V)
    half = 0.5 * math.sqrt((p.delta + p.V - p.Delta_a) ** 2 + 8 * p.g_a ** 2)
    return mid + half, mid - half


# -- resonances -------------------------------------------------------------

@dataclass(frozen=True)
class Resonance:
    family: str
    manifold: int
    Delta_a: float
    at_infinity: bool = False


@dataclass
class ResonanceSet:
    delta_mode: str
    delta_ratio: float | None
    resonances: list[Resonance] = field(default_factory=list)

    def values(self, family: str | None = None) -> list[float]:
        return [r.Delta_a for r in self.resonances
                if (family is None or r.family == family) and not r.at_infinity]


def _at(params: ModelParams, Delta_a: float, delta_mode: str, ratio) -> ModelParams:
    delta = resolve_delta(delta_mode, Delta_a, params.V, params.delta, ratio)
    return params.replace(Delta_a=Delta_a, delta=delta)


def manifold_det(n: int, params: ModelParams, Delta_a: float, delta_mode: str = "fixed",
                 delta_ratio: float | None = None) -> float:
    return float(np.linalg.det(manifold_matrix(n, _at(params, Delta_a, delta_mode, delta_ratio)).matrix))


def find_resonances_numeric(n: int, params: ModelParams, delta_mode: str = "fixed",
                            delta_ratio: float | None = None, window=(-8.0, 8.0),
                            points: int = 4001) -> list[float]:
    """Zeros of det M_n(Delta_a) located by a sign-change scan plus bisection.

    Double roots (tangential zeros) are not detected.
    """
    grid = np.linspace(window[0], window[1], points)
    f = lambda x: manifold_det(n, params, x, delta_mode, delta_ratio)
    vals = np.array([f(x) for x in grid])
    roots = []
    for k in range(len(grid) - 1):
        if vals[k] == 0.0:
            roots.append(float(grid[k]))
        elif vals[k] * vals[k + 1] < 0:
            roots.append(brentq(f, grid[k], grid[k + 1], xtol=1e-14, rtol=1e-14))
    return roots


def resonance_detunings(params: ModelParams, delta_mode: str,
                        delta_ratio: float | None = None) -> ResonanceSet:
    """Closed-form cavity detunings where a manifold hits the pump resonance.

    Families by regime:
      ratio_of_Delta_a, ratio 1/2, V = 0: sidebands +-g sqrt(2(1+cos^2 phi)), middle 0
      ratio_of_Delta_a, ratio 1/2, phi = 0: vacuum Rabi -V +- sqrt(V^2 + 4 g^2)
      fixed delta, phi = 0: single photon 2 g^2/(delta + V)
      ratio_of_V, ratio -1, phi = pi: two photon -g^2/V (blue) and 2V (red)
    Other regimes fall back to the numerical det scan of manifolds 1 and 2.
    """
    p = params
    g, c, V = p.g_a, math.cos(p.phi), p.V
    out = ResonanceSet(delta_mode, delta_ratio)
    add = out.resonances.append
    phi0 = abs(c - 1.0) < 1e-12
    phipi = abs(c + 1.0) < 1e-12
    if delta_mode == "ratio_of_Delta_a" and delta_ratio is not None and abs(delta_ratio - 0.5) < 1e-15:
        if V == 0:
            side = g * math.sqrt(2 * (1 + c * c))
            add(Resonance("sideband", 1, -side))
            add(Resonance("middle", 1, 0.0))
            add(Resonance("sideband", 1, side))
            return out
        if phi0:
            root = math.sqrt(V * V + 4 * g * g)
            add(Resonance("vacuum_rabi", 1, -V - root))
            add(Resonance("vacuum_rabi", 1, -V + root))
            return out
    elif delta_mode == "fixed" and phi0:
        s = p.delta + V
        if s == 0:
            add(Resonance("single_photon", 1, math.inf, at_infinity=True))
        else:
            add(Resonance("single_photon", 1, 2 * g * g / s))
        return out
    elif delta_mode == "ratio_of_V" and delta_ratio is not None and abs(delta_ratio + 1) < 1e-15 and phipi:
        if V == 0:
            add(Resonance("two_photon_blue", 2, math.inf, at_infinity=True))
            add(Resonance("single_photon", 1, math.inf, at_infinity=True))
        else:
            add(Resonance("two_photon_blue", 2, -g * g / V))
            add(Resonance("single_photon", 1, -g * g / V))
        add(Resonance("two_photon_red", 2, 2 * V))
        return out
    for n in (1, 2):
        for x in find_resonances_numeric(n, p, delta_mode, delta_ratio):
            add(Resonance("numeric", n, x))
    return out


def resonance_residual(res: Resonance, params: ModelParams, delta_mode: str,
                       delta_ratio: float | None = None) -> float:
    """|det M| at the resonance; ~0 for a true singular point."""
    if res.at_infinity:
        return math.nan
    return abs(manifold_det(res.manifold, params, res.Delta_a, delta_mode, delta_ratio))


# -- bundle eigenstates -----------------------------------------------------

@dataclass(frozen=True)
class StateCheck:
    name: str
    manifold: int
    Delta_a: float
    coefficients: np.ndarray        # as printed, collective basis, unnormalized
    quoted_norm: float
    computed_norm: float
    residual: float                 # of the numerically normalized printed state
    energy: float
    corrected: np.ndarray           # nearest numerical eigenvector, same scale

    @property
    def norm_consistent(self) -> bool:
        return abs(self.quoted_norm - self.computed_norm) < 1e-9 * max(1.0, self.computed_norm)

    @property
    def is_eigenvector(self) -> bool:
        return self.residual < 1e-9


@dataclass
class BundleReport:
    V: float
    checks: list[StateCheck]

    @property
    def discrepancies(self) -> list[str]:
        out = []
        for c in self.checks:
            if not c.norm_consistent:
                out.append(f"{c.name}: quoted norm {c.quoted_norm:.6g} != sqrt(sum |c|^2) = {c.computed_norm:.6g}")
            if not c.is_eigenvector:
                out.append(f"{c.name}: printed coefficients are not an eigenvector "
                           f"(residual {c.residual:.3e}); eigenvector is {np.round(c.corrected, 12).tolist()}")
        return out

    def lines(self) -> list[str]:
        rows = []
        for c in self.checks:
            rows.append(f"{c.name}: n={c.manifold} Delta_a={c.Delta_a:.9g} residual={c.residual:.3e} "
                        f"norm quoted={c.quoted_norm:.9g} computed={c.computed_norm:.9g}")
        return rows + self.discrepancies


def _check_state(name, mm: ManifoldMatrix, Delta_a, coeffs, quoted_norm) -> StateCheck:
    coeffs = np.asarray(coeffs, dtype=float)
    norm = float(np.linalg.norm(coeffs))
    v = coeffs / norm
    M = mm.matrix
    e = float(v @ M @ v)
    residual = float(np.linalg.norm(M @ v - e * v))
    w, U = np.linalg.eigh(M)
    # eigenvector with the largest overlap; scale to the printed |n-1,-> amplitude
    k = int(np.argmax(np.abs(U.T @ v)))
    u = U[:, k]
    ref = 1 if abs(coeffs[1]) > 0 else int(np.argmax(np.abs(coeffs)))
    corrected = u * (coeffs[ref] / u[ref]) if abs(u[ref]) > 1e-14 else u
    return StateCheck(name, mm.n, float(Delta_a), coeffs, float(quoted_norm),
                      norm, residual, e, corrected)


def verify_bundle_eigenstates(params: ModelParams) -> BundleReport:
    """Check the closed-form eigenstates at phi = pi, delta = -V.

    psi_{1,1} and psi_{2,1} sit at Delta_a = -g^2/V, psi_{2,2} at Delta_a = 2V.
    Coefficients are in the collective basis.
    """
    V, g = params.V, params.g_a
    if V == 0:
        raise ValueError("bundle eigenstates require V != 0")
    base = params.replace(phi=math.pi, delta=-V)
    blue = base.replace(Delta_a=-g * g / V)
    red = base.replace(Delta_a=2 * V)
    checks = [
        _check_state("psi_1,1", manifold_matrix(1, blue, "collective"), blue.Delta_a,
                     [0.0, g, -SQRT2 * V], math.sqrt(g ** 2 + 2 * V ** 2)),
        _check_state("psi_2,1", manifold_matrix(2, blue, "collective"), blue.Delta_a,
                     [0.0, SQRT2 * g * V, g ** 2, -SQRT2 * V ** 2],
                     math.sqrt(g ** 4 + 2 * g ** 2 * V ** 2 + 4 * V ** 4)),
        _check_state("psi_2,2", manifold_matrix(2, red, "collective"), red.Delta_a,
                     [0.0, SQRT2 * V, g, SQRT2 * g], math.sqrt(3 * g ** 2 + V ** 2)),
    ]
    return BundleReport(V, checks)


# -- tabulated spectrum -----------------------------------------------------

def spectrum_rows(params: ModelParams, Delta_grid, n_max: int = 2, delta_mode: str = "fixed",
                  delta_ratio: float | None = None):
    """Rows (n, branch, Delta_a, energy, dark) over a detuning grid."""
    rows = []
    for x in Delta_grid:
        p = _at(params, float(x), delta_mode, delta_ratio)
        for n in range(1, n_max + 1):
            for b, lvl in enumerate(dressed_levels(manifold_matrix(n, p))):
                rows.append((n, b, float(x), lvl.energy, lvl.dark))
    return rows
