"""Lindblad generator, steady state, time propagation and regression correlators.

Density matrices are vectorized column-major, ``vec(rho)[i + j*d] = rho[i, j]``,
so that vec(A rho B) = (B^T kron A) vec(rho).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp

from .hilbert import Space, annihilation, atom_operator
from .model import ModelParams, build_hamiltonian

# Reciprocal condition number below which the bordered steady-state system is
# treated as singular (more than one stationary state).
RCOND_MIN = 1e-12
RESIDUAL_TOL = 1e-10
# refinement passes with the residual accumulated in extended precision
REFINE_STEPS = 2
POSITIVITY_TOL = 1e-8
MIN_NORMALIZATION = 1e-14


class SteadyStateError(RuntimeError):
    pass


class DegenerateSteadyState(SteadyStateError):
    """The Liouvillian kernel is (numerically) more than one-dimensional."""


class EvolutionError(RuntimeError):
    pass


class NoEmissionError(ValueError):
    pass


@dataclass(frozen=True)
class CollapseChannel:
    operator: np.ndarray
    rate: float

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError(f"collapse rate must be >= 0, got {self.rate}")


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    d = math.isqrt(v.shape[0])
    return v.reshape(d, d, order="F")


def build_liouvillian(H: np.ndarray, channels=()) -> np.ndarray:
    d = H.shape[0]
    if H.shape != (d, d):
        raise ValueError(f"Hamiltonian must be square, got shape {H.shape}")
    eye = np.eye(d)
    h_eff = np.array(H, dtype=complex)
    jumps = np.zeros((d * d, d * d), dtype=complex)
    for ch in channels:
        c = np.asarray(ch.operator)
        if c.shape != (d, d):
            raise ValueError(f"collapse operator shape {c.shape} does not match H {H.shape}")
        if ch.rate == 0:
            continue
        h_eff -= 0.5j * ch.rate * (c.conj().T @ c)
        jumps += ch.rate * np.kron(c.conj(), c)
    # -i Heff rho + i rho Heff^dag
    return -1j * np.kron(eye, h_eff) + 1j * np.kron(h_eff.conj(), eye) + jumps


def model_channels(params: ModelParams, space: Space) -> list[CollapseChannel]:
    """Cavity loss plus spontaneous and elimination-induced atomic decay."""
    atomic = params.gamma + params.gamma_e
    return [
        CollapseChannel(annihilation(space), params.kappa_a),
        CollapseChannel(atom_operator(space, 1, "minus"), atomic),
        CollapseChannel(atom_operator(space, 2, "minus"), atomic),
    ]


def liouvillian_for(params: ModelParams, space: Space) -> np.ndarray:
    return build_liouvillian(build_hamiltonian(params, space), model_channels(params, space))


def apply_lindblad(H, channels, rho):
    """Right-hand side of the master equation in matrix form."""
    out = -1j * (H @ rho - rho @ H)
    for ch in channels:
        c = ch.operator
        cdc = c.conj().T @ c
        out = out + ch.rate * (c @ rho @ c.conj().T - 0.5 * (cdc @ rho + rho @ cdc))
    return out


# -- steady state -----------------------------------------------------------

def _hermitian_indices(d: int):
    iu, ju = np.triu_indices(d, k=1)
    diag = np.arange(d) * (d + 1)
    return diag, iu + ju * d, ju + iu * d, iu, ju


def _real_generator(L: np.ndarray, d: int) -> np.ndarray:
    """L restricted to Hermitian matrices, in the orthonormal basis
    {E_ii, (E_ij+E_ji)/sqrt2, i(E_ij-E_ji)/sqrt2}.
    """
    diag, mij, mji, _, _ = _hermitian_indices(d)
    nd, nu = d, len(mij)
    s = 1.0 / math.sqrt(2.0)
    cols = np.empty((L.shape[0], d * d), dtype=complex)
    cols[:, :nd] = L[:, diag]
    cols[:, nd:nd + nu] = s * (L[:, mij] + L[:, mji])
    cols[:, nd + nu:] = 1j * s * (L[:, mij] - L[:, mji])
    out = np.empty((d * d, d * d))
    out[:nd] = cols[diag].real
    out[nd:nd + nu] = s * (cols[mij] + cols[mji]).real
    out[nd + nu:] = (-1j * s * (cols[mij] - cols[mji])).real
    return out


def _rho_from_real(x: np.ndarray, d: int) -> np.ndarray:
    _, _, _, iu, ju = _hermitian_indices(d)
    nu = len(iu)
    s = 1.0 / math.sqrt(2.0)
    rho = np.zeros((d, d), dtype=complex)
    rho[np.arange(d), np.arange(d)] = x[:d]
    upper = s * (x[d:d + nu] + 1j * x[d + nu:])
    rho[iu, ju] = upper
    rho[ju, iu] = upper.conj()
    return rho


@dataclass(frozen=True)
class SteadyState:
    rho: np.ndarray
    residual: float
    rcond: float


def solve_steady_state(L: np.ndarray) -> SteadyState:
    """Stationary state from the bordered linear system.

    The first population equation is replaced by Tr(rho) = 1 and the system is
    solved on the real vector space of Hermitian matrices. Iterative refinement
    with an extended-precision residual keeps small populations (high photon
    numbers) accurate well below the double-precision noise of a plain solve.
    """
    n = L.shape[0]
    d = math.isqrt(n)
    if d * d != n or L.shape != (n, n):
        raise ValueError(f"superoperator shape {L.shape} is not (d^2, d^2)")
    A = _real_generator(L, d)
    A[0, :] = 0.0
    A[0, :d] = 1.0
    b = np.zeros(n)
    b[0] = 1.0
    with warnings.catch_warnings():
        # exact singularity is reported through rcond below
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(A, check_finite=False)
    anorm = np.abs(A).sum(axis=0).max()
    rcond, info = sla.lapack.dgecon(lu, anorm, norm="1")
    if info != 0 or not rcond > RCOND_MIN:
        raise DegenerateSteadyState(
            f"non-unique steady state: bordered system rcond={rcond:.3e} < {RCOND_MIN:g}"
        )
    x = sla.lu_solve((lu, piv), b, check_finite=False)
    A_ext = A.astype(np.longdouble)
    b_ext = b.astype(np.longdouble)
    for _ in range(REFINE_STEPS):
        r = (b_ext - A_ext @ x.astype(np.longdouble)).astype(float)
        x = x + sla.lu_solve((lu, piv), r, check_finite=False)
    rho = _rho_from_real(x, d)
    residual = np.linalg.norm(L @ vec(rho)) / superop_norm(L)
    if not residual < RESIDUAL_TOL:
        raise SteadyStateError(f"steady-state residual {residual:.3e} exceeds {RESIDUAL_TOL:g}")
    min_eig = np.linalg.eigvalsh(rho)[0]
    if min_eig < -POSITIVITY_TOL:
        raise SteadyStateError(f"steady state not positive: min eigenvalue {min_eig:.3e}")
    return SteadyState(rho=rho, residual=float(residual), rcond=float(rcond))


def steady_state(L: np.ndarray) -> np.ndarray:
    return solve_steady_state(L).rho


def superop_norm(L: np.ndarray) -> float:
    """Induced 1-norm (max column sum)."""
    return float(np.abs(L).sum(axis=0).max())


def kernel_gap(L: np.ndarray) -> tuple[float, float]:
    """Two smallest |eigenvalues| of L relative to ||L||; full diagonalization."""
    w = np.sort(np.abs(np.linalg.eigvals(L)))
    nrm = superop_norm(L)
    return w[0] / nrm, w[1] / nrm


# -- time evolution ---------------------------------------------------------

class Propagator:
    """exp(L t) applied to vectorized states, caching one matrix per step size."""

    def __init__(self, L: np.ndarray):
        self.L = L
        self._cache: dict[float, np.ndarray] = {}

    def step(self, dt: float) -> np.ndarray:
        key = float(np.float64(dt))
        P = self._cache.get(key)
        if P is None:
            P = sla.expm(self.L * dt)
            self._cache[key] = P
        return P

    def along(self, v0: np.ndarray, times) -> list[np.ndarray]:
        """States at each of ``times`` (non-decreasing, >= 0)."""
        times = np.asarray(times, dtype=float)
        if np.any(times < 0) or np.any(np.diff(times) < 0):
            raise ValueError("times must be non-negative and non-decreasing")
        out, v, t_prev = [], v0, 0.0
        for t in times:
            dt = t - t_prev
            if dt > 0:
                # snap nearly equal increments of a uniform grid onto one key
                dt = float(np.round(dt, 12))
                v = self.step(dt) @ v
            out.append(v)
            t_prev = t
        return out


def evolve(L: np.ndarray, rho0: np.ndarray, t: float, method: str = "expm",
           rtol: float = 1e-10, atol: float = 1e-12) -> np.ndarray:
    """rho(t) = exp(L t) rho0.

    ``method="expm"`` uses a dense scaling-and-squaring exponential;
    ``method="rk"`` integrates with an adaptive 8th-order Runge-Kutta scheme.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    v0 = vec(np.asarray(rho0, dtype=complex))
    if t == 0:
        return np.array(rho0, dtype=complex)
    if method == "expm":
        return unvec(sla.expm(L * t) @ v0)
    if method == "rk":
        sol = solve_ivp(lambda _t, y: L @ y, (0.0, t), v0, method="DOP853",
                        rtol=rtol, atol=atol, t_eval=[t])
        if not sol.success:
            raise EvolutionError(f"integration failed at t={sol.t[-1]:g}: {sol.message}")
        return unvec(sol.y[:, -1])
    raise ValueError(f"unknown method {method!r}")


# -- quantum regression -----------------------------------------------------

def regression_g2(L: np.ndarray, rho_ss: np.ndarray, n: int, tau_grid,
                  propagator: Propagator | None = None) -> np.ndarray:
    """Normalized delayed correlation of n-photon bundles,

    g_n^(2)(tau) = Tr[a^dag^n a^n e^{L tau}(a^n rho a^dag^n)] / <a^dag^n a^n>^2.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    d = rho_ss.shape[0]
    space = Space(d // 4 - 1)
    an = np.linalg.matrix_power(annihilation(space), n)
    nn = an.conj().T @ an
    norm = float(np.real(np.trace(nn @ rho_ss)))
    if not norm > MIN_NORMALIZATION:
        raise NoEmissionError(f"no {n}-photon emission at these parameters (<a^dag^{n} a^{n}> = {norm:.3e})")
    taus = np.asarray(tau_grid, dtype=float)
    order = np.argsort(taus, kind="stable")
    prop = propagator or Propagator(L)
    states = prop.along(vec(an @ rho_ss @ an.conj().T), taus[order])
    # Tr[nn X] = vec(nn^T) . vec(X)
    probe = vec(nn.T)
    out = np.empty(len(taus))
    for k, v in zip(order, states):
        out[k] = np.real(probe @ v) / norm ** 2
    return out
