"""Photon statistics and spin correlations read off a density matrix."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hilbert import ATOM_DIM, Space, annihilation, atom_operator

MIN_NORMALIZATION = 1e-14
NEGATIVE_TOL = 1e-10
IMAG_TOL = 1e-10


class NoPhotonComponent(ValueError):
    pass


def space_of(rho: np.ndarray) -> Space:
    d = rho.shape[0]
    if rho.shape != (d, d) or d % ATOM_DIM:
        raise ValueError(f"density matrix shape {rho.shape} does not match the cavity-atom space")
    return Space(d // ATOM_DIM - 1)


def expect(rho: np.ndarray, op: np.ndarray) -> complex:
    return np.trace(rho @ op)


def _real(z: complex, what: str) -> float:
    if abs(np.imag(z)) > IMAG_TOL * max(1.0, abs(z)):
        raise ValueError(f"{what} has imaginary part {np.imag(z):.3e}")
    return float(np.real(z))


def photon_number(rho: np.ndarray) -> float:
    a = annihilation(space_of(rho))
    return _real(expect(rho, a.conj().T @ a), "<a^dag a>")


def normal_moment(rho: np.ndarray, m: int) -> float:
    """<a^dag^m a^m>; zero when m exceeds the photon cutoff."""
    a = annihilation(space_of(rho))
    am = np.linalg.matrix_power(a, m)
    return _real(expect(rho, am.conj().T @ am), f"<a^dag^{m} a^{m}>")


def equal_time_g(rho: np.ndarray, n: int, k: int) -> float:
    """g_n^(k)(0) = <a^dag^{nk} a^{nk}> / <a^dag^n a^n>^k."""
    if n < 1 or k < 1:
        raise ValueError("n and k must be >= 1")
    denom = normal_moment(rho, n)
    if not denom > MIN_NORMALIZATION:
        raise NoPhotonComponent(f"no {n}-photon component (<a^dag^{n} a^{n}> = {denom:.3e})")
    return max(normal_moment(rho, n * k), 0.0) / denom ** k


def photon_populations(rho: np.ndarray) -> np.ndarray:
    """p(q): weight of each photon-number sector after tracing out the atoms."""
    space = space_of(rho)
    diag = np.real(np.diagonal(rho)).reshape(space.photon_cutoff + 1, ATOM_DIM)
    p = diag.sum(axis=1)
    if p.min() < -NEGATIVE_TOL:
        raise ValueError(f"negative photon population {p.min():.3e}; photon cutoff likely too small")
    return np.clip(p, 0.0, None)


def photon_distribution(rho: np.ndarray):
    """(p, p_tilde) with p_tilde(q) = q p(q) / n_s; p_tilde is None when n_s ~ 0."""
    p = photon_populations(rho)
    q = np.arange(len(p))
    ns = float(q @ p)
    if not ns > MIN_NORMALIZATION:
        return p, None
    return p, q * p / ns


def spin_correlations(rho: np.ndarray, mu: str) -> float:
    """Connected correlator <s1 s2> - <s1><s2> for Pauli component mu in {x, z}."""
    if mu not in ("x", "z"):
        raise ValueError(f"mu must be 'x' or 'z', got {mu!r}")
    space = space_of(rho)
    s1 = atom_operator(space, 1, mu)
    s2 = atom_operator(space, 2, mu)
    both = _real(expect(rho, s1 @ s2), f"<s1{mu} s2{mu}>")
    return both - _real(expect(rho, s1), f"<s1{mu}>") * _real(expect(rho, s2), f"<s2{mu}>")


@dataclass(frozen=True)
class PhotonStatistics:
    n_s: float
    g2_1: float
    g3_1: float
    g2_2: float
    p: np.ndarray
    p_tilde: np.ndarray | None

    def tail(self, above: int) -> float:
        """Sum of p_tilde(q) for q > above."""
        if self.p_tilde is None:
            return float("nan")
        return float(self.p_tilde[above + 1:].sum())


@dataclass(frozen=True)
class SpinCorrelations:
    Cxx: float
    Czz: float


def _safe_g(rho, n, k):
    try:
        return equal_time_g(rho, n, k)
    except NoPhotonComponent:
        return float("nan")


def photon_statistics(rho: np.ndarray) -> PhotonStatistics:
    p, pt = photon_distribution(rho)
    return PhotonStatistics(
        n_s=photon_number(rho),
        g2_1=_safe_g(rho, 1, 2),
        g3_1=_safe_g(rho, 1, 3),
        g2_2=_safe_g(rho, 2, 2),
        p=p,
        p_tilde=pt,
    )


def spin_statistics(rho: np.ndarray) -> SpinCorrelations:
    return SpinCorrelations(spin_correlations(rho, "x"), spin_correlations(rho, "z"))
