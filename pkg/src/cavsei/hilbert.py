"""Truncated Hilbert space of one cavity mode and two two-level atoms.

Basis kets are |q, s1, s2> with photon number q = 0..photon_cutoff and atomic
labels s in {0: g, 1: e}. The flat index is ``q*4 + 2*s1 + s2`` (photon-major,
atom 1 before atom 2). All operators are dense complex ``numpy`` arrays.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

N_ATOMS = 2
ATOM_DIM = 4
DEFAULT_CUTOFF = 7

_SIGMA = {
    # 2x2 blocks in the (g, e) basis
    "minus": np.array([[0, 1], [0, 0]], dtype=complex),
    "plus": np.array([[0, 0], [1, 0]], dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, 1j], [-1j, 0]], dtype=complex),
    "z": np.array([[-1, 0], [0, 1]], dtype=complex),
}


@dataclass(frozen=True)
class Space:
    """Cavity Fock levels ``0..photon_cutoff`` times two atoms."""

    photon_cutoff: int

    def __post_init__(self):
        if int(self.photon_cutoff) != self.photon_cutoff or self.photon_cutoff < 1:
            raise ValueError(f"photon_cutoff must be an integer >= 1, got {self.photon_cutoff!r}")

    @property
    def n_atoms(self) -> int:
        return N_ATOMS

    @property
    def dim(self) -> int:
        return (self.photon_cutoff + 1) * ATOM_DIM

    def index(self, q: int, s1: int, s2: int) -> int:
        if not 0 <= q <= self.photon_cutoff or s1 not in (0, 1) or s2 not in (0, 1):
            raise ValueError(f"ket |{q},{s1},{s2}> outside the truncated space")
        return q * ATOM_DIM + 2 * s1 + s2

    def label(self, index: int) -> tuple[int, int, int]:
        q, rest = divmod(index, ATOM_DIM)
        return q, rest // 2, rest % 2

    def labels(self) -> list[tuple[int, int, int]]:
        return [self.label(i) for i in range(self.dim)]

    def ket(self, q: int, s1: int | str, s2: int | str) -> np.ndarray:
        """Basis vector |q, s1, s2>; atomic labels may be given as 'g'/'e'."""
        v = np.zeros(self.dim, dtype=complex)
        v[self.index(q, _atom_label(s1), _atom_label(s2))] = 1.0
        return v

    def photon_projector(self, q: int) -> np.ndarray:
        p = np.zeros((self.dim, self.dim), dtype=complex)
        i = q * ATOM_DIM
        p[i:i + ATOM_DIM, i:i + ATOM_DIM] = np.eye(ATOM_DIM)
        return p


def _atom_label(s) -> int:
    if s in ("g", 0):
        return 0
    if s in ("e", 1):
        return 1
    raise ValueError(f"atomic state must be 'g'/'e' or 0/1, got {s!r}")


def build_space(photon_cutoff: int = DEFAULT_CUTOFF) -> Space:
    return Space(photon_cutoff)


@lru_cache(maxsize=32)
def _annihilation(cutoff: int) -> np.ndarray:
    a = np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), 1).astype(complex)
    out = np.kron(a, np.eye(ATOM_DIM))
    out.setflags(write=False)
    return out


def annihilation(space: Space) -> np.ndarray:
    """Cavity lowering operator: a|q,s1,s2> = sqrt(q)|q-1,s1,s2>."""
    return _annihilation(space.photon_cutoff)


@lru_cache(maxsize=128)
def _atom_operator(cutoff: int, atom: int, kind: str) -> np.ndarray:
    s = _SIGMA[kind]
    pair = np.kron(s, np.eye(2)) if atom == 1 else np.kron(np.eye(2), s)
    out = np.kron(np.eye(cutoff + 1), pair)
    out.setflags(write=False)
    return out


def atom_operator(space: Space, atom: int, kind: str) -> np.ndarray:
    """Pauli or ladder operator on one atom, identity elsewhere.

    ``kind`` is one of minus, plus, x, y, z, with sigma_z|e> = +|e> and
    sigma_minus|e> = |g>.
    """
    if atom not in (1, 2):
        raise ValueError(f"atom must be 1 or 2, got {atom!r}")
    if kind not in _SIGMA:
        raise ValueError(f"unknown atom operator kind {kind!r}")
    return _atom_operator(space.photon_cutoff, atom, kind)


def number_operator(space: Space) -> np.ndarray:
    a = annihilation(space)
    return a.conj().T @ a


def excitation_number(space: Space) -> np.ndarray:
    """Total excitation a^dag a + sum_j sigma_j^+ sigma_j^-."""
    n = number_operator(space)
    for j in (1, 2):
        n = n + atom_operator(space, j, "plus") @ atom_operator(space, j, "minus")
    return n


def identity(space: Space) -> np.ndarray:
    return np.eye(space.dim, dtype=complex)
