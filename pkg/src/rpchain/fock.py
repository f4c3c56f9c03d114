"""Fermion configurations, charge sectors and phonon bases.

A fermion configuration is stored as an integer bit mask with bit ``j + ell``
set when site ``j`` is occupied.  The canonical site order ``-ell < ... <
ell-1`` fixes every Jordan-Wigner sign.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from math import comb

import numpy as np
from numpy.polynomial.hermite import hermgauss


def mask_of(sites, ell):
    m = 0
    for j in sites:
        if not -ell <= j < ell:
            raise ValueError(f"site {j} outside [-{ell}, {ell - 1}]")
        m |= 1 << (j + ell)
    return m


def sites_of(mask, ell):
    return tuple(j for j in range(-ell, ell) if mask >> (j + ell) & 1)


def enumerate_half_filled(ell):
    """All configurations with ``ell`` fermions, in lexicographic order."""
    if ell < 1:
        raise ValueError("ell must be positive")
    if 2 * ell > 30:
        raise ValueError("chain too long for exhaustive enumeration")
    return [tuple(c) for c in combinations(range(-ell, ell), ell)]


def charge(config):
    """(#even-occupied) - (#odd-occupied)."""
    return sum(1 if j % 2 == 0 else -1 for j in config)


def q_left(config):
    return charge(config)


def q_right(config):
    return -charge(config)


def subsets(sites):
    sites = list(sites)
    out = []
    for k in range(len(sites) + 1):
        out.extend(combinations(sites, k))
    return out


@dataclass(frozen=True)
class ChargeSectorTable:
    ell: int
    q_values: tuple
    left_labels: dict
    right_labels: dict

    def size(self):
        return sum(len(self.left_labels[q]) * len(self.right_labels[q]) for q in self.q_values)


def sector_decompose(ell):
    left = subsets(range(-ell, 0))
    right = subsets(range(0, ell))
    ql = {}
    for x in left:
        ql.setdefault(q_left(x), []).append(x)
    qr = {}
    for y in right:
        qr.setdefault(q_right(y), []).append(y)
    qs = tuple(sorted(set(ql) & set(qr)))
    return ChargeSectorTable(ell, qs, {q: ql[q] for q in qs}, {q: qr[q] for q in qs})


# ---------------------------------------------------------------- phonons

def hermite_functions(n_max, x):
    """psi_n(x) for n = 0..n_max, oscillator with unit frequency; shape (n_max+1, len(x))."""
    x = np.asarray(x, dtype=float)
    out = np.zeros((n_max + 1, x.size))
    out[0] = np.pi ** -0.25 * np.exp(-x * x / 2)
    if n_max >= 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for n in range(2, n_max + 1):
        out[n] = np.sqrt(2.0 / n) * x * out[n - 1] - np.sqrt((n - 1) / n) * out[n - 2]
    return out


def hermite_position_transform(n_max, grid_nodes):
    """Hermite functions at Gauss-Hermite nodes.

    Returns ``(T, weights, nodes)`` with ``T[n, k] = psi_n(x_k)`` and weights
    ``w_k = gh_k * exp(x_k**2)`` so that ``T @ diag(w) @ T.T = I``.  Nodes are
    in oscillator units; the physical displacement is ``x / sqrt(omega)``.
    """
    if grid_nodes < n_max + 1:
        raise ValueError("grid_nodes must be at least n_max + 1")
    nodes, gh = hermgauss(grid_nodes)
    T = hermite_functions(n_max, nodes)
    weights = gh * np.exp(nodes ** 2)
    return T, weights, nodes


def ladder(d):
    """Truncated annihilator on occupations 0..d-1."""
    return np.diag(np.sqrt(np.arange(1, d)), 1)


@dataclass(frozen=True)
class PhononBasisSpec:
    """Per-site phonon basis: truncated Fock states or a Gauss-Hermite grid.

    The grid representation is the Fock truncation with ``grid_nodes - 1``
    quanta rotated by the orthogonal matrix ``S[n, k] = psi_n(x_k) sqrt(w_k)``;
    in it the position operator is diagonal.
    """
    representation: str = "fock"
    size: int = 2
    omega: float = 1.0

    def __post_init__(self):
        if self.representation not in ("fock", "grid"):
            raise ValueError("representation must be fock or grid")
        if self.representation == "grid" and self.size < 1:
            raise ValueError("grid needs at least one node")

    @classmethod
    def fock(cls, n_max, omega=1.0):
        return cls("fock", int(n_max), float(omega))

    @classmethod
    def grid(cls, grid_nodes, omega=1.0):
        return cls("grid", int(grid_nodes), float(omega))

    @property
    def d(self):
        return self.size + 1 if self.representation == "fock" else self.size

    @cached_property
    def rotation(self):
        """Columns are grid states written in the Fock basis (identity for fock)."""
        if self.representation == "fock":
            return np.eye(self.d)
        T, w, _ = hermite_position_transform(self.d - 1, self.d)
        return T * np.sqrt(w)[None, :]

    @cached_property
    def nodes(self):
        if self.representation != "grid":
            return None
        return hermgauss(self.d)[0] / np.sqrt(self.omega)

    def local_ops(self):
        """(a, a*, phi, pi) as dense d x d matrices in this representation."""
        a = ladder(self.d)
        S = self.rotation
        a = S.T @ a @ S
        ad = a.T.copy()
        phi = np.sqrt(1 / (2 * self.omega)) * (ad + a)
        pi = 1j * np.sqrt(self.omega / 2) * (ad - a)
        if self.representation == "grid":
            phi = np.diag(np.diag(phi))
        return a, ad, phi, pi

    def number(self):
        S = self.rotation
        return S.T @ np.diag(np.arange(self.d, dtype=float)) @ S


@dataclass(frozen=True)
class CompositeBasis:
    """Fermion configurations (bit masks) times phonon product states.

    Flat index = ``f * d**n_sites + phonon_flat`` where the phonon multi-index
    runs over sites ``-ell .. ell-1`` with the first site most significant.
    """
    ell: int
    masks: tuple
    phonon: PhononBasisSpec = field(default_factory=PhononBasisSpec)

    @classmethod
    def half_filled(cls, ell, phonon):
        return cls(ell, tuple(mask_of(c, ell) for c in enumerate_half_filled(ell)), phonon)

    @classmethod
    def all_fillings(cls, ell, phonon):
        return cls(ell, tuple(range(1 << (2 * ell))), phonon)

    @classmethod
    def balanced(cls, ell, phonon):
        """Configurations with equal left and right charge, ordered by mask."""
        out = []
        for m in range(1 << (2 * ell)):
            occ = sites_of(m, ell)
            left = [j for j in occ if j < 0]
            right = [j for j in occ if j >= 0]
            if q_left(left) == q_right(right):
                out.append(m)
        return cls(ell, tuple(out), phonon)

    @property
    def n_sites(self):
        return 2 * self.ell

    @property
    def n_fermion(self):
        return len(self.masks)

    @property
    def d(self):
        return self.phonon.d

    @property
    def n_phonon(self):
        return self.d ** self.n_sites

    @property
    def dim(self):
        return self.n_fermion * self.n_phonon

    @cached_property
    def _pos(self):
        return {m: i for i, m in enumerate(self.masks)}

    def configs(self):
        return [sites_of(m, self.ell) for m in self.masks]

    def index_of(self, config, phonons=None):
        f = self._pos[mask_of(config, self.ell)]
        p = 0
        if phonons is not None:
            if len(phonons) != self.n_sites:
                raise ValueError("phonon multi-index has wrong length")
            for n in phonons:
                if not 0 <= n < self.d:
                    raise ValueError("phonon index out of range")
                p = p * self.d + int(n)
        return f * self.n_phonon + p

    def state_of(self, i):
        if not 0 <= i < self.dim:
            raise IndexError(i)
        f, p = divmod(int(i), self.n_phonon)
        ph = []
        for _ in range(self.n_sites):
            p, r = divmod(p, self.d)
            ph.append(r)
        return sites_of(self.masks[f], self.ell), tuple(reversed(ph))


def check_transform_orthonormality(n_max, grid_nodes):
    T, w, _ = hermite_position_transform(n_max, grid_nodes)
    return float(np.abs(T @ np.diag(w) @ T.T - np.eye(n_max + 1)).max())


def half_filled_count(ell):
    return comb(2 * ell, ell)
