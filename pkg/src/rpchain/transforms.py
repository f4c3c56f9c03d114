"""Hole-particle and polaron unitaries, the reflection map and vectorization.

The chain Fock space is identified with ``F_L (x) F_R``: the full-chain
basis vector ``c*_X c*_Y Omega`` (left creators first) is ``|X> (x) |Y>``.
Left configurations are bit masks below ``2**ell``; right configurations are
stored shifted down by ``ell`` bits.

The reflection ``theta`` is antiunitary from ``F_L`` to ``F_R``.  On the real
basis it is a signed permutation ``Theta`` followed by complex conjugation, so
``theta A theta^-1 = Theta conj(A) Theta^T``.

A vector ``psi`` of the balanced space, written as a left-by-right coefficient
matrix ``C``, corresponds to the Hilbert-Schmidt matrix ``M = S C Theta S`` in the
basis ``e_X = b*_{I_e} b*_{I_o} Omega_L = s(X) |X>`` (``S = diag(s)``).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .fock import CompositeBasis, PhononBasisSpec, mask_of, q_left, sector_decompose, sites_of
from .model import ModelParams, reflect
from .operators import (OperatorMatrix, assemble, c_full, cd_full, dn_full, parity_full,
                        phase_matrix, phonon_product)


# ------------------------------------------------------------ hole-particle

@lru_cache(maxsize=None)
def hole_particle_fermion(ell):
    """U = prod over odd sites (increasing) of u_i, on the full Fock space."""
    dim = 1 << (2 * ell)
    U = sp.identity(dim, format="csr")
    for i in range(-ell, ell):
        if i % 2 == 0:
            continue
        others = [j for j in range(-ell, ell) if j != i]
        u = parity_full(ell, others) @ (cd_full(ell, i) + c_full(ell, i))
        U = U @ u
    return U.tocsr()


def hole_particle(basis: CompositeBasis):
    if basis.n_fermion != 1 << (2 * basis.ell):
        raise ValueError("hole-particle transform needs the basis with all fillings")
    Uf = hole_particle_fermion(basis.ell)
    return OperatorMatrix(basis, sp.kron(Uf, sp.identity(basis.n_phonon), format="csr"))


def cdw_vacuum_fermion(ell):
    """(-1)^((|Lambda|+2)/4) prod_{j odd} c*_j Omega on the full Fock space."""
    v = np.zeros(1 << (2 * ell))
    v[0] = 1.0
    odd = [j for j in range(-ell, ell) if j % 2]
    for j in reversed(odd):
        v = cd_full(ell, j) @ v
    return (-1) ** ((2 * ell + 2) // 4) * v


def hole_particle_map(half: CompositeBasis, bal: CompositeBasis):
    """U restricted to the half-filled space, landing in the balanced space."""
    Uf = hole_particle_fermion(half.ell)
    block = sp.csr_matrix(Uf)[np.asarray(bal.masks)][:, np.asarray(half.masks)]
    return sp.kron(block, sp.identity(half.n_phonon), format="csr")


# ------------------------------------------------------------ polaron transform

def _lf_site_mats(params: ModelParams, phonon: PhononBasisSpec):
    if phonon.representation != "fock":
        raise ValueError("the polaron transform needs the Fock representation")
    _, _, _, pi = phonon.local_ops()
    coeff = -1j * np.sqrt(2.0) * params.omega ** -1.5 * params.g
    rot = np.diag(np.exp(-1j * np.pi * np.arange(phonon.d) / 2))
    # dn_j = +1/2 or -1/2
    return {s: rot @ sla.expm(coeff * s * pi) for s in (0.5, -0.5)}


def lang_firsov(params: ModelParams, basis: CompositeBasis):
    """V = exp(-i pi N_p / 2) exp(L), L = -i sqrt(2) omega^(-3/2) g sum dn_j pi_j."""
    mats = _lf_site_mats(params, basis.phonon)
    blocks = []
    for m in basis.masks:
        factors = {j: mats[0.5 if m >> (j + basis.ell) & 1 else -0.5] for j in range(-basis.ell, basis.ell)}
        blocks.append(phonon_product(basis.d, basis.n_sites, factors, -basis.ell))
    return OperatorMatrix(basis, sp.block_diag(blocks, format="csr"))


def apply_lang_firsov(params: ModelParams, basis: CompositeBasis, psi, inverse=False):
    """V psi (or V^-1 psi) without forming V."""
    mats = _lf_site_mats(params, basis.phonon)
    if inverse:
        mats = {s: m.conj().T for s, m in mats.items()}
    n, d = basis.n_sites, basis.d
    out = np.empty(basis.dim, dtype=complex)
    for f, m in enumerate(basis.masks):
        block = np.asarray(psi[f * basis.n_phonon:(f + 1) * basis.n_phonon], dtype=complex).reshape((d,) * n)
        for k, j in enumerate(range(-basis.ell, basis.ell)):
            A = mats[0.5 if m >> (j + basis.ell) & 1 else -0.5]
            block = np.moveaxis(np.tensordot(A, block, axes=([1], [k])), 0, k)
        out[f * basis.n_phonon:(f + 1) * basis.n_phonon] = block.reshape(-1)
    return out


def lf_intertwining_defects(params: ModelParams, ell=1, probe_max=None):
    """Defects of V c_j V^-1 = exp(i alpha phi_j) c_j and V a_j V^-1 = i a_j - (g/omega) dn_j.

    Measured on the probe subspace of phonon occupations <= probe_max
    (default n_max // 2) at every site.
    """
    phonon = PhononBasisSpec.fock(params.n_max, params.omega)
    basis = CompositeBasis.all_fillings(ell, phonon)
    V = lang_firsov(params, basis).matrix
    Vi = V.conj().T
    probe_max = params.n_max // 2 if probe_max is None else probe_max
    keep = []
    for i in range(basis.dim):
        _, ph = basis.state_of(i)
        if max(ph) <= probe_max:
            keep.append(i)
    keep = np.array(keep)
    a, ad, phi, _ = phonon.local_ops()
    out_c, out_a = 0.0, 0.0
    for j in range(-ell, ell):
        c = assemble(basis, c_full(ell, j))
        lhs = (V @ c @ Vi)[:, keep]
        rhs = (assemble(basis, None, {j: phase_matrix(phonon, params.alpha_lf)}) @ c)[:, keep]
        out_c = max(out_c, float(np.abs((lhs - rhs).toarray()).max()))
        aj = assemble(basis, None, {j: a})
        lhs = (V @ aj @ Vi)[:, keep]
        rhs = (1j * aj - (params.g / params.omega) * assemble(basis, dn_full(ell, j)))[:, keep]
        out_a = max(out_a, float(np.abs((lhs - rhs).toarray()).max()))
    return {"c_defect": out_c, "a_defect": out_a}


def lang_firsov_gap(params: ModelParams):
    """|E0(H) - (E0(transformed) - g^2 |Lambda| / 4 omega)| at the given cutoff."""
    from .operators import build_hamiltonian, build_transformed

    phonon = PhononBasisSpec.fock(params.n_max, params.omega)
    half = CompositeBasis.half_filled(params.ell, phonon)
    bal = CompositeBasis.balanced(params.ell, phonon)
    e_h = np.linalg.eigvalsh(build_hamiltonian(params, half).toarray())[0]
    e_t = np.linalg.eigvalsh(build_transformed(params, bal).toarray())[0]
    shift = params.g ** 2 * 2 * params.ell / (4 * params.omega)
    return abs(e_h - (e_t - shift)), e_h, e_t - shift


# ------------------------------------------------------------ bipartition and reflection

def b_full(ell, j):
    """b_j for a left site j, on the full Fock space."""
    if not -ell <= j < 0:
        raise ValueError("b operators live on the left half")
    P = parity_full(ell, range(-ell, 0))
    c = c_full(ell, j)
    return (P @ c if j % 2 == 0 else c @ P).tocsr()


def b_order(config):
    """Creation order of e_X: even sites increasing, then odd sites increasing."""
    return [j for j in config if j % 2 == 0] + [j for j in config if j % 2]


@lru_cache(maxsize=None)
def b_sign_table(ell):
    """{left config: s(X)} with e_X = s(X) |X>."""
    out = {}
    dim = 1 << (2 * ell)
    for m in range(1 << ell):
        config = sites_of(m, ell)
        v = np.zeros(dim)
        v[0] = 1.0
        for j in reversed(b_order(config)):
            v = b_full(ell, j).T @ v
        out[config] = int(round(v[m]))
    return out


@lru_cache(maxsize=None)
def reflected_sign_table(ell):
    """{left config Y: s_R(Y)} with theta e_Y = s_R(Y) |r(Y)>_R."""
    out = {}
    dim = 1 << (2 * ell)
    for m in range(1 << ell):
        config = sites_of(m, ell)
        v = np.zeros(dim)
        v[0] = 1.0
        for j in reversed(b_order(config)):
            k = reflect(j)
            v = (-1) ** abs(k) * (cd_full(ell, k) @ v)
        target = mask_of([reflect(j) for j in config], ell)
        out[config] = int(round(v[target]))
    return out


@dataclass(frozen=True)
class AntiunitaryRep:
    """Signed permutation ``perm`` followed by complex conjugation when ``conjugate``."""
    perm: sp.spmatrix
    conjugate: bool = True

    def apply(self, v):
        v = np.asarray(v)
        return self.perm @ (np.conj(v) if self.conjugate else v)

    def conj_op(self, A):
        """theta A theta^-1."""
        A = sp.csr_matrix(A)
        if self.conjugate:
            A = A.conj()
        return (self.perm @ A @ self.perm.T).tocsr()


class Bipartition:
    """Left and right halves of the chain with their phonons, and the reflection map."""

    def __init__(self, ell, phonon: PhononBasisSpec):
        self.ell = ell
        self.phonon = phonon
        self.d = phonon.d
        self.n_half_phonon = self.d ** ell
        self.half_dim = (1 << ell) * self.n_half_phonon

    # half-space operators -------------------------------------------------
    def left_op(self, fermion=None, phonon=None):
        """Operator on F_L from a full-chain fermion matrix acting only on left sites."""
        masks = np.arange(1 << self.ell)
        f = sp.identity(1 << self.ell, format="csr") if fermion is None else sp.csr_matrix(fermion)[masks][:, masks]
        p = phonon_product(self.d, self.ell, phonon or {}, -self.ell)
        return sp.kron(f, p, format="csr")

    def right_op(self, fermion=None, phonon=None):
        """Operator on F_R from a full-chain fermion matrix acting only on right sites."""
        masks = np.arange(1 << self.ell) << self.ell
        f = sp.identity(1 << self.ell, format="csr") if fermion is None else sp.csr_matrix(fermion)[masks][:, masks]
        p = phonon_product(self.d, self.ell, phonon or {}, 0)
        return sp.kron(f, p, format="csr")

    @cached_property
    def sign_left(self):
        """Diagonal S with e_X (x) n = S |X> (x) n."""
        s = b_sign_table(self.ell)
        diag = np.repeat([s[sites_of(m, self.ell)] for m in range(1 << self.ell)], self.n_half_phonon)
        return sp.diags(diag.astype(float), format="csr")

    @cached_property
    def theta(self):
        """The reflection from F_L to F_R."""
        ell, d, n = self.ell, self.d, self.n_half_phonon
        sl = b_sign_table(ell)
        sr = reflected_sign_table(ell)
        # phonon at left site j goes to right site r(j): reverse the multi-index
        ph = np.arange(n).reshape((d,) * ell)
        ph_rev = np.transpose(ph, list(reversed(range(ell)))).reshape(-1)
        rows, cols, vals = [], [], []
        for m in range(1 << ell):
            config = sites_of(m, ell)
            rm = mask_of([reflect(j) for j in config], ell) >> ell
            sign = sl[config] * sr[config]
            for p in range(n):
                rows.append(rm * n + ph_rev[p])
                cols.append(m * n + p)
                vals.append(float(sign))
        P = sp.csr_matrix((vals, (rows, cols)), shape=(self.half_dim, self.half_dim))
        return AntiunitaryRep(P, True)

    # embedding into the chain ---------------------------------------------
    def composite_index(self, basis: CompositeBasis):
        """For each composite index, the index in the left (x) right product space."""
        if basis.ell != self.ell or basis.d != self.d:
            raise ValueError("basis does not match this bipartition")
        lowmask = (1 << self.ell) - 1
        n = self.n_half_phonon
        idx = np.empty(basis.dim, dtype=np.int64)
        ph = np.arange(basis.n_phonon)
        pl, pr = np.divmod(ph, n)
        for f, m in enumerate(basis.masks):
            ml, mr = m & lowmask, m >> self.ell
            idx[f * basis.n_phonon:(f + 1) * basis.n_phonon] = (ml * n + pl) * self.half_dim + mr * n + pr
        return idx

    def tensor(self, A, B, basis: CompositeBasis):
        """A (x) B restricted to the configurations of ``basis``."""
        idx = self.composite_index(basis)
        full = sp.kron(sp.csr_matrix(A), sp.csr_matrix(B), format="csr")
        return full[idx][:, idx]

    def left_tensor(self, A, basis):
        return self.tensor(A, sp.identity(self.half_dim), basis)

    def right_tensor(self, B, basis):
        return self.tensor(sp.identity(self.half_dim), B, basis)

    # vectorization ----------------------------------------------------------
    def coefficient_matrix(self, psi, basis):
        C = np.zeros((self.half_dim, self.half_dim), dtype=complex)
        idx = self.composite_index(basis)
        C.reshape(-1)[idx] = psi
        return C

    def hs_matrix(self, psi, basis):
        """Hilbert-Schmidt matrix M = S C Theta S in the e_X basis."""
        C = self.coefficient_matrix(psi, basis)
        s = self.sign_left.diagonal()
        CT = (self.theta.perm.T @ C.T).T
        return s[:, None] * CT * s[None, :]

    def from_hs_matrix(self, M, basis):
        s = self.sign_left.diagonal()
        MS = s[:, None] * np.asarray(M) * s[None, :]
        C = (self.theta.perm @ MS.T).T
        return C.reshape(-1)[self.composite_index(basis)]

    @cached_property
    def sector_table(self):
        return sector_decompose(self.ell)

    @cached_property
    def sector_indices(self):
        """{q: half-space indices of F_L(q)}, configs in sector-table order."""
        n = self.n_half_phonon
        out = {}
        for q in self.sector_table.q_values:
            ms = [mask_of(x, self.ell) for x in self.sector_table.left_labels[q]]
            out[q] = np.concatenate([np.arange(m * n, (m + 1) * n) for m in ms])
        return out

    def L(self, A, basis):
        """L(A): M -> A M, as an operator on the balanced space (A in the |X> basis)."""
        return self.left_tensor(A, basis)

    def R(self, B, basis):
        """R(B): M -> M B, as an operator on the balanced space (B in the |X> basis)."""
        return self.right_tensor(self.theta.conj_op(sp.csr_matrix(B).conj().T), basis)


@dataclass
class SectorMatrices:
    blocks: dict

    def frobenius_sq(self):
        return float(sum(np.linalg.norm(m) ** 2 for m in self.blocks.values()))


def vectorize(psi, basis: CompositeBasis, bip: Bipartition | None = None):
    """Per-sector Hilbert-Schmidt matrices of a balanced-space vector."""
    if bip is None:
        bip = Bipartition(basis.ell, basis.phonon)
    if len(psi) != basis.dim:
        raise ValueError("vector does not live on this basis")
    M = bip.hs_matrix(psi, basis)
    blocks = {}
    for q, ix in bip.sector_indices.items():
        blocks[q] = M[np.ix_(ix, ix)]
    inside = np.zeros(M.shape, dtype=bool)
    for ix in bip.sector_indices.values():
        inside[np.ix_(ix, ix)] = True
    outside = np.abs(M[~inside]).max(initial=0.0)
    if outside > 1e-12 * max(1.0, np.abs(M).max()):
        raise ValueError("vector has weight outside the charge sectors")
    return SectorMatrices(blocks)


def devectorize(sm: SectorMatrices, basis: CompositeBasis, bip: Bipartition | None = None):
    if bip is None:
        bip = Bipartition(basis.ell, basis.phonon)
    M = np.zeros((bip.half_dim, bip.half_dim), dtype=complex)
    for q, ix in bip.sector_indices.items():
        M[np.ix_(ix, ix)] = sm.blocks[q]
    return bip.from_hs_matrix(M, basis)


def reflection_antiunitary(ell, phonon: PhononBasisSpec):
    if ell % 2 != 1:
        raise ValueError("the reflection identities need odd ell")
    return Bipartition(ell, phonon).theta


def tau_antiunitary(ell, phonon: PhononBasisSpec):
    """tau = U_R^* theta U_L as a map from F_L to F_R.

    U_L and U_R are the hole-particle unitaries of each half, built from the
    u_i of that half alone.
    """
    bip = Bipartition(ell, phonon)
    UL = bip.left_op(_half_hole_particle(ell, "L"))
    UR = bip.right_op(_half_hole_particle(ell, "R"))
    perm = (UR.T @ bip.theta.perm @ UL).tocsr()
    return AntiunitaryRep(perm, True)


def _half_hole_particle(ell, side):
    sites = range(-ell, 0) if side == "L" else range(0, ell)
    dim = 1 << (2 * ell)
    U = sp.identity(dim, format="csr")
    for i in sites:
        if i % 2 == 0:
            continue
        others = [j for j in sites if j != i]
        U = U @ (parity_full(ell, others) @ (cd_full(ell, i) + c_full(ell, i)))
    return U.tocsr()


# ------------------------------------------------------------ identity suite

def _max_abs(A):
    A = sp.csr_matrix(A)
    return float(np.abs(A.data).max()) if A.nnz else 0.0


def hole_particle_identities(ell):
    """Defects of U c_j U^* = c_j^* (odd j), = c_j (even j), U dn_j U^* = (-1)^j dn_j
    and of the vacuum map U Omega = +/- Omega^CDW.

    ``vacuum_printed`` compares with the prefactor (-1)^((|Lambda|+2)/4);
    ``vacuum_corrected`` with (-1)^((|Lambda|-2)/4).
    """
    U = hole_particle_fermion(ell)
    Ud = U.conj().T
    odd = even = dn = 0.0
    for j in range(-ell, ell):
        c = c_full(ell, j)
        target = cd_full(ell, j) if j % 2 else c
        d = _max_abs(U @ c @ Ud - target)
        if j % 2:
            odd = max(odd, d)
        else:
            even = max(even, d)
        dn = max(dn, _max_abs(U @ dn_full(ell, j) @ Ud - (-1) ** abs(j) * dn_full(ell, j)))
    vac = np.zeros(1 << (2 * ell))
    vac[0] = 1.0
    u_vac = U @ vac
    cdw = cdw_vacuum_fermion(ell)
    return {"odd": odd, "even": even, "dn_stagger": dn,
            "unitarity": _max_abs(U @ Ud - sp.identity(U.shape[0])),
            "vacuum_printed": float(np.abs(u_vac - cdw).max()),
            "vacuum_corrected": float(np.abs(u_vac + cdw).max())}


def reflection_identities(params: ModelParams):
    """Defects of the five seam identities for the transformed Hamiltonian.

    (i) T_R = theta T_L theta^-1, (ii) W_R = theta W_L theta^-1,
    (iii) T_LR = -t sum_xi (B*_xi (x) theta B*_xi theta^-1 + B_xi (x) theta B_xi theta^-1)
    with xi in {-1, -ell} and B_xi = b_xi e^{-/+ i alpha phi_xi},
    (iv) W_LR = 2 sum W(i+j+1) L(dn_i) R(dn_j), (v) K_R = theta K_L theta^-1.
    """
    from .model import w_of
    from .operators import bond_class, build_transformed, pair_term_full, transformed_bonds

    params.require_odd()
    ell, ph = params.ell, PhononBasisSpec.fock(params.n_max, params.omega)
    bal = CompositeBasis.balanced(ell, ph)
    _, parts = build_transformed(params, bal, parts=True)
    bip = Bipartition(ell, ph)
    th = bip.theta
    alpha = params.alpha_lf
    half = (bip.half_dim,) * 2
    TL = sp.csr_matrix(half, dtype=complex)
    for j, k in transformed_bonds(ell):
        if bond_class(ell, j, k) != "L":
            continue
        t = -params.t * bip.left_op(pair_term_full(ell, j, k),
                                    {j: phase_matrix(ph, -alpha), k: phase_matrix(ph, alpha)})
        TL = TL + t + t.conj().T
    WL = sp.csr_matrix(half)
    for i in range(-ell, 0):
        for j in range(-ell, 0):
            w = w_of(params.interaction, i - j)
            if w:
                WL = WL + w * bip.left_op(dn_full(ell, i) @ dn_full(ell, j))
    KL = sum(params.omega * bip.left_op(None, {j: ph.number()}) for j in range(-ell, 0))
    out = {
        "i": _max_abs(bip.right_tensor(th.conj_op(TL), bal) - parts["T"]["R"]),
        "ii": _max_abs(bip.right_tensor(th.conj_op(WL), bal) - parts["W"]["R"]),
        "v": _max_abs(bip.right_tensor(th.conj_op(KL), bal) - parts["K"]["R"]),
    }
    seam = sp.csr_matrix(parts["T"]["LR"].shape, dtype=complex)
    # at ell = 1 the two seam sites coincide and both bonds are the same pair
    mult = 2 if ell == 1 else 1
    for xi in sorted({-1, -ell}):
        Bd = bip.left_op(b_full(ell, xi).T, {xi: phase_matrix(ph, alpha)})
        Bm = bip.left_op(b_full(ell, xi), {xi: phase_matrix(ph, -alpha)})
        seam = seam + mult * (bip.tensor(Bd, th.conj_op(Bd), bal) + bip.tensor(Bm, th.conj_op(Bm), bal))
    out["iii"] = _max_abs(-params.t * seam - parts["T"]["LR"])
    cross = sp.csr_matrix(parts["W"]["LR"].shape)
    for i in range(-ell, 0):
        for j in range(-ell, 0):
            w = w_of(params.interaction, i + j + 1)
            if w:
                cross = cross + 2 * w * bip.tensor(bip.left_op(dn_full(ell, i)),
                                                   th.conj_op(bip.left_op(dn_full(ell, j))), bal)
    out["iv"] = _max_abs(cross - parts["W"]["LR"])
    return out
