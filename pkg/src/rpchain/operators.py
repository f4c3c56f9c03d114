"""Second-quantized operators as sparse matrices.

Every operator is assembled from Jordan-Wigner matrices on the full fermion
Fock space of the chain (dimension ``2**(2*ell)``), restricted to the
configurations of a basis, and tensored with phonon factors.  No boundary
sign is written by hand: the periodic hopping term is the product of the
already built JW matrices.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .fock import CompositeBasis, PhononBasisSpec, mask_of
from .model import ModelParams, reflect, u_of, w_of


@dataclass
class OperatorMatrix:
    basis: object
    matrix: sp.spmatrix
    hermitian: bool = False

    def __post_init__(self):
        self.matrix = sp.csr_matrix(self.matrix)
        if self.hermitian:
            m = self.matrix
            scale = max(abs(m).max(), 1e-300) if m.nnz else 1.0
            defect = abs(m - m.conj().T).max() if m.nnz else 0.0
            if defect > 1e-13 * scale:
                raise ValueError(f"matrix flagged hermitian has defect {defect:.3e}")

    @property
    def shape(self):
        return self.matrix.shape

    def toarray(self):
        return self.matrix.toarray()

    def to_coo_text(self):
        m = self.matrix.tocoo()
        rows = [f"{r} {c} {v.real:.17g} {v.imag:.17g}" for r, c, v in zip(m.row, m.col, m.data.astype(complex))]
        return "\n".join(rows)


def as_sparse(op):
    return op.matrix if isinstance(op, OperatorMatrix) else sp.csr_matrix(op)


# ------------------------------------------------------------ fermion algebra

@lru_cache(maxsize=None)
def jw_annihilators(ell):
    """c_j on the full Fock space, indexed by bit mask, for j = -ell..ell-1."""
    n = 2 * ell
    dim = 1 << n
    out = {}
    for j in range(-ell, ell):
        b = j + ell
        rows, cols, vals = [], [], []
        for m in range(dim):
            if m >> b & 1:
                below = bin(m & ((1 << b) - 1)).count("1")
                rows.append(m ^ (1 << b))
                cols.append(m)
                vals.append(-1.0 if below % 2 else 1.0)
        out[j] = sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim))
    return out


def c_full(ell, j):
    if not -ell <= j < ell:
        raise ValueError(f"site {j} out of range for ell={ell}")
    return jw_annihilators(ell)[j]


def cd_full(ell, j):
    return c_full(ell, j).T.tocsr()


def n_full(ell, j):
    c = c_full(ell, j)
    return (c.T @ c).tocsr()


def dn_full(ell, j):
    return n_full(ell, j) - 0.5 * sp.identity(1 << (2 * ell), format="csr")


def parity_full(ell, sites):
    """prod_{j in sites} (-1)^{n_j} as a diagonal matrix."""
    dim = 1 << (2 * ell)
    sel = mask_of(sites, ell)
    d = np.array([(-1.0) ** bin(m & sel).count("1") for m in range(dim)])
    return sp.diags(d, format="csr")


def next_site(ell, j):
    return j + 1 if j < ell - 1 else -ell


# ------------------------------------------------------------ assembly

def restrict(full, masks):
    idx = np.asarray(masks)
    return sp.csr_matrix(full)[idx][:, idx]


def phonon_product(d, n_sites, factors, offset):
    """Kronecker product over phonon sites; ``factors`` maps site -> d x d matrix.

    Phonon sites are ``offset .. offset + n_sites - 1``.
    """
    mats = []
    run = 0
    for k in range(n_sites):
        site = offset + k
        if site in factors:
            if run:
                mats.append(sp.identity(d ** run, format="csr"))
                run = 0
            mats.append(sp.csr_matrix(factors[site]))
        else:
            run += 1
    if run:
        mats.append(sp.identity(d ** run, format="csr"))
    out = mats[0]
    for m in mats[1:]:
        out = sp.kron(out, m, format="csr")
    return out


def assemble(basis, fermion=None, phonon=None):
    """Operator ``fermion (x) prod phonon`` on a CompositeBasis."""
    if fermion is None:
        f = sp.identity(basis.n_fermion, format="csr")
    else:
        f = restrict(fermion, basis.masks)
    p = phonon_product(basis.d, basis.n_sites, phonon or {}, -basis.ell)
    return sp.kron(f, p, format="csr")


def annihilator(j, basis):
    return OperatorMatrix(basis, assemble(basis, c_full(basis.ell, j)))


def creator(j, basis):
    return OperatorMatrix(basis, assemble(basis, cd_full(basis.ell, j)))


def number_ops(basis):
    """Family {j: (n_j, dn_j)} of diagonal operators."""
    out = {}
    for j in range(-basis.ell, basis.ell):
        n = assemble(basis, n_full(basis.ell, j))
        out[j] = (OperatorMatrix(basis, n, True),
                  OperatorMatrix(basis, n - 0.5 * sp.identity(basis.dim, format="csr"), True))
    return out


def dn_diagonal(basis, j):
    """Diagonal of dn_j as a vector over the composite basis."""
    occ = np.array([(m >> (j + basis.ell)) & 1 for m in basis.masks], dtype=float) - 0.5
    return np.repeat(occ, basis.n_phonon)


def boson_ops(j, basis):
    """(a_j, a*_j, phi_j, pi_j) on the composite basis."""
    a, ad, phi, pi = basis.phonon.local_ops()
    return tuple(OperatorMatrix(basis, assemble(basis, None, {j: m})) for m in (a, ad, phi, pi))


def phase_matrix(phonon: PhononBasisSpec, coeff):
    """exp(i * coeff * phi) on one site: diagonal on the grid, expm of the truncated phi in Fock."""
    _, _, phi, _ = phonon.local_ops()
    if phonon.representation == "grid":
        return np.diag(np.exp(1j * coeff * np.diag(phi)))
    return sla.expm(1j * coeff * phi)


def ccr_defect(basis):
    """max |[a, a*] - I| on occupations below the cutoff (zero when exact)."""
    a, ad, _, _ = PhononBasisSpec.fock(basis.d - 1).local_ops()
    comm = a @ ad - ad @ a - np.eye(basis.d)
    return float(np.abs(comm[:-1, :-1]).max()) if basis.d > 1 else 0.0


def phonon_basis_for(params: ModelParams, representation="fock"):
    if representation == "fock":
        return PhononBasisSpec.fock(params.n_max, params.omega)
    return PhononBasisSpec.grid(params.grid_nodes, params.omega)


# ------------------------------------------------------------ Hamiltonians

def hopping_full(ell):
    """sum_j (c*_j c_{j+1} + h.c.) with c_ell = c_{-ell}, on the full Fock space."""
    dim = 1 << (2 * ell)
    out = sp.csr_matrix((dim, dim))
    for j in range(-ell, ell):
        k = next_site(ell, j)
        term = cd_full(ell, j) @ c_full(ell, k)
        out = out + term + term.T
    return out.tocsr()


def interaction_full(spec, ell):
    """sum over ordered pairs U(i-j) dn_i dn_j (literal difference)."""
    dim = 1 << (2 * ell)
    out = sp.csr_matrix((dim, dim))
    for i in range(-ell, ell):
        for j in range(-ell, ell):
            u = u_of(spec, i - j)
            if u:
                out = out + u * (dn_full(ell, i) @ dn_full(ell, j))
    return out.tocsr()


def build_hamiltonian(params: ModelParams, basis: CompositeBasis, parts=False):
    """H = -t hop + sum U(i-j) dn_i dn_j + g sum dn_j (a_j + a*_j) + omega sum a*_j a_j."""
    ell = basis.ell
    a, ad, _, _ = basis.phonon.local_ops()
    nb = basis.phonon.number()
    hop = -params.t * assemble(basis, hopping_full(ell))
    inter = assemble(basis, interaction_full(params.interaction, ell))
    coup = sp.csr_matrix((basis.dim, basis.dim))
    kin = sp.csr_matrix((basis.dim, basis.dim))
    for j in range(-ell, ell):
        if params.g:
            coup = coup + params.g * assemble(basis, dn_full(ell, j), {j: a + ad})
        kin = kin + params.omega * assemble(basis, None, {j: nb})
    H = OperatorMatrix(basis, hop + inter + coup + kin, hermitian=True)
    if parts:
        return H, {"hopping": hop, "interaction": inter, "coupling": coup, "phonon": kin}
    return H


def pair_term_full(ell, j, k):
    """c*_j c*_k on the full Fock space."""
    return (cd_full(ell, j) @ cd_full(ell, k)).tocsr()


def transformed_bonds(ell):
    """Bonds (j, k) with j even and k = j +/- 1 (periodic), each bond once."""
    out = []
    for j in range(-ell, ell):
        if j % 2:
            continue
        for eps in (1, -1):
            k = j + eps
            if k == ell:
                k = -ell
            elif k == -ell - 1:
                k = ell - 1
            out.append((j, k))
    # at ell = 1 both orientations name the same pair of sites twice, as in H
    return out


def bond_class(ell, j, k):
    if j < 0 and k < 0:
        return "L"
    if j >= 0 and k >= 0:
        return "R"
    return "LR"


def build_transformed(params: ModelParams, basis: CompositeBasis, parts=False):
    """Transformed Hamiltonian T - W + K on the balanced configurations.

    T = sum over even j and eps = +/-1 of
        -t (exp(-i alpha (phi_j - phi_{j+eps})) c*_j c*_{j+eps} + h.c.),
    W = sum over ordered pairs W(i-j) dn_i dn_j,  K = omega sum a*a.
    With ``parts`` the pieces are also returned, the pair terms split into
    left, right and seam bonds and W into left, right and cross pairs.
    """
    ell = basis.ell
    alpha = params.alpha_lf
    dim = basis.dim
    zero = lambda: sp.csr_matrix((dim, dim), dtype=complex)
    T = {"L": zero(), "R": zero(), "LR": zero()}
    ph = {}
    for j, k in transformed_bonds(ell):
        if alpha:
            if j not in ph:
                ph[j] = phase_matrix(basis.phonon, -alpha)
            if k not in ph:
                ph[k] = phase_matrix(basis.phonon, alpha)
            factors = {j: ph[j], k: ph[k]} if j != k else {}
        else:
            factors = {}
        term = -params.t * assemble(basis, pair_term_full(ell, j, k), factors)
        T[bond_class(ell, j, k)] += term + term.conj().T
    W = {"L": zero(), "R": zero(), "LR": zero()}
    for i in range(-ell, ell):
        for j in range(-ell, ell):
            w = w_of(params.interaction, i - j)
            if w:
                op = w * (dn_full(ell, i) @ dn_full(ell, j))
                W[bond_class(ell, i, j)] += assemble(basis, op)
    nb = basis.phonon.number()
    K = {"L": zero(), "R": zero()}
    for j in range(-ell, ell):
        K["L" if j < 0 else "R"] += params.omega * assemble(basis, None, {j: nb})
    Tt = T["L"] + T["R"] + T["LR"]
    Wt = W["L"] + W["R"] + W["LR"]
    Kt = K["L"] + K["R"]
    Ht = OperatorMatrix(basis, Tt - Wt + Kt, hermitian=True)
    if parts:
        return Ht, {"T": T, "W": W, "K": K}
    return Ht


def field_shift(params: ModelParams, h):
    """Coefficients (c, const) with W(h) - W(0) = sum_i c_i dn_i + const.

    Both reflected copies of the field enter, ``d_ij = h_i - h_j`` and
    ``dr_ij = h_r(i) - h_r(j)``.
    """
    ell = params.ell
    h = np.asarray(h)
    if np.iscomplexobj(h):
        if np.any(np.imag(h) != 0):
            raise ValueError("field must be real; split complex fields into parts")
        h = h.real
    h = h.astype(float)
    if h.shape != (2 * ell,):
        raise ValueError("field needs one entry per site")
    sites = range(-ell, ell)
    hv = lambda s: h[s + ell]
    c = np.zeros(2 * ell)
    const = 0.0
    for i in sites:
        for j in sites:
            if i == j:
                continue
            w = w_of(params.interaction, i - j)
            if not w:
                continue
            d = hv(i) - hv(j)
            dr = hv(reflect(i)) - hv(reflect(j))
            c[i + ell] += w * (d + dr)
            const -= 0.25 * w * (d * d + dr * dr)
    return c, const


def build_field_hamiltonian(params: ModelParams, h, basis: CompositeBasis, base=None):
    """Transformed Hamiltonian with the field-shifted interaction W(h)."""
    if base is None:
        base = build_transformed(params, basis)
    c, const = field_shift(params, h)
    if not np.any(c) and const == 0.0:
        return OperatorMatrix(basis, base.matrix.copy(), hermitian=True)
    diag = const + sum(c[j + basis.ell] * dn_diagonal(basis, j) for j in range(-basis.ell, basis.ell))
    return OperatorMatrix(basis, base.matrix - sp.diags(diag, format="csr"), hermitian=True)


def delta_n_string(sites, basis):
    """dn_{i_m} ... dn_{i_1} dn_{r(i_1)} ... dn_{r(i_m)} for left sites i_k."""
    diag = np.ones(basis.dim)
    for i in sites:
        if not -basis.ell <= i < 0:
            raise ValueError("string sites must lie in the left half")
        diag = diag * dn_diagonal(basis, i) * dn_diagonal(basis, reflect(i))
    return OperatorMatrix(basis, sp.diags(diag, format="csr"), hermitian=True)


def translation_permutation(basis):
    """Unitary of the one-site shift j -> j+1 (periodic) on fermions and phonons.

    Acts on a half-filled basis; the fermion sign is read off from JW matrices
    by transporting each creation string.
    """
    ell = basis.ell
    dim_f = 1 << (2 * ell)
    vac = np.zeros(dim_f)
    vac[0] = 1.0
    rows, cols, vals = [], [], []
    pos = {m: i for i, m in enumerate(basis.masks)}
    for col, m in enumerate(basis.masks):
        occ = [j for j in range(-ell, ell) if m >> (j + ell) & 1]
        v = vac
        for j in reversed(occ):
            v = cd_full(ell, next_site(ell, j)) @ v
        nz = np.flatnonzero(v)
        rows.append(pos[int(nz[0])])
        cols.append(col)
        vals.append(v[nz[0]])
    F = sp.csr_matrix((vals, (rows, cols)), shape=(basis.n_fermion,) * 2)
    d, n = basis.d, basis.n_sites
    perm = np.arange(d ** n).reshape((d,) * n)
    # new site j+1 carries old site j: roll the multi-index by one
    perm = np.moveaxis(perm, list(range(n)), [(k + 1) % n for k in range(n)]).reshape(-1)
    P = sp.csr_matrix((np.ones(d ** n), (perm, np.arange(d ** n))), shape=(d ** n,) * 2)
    # rows and columns swapped so that P maps old index to new index
    return sp.kron(F, P.T, format="csr")
