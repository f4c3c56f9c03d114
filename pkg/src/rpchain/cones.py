"""Cone membership and order-preserving operator inequalities.

Two cones are realized.

* Background cone: per fermion configuration, pointwise nonnegative phonon
  wavefunctions.  Vectors are tested through their values at Gauss-Hermite
  nodes.  Operators are tested on the generators ``|X> (x) prod_j g_{x_j}``
  where ``g_x`` is the vacuum-width Gaussian centred at node ``x`` (a coherent
  state); these are positive functions, unlike the rotated grid basis.
* Reflection cone: after the hole-particle and polaron maps, every charge
  sector matrix of the vectorized state is positive semidefinite.

Tests over the reflection cone are exhaustive at ell=1 (matrix-unit
generators) and sampled otherwise; verdicts carry a ``mode`` label.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from math import factorial

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numpy.polynomial.hermite import hermgauss
from scipy.optimize import minimize

from .fock import CompositeBasis, PhononBasisSpec, hermite_functions, sites_of
from .model import ModelParams, w_of
from .operators import as_sparse, dn_full
from .transforms import (Bipartition, SectorMatrices, apply_lang_firsov, devectorize,
                         hole_particle_map, vectorize)


@dataclass
class ConeVerdict:
    member: bool
    strict: bool
    worst_margin: float
    witness: object = None
    cone: str = ""
    mode: str = "checked"
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.strict and not self.member:
            raise ValueError("strict verdict must also be a member")

    def to_dict(self):
        out = asdict(self)
        out["witness"] = _jsonable(self.witness)
        out["details"] = _jsonable(self.details)
        return out


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def _phase_fix_largest(v):
    v = np.asarray(v, dtype=complex)
    k = int(np.argmax(np.abs(v)))
    if abs(v[k]) == 0:
        return v.real.copy(), 0.0
    w = v * np.conj(v[k]) / abs(v[k])
    return w.real, float(np.abs(w.imag).max())


# ------------------------------------------------------------ background cone

def background_values(psi, basis: CompositeBasis, grid_nodes=None):
    """Wavefunction values at the Gauss-Hermite nodes, shape (n_fermion, g, ..., g).

    For a grid basis the coefficients are ``sqrt(w_k) psi(x_k)`` and already
    carry the sign of the wavefunction; they are returned as is.
    """
    psi = np.asarray(psi)
    n, d = basis.n_sites, basis.d
    arr = psi.reshape((basis.n_fermion,) + (d,) * n)
    if basis.phonon.representation == "grid":
        return arr
    g = grid_nodes or d + 2
    nodes = hermgauss(g)[0]
    T = hermite_functions(d - 1, nodes)  # (d, g)
    for axis in range(1, n + 1):
        arr = np.moveaxis(np.tensordot(arr, T, axes=([axis], [0])), -1, axis)
    return arr


def background_membership(psi, basis: CompositeBasis, tol=1e-10, tol_strict=1e-12, grid_nodes=None):
    """Pointwise nonnegativity after fixing the phase of the largest coefficient."""
    psi = np.asarray(psi, dtype=complex)
    nrm = np.linalg.norm(psi)
    if nrm == 0:
        return ConeVerdict(True, False, 0.0, None, "background")
    vals = background_values(psi / nrm, basis, grid_nodes)
    real, imag = _phase_fix_largest(vals.reshape(-1))
    if imag > 1e-8:
        raise ValueError(f"no global phase makes the vector real (residual {imag:.2e})")
    real = real.reshape(vals.shape)
    k = int(np.argmin(real))
    idx = np.unravel_index(k, real.shape)
    margin = float(real[idx])
    witness = {"config": sites_of(basis.masks[idx[0]], basis.ell), "nodes": tuple(int(i) for i in idx[1:])}
    member = margin >= -tol
    strict = member and margin > tol_strict
    return ConeVerdict(member, strict, margin, witness, "background")


def gaussian_generators(d, nodes):
    """Fock coefficients (d x len(nodes)) of Gaussians centred at ``nodes``.

    Nodes are in oscillator units; the Gaussian at x is the coherent state
    with amplitude x / sqrt(2).
    """
    n = np.arange(d)
    lf = np.sqrt(np.array([float(factorial(int(k))) for k in n]))
    a = np.asarray(nodes, dtype=float) / np.sqrt(2.0)
    return np.exp(-a[None, :] ** 2 / 2) * a[None, :] ** n[:, None] / lf[:, None]


def background_generators(basis: CompositeBasis, grid_nodes=5):
    """Columns ``|X> (x) prod_j g_{x_j}`` over all X and node multi-indices."""
    if basis.phonon.representation != "fock":
        raise ValueError("background generators are built in the Fock representation")
    C = gaussian_generators(basis.d, hermgauss(grid_nodes)[0])
    P = C
    for _ in range(basis.n_sites - 1):
        P = np.kron(P, C)
    return np.kron(np.eye(basis.n_fermion), P)


def background_gram(A, basis: CompositeBasis, grid_nodes=5):
    """Matrix elements <g_a, A g_b> over background generators."""
    G = background_generators(basis, grid_nodes)
    A = A.toarray() if sp.issparse(A) else np.asarray(A)
    return G.T @ A @ G


# ------------------------------------------------------------ reflection cone

def reflection_vector(psi, params: ModelParams, half: CompositeBasis, bal: CompositeBasis):
    """Balanced-space image U V psi of a half-filled vector."""
    return hole_particle_map(half, bal) @ apply_lang_firsov(params, half, psi)


def _sector_margin(sm, scale):
    worst, wit, herm = np.inf, None, 0.0
    for q, m in sm.blocks.items():
        if m.size == 0:
            continue
        herm = max(herm, float(np.abs(m - m.conj().T).max()) / scale)
        e = np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0] / scale
        if e < worst:
            worst, wit = float(e), q
    return worst, wit, herm


def phase_fix_hs(sm):
    """Multiply sector matrices by the phase that makes the total trace positive."""
    tr = sum(np.trace(b) for b in sm.blocks.values())
    if abs(tr) == 0:
        k = max(sm.blocks, key=lambda q: np.abs(sm.blocks[q]).max(initial=0.0))
        b = sm.blocks[k]
        i = np.unravel_index(np.argmax(np.abs(b)), b.shape)
        tr = b[i]
        if abs(tr) == 0:
            return sm, 1.0
    ph = np.conj(tr) / abs(tr)
    return SectorMatrices({q: b * ph for q, b in sm.blocks.items()}), ph


def reflection_membership(psi, basis: CompositeBasis, params: ModelParams | None = None,
                          picture="transformed", half: CompositeBasis | None = None,
                          bip: Bipartition | None = None, tol=1e-10, tol_strict=1e-12,
                          fix_phase=True):
    """PSD test of every sector matrix.

    ``picture="original"`` takes a half-filled vector and maps it with U V
    first (``basis`` is then the half-filled basis).  Margins are relative
    to the norm of the vector.
    """
    if picture == "original":
        if params is None:
            raise ValueError("the original picture needs model parameters")
        params.require_odd()
        half = basis
        basis = CompositeBasis.balanced(half.ell, half.phonon)
        psi = reflection_vector(psi, params, half, basis)
    elif picture != "transformed":
        raise ValueError("picture must be original or transformed")
    if basis.ell % 2 != 1:
        raise ValueError("reflection positivity needs odd ell")
    psi = np.asarray(psi, dtype=complex)
    nrm = float(np.linalg.norm(psi))
    if nrm == 0:
        return ConeVerdict(True, False, 0.0, None, "reflection")
    sm = vectorize(psi, basis, bip)
    if fix_phase:
        sm, _ = phase_fix_hs(sm)
    worst, wit, herm = _sector_margin(sm, nrm)
    member = worst >= -tol and herm <= max(tol, 1e-8)
    strict = member and worst > tol_strict
    return ConeVerdict(member, strict, worst, wit, "reflection",
                       details={"hermiticity_residual": herm})


def dual_witness(psi, basis: CompositeBasis, bip: Bipartition | None = None):
    """A cone element y with <y, psi> < 0 for a non-member psi (None otherwise)."""
    sm = vectorize(psi, basis, bip)
    best = None
    for q, m in sm.blocks.items():
        if m.size == 0:
            continue
        w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
        if best is None or w[0] < best[0]:
            best = (w[0], q, v[:, 0])
    if best is None or best[0] >= 0:
        return None
    _, q, v = best
    blocks = {k: np.zeros_like(b) for k, b in sm.blocks.items()}
    blocks[q] = np.outer(v, v.conj())
    return devectorize(SectorMatrices(blocks), basis, bip)


def random_generators(basis: CompositeBasis, n, seed=0, bip: Bipartition | None = None):
    """Seeded rank-1 PSD sector elements ``v v*``, cycling through the sectors.

    Sample k draws from its own stream ``default_rng([seed, k])``.
    """
    if bip is None:
        bip = Bipartition(basis.ell, basis.phonon)
    qs = list(bip.sector_indices)
    sizes = {q: len(ix) for q, ix in bip.sector_indices.items()}
    zero = {q: np.zeros((s, s), dtype=complex) for q, s in sizes.items()}
    out = np.empty((basis.dim, n), dtype=complex)
    for k in range(n):
        rng = np.random.default_rng([seed, k])
        q = qs[k % len(qs)]
        v = rng.standard_normal(sizes[q]) + 1j * rng.standard_normal(sizes[q])
        blocks = dict(zero)
        blocks[q] = np.outer(v, v.conj()) / np.vdot(v, v).real
        out[:, k] = devectorize(SectorMatrices(blocks), basis, bip)
    return out


def matrix_unit_generators(basis: CompositeBasis, bip: Bipartition | None = None):
    """Extreme rays spanning the cone: e_i e_i*, (e_i+e_j)(..)*, (e_i+i e_j)(..)* per sector."""
    if bip is None:
        bip = Bipartition(basis.ell, basis.phonon)
    sizes = {q: len(ix) for q, ix in bip.sector_indices.items()}
    cols = []
    for q, s in sizes.items():
        vecs = []
        for i in range(s):
            e = np.zeros(s, dtype=complex)
            e[i] = 1
            vecs.append(e)
            for j in range(i + 1, s):
                for ph in (1, 1j):
                    f = e.copy()
                    f[j] = ph
                    vecs.append(f / np.sqrt(2))
        for v in vecs:
            blocks = {k: np.zeros((n, n), dtype=complex) for k, n in sizes.items()}
            blocks[q] = np.outer(v, v.conj())
            cols.append(devectorize(SectorMatrices(blocks), basis, bip))
    return np.column_stack(cols)


def default_generators(basis: CompositeBasis, n_samples=200, seed=0, bip=None):
    if basis.ell == 1:
        return matrix_unit_generators(basis, bip), "exhaustive"
    return random_generators(basis, n_samples, seed, bip), "sampled"


def _apply(A, X):
    if callable(A):
        return A(X)
    if isinstance(A, np.ndarray):
        return A @ X
    return as_sparse(A) @ X


def images_in_cone(images, basis: CompositeBasis, bip=None, tol=1e-8, tol_strict=1e-12,
                   fix_phase=False):
    """Worst relative sector eigenvalue over columns of ``images``."""
    if bip is None:
        bip = Bipartition(basis.ell, basis.phonon)
    worst, wit, herm_worst = np.inf, None, 0.0
    strict = True
    for k in range(images.shape[1]):
        col = images[:, k]
        nrm = float(np.linalg.norm(col))
        if nrm < 1e-300:
            worst, strict = min(worst, 0.0), False
            continue
        sm = vectorize(col, basis, bip)
        if fix_phase:
            sm, _ = phase_fix_hs(sm)
        m, q, herm = _sector_margin(sm, nrm)
        herm_worst = max(herm_worst, herm)
        if m <= tol_strict:
            strict = False
        if m < worst:
            worst, wit = m, {"generator": k, "sector": q}
    member = worst >= -tol and herm_worst <= tol
    return ConeVerdict(member, member and strict, float(worst), wit, "reflection",
                       details={"hermiticity_residual": herm_worst, "n_generators": images.shape[1]})


def operator_preserves(A, basis: CompositeBasis, cone="reflection", n_samples=200, seed=0,
                       tol=1e-8, generators=None, bip=None, grid_nodes=5):
    """A maps the cone into itself.

    Reflection cone: generator images must have PSD sector matrices (margins
    relative to the image norm).  Background cone: all matrix elements of A
    between background generators must be nonnegative.
    """
    if cone == "background":
        M = background_gram(A, basis, grid_nodes)
        scale = max(np.abs(M).max(), 1e-300)
        idx = np.unravel_index(int(np.argmin(M.real)), M.shape)
        margin = float(M.real[idx] / scale)
        member = margin >= -tol
        return ConeVerdict(member, member and margin > 0, margin, tuple(int(i) for i in idx), "background",
                           "exhaustive", {"imag_max": float(np.abs(M.imag).max())})
    if cone != "reflection":
        raise ValueError("cone must be reflection or background")
    mode = "given"
    if generators is None:
        generators, mode = default_generators(basis, n_samples, seed, bip)
    v = images_in_cone(_apply(A, generators), basis, bip, tol)
    v.mode = mode
    v.details["seed"] = seed
    return v


def semigroup_operator(H, beta, shift=0.0):
    """Callable X -> exp(-beta (H - shift)) X, dense below 600 dims, Krylov above."""
    Hs = as_sparse(H)
    n = Hs.shape[0]
    if n <= 600:
        E = sla.expm(-beta * (Hs.toarray() - shift * np.eye(n)))
        return lambda X: E @ X
    Hsh = (Hs - shift * sp.identity(n, format="csr")).tocsr()
    return lambda X: spla.expm_multiply(-beta * Hsh, X)


def ergodicity_check(H, basis: CompositeBasis | None = None, betas=(0.5, 1.0, 2.0), n_samples=40,
                     seed=0, cone="reflection", shift=None, tol_strict=1e-12, generators=None):
    """<x, e^{-beta H} y> > 0 for some beta, over pairs of generators.

    ``cone="orthant"`` uses the standard basis of a plain matrix (exhaustive).
    """
    Hs = as_sparse(H)
    if shift is None:
        shift = float(np.linalg.eigvalsh(Hs.toarray())[0]) if Hs.shape[0] <= 2000 else \
            float(spla.eigsh(Hs, k=1, which="SA", v0=np.ones(Hs.shape[0]))[0][0])
    mode = "given"
    if generators is None:
        if cone == "orthant":
            generators, mode = np.eye(Hs.shape[0]), "exhaustive"
        else:
            generators, mode = default_generators(basis, n_samples, seed)
    best = None
    for b in betas:
        Y = semigroup_operator(Hs, b, shift)(generators)
        G = (generators.conj().T @ Y).real
        best = G if best is None else np.maximum(best, G)
    idx = np.unravel_index(int(np.argmin(best)), best.shape)
    margin = float(best[idx])
    ok = margin > tol_strict
    return ConeVerdict(ok, ok, margin, tuple(int(i) for i in idx), cone, mode,
                       {"betas": list(betas), "n_generators": generators.shape[1]})


def operator_improves(H, basis: CompositeBasis, betas=(0.5, 1.0), n_samples=40, seed=0,
                      shift=None, tol_strict=1e-12, generators=None):
    """e^{-beta H} x strictly inside the reflection cone for sampled x."""
    Hs = as_sparse(H)
    if shift is None:
        shift = float(spla.eigsh(Hs, k=1, which="SA", v0=np.ones(Hs.shape[0]))[0][0]) \
            if Hs.shape[0] > 2000 else float(np.linalg.eigvalsh(Hs.toarray())[0])
    mode = "given"
    if generators is None:
        generators, mode = default_generators(basis, n_samples, seed)
    worst = None
    for b in betas:
        v = images_in_cone(semigroup_operator(Hs, b, shift)(generators), basis, tol_strict=tol_strict)
        if worst is None or v.worst_margin < worst.worst_margin:
            worst = v
    worst.mode = mode
    worst.details["betas"] = list(betas)
    return worst


# ------------------------------------------------------------ Perron-Frobenius section

def positive_ground_section(H, cone="orthant", basis: CompositeBasis | None = None, gap_tol=1e-8,
                            restarts=100, seed=0):
    """A ground-space vector inside the cone.

    Nondegenerate ground states are phase fixed and checked.  Degenerate
    ground spaces are searched by maximizing the membership margin over
    the unit sphere of the eigenspace (heuristic; failure is reported).
    """
    Hs = as_sparse(H)
    w, V = np.linalg.eigh(Hs.toarray())
    k = int(np.sum(w <= w[0] + gap_tol * max(1.0, abs(w).max())))
    E = V[:, :k]

    if callable(cone):
        margin_fn = cone
    elif cone == "orthant":
        def margin_fn(v):
            r, _ = _phase_fix_largest(v)
            return float(r.min() / np.linalg.norm(r))
    elif cone == "reflection":
        bip = Bipartition(basis.ell, basis.phonon)

        def margin_fn(v):
            sm, _ = phase_fix_hs(vectorize(v, basis, bip))
            return _sector_margin(sm, np.linalg.norm(v))[0]
    else:
        raise ValueError("unknown cone")

    if k == 1:
        v = E[:, 0]
        return v, margin_fn(v), {"degeneracy": 1}
    cplx = np.iscomplexobj(E)
    rng = np.random.default_rng(seed)

    def vec(x):
        c = x[:k] + 1j * x[k:] if cplx else x
        v = E @ c
        return v / np.linalg.norm(v)

    best_x, best = None, -np.inf
    for _ in range(restarts):
        x0 = rng.standard_normal(2 * k if cplx else k)
        res = minimize(lambda x: -margin_fn(vec(x)), x0, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
        if -res.fun > best:
            best, best_x = -res.fun, res.x
    v = vec(best_x)
    if cone == "orthant":
        v, _ = _phase_fix_largest(v)
    return v, best, {"degeneracy": k}


# ------------------------------------------------------------ Trotter domination

def trotter_domination_check(A, B, membership, generators, t=1.0, trotter_steps=(8, 16, 32, 64),
                             tol=1e-8):
    """e^{-t(A-B)} - e^{-tA} maps generators into the cone.

    ``membership(images) -> ConeVerdict`` encodes the cone.  The Trotter
    products (e^{-tA/n} e^{tB/n})^n are compared with e^{-t(A-B)}; the
    fitted rate is reported (about -1) unless the error is at roundoff.
    """
    A = as_sparse(A).toarray()
    B = as_sparse(B).toarray()
    target = sla.expm(-t * (A - B))
    base = sla.expm(-t * A)
    v = membership((target - base) @ generators)
    pre_A = membership(base @ generators)
    pre_B = membership(B @ generators)
    errs = []
    for n in trotter_steps:
        step = sla.expm(-t * A / n) @ sla.expm(t * B / n)
        errs.append(float(np.linalg.norm(np.linalg.matrix_power(step, n) - target, 2)))
    errs = np.asarray(errs)
    if errs.max() < 1e-12 * max(1.0, np.linalg.norm(target, 2)):
        rate, converges = None, True
    else:
        rate = float(np.polyfit(np.log(trotter_steps), np.log(errs), 1)[0])
        converges = rate < -0.8
    member = v.member and converges
    return ConeVerdict(member, member and v.strict, v.worst_margin, v.witness, v.cone, v.mode,
                       {"trotter_errors": errs.tolist(), "trotter_rate": rate,
                        "pre_exp_A": pre_A.member, "pre_B": pre_B.member})


# ------------------------------------------------------------ Dyson-expansion pieces

def w0_value(spec, ell):
    """Smallest eigenvalue of W(i+j+1) over the left half."""
    left = range(-ell, 0)
    M = np.array([[w_of(spec, i + j + 1) for j in left] for i in left])
    return float(np.linalg.eigvalsh(M)[0])


def seam_interaction(params: ModelParams, basis: CompositeBasis, w0=None, bip=None):
    """(W_LR, W_0) on the balanced space, built from left operators and the reflection."""
    ell = basis.ell
    if bip is None:
        bip = Bipartition(ell, basis.phonon)
    if w0 is None:
        w0 = w0_value(params.interaction, ell)
    dn = {i: bip.left_op(dn_full(ell, i)) for i in range(-ell, 0)}
    WLR = sp.csr_matrix((basis.dim, basis.dim))
    W0 = sp.csr_matrix((basis.dim, basis.dim))
    for i in range(-ell, 0):
        W0 = W0 + w0 * bip.L(dn[i], basis) @ bip.R(dn[i], basis)
        for j in range(-ell, 0):
            w = w_of(params.interaction, i + j + 1)
            if w:
                WLR = WLR + 2 * w * bip.L(dn[i], basis) @ bip.R(dn[j], basis)
    return WLR.tocsr(), W0.tocsr()
