"""Ground-state correlations and the energy, susceptibility and infrared inequalities.

The inequalities are evaluated on the transformed Hamiltonian over the
balanced basis.  The weighted inner product of fields is

    <h|h'>_W = sum_{i != j} W(i-j) (h_i - h_j)^* (h'_i - h'_j),

which equals <h, R h'> with (R h)_i = 2 S_i h_i - 2 sum_{j != i} W(i-j) h_j
and row sums S_i = sum_{j != i} W(i-j).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .fock import CompositeBasis, PhononBasisSpec
from .model import ModelParams, reflect, w_matrix
from .operators import build_field_hamiltonian, build_transformed, dn_diagonal
from .spectral import DENSE_LIMIT, ground_energy, ground_state, pinv_resolvent


# ------------------------------------------------------------ correlations

def _expect_diag(psi, diag):
    return float(np.real(np.vdot(psi, diag * psi)) / np.real(np.vdot(psi, psi)))


def correlator(psi, basis: CompositeBasis, i, j):
    """<dn_i dn_j> in the state psi."""
    return _expect_diag(psi, dn_diagonal(basis, i) * dn_diagonal(basis, j))


def staggered_correlator(psi, basis: CompositeBasis, i, j):
    return (-1) ** abs(i - j) * correlator(psi, basis, i, j)


def correlation_matrix(psi, basis: CompositeBasis):
    """C[i, j] = <dn_i dn_j>, sites in increasing order."""
    dn = [dn_diagonal(basis, j) for j in range(-basis.ell, basis.ell)]
    w = np.abs(np.asarray(psi)) ** 2
    w = w / w.sum()
    D = np.array(dn)
    return (D * w) @ D.T


def correlation_rows(C, ell):
    """Rows (i, j, corr, staggered) for every ordered site pair."""
    rows = []
    for a, i in enumerate(range(-ell, ell)):
        for b, j in enumerate(range(-ell, ell)):
            rows.append((i, j, float(C[a, b]), float((-1) ** abs(i - j) * C[a, b])))
    return rows


def write_correlation_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "corr", "staggered"])
        for r in rows:
            w.writerow([r[0], r[1], f"{r[2]:.12e}", f"{r[3]:.12e}"])


def cdw_string(psi, basis: CompositeBasis, sites, picture="original"):
    """(-1)^m <dn_{i_m} ... dn_{i_1} dn_{r(i_1)} ... dn_{r(i_m)}> in the original picture.

    In the transformed picture U dn_j U^* = (-1)^j dn_j turns the sign into
    prod (-1)^{i + r(i)} = (-1)^m, so the plain expectation is returned.
    """
    diag = np.ones(basis.dim)
    for i in sites:
        if not -basis.ell <= i < 0:
            raise ValueError("string sites must lie in the left half")
        diag = diag * dn_diagonal(basis, i) * dn_diagonal(basis, reflect(i))
    val = _expect_diag(psi, diag)
    if picture == "original":
        return (-1) ** len(sites) * val
    if picture == "transformed":
        return val
    raise ValueError("picture must be original or transformed")


def all_strings(ell, m_max=3):
    left = range(-ell, 0)
    out = []
    for m in range(m_max + 1):
        out.extend(combinations(left, m))
    return out


def structure_factor(C):
    """Translation-averaged correlation G(j) and its transform at p = pi m / ell.

    Returns ``(p, S, G)``; Parseval gives mean(S) = G(0).
    """
    C = np.asarray(C)
    n = C.shape[0]
    G = np.array([np.mean([C[(a + j) % n, a] for a in range(n)]) for j in range(n)])
    S = np.fft.fft(G).real
    p = 2 * np.pi * np.arange(n) / n
    if abs(S.mean() - G[0]) > 1e-10:
        raise AssertionError("Parseval identity violated")
    return p, S, G


# ------------------------------------------------------------ field algebra

def stagger(h):
    """(tau h)_j = (-1)^j h_j over sites -ell..ell-1."""
    h = np.asarray(h)
    ell = h.size // 2
    return (-1.0) ** np.arange(-ell, ell) * h


def r_matrix(spec, ell):
    W = w_matrix(spec, ell)
    return 2 * np.diag(W.sum(axis=1)) - 2 * W


def r_apply(spec, h):
    h = np.asarray(h)
    return r_matrix(spec, h.size // 2) @ h


def w_inner(h, hp, spec, ell=None):
    """Double-sum form of <h|h'>_W."""
    h, hp = np.asarray(h), np.asarray(hp)
    ell = ell or h.size // 2
    W = w_matrix(spec, ell)
    dh = np.conj(h[:, None] - h[None, :])
    dhp = hp[:, None] - hp[None, :]
    return complex(np.sum(W * dh * dhp))


def laplacian_form(h):
    """sum_j |h_j - h_{j+1}|^2 with periodic wrap."""
    h = np.asarray(h)
    return float(np.sum(np.abs(h - np.roll(h, -1)) ** 2))


# ------------------------------------------------------------ inequalities

@dataclass
class GroundData:
    params: ModelParams
    basis: CompositeBasis
    H: object
    E0: float
    psi: np.ndarray
    gap: float
    spectrum: tuple | None = None

    @classmethod
    def build(cls, params: ModelParams, gap_tol=None):
        params.require_odd()
        basis = CompositeBasis.balanced(params.ell, PhononBasisSpec.fock(params.n_max, params.omega))
        H = build_transformed(params, basis)
        spectrum = None
        if basis.dim <= DENSE_LIMIT:
            # kept for every pseudo-resolvent call
            spectrum = np.linalg.eigh(H.toarray())
            w, V = spectrum
            E0, psi, gap = float(w[0]), V[:, 0], float(w[1] - w[0]) if w.size > 1 else np.inf
        else:
            E0, psi, gap = ground_state(H)
        tol = params.gap_tol if gap_tol is None else gap_tol
        if gap <= tol:
            raise RuntimeError(f"ground state degenerate (gap {gap:.2e}); inequality tests need uniqueness")
        return cls(params, basis, H, E0, psi, gap, spectrum)

    def field_operator(self, a):
        """sum_j a_j dn_j applied to the ground state."""
        ell = self.basis.ell
        diag = sum(a[j + ell] * dn_diagonal(self.basis, j) for j in range(-ell, ell))
        return diag * self.psi

    def dn_means(self):
        return np.array([_expect_diag(self.psi, dn_diagonal(self.basis, j))
                         for j in range(-self.basis.ell, self.basis.ell)])


def energy_monotonicity(gd: GroundData, h, tol=1e-9, method="auto"):
    """E(0) <= E(h).  ``auto`` uses Lanczos started from the h=0 ground state above 500 states."""
    Hh = build_field_hamiltonian(gd.params, h, gd.basis, base=gd.H)
    if method == "auto":
        method = "lanczos" if gd.basis.dim > 500 else "dense"
    Eh = ground_energy(Hh, method=method, v0=gd.psi)
    scale = max(1.0, abs(gd.E0))
    return {"E0": gd.E0, "Eh": Eh, "holds": bool(gd.E0 <= Eh + tol * scale)}


def _quad_form(gd: GroundData, eta):
    x, info = pinv_resolvent(gd.H, gd.E0, eta, psi0=gd.psi, return_info=True, spectrum=gd.spectrum)
    return complex(np.vdot(eta, x)), info["ground_residual"]


def susceptibility_bound(gd: GroundData, h, tol=1e-9, residual_tol=1e-6):
    """<(A psi), (H - E0)^+ (A psi)> <= <h|h>_W with A = sum_j (R h)_j dn_j.

    Complex fields are split as h = h_R + i h_I; both the direct value and
    the sum over the two real parts are reported.
    """
    h = np.asarray(h, dtype=complex)
    spec = gd.params.interaction
    hr, hi = h.real, h.imag
    lhs, res = _quad_form(gd, gd.field_operator(r_apply(spec, h)))
    parts, res_parts = 0.0, 0.0
    for part in (hr, hi):
        if np.any(part):
            v, r = _quad_form(gd, gd.field_operator(r_apply(spec, part)))
            parts += v.real
            res_parts = max(res_parts, r)
    rhs = w_inner(h, h, spec).real
    residual = max(res, res_parts)
    return {"lhs": lhs.real, "lhs_imag": lhs.imag, "lhs_parts": parts, "rhs": rhs,
            "ground_residual": residual, "reliable": residual <= residual_tol,
            "holds": bool(lhs.real <= rhs + tol * max(1.0, abs(rhs)))}


def infrared_bound(gd: GroundData, h, residual_tol=1e-6):
    """||A psi||^4 <= (t/2) <h|h>_W <tau R h | Delta tau R h>."""
    h = np.asarray(h, dtype=complex)
    spec = gd.params.interaction
    a = r_apply(spec, h)
    eta = gd.field_operator(a)
    lhs_sq = float(np.vdot(eta, eta).real ** 2)
    hw = w_inner(h, h, spec).real
    rhs = gd.params.t / 2 * hw * laplacian_form(stagger(a))
    residual = abs(np.vdot(gd.psi, eta)) / np.linalg.norm(gd.psi)
    return {"lhs_sq": lhs_sq, "rhs": rhs, "ground_residual": float(residual),
            "reliable": residual <= residual_tol,
            "holds": bool(lhs_sq <= rhs * (1 + 1e-8) + 1e-12)}
