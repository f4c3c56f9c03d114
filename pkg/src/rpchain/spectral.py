"""Eigensolvers, semigroups, pseudo-resolvents and product integrals."""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .operators import as_sparse

DENSE_LIMIT = 4000


def _norm_est(H):
    H = as_sparse(H)
    return float(spla.norm(H, 1)) if sp.issparse(H) else float(np.linalg.norm(H, 1))


def ground_state(H, method="auto", k=2, tol=0.0, v0=None):
    """Lowest eigenpair and the gap to the next level.

    Returns ``(E0, psi, gap)``.  ``dense`` is used up to 4000 dimensions.
    The Lanczos path uses ``eigsh`` in shift-free smallest-algebraic mode.
    """
    H = as_sparse(H)
    n = H.shape[0]
    if method == "auto":
        method = "dense" if n <= DENSE_LIMIT else "lanczos"
    if method == "dense" or n <= k + 1:
        w, v = np.linalg.eigh(H.toarray())
        gap = float(w[1] - w[0]) if n > 1 else np.inf
        return float(w[0]), v[:, 0], gap
    if method != "lanczos":
        raise ValueError(f"unknown method {method!r}")
    if v0 is None:
        v0 = np.random.default_rng(12345).standard_normal(n)
        if np.iscomplexobj(H.data):
            v0 = v0.astype(complex)
    try:
        w, v = spla.eigsh(H, k=k, which="SA", tol=tol, v0=v0, maxiter=20 * n)
    except spla.ArpackNoConvergence as exc:
        raise RuntimeError(f"Lanczos did not converge: {exc}") from exc
    order = np.argsort(w)
    w, v = w[order], v[:, order]
    psi = v[:, 0]
    resid = np.linalg.norm(H @ psi - w[0] * psi)
    if resid > 1e-9 * max(_norm_est(H), 1.0):
        raise RuntimeError(f"ground state residual {resid:.2e} too large")
    return float(w[0]), psi, float(w[1] - w[0])


def ground_energy(H, method="auto", v0=None):
    """Lowest eigenvalue only.

    Lanczos with k=1 avoids the slow convergence that a near-degenerate
    second level causes when the gap is also requested.
    """
    H = as_sparse(H)
    n = H.shape[0]
    if method == "auto":
        method = "dense" if n <= DENSE_LIMIT else "lanczos"
    if method == "dense" or n <= 3:
        return float(np.linalg.eigvalsh(H.toarray())[0])
    if method != "lanczos":
        raise ValueError(f"unknown method {method!r}")
    w, v = spla.eigsh(H, k=1, which="SA", v0=v0, maxiter=20 * n)
    resid = np.linalg.norm(H @ v[:, 0] - w[0] * v[:, 0])
    if resid > 1e-9 * max(_norm_est(H), 1.0):
        raise RuntimeError(f"ground energy residual {resid:.2e} too large")
    return float(w[0])


def low_spectrum(H, k):
    H = as_sparse(H)
    if H.shape[0] <= DENSE_LIMIT:
        w, v = np.linalg.eigh(H.toarray())
        return w[:k], v[:, :k]
    v0 = np.random.default_rng(12345).standard_normal(H.shape[0])
    w, v = spla.eigsh(H, k=k, which="SA", v0=v0)
    order = np.argsort(w)
    return w[order], v[:, order]


def semigroup_apply(H, beta, v, method="auto"):
    """exp(-beta H) v."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    v = np.asarray(v)
    if beta == 0:
        return v.copy()
    H = as_sparse(H)
    if method == "auto":
        method = "dense_expm" if H.shape[0] <= 600 else "krylov"
    if method == "dense_expm":
        return sla.expm(-beta * H.toarray()) @ v
    if method == "krylov":
        return spla.expm_multiply(-beta * H, v)
    raise ValueError(f"unknown method {method!r}")


def semigroup_matrix(H, beta):
    H = as_sparse(H)
    return sla.expm(-beta * H.toarray())


def pinv_resolvent(H, E0, v, psi0=None, gap_tol=None, return_info=False, spectrum=None):
    """(H - E0)^+ v on the complement of the ground space.

    For dense sizes the full spectral sum over levels above ``E0 + gap_tol``
    is used; ``spectrum=(w, V)`` reuses a known eigendecomposition.
    Otherwise ``psi0`` (the nondegenerate ground vector) is needed and
    ``(H - E0 + c P0) x = Q v`` is solved by conjugate gradients.
    """
    H = as_sparse(H)
    v = np.asarray(v, dtype=complex)
    n = H.shape[0]
    if gap_tol is None:
        gap_tol = 1e-8 * max(_norm_est(H), 1.0)
    if spectrum is not None or n <= DENSE_LIMIT:
        w, V = spectrum if spectrum is not None else np.linalg.eigh(H.toarray())
        coef = V.conj().T @ v
        ground = w <= E0 + gap_tol
        gap = float(w[~ground][0] - E0) if (~ground).any() else np.inf
        if gap < 1e-8:
            warnings.warn("pseudo-resolvent is ill-conditioned: gap below 1e-8")
        out = V[:, ~ground] @ (coef[~ground] / (w[~ground] - E0))
        info = {"ground_residual": float(np.linalg.norm(coef[ground])), "gap": gap}
        return (out, info) if return_info else out
    if psi0 is None:
        raise ValueError("large problems need the ground vector")
    psi0 = np.asarray(psi0, dtype=complex)
    psi0 = psi0 / np.linalg.norm(psi0)
    g = np.vdot(psi0, v)
    rhs = v - g * psi0
    scale = max(_norm_est(H), 1.0)
    shift = E0

    def mv(x):
        return H @ x - shift * x + scale * psi0 * np.vdot(psi0, x)

    A = spla.LinearOperator((n, n), matvec=mv, dtype=complex)
    x, info = spla.cg(A, rhs, rtol=1e-12, atol=0.0, maxiter=20000)
    if info != 0:
        raise RuntimeError(f"conjugate gradients failed (info={info})")
    x = x - np.vdot(psi0, x) * psi0
    res = {"ground_residual": float(abs(g)), "gap": None}
    return (x, res) if return_info else x


# ------------------------------------------------------------ product integrals

def product_integral(A, partition):
    """Ordered product e^{A(s_1) ds_1} e^{A(s_2) ds_2} ... over a partition.

    ``A`` is a callable s -> matrix or a sequence of matrices sampled at
    ``partition[1:]`` (right endpoints).
    """
    s = np.asarray(partition, dtype=float)
    if s.ndim != 1 or s.size < 2 or np.any(np.diff(s) <= 0):
        raise ValueError("partition must be strictly increasing with at least two points")
    mats = [A(x) for x in s[1:]] if callable(A) else list(A)
    if len(mats) != s.size - 1:
        raise ValueError("need one sample per subinterval")
    out = np.eye(np.asarray(mats[0]).shape[0], dtype=np.result_type(*[np.asarray(m) for m in mats], float))
    for m, ds in zip(mats, np.diff(s)):
        out = out @ sla.expm(np.asarray(m) * ds)
    return out


def prodinq_sides(A, a, n_mesh=2048):
    """Both sides of the product-integral estimate on [0, a].

    Returns ``(lhs, rhs)`` with lhs = ||prod e^{A ds} - 1 - int A||,
    rhs = e^{int ||A||} - 1 - int ||A|| (operator 2-norms).
    """
    s = np.linspace(0.0, a, n_mesh + 1)
    ds = np.diff(s)
    # the integral uses the product's own samples, so the bound holds without slack
    samples = [np.asarray(A(x)) for x in s[1:]]
    P = product_integral(samples, s)
    integral = sum(m * h for m, h in zip(samples, ds))
    norm_int = float(sum(np.linalg.norm(m, 2) * h for m, h in zip(samples, ds)))
    lhs = float(np.linalg.norm(P - np.eye(P.shape[0]) - integral, 2))
    rhs = float(np.expm1(norm_int) - norm_int)
    return lhs, rhs


def mesh_convergence(A, a, meshes=(16, 32, 64, 128, 256), reference_mesh=4096):
    """Errors against a fine reference and the fitted log-log slope."""
    ref = product_integral(A, np.linspace(0, a, reference_mesh + 1))
    errs = []
    for n in meshes:
        errs.append(float(np.linalg.norm(product_integral(A, np.linspace(0, a, n + 1)) - ref, 2)))
    h = a / np.asarray(meshes, dtype=float)
    slope = float(np.polyfit(np.log(h), np.log(errs), 1)[0])
    return {"mesh": list(meshes), "errors": errs, "order": slope}
