"""Model parameters, interaction functions and the hypotheses on them.

Sites are the integers ``-ell .. ell-1``.  The left half is ``-ell .. -1`` and
the right half ``0 .. ell-1``; the reflection ``r(j) = -1 - j`` swaps them.

The interaction enters the Hamiltonian as ``sum_{i,j} U(i-j) dn_i dn_j`` over
ordered pairs of sites with the literal difference ``i - j`` (no periodic
wrapping of the distance).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
import math

import numpy as np
from scipy.special import zeta

INTERACTION_KINDS = ("none", "nearest", "power_law", "table")


@dataclass(frozen=True)
class InteractionSpec:
    kind: str = "none"
    U: float = 0.0
    alpha: float = 1.5
    amplitude: float = 1.0
    table: tuple = ()

    def __post_init__(self):
        if self.kind not in INTERACTION_KINDS:
            raise ValueError(f"unknown interaction kind {self.kind!r}")
        if self.kind == "nearest" and self.U < 0:
            raise ValueError("nearest interaction needs U >= 0")
        if self.kind == "power_law" and (self.alpha <= 0 or self.amplitude <= 0):
            raise ValueError("power_law needs alpha > 0 and amplitude > 0")
        if self.kind == "table":
            values = dict(self.table)
            for j, v in values.items():
                if j == 0 and v != 0:
                    raise ValueError("table interaction needs U(0) = 0")
                if values.get(-j, None) != v:
                    raise ValueError(f"table interaction is not symmetric at j={j}")

    @classmethod
    def none(cls):
        return cls("none")

    @classmethod
    def nearest(cls, U):
        return cls("nearest", U=float(U))

    @classmethod
    def power_law(cls, alpha, amplitude=1.0):
        return cls("power_law", alpha=float(alpha), amplitude=float(amplitude))

    @classmethod
    def from_table(cls, values):
        return cls("table", table=tuple(sorted((int(k), float(v)) for k, v in dict(values).items())))

    def to_dict(self):
        d = {"kind": self.kind}
        if self.kind == "nearest":
            d["U"] = self.U
        elif self.kind == "power_law":
            d.update(alpha=self.alpha, amplitude=self.amplitude)
        elif self.kind == "table":
            d["values"] = {str(k): v for k, v in self.table}
        return d


@dataclass(frozen=True)
class ModelParams:
    ell: int = 1
    t: float = 1.0
    g: float = 0.0
    omega: float = 1.0
    interaction: InteractionSpec = field(default_factory=InteractionSpec)
    n_max: int = 2
    grid_nodes: int | None = None
    tol_psd: float = 1e-10
    tol_strict: float = 1e-12
    gap_tol: float = 1e-8

    def __post_init__(self):
        if int(self.ell) != self.ell or self.ell < 1:
            raise ValueError("ell must be a positive integer")
        if not self.t > 0:
            raise ValueError("t must be positive")
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if int(self.n_max) != self.n_max or self.n_max < 0:
            raise ValueError("n_max must be a non-negative integer")
        if self.grid_nodes is None:
            object.__setattr__(self, "grid_nodes", self.n_max + 3)
        if self.grid_nodes < 1:
            raise ValueError("grid_nodes must be positive")
        for name in ("tol_psd", "tol_strict", "gap_tol"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def n_sites(self):
        return 2 * self.ell

    @property
    def sites(self):
        return np.arange(-self.ell, self.ell)

    @property
    def left_sites(self):
        return np.arange(-self.ell, 0)

    @property
    def alpha_lf(self):
        """Phase coefficient of the polaron transform, sqrt(2/omega) * g."""
        return math.sqrt(2.0) * self.g / math.sqrt(self.omega)

    def require_odd(self):
        if self.ell % 2 != 1:
            raise ValueError("reflection positivity routines require odd ell")

    def with_(self, **kw):
        return replace(self, **kw)

    def to_dict(self):
        return {
            "ell": self.ell, "t": self.t, "g": self.g, "omega": self.omega,
            "interaction": self.interaction.to_dict(), "n_max": self.n_max,
            "grid_nodes": self.grid_nodes, "tol_psd": self.tol_psd,
            "tol_strict": self.tol_strict, "gap_tol": self.gap_tol,
        }


def reflect(j):
    return -1 - j


def u_of(spec: InteractionSpec, j: int) -> float:
    j = int(j)
    if j == 0 or spec.kind == "none":
        return 0.0
    if spec.kind == "nearest":
        return spec.U if abs(j) == 1 else 0.0
    if spec.kind == "power_law":
        return spec.amplitude * (-1) ** (abs(j) + 1) * abs(j) ** (-spec.alpha)
    return dict(spec.table).get(j, 0.0)


def w_of(spec: InteractionSpec, j: int) -> float:
    """W(j) = (-1)^(j+1) U(j)."""
    return (-1) ** (abs(int(j)) + 1) * u_of(spec, j)


def w_matrix(spec, ell):
    """Pair matrix W(i - j) over all sites, zero diagonal."""
    s = np.arange(-ell, ell)
    return np.array([[w_of(spec, i - j) for j in s] for i in s])


def u_matrix(spec, ell):
    s = np.arange(-ell, ell)
    return np.array([[u_of(spec, i - j) for j in s] for i in s])


def condition_b_matrix(spec, ell):
    left = np.arange(-ell, 0)
    m = np.empty((ell, ell))
    for a, i in enumerate(left):
        for b, j in enumerate(left[: a + 1]):
            m[a, b] = m[b, a] = (-1) ** abs(i + j) * u_of(spec, i + j + 1)
    return m


def check_condition_B(spec, ell, strict=False, tol_psd=None, tol_strict=1e-12):
    """Positivity of M_ij = (-1)^(i+j) U(i+j+1) on the left half.

    ``tol_psd`` defaults to 1e-10 times the matrix 1-norm.
    """
    m = condition_b_matrix(spec, ell)
    min_eig = float(np.linalg.eigvalsh(m)[0])
    if tol_psd is None:
        tol_psd = 1e-10 * max(np.abs(m).sum(axis=0).max(), 1.0)
    b1 = min_eig >= -tol_psd
    b2 = min_eig > tol_strict
    assert b1 or not b2
    return {"matrix": m, "min_eig": min_eig, "B1": b1, "B2": b2,
            "holds": b2 if strict else b1}


def w_abs_sum(spec, tail_tol=1e-12):
    """Sum over j >= 1 of |W(j)|, or inf when it diverges."""
    if spec.kind == "none":
        return 0.0
    if spec.kind == "nearest":
        return abs(spec.U)
    if spec.kind == "table":
        return float(sum(abs(w_of(spec, j)) for j, _ in spec.table if j > 0))
    if spec.alpha <= 1:
        return math.inf
    return float(spec.amplitude * zeta(spec.alpha, 1))


def check_condition_C(spec, tail_tol=1e-12, quad_tol=1e-8):
    from .irbound import c2_diagnostic

    c1 = w_abs_sum(spec, tail_tol)
    c2 = c2_diagnostic(spec, quad_tol)
    return {"c1_sum": c1, "c1_holds": bool(np.isfinite(c1)),
            "c2_holds": c2["holds"], "c2_diagnostic": c2["value"],
            "c2_exponent": c2["exponent"]}
