"""Vacuum-connection paths on the left half-chain and Dyson-expansion terms.

A path is a sequence of left configurations joined by moves.  A pair move
creates or annihilates the adjacent sites ``(a, a+1)``; it comes from the
left pair-hopping part of K = T_L - W_L + K_L and costs one power of tau.
A seam move applies B_xi = e^{-i alpha phi_xi} b_xi or its adjoint at
xi in {-ell, -1} and costs no tau.

Clusters are removed from the right (nearest the seam) to the left, so
every build-out towards -1 meets empty sites.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .fock import CompositeBasis, PhononBasisSpec, mask_of, sites_of
from .model import ModelParams, reflect, w_of
from .operators import build_transformed, dn_diagonal, dn_full, pair_term_full, phase_matrix
from .transforms import Bipartition, b_full


# ------------------------------------------------------------ configurations

def cluster_decompose(config):
    """Maximal runs of consecutive occupied sites, left to right."""
    out = []
    for j in sorted(config):
        if out and j == out[-1][-1] + 1:
            out[-1].append(j)
        else:
            out.append([j])
    return [tuple(c) for c in out]


def hole_particle_config(config, ell):
    """Left and right parts of the image of a full-chain configuration under U."""
    occ = set(config)
    image = sorted({j for j in range(-ell, ell) if (j in occ) != (j % 2 == 1)})
    return tuple(j for j in image if j < 0), tuple(j for j in image if j >= 0)


@dataclass(frozen=True)
class Move:
    kind: str      # "pair" or "seam"
    sites: tuple   # (a, a+1) or (xi,)
    action: str    # "create" or "annihilate"

    def to_dict(self):
        return {"kind": self.kind, "sites": list(self.sites), "action": self.action}


@dataclass
class ConfigPath:
    ell: int
    configs: list
    moves: list = field(default_factory=list)

    @property
    def order(self):
        """Power of tau carried by the path: the number of pair moves."""
        return sum(1 for m in self.moves if m.kind == "pair")

    def __len__(self):
        return len(self.moves)

    def to_dict(self):
        return {"ell": self.ell, "configs": [list(c) for c in self.configs],
                "moves": [m.to_dict() for m in self.moves]}

    def _push(self, kind, sites, action):
        cur = set(self.configs[-1])
        if action == "create":
            cur |= set(sites)
        else:
            cur -= set(sites)
        self.moves.append(Move(kind, tuple(sites), action))
        self.configs.append(tuple(sorted(cur)))


def check_path(path: ConfigPath, require_vacuum=True):
    """Independent legality check; returns (ok, reason)."""
    ell = path.ell
    left = set(range(-ell, 0))
    if len(path.configs) != len(path.moves) + 1:
        return False, "configs and moves do not line up"
    for k, c in enumerate(path.configs):
        if not set(c) <= left:
            return False, f"config {k} leaves the left half"
    for k, m in enumerate(path.moves):
        before, after = set(path.configs[k]), set(path.configs[k + 1])
        s = set(m.sites)
        if m.kind == "pair":
            if len(m.sites) != 2 or m.sites[1] != m.sites[0] + 1 or not s <= left:
                return False, f"move {k}: not an adjacent left pair"
        elif m.kind == "seam":
            if len(m.sites) != 1 or m.sites[0] not in {-ell, -1}:
                return False, f"move {k}: seam site must be -ell or -1"
        else:
            return False, f"move {k}: unknown kind {m.kind}"
        if m.action == "annihilate":
            if not s <= before or after != before - s:
                return False, f"move {k}: annihilation does not match configs"
        elif m.action == "create":
            if s & before or after != before | s:
                return False, f"move {k}: creation does not match configs"
        else:
            return False, f"move {k}: unknown action {m.action}"
    if require_vacuum and path.configs[-1] != ():
        return False, "path does not end at the empty configuration"
    return True, ""


def connect_to_vacuum(config, ell):
    """Move sequence from a left configuration to the empty one."""
    if ell % 2 != 1:
        raise ValueError("paths need odd ell")
    config = tuple(sorted(config))
    if not set(config) <= set(range(-ell, 0)):
        raise ValueError("configuration must lie in the left half")
    path = ConfigPath(ell, [config])
    for cl in reversed(cluster_decompose(config)):
        j = cl[0]
        if len(cl) % 2 == 0:
            for a in range(j, cl[-1], 2):
                path._push("pair", (a, a + 1), "annihilate")
            continue
        for a in range(j, cl[-1] - 1, 2):
            path._push("pair", (a, a + 1), "annihilate")
        s = cl[-1]
        if s == -1:
            path._push("seam", (-1,), "annihilate")
        elif s % 2 == 0:
            path._push("seam", (-1,), "create")
            for a in range(s + 1, -2, 2):
                path._push("pair", (a, a + 1), "create")
            for a in range(s, 0 - 1, 2):
                path._push("pair", (a, a + 1), "annihilate")
        else:
            for a in range(s + 1, -1, 2):
                path._push("pair", (a, a + 1), "create")
            for a in range(s, -1, 2):
                path._push("pair", (a, a + 1), "annihilate")
            path._push("seam", (-1,), "annihilate")
    return path


# ------------------------------------------------------------ left-space operators

class LeftSpace:
    """K = T_L - W_L + K_L, the seam operators and projectors on F_{Lambda_L}."""

    def __init__(self, params: ModelParams, phonon: PhononBasisSpec | None = None):
        params.require_odd()
        self.params = params
        self.ell = params.ell
        self.phonon = phonon or PhononBasisSpec.fock(params.n_max, params.omega)
        self.bip = Bipartition(self.ell, self.phonon)
        self.n_ph = self.bip.n_half_phonon
        self.dim = self.bip.half_dim

    @cached_property
    def K(self):
        ell, p, bip = self.ell, self.params, self.bip
        alpha = p.alpha_lf
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for j in range(-ell, 0):
            if j % 2:
                continue
            for k in (j - 1, j + 1):
                if not -ell <= k < 0:
                    continue
                fac = {j: phase_matrix(self.phonon, -alpha), k: phase_matrix(self.phonon, alpha)}
                term = (-p.t * bip.left_op(pair_term_full(ell, j, k), fac)).toarray()
                out += term + term.conj().T
        for i in range(-ell, 0):
            for j in range(-ell, 0):
                w = w_of(p.interaction, i - j)
                if w:
                    out -= w * bip.left_op(dn_full(ell, i) @ dn_full(ell, j)).toarray()
        nb = self.phonon.number()
        for j in range(-ell, 0):
            out += p.omega * bip.left_op(None, {j: nb}).toarray()
        return out

    def B(self, xi, action):
        """B_xi (annihilate) or B_xi^* (create)."""
        Bm = self.bip.left_op(b_full(self.ell, xi), {xi: phase_matrix(self.phonon, -self.params.alpha_lf)})
        Bm = Bm.toarray()
        return Bm if action == "annihilate" else Bm.conj().T

    def block(self, config):
        m = mask_of(config, self.ell)
        return slice(m * self.n_ph, (m + 1) * self.n_ph)

    def state(self, config, F=None):
        v = np.zeros(self.dim, dtype=complex)
        if F is None:
            F = np.zeros(self.n_ph)
            F[0] = 1.0
        v[self.block(config)] = F
        return v

    def semigroup(self, tau):
        return sla.expm(-tau * self.K)


def path_vector(path: ConfigPath, tau, space: LeftSpace, F_in=None, expK=None):
    """Apply the path's operator product to |X_0; F_in>."""
    if expK is None:
        expK = space.semigroup(tau)
    v = space.state(path.configs[0], F_in)
    for k, m in enumerate(path.moves):
        nxt = path.configs[k + 1]
        if m.kind == "pair":
            w = np.zeros_like(v)
            sl = space.block(nxt)
            w[sl] = (expK @ v)[sl]
            v = w
        else:
            v = space.B(m.sites[0], m.action) @ v
    return v


def path_amplitude(path: ConfigPath, tau, space: LeftSpace, F_in=None, F_out=None, target=None):
    """<target; F_out| (path operator) |X_0; F_in>; target defaults to the last config."""
    v = path_vector(path, tau, space, F_in)
    t = path.configs[-1] if target is None else tuple(sorted(target))
    amp = complex(np.vdot(space.state(t, F_out), v))
    if amp != 0 and abs(amp) < 1e-300:
        raise FloatingPointError("path amplitude underflow")
    return amp


def leading_order_fit(path: ConfigPath, space: LeftSpace, taus=(1e-2, 5e-3, 2.5e-3), F_in=None, F_out=None):
    """Fitted log-log slope of |amplitude| against tau, compared with the path order."""
    amps = [path_amplitude(path, t, space, F_in, F_out) for t in taus]
    if any(a == 0 for a in amps):
        return {"order": path.order, "slope": None, "sign": 0, "amplitudes": amps, "ok": False}
    slope = float(np.polyfit(np.log(taus), np.log(np.abs(amps)), 1)[0])
    a = amps[int(np.argmin(taus))]
    return {"order": path.order, "slope": slope, "sign": int(np.sign(a.real)),
            "amplitudes": amps, "ok": abs(slope - path.order) <= 0.1}


def keyex_amplitude(X0, Y0, tau, eps, space: LeftSpace, F=None):
    """<D_Y |Y_0;F>, e^{-eps K} D_X |X_0;F>> with D the vacuum-connection path operators."""
    px = connect_to_vacuum(X0, space.ell)
    py = connect_to_vacuum(Y0, space.ell)
    expK = space.semigroup(tau)
    wx = path_vector(px, tau, space, F, expK)
    wy = path_vector(py, tau, space, F, expK)
    return complex(np.vdot(wy, space.semigroup(eps) @ wx)), px.order + py.order


def keyex_table(space: LeftSpace, configs, taus=(0.1, 0.05), epss=(0.5, 1.0), floor=1e-6):
    """For each (X0, Y0) pair, the first tested (tau, eps) with a clearly nonzero amplitude.

    Each pair move contributes about tau t, so amplitudes are compared with
    (tau t)^(N_X + N_Y) to keep the floor scale free.
    """
    t = abs(space.params.t)
    cache = {}
    for tau in taus:
        expK = space.semigroup(tau)
        for c in set(configs):
            p = connect_to_vacuum(c, space.ell)
            cache[c, tau] = (path_vector(p, tau, space, None, expK), p.order)
    E = {eps: space.semigroup(eps) for eps in epss}
    out = {}
    for x in configs:
        for y in configs:
            hit = None
            for tau in taus:
                for eps in epss:
                    wx, nx = cache[x, tau]
                    wy, ny = cache[y, tau]
                    a = complex(np.vdot(wy, E[eps] @ wx))
                    scaled = abs(a) / (tau * t) ** (nx + ny)
                    if scaled > floor:
                        hit = {"tau": tau, "eps": eps, "amplitude": a, "scaled": scaled}
                        break
                if hit:
                    break
            out[x, y] = hit
    return out


def vacuum_overlap(space: LeftSpace, eps, F_in=None, F_out=None):
    """<empty; F_out| e^{-eps K} |empty; F_in>."""
    return complex(np.vdot(space.state((), F_out), space.semigroup(eps) @ space.state((), F_in)))


# ------------------------------------------------------------ Dyson expansion

@dataclass
class DysonSetup:
    """G, P and the seam bound on the balanced space (dense; desk-scale sizes)."""
    params: ModelParams
    basis: CompositeBasis
    H: np.ndarray
    G: np.ndarray
    P: np.ndarray
    w0: float
    evals: np.ndarray
    evecs: np.ndarray

    @classmethod
    def build(cls, params: ModelParams, w0=None):
        from .cones import w0_value

        params.require_odd()
        ell = params.ell
        basis = CompositeBasis.balanced(ell, PhononBasisSpec.fock(params.n_max, params.omega))
        if basis.dim > 3000:
            raise ValueError("Dyson terms are evaluated densely; reduce ell or n_max")
        Ht, parts = build_transformed(params, basis, parts=True)
        H = Ht.toarray()
        G = H + parts["W"]["LR"].toarray()
        pd = np.zeros(basis.dim)
        for i in range(-ell, 0):
            ni = dn_diagonal(basis, i) + 0.5
            nr = dn_diagonal(basis, reflect(i)) + 0.5
            pd += ni * nr + (1 - ni) * (1 - nr)
        w0 = w0_value(params.interaction, ell) if w0 is None else w0
        e, V = np.linalg.eigh(G)
        return cls(params, basis, H, G, np.diag(pd), w0, e, V)

    def expG(self, s):
        """e^{-sG} for s >= 0 from the spectral decomposition."""
        if s < 0:
            raise ValueError("only forward exponentials are formed")
        return (self.evecs * np.exp(-s * self.evals)) @ self.evecs.conj().T

    def projector_EX(self, X):
        """E_X (left) times its reflection (right) as a diagonal matrix."""
        ell = self.basis.ell
        d = np.ones(self.basis.dim)
        X = set(X)
        for i in range(-ell, 0):
            ni = dn_diagonal(self.basis, i) + 0.5
            nr = dn_diagonal(self.basis, reflect(i)) + 0.5
            d *= ni * nr if i in X else (1 - ni) * (1 - nr)
        return np.diag(d)

    def site_projector(self, i, eps):
        ni = dn_diagonal(self.basis, i) + 0.5
        nr = dn_diagonal(self.basis, reflect(i)) + 0.5
        return np.diag(ni * nr if eps else (1 - ni) * (1 - nr))

    def ordered_product(self, s, projectors, beta):
        """e^{-s_1 G} Q_1 e^{-(s_2-s_1) G} Q_2 ... Q_m e^{-(beta-s_m) G} for sorted s."""
        s = np.asarray(s, dtype=float)
        if len(s) != len(projectors):
            raise ValueError("one time per projector")
        if np.any(np.diff(s) < 0) or (len(s) and (s[0] < 0 or s[-1] > beta)):
            raise ValueError("times must satisfy 0 <= s_1 <= ... <= s_n <= beta")
        out = np.eye(self.basis.dim, dtype=complex)
        prev = 0.0
        for t, Q in zip(s, projectors):
            out = out @ self.expG(t - prev) @ Q
            prev = t
        return out @ self.expG(beta - prev)


def path_operator(setup: DysonSetup, configs, s, beta):
    """P_{X_1}(s_1) ... P_{X_N}(s_N) e^{-beta G}.

    ``s`` holds either one time per configuration (all sites of a block at
    the same time) or |Lambda_L| sorted times per configuration.
    """
    ell = setup.basis.ell
    left = list(range(-ell, 0))
    s = np.asarray(s, dtype=float)
    if s.size == len(configs):
        s = np.repeat(s, len(left))
    if s.size != len(configs) * len(left):
        raise ValueError("wrong number of times")
    projs = []
    for X in configs:
        projs.extend(setup.site_projector(i, i in set(X)) for i in left)
    return setup.ordered_product(s, projs, beta)


def dyson_term(setup: DysonSetup, beta, n, order=16):
    """D_n = (w0/2)^n int_{0<=s_1<=...<=s_n<=beta} P(s_1)...P(s_n) e^{-beta G} ds, n <= 2.

    Gauss-Legendre in Duffy coordinates s_n = beta u, s_{n-1} = beta u v.
    """
    c = setup.w0 / 2
    if n == 0:
        return setup.expG(beta)
    x, w = np.polynomial.legendre.leggauss(order)
    x, w = 0.5 * (x + 1), 0.5 * w
    out = np.zeros((setup.basis.dim,) * 2, dtype=complex)
    if n == 1:
        for xi, wi in zip(x, w):
            out += wi * beta * setup.ordered_product([beta * xi], [setup.P], beta)
        return c * out
    if n == 2:
        for u, wu in zip(x, w):
            for v, wv in zip(x, w):
                s2, s1 = beta * u, beta * u * v
                out += wu * wv * beta ** 2 * u * setup.ordered_product([s1, s2], [setup.P, setup.P], beta)
        return c ** 2 * out
    raise ValueError("quadrature is provided for n <= 2")


def dyson_oracle(setup: DysonSetup, beta, n, n_points=64, radius=1.0):
    """D_n as the n-th Taylor coefficient of e^{-beta (G - z P)} in z, scaled by (w0/2)^n.

    Cauchy integral on a circle, trapezoid rule (spectrally accurate).
    """
    z = radius * np.exp(2j * np.pi * np.arange(n_points) / n_points)
    acc = np.zeros((setup.basis.dim,) * 2, dtype=complex)
    for zk in z:
        acc += sla.expm(-beta * (setup.G - zk * setup.P)) * zk ** (-n)
    return (setup.w0 / 2) ** n * acc / n_points


def dyson_remainder(setup: DysonSetup, beta, n_terms=2):
    """e^{-beta H~} - e^{-beta w0 |Lambda| / 8} sum_{n <= n_terms} D_n.

    H~_0 = G - W_0 = G - (w0/2) P + w0 |Lambda| / 8, hence the prefactor.
    """
    const = np.exp(-beta * setup.w0 * 2 * setup.basis.ell / 8)
    partial = sum(dyson_term(setup, beta, n) for n in range(n_terms + 1))
    return sla.expm(-beta * setup.H) - const * partial
