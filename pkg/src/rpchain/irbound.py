"""Infrared-bound analytics: R^(p), F(p), the sigma integral and its threshold.

    R^(p) = 4 sum_{j>=1} W(j) (1 - cos pj),      F(p) = 2t (1 + cos p),
    sigma = (2 pi)^{1/2} / 4 - (2 pi)^{-1/2} int_{-pi}^{pi} sqrt(F/R^) dp.

For the power law W(j) = A j^-alpha the series is summed through the
polylogarithm expansion around p = 0,

    Li_s(e^{ip}) = Gamma(1-s) (-ip)^{s-1} + sum_k zeta(s-k) (ip)^k / k!,

valid for |p| < 2 pi.  It converges geometrically on [0, pi] and has no
cancellation near p = 0, where a truncated direct sum is hopeless
(the tail decays like J^{1-alpha}).  A direct partial sum with a rigorous
tail bound is kept as an oracle.

Error estimates here are numerical, not rigorous enclosures.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate, optimize, special

from .model import InteractionSpec, w_of

SIGMA0 = math.sqrt(2 * math.pi) / 4
P_SPLIT = 1e-2
FIT_P = np.logspace(-4, -2, 9)


# ------------------------------------------------------------------ R^ and F

def _finite_terms(spec):
    if spec.kind == "none":
        return {}
    if spec.kind == "nearest":
        return {1: spec.U}
    return {j: w_of(spec, j) for j, _ in spec.table if j > 0}


def _polylog_gap(alpha, p, tol):
    """zeta(alpha) - Re Li_alpha(e^{ip}) for alpha > 1, p in (0, pi]."""
    p = np.asarray(p, dtype=float)
    mu = 1j * p
    n = round(alpha)
    integer = abs(alpha - n) < 1e-12
    if integer:
        # limit form at integer order: mu^{n-1}/(n-1)! (H_{n-1} - log(-mu))
        harmonic = sum(1.0 / k for k in range(1, n))
        lead = mu ** (n - 1) / math.factorial(n - 1) * (harmonic - np.log(-mu))
    else:
        lead = special.gamma(1 - alpha) * np.exp((alpha - 1) * np.log(-mu))
    total = -lead.real
    pmax = float(np.max(p)) if p.size else 0.0
    term_k = 1.0
    for k in range(1, 160):
        term_k = term_k * pmax / k
        if integer and k == n - 1:
            continue
        z = special.zeta(alpha - k)
        total = total - (z * mu ** k / math.factorial(k)).real
        # trivial zeros of zeta give exact zero terms at integer order; never stop on one
        if k > 4 and z != 0 and abs(z) * term_k < tol * 1e-3:
            break
    return total


def r_hat(spec: InteractionSpec, p, series_tol=1e-12):
    """R^(p) for |p| <= pi.  Scalars in, float out; arrays in, arrays out.

    Power laws with alpha <= 1 give +inf for p != 0: the cosine series
    converges but sum j^-alpha does not.
    """
    scalar = np.ndim(p) == 0
    p = np.abs(np.atleast_1d(np.asarray(p, dtype=float)))
    if np.any(p > np.pi + 1e-12):
        raise ValueError("r_hat needs |p| <= pi")
    out = np.zeros_like(p)
    if spec.kind == "power_law":
        nz = p > 0
        if spec.alpha <= 1:
            out[nz] = np.inf
        elif np.any(nz):
            out[nz] = 4 * spec.amplitude * _polylog_gap(spec.alpha, p[nz], series_tol)
    else:
        for j, w in _finite_terms(spec).items():
            out += 4 * w * (1 - np.cos(p * j))
    if np.any(out < -series_tol * max(1.0, float(np.max(np.abs(out[np.isfinite(out)]), initial=0)))):
        raise ArithmeticError("R^ negative beyond series tolerance")
    return float(out[0]) if scalar else out


def r_hat_series(spec: InteractionSpec, p, J=10**6):
    """Direct partial sum to J with a rigorous tail bound (oracle).

    sum_{j>J} j^-a is exact via the Hurwitz zeta; the cosine tail is bounded
    by (J+1)^-a / sin(p/2) (summation by parts).
    """
    p = abs(float(p))
    if spec.kind != "power_law":
        return r_hat(spec, p), 0.0
    a, A = spec.alpha, spec.amplitude
    j = np.arange(1, J + 1, dtype=float)
    body = np.sum(j ** -a * (1 - np.cos(p * j)))
    tail = special.zeta(a, J + 1)
    bound = (J + 1) ** -a / math.sin(p / 2) if p > 0 else 0.0
    return 4 * A * (body + tail), 4 * A * bound


def f_of(t, p):
    return 2 * t * (1 + np.cos(p))


# ------------------------------------------------------------------ exponents

def small_p_exponent(spec: InteractionSpec, series_tol=1e-12):
    """Least-squares slope of log R^ against log p on p in [1e-4, 1e-2]."""
    vals = r_hat(spec, FIT_P, series_tol)
    if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
        return math.nan, math.nan
    slope, icpt = np.polyfit(np.log(FIT_P), np.log(vals), 1)
    return float(slope), float(math.exp(icpt))


def _split_integral(g, kappa, quad_tol):
    """int_0^pi g(p) p^{-kappa/2} dp with an algebraic weight near 0.

    Non-smooth corrections in g (p log p at integer alpha) can make QUADPACK
    warn; the warning is recorded and the error estimate kept.
    """
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", integrate.IntegrationWarning)
        lo, err_lo = integrate.quad(g, 0.0, P_SPLIT, weight="alg", wvar=(-kappa / 2, 0.0),
                                    epsabs=quad_tol / 4, epsrel=quad_tol / 4, limit=200)
        hi, err_hi = integrate.quad(lambda p: g(p) * p ** (-kappa / 2), P_SPLIT, math.pi,
                                    epsabs=quad_tol / 4, epsrel=quad_tol / 4, limit=200)
    return lo + hi, err_lo + err_hi, len(caught)


def c2_diagnostic(spec: InteractionSpec, quad_tol=1e-8, margin=0.1):
    """Integrability of R^-1/2 over the torus.

    Classified by the fitted small-p exponent kappa of R^: R^-1/2 ~ p^{-kappa/2}
    is integrable iff kappa < 2.  The margin absorbs fit error at kappa = 2.
    Returns holds, value (the integral or inf) and exponent.
    """
    if spec.kind == "none":
        return {"holds": False, "value": math.inf, "exponent": math.nan,
                "reason": "no interaction, R^ vanishes"}
    if spec.kind == "power_law" and spec.alpha <= 1:
        return {"holds": False, "value": math.inf, "exponent": math.nan,
                "reason": "W not summable"}
    fitted, _ = small_p_exponent(spec)
    kappa = _exponent(spec, fitted)
    if spec.kind == "power_law" and spec.alpha >= 3:
        # p^2 log(1/p) at alpha = 3 still fails; the fit alone would miss it
        return {"holds": False, "value": math.inf, "exponent": fitted,
                "reason": "R^ ~ p^2 (up to logs) near 0"}
    analytic = spec.kind == "power_law" and 1 < spec.alpha < 3
    if not analytic and (not np.isfinite(kappa) or kappa >= 2 - margin):
        return {"holds": False, "value": math.inf, "exponent": fitted,
                "reason": f"R^-1/2 ~ p^-{kappa / 2:.3f} near 0"}
    g = lambda p: (r_hat(spec, p) / p ** kappa) ** -0.5 if p > 0 else _limit_coeff(spec, kappa) ** -0.5
    val, err, nwarn = _split_integral(g, kappa, quad_tol)
    return {"holds": True, "value": 2 * val, "exponent": fitted, "error": 2 * err, "quad_warnings": nwarn,
            "reason": "integrable endpoint singularity"}


def _exponent(spec, fitted):
    """Exact small-p exponent alpha - 1 for power laws in (1, 3), else the fit."""
    if spec.kind == "power_law" and 1 < spec.alpha < 3:
        return spec.alpha - 1
    return fitted


def _limit_coeff(spec, kappa):
    if spec.kind == "power_law" and spec.alpha == 2:
        return 2 * math.pi * spec.amplitude
    if spec.kind == "power_law" and 1 < spec.alpha < 3:
        return -4 * spec.amplitude * special.gamma(1 - spec.alpha) * math.cos(math.pi * (spec.alpha - 1) / 2)
    p = FIT_P[0]
    return r_hat(spec, p) / p ** kappa


# ------------------------------------------------------------------ sigma

@dataclass
class IRBoundResult:
    sigma: float | None
    integral_value: float | None
    quadrature_error_estimate: float | None
    t_star: float | None
    c2_holds: bool
    t: float
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def _unit_integral(spec, quad_tol):
    """I(1) = int_T sqrt(F(p)/R^(p)) dp at t = 1, with its error and exponent."""
    kappa = _exponent(spec, small_p_exponent(spec)[0])
    c0 = _limit_coeff(spec, kappa)

    def g(p):
        if p == 0:
            return 2.0 / math.sqrt(c0)
        return math.sqrt(f_of(1.0, p) / (r_hat(spec, p) / p ** kappa))

    val, err, _ = _split_integral(g, kappa, quad_tol / 2)
    return 2 * val, 2 * err, kappa


def trapezoid_oracle(spec, t, levels=14, power=4):
    """Romberg-extrapolated trapezoid rule after p = pi v^power.

    The substitution removes the p^{-kappa/2} endpoint singularity for
    kappa = 1/2 (alpha = 1.5) and leaves a smooth integrand in v.
    Returns the estimate and the difference between the last two columns.
    """
    n = 2 ** levels + 1
    v = np.linspace(0.0, 1.0, n)
    p = np.pi * v ** power
    vals = np.zeros(n)
    inner = p > 0
    R = r_hat(spec, p[inner])
    vals[inner] = np.sqrt(f_of(t, p[inner]) / R) * power * np.pi * v[inner] ** (power - 1)
    table = [[]]
    for lev in range(levels + 1):
        step = 2 ** (levels - lev)
        table[0].append(integrate.trapezoid(vals[::step], v[::step]))
    row = table[0]
    best, prev = row[-1], row[-2]
    for k in range(1, levels + 1):
        row = [(4 ** k * row[i + 1] - row[i]) / (4 ** k - 1) for i in range(len(row) - 1)]
        if len(row) < 2:
            break
        prev, best = best, row[-1]
    return 2 * best, abs(2 * (best - prev))


def sigma_from_integral(integral):
    return SIGMA0 - integral / math.sqrt(2 * math.pi)


def sigma(spec: InteractionSpec, t, quad_tol=1e-10, oracle=False):
    """sigma(t) with quadrature diagnostics; undefined when condition C2 fails."""
    if t <= 0:
        raise ValueError("t must be positive")
    c2 = c2_diagnostic(spec, quad_tol)
    if not c2["holds"]:
        return IRBoundResult(None, None, None, None, False, t,
                             {"c2": c2, "reason": "R^-1/2 not integrable, sigma undefined"})
    unit, err, kappa = _unit_integral(spec, quad_tol)
    integral = math.sqrt(t) * unit
    s = sigma_from_integral(integral)
    tstar = t_star_closed(unit)
    diag = {"split_points": [0.0, P_SPLIT, math.pi], "small_p_exponent": kappa,
            "method": "polylog expansion for R^, algebraic-weight quadrature near 0",
            "c2": c2}
    if oracle:
        o, o_err = trapezoid_oracle(spec, t)
        diag.update(oracle_integral=o, oracle_error=o_err, oracle_diff=abs(o - integral))
    return IRBoundResult(s, integral, math.sqrt(t) * err, tstar, True, t, diag)


def t_star_closed(unit_integral):
    i1 = unit_integral / math.sqrt(2 * math.pi)
    return (SIGMA0 / i1) ** 2


def t_star(spec: InteractionSpec, quad_tol=1e-10, bisect=False):
    """Largest t with sigma(t) > 0: closed form, optionally with a root-find check."""
    c2 = c2_diagnostic(spec, quad_tol)
    if not c2["holds"]:
        raise ValueError("condition C2 fails, sigma undefined")
    unit, _, _ = _unit_integral(spec, quad_tol)
    closed = t_star_closed(unit)
    if not bisect:
        return closed
    root = optimize.brentq(lambda t: sigma(spec, t, quad_tol).sigma, closed / 4, closed * 4,
                           xtol=1e-14, rtol=1e-14)
    return closed, root


# ------------------------------------------------------------------ dumps

def integrand_rows(spec, t, n=257):
    p = np.linspace(0, np.pi, n)[1:]
    R = r_hat(spec, p)
    F = f_of(t, p)
    with np.errstate(divide="ignore"):
        f = np.sqrt(F / R)
    return [(float(a), float(b), float(c), float(d)) for a, b, c, d in zip(p, R, F, f)]


def write_integrand_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["p", "r_hat", "F", "integrand"])
        for r in rows:
            w.writerow([f"{x:.12e}" for x in r])
