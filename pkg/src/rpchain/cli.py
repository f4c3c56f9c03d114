"""Command-line driver: read a flat dotted-key config, run a verification, write JSON.

    rpchain spectrum --config run.cfg --out report.json

Exit status is 0 when every check passes, 1 when a verification fails (the
report is still written) and 2 for configuration errors.  Reports are
deterministic for a fixed config and seed; the wall-clock timestamp and the
timings live under the top-level ``meta`` key.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .model import InteractionSpec, ModelParams, check_condition_B, check_condition_C

log = logging.getLogger("rpchain")

COMMANDS = ("spectrum", "check-conditions", "positivity", "ergodicity", "transforms-test",
            "paths", "correlations", "inequalities", "irbound", "all")


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------ config

def _floats(text):
    return tuple(float(x) for x in text.split(",") if x.strip())


def _table(text):
    out = {}
    for item in text.split(","):
        k, v = item.split(":")
        out[int(k)] = float(v)
    return out


def _choice(*options):
    def parse(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text
    return parse


KEYS = {
    "model.ell": int, "model.t": float, "model.g": float, "model.omega": float,
    "interaction.kind": _choice("none", "nearest", "power_law", "table"),
    "interaction.U": float, "interaction.alpha": float, "interaction.amplitude": float,
    "interaction.table": _table,
    "phonon.n_max": int, "phonon.grid_nodes": int, "phonon.background_cutoff": int,
    "tol.psd": float, "tol.strict": float, "tol.gap": float, "tol.quad": float,
    "tol.cone": float, "tol.residual": float,
    "run.seed": int, "run.beta": _floats, "run.samples": int,
    "run.mode": _choice("reflection", "background"),
    "run.inequality": _choice("energy", "susceptibility", "infrared", "all"),
    "run.fields": int,
}


@dataclass
class RunConfig:
    params: ModelParams
    seed: int = 42
    betas: tuple = (0.2, 1.0)
    samples: int = 200
    mode: str = "reflection"
    inequality: str = "all"
    fields: int | None = None
    background_cutoff: int = 20
    quad_tol: float = 1e-10
    cone_tol: float = 1e-8
    residual_tol: float = 1e-6
    raw: dict = field(default_factory=dict)

    def to_dict(self):
        return {"model": self.params.to_dict(), "seed": self.seed, "betas": list(self.betas),
                "samples": self.samples, "mode": self.mode, "inequality": self.inequality,
                "fields": self.fields, "background_cutoff": self.background_cutoff,
                "quad_tol": self.quad_tol, "cone_tol": self.cone_tol,
                "residual_tol": self.residual_tol}


def parse_config_text(text):
    """Dotted ``key=value`` lines; ``#`` starts a comment.  Returns {key: value}."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = KEYS[key](raw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    return values


def build_config(values, seed=None):
    v = dict(values)
    kind = v.get("interaction.kind", "none")
    try:
        if kind == "nearest":
            spec = InteractionSpec.nearest(v.get("interaction.U", 0.0))
        elif kind == "power_law":
            spec = InteractionSpec.power_law(v.get("interaction.alpha", 1.5), v.get("interaction.amplitude", 1.0))
        elif kind == "table":
            spec = InteractionSpec.from_table(v.get("interaction.table", {}))
        else:
            spec = InteractionSpec.none()
        params = ModelParams(
            ell=v.get("model.ell", 1), t=v.get("model.t", 1.0), g=v.get("model.g", 0.0),
            omega=v.get("model.omega", 1.0), interaction=spec, n_max=v.get("phonon.n_max", 2),
            grid_nodes=v.get("phonon.grid_nodes"), tol_psd=v.get("tol.psd", 1e-10),
            tol_strict=v.get("tol.strict", 1e-12), gap_tol=v.get("tol.gap", 1e-8))
    except ValueError as exc:
        raise ConfigError(f"invalid model: {exc}") from None
    cfg = RunConfig(params, seed=v.get("run.seed", 42), betas=v.get("run.beta", (0.2, 1.0)),
                    samples=v.get("run.samples", 200), mode=v.get("run.mode", "reflection"),
                    inequality=v.get("run.inequality", "all"), fields=v.get("run.fields"),
                    background_cutoff=v.get("phonon.background_cutoff", 20),
                    quad_tol=v.get("tol.quad", 1e-10), cone_tol=v.get("tol.cone", 1e-8),
                    residual_tol=v.get("tol.residual", 1e-6), raw=v)
    if seed is not None:
        cfg.seed = seed
    if not cfg.betas or any(b <= 0 for b in cfg.betas):
        raise ConfigError("run.beta needs positive values")
    if cfg.samples < 1:
        raise ConfigError("run.samples must be positive")
    return cfg


def load_config(path, seed=None):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return build_config(parse_config_text(text), seed)


# ------------------------------------------------------------ commands

def _need_odd(cfg):
    if cfg.params.ell % 2 != 1:
        raise ConfigError("this command needs odd model.ell")


def cmd_spectrum(cfg, csv_dir=None):
    from .fock import CompositeBasis, PhononBasisSpec
    from .operators import build_hamiltonian
    from .spectral import low_spectrum

    p = cfg.params
    basis = CompositeBasis.half_filled(p.ell, PhononBasisSpec.fock(p.n_max, p.omega))
    H = build_hamiltonian(p, basis)
    k = min(20, basis.dim)
    w, _ = low_spectrum(H, k)
    gap = float(w[1] - w[0]) if len(w) > 1 else math.inf
    return {"dim": basis.dim, "E0": float(w[0]), "gap": gap, "levels": [float(x) for x in w]}, True


def cmd_check_conditions(cfg, csv_dir=None):
    p = cfg.params
    b = check_condition_B(p.interaction, p.ell, tol_psd=p.tol_psd, tol_strict=p.tol_strict)
    c = check_condition_C(p.interaction, quad_tol=max(cfg.quad_tol, 1e-8))
    res = {"B1": b["B1"], "B2": b["B2"], "B_min_eig": b["min_eig"], "B_matrix": b["matrix"],
           "C1": c["c1_holds"], "C1_sum": c["c1_sum"], "C2": c["c2_holds"],
           "C2_value": c["c2_diagnostic"], "C2_exponent": c["c2_exponent"]}
    return res, bool(b["B2"] and c["c1_holds"] and c["c2_holds"])


def _positivity_background(cfg):
    from .cones import background_membership, operator_preserves
    from .fock import CompositeBasis, PhononBasisSpec
    from .operators import build_hamiltonian
    from .spectral import ground_state
    import scipy.linalg as sla

    p = cfg.params
    phonon = PhononBasisSpec.fock(cfg.background_cutoff, p.omega)
    basis = CompositeBasis.half_filled(p.ell, phonon)
    if basis.dim > 4000:
        raise ConfigError(f"background test too large ({basis.dim} states); lower phonon.background_cutoff")
    H = build_hamiltonian(p, basis).toarray()
    out, ok = {"dim": basis.dim, "grid_nodes": p.grid_nodes, "betas": {}}, True
    for beta in cfg.betas:
        v = operator_preserves(sla.expm(-beta * H), basis, cone="background", grid_nodes=p.grid_nodes)
        out["betas"][str(beta)] = {"min_relative_entry": v.worst_margin, "all_positive": v.strict}
        ok = ok and v.strict
    E0, psi, gap = ground_state(H)
    gv = background_membership(psi, basis, tol=p.tol_psd, tol_strict=p.tol_strict, grid_nodes=p.grid_nodes)
    out.update(E0=E0, gap=gap, ground_strict=gv.strict, ground_margin=gv.worst_margin)
    return out, bool(ok and gap > p.gap_tol and gv.strict)


def _positivity_reflection(cfg):
    from .cones import operator_preserves, reflection_membership, semigroup_operator
    from .fock import CompositeBasis, PhononBasisSpec
    from .observables import all_strings, cdw_string
    from .operators import build_transformed
    from .spectral import ground_state

    _need_odd(cfg)
    p = cfg.params
    basis = CompositeBasis.balanced(p.ell, PhononBasisSpec.fock(p.n_max, p.omega))
    H = build_transformed(p, basis)
    E0, psi, gap = ground_state(H)
    out, ok = {"dim": basis.dim, "E0": E0, "gap": gap, "betas": {}}, True
    for beta in cfg.betas:
        v = operator_preserves(semigroup_operator(H, beta, E0), basis, n_samples=cfg.samples,
                               seed=cfg.seed, tol=cfg.cone_tol)
        out["betas"][str(beta)] = {"member": v.member, "worst_margin": v.worst_margin, "mode": v.mode}
        ok = ok and v.member
    gv = reflection_membership(psi, basis, tol=p.tol_psd, tol_strict=p.tol_strict)
    strings = {",".join(map(str, s)) or "empty": cdw_string(psi, basis, s, picture="transformed")
               for s in all_strings(p.ell, 3)}
    worst = min(strings.values())
    out.update(ground_member=gv.member, ground_margin=gv.worst_margin, cdw_strings=strings,
               cdw_min=worst)
    return out, bool(ok and gv.member and worst >= -1e-10)


def cmd_positivity(cfg, csv_dir=None):
    if cfg.mode == "background":
        return _positivity_background(cfg)
    return _positivity_reflection(cfg)


def cmd_ergodicity(cfg, csv_dir=None):
    from .cones import ergodicity_check
    from .fock import CompositeBasis, PhononBasisSpec
    from .operators import build_transformed

    _need_odd(cfg)
    p = cfg.params
    basis = CompositeBasis.balanced(p.ell, PhononBasisSpec.fock(p.n_max, p.omega))
    H = build_transformed(p, basis)
    v = ergodicity_check(H, basis, betas=cfg.betas, n_samples=min(cfg.samples, 60), seed=cfg.seed)
    paths, ok_paths = _keyex(cfg)
    res = {"direct": {"ergodic": v.member, "min_best_overlap": v.worst_margin, "mode": v.mode,
                      "n_generators": v.details["n_generators"]},
           "paths": paths}
    return res, bool(v.member and ok_paths)


def _keyex(cfg):
    from .paths import LeftSpace, keyex_table

    p = cfg.params
    space = LeftSpace(p)
    configs = [tuple(sorted(c)) for c in _left_configs(p.ell)]
    table = keyex_table(space, configs)
    missing = [f"{x}->{y}" for (x, y), hit in table.items() if hit is None]
    scaled = [hit["scaled"] for hit in table.values() if hit]
    return {"pairs": len(table), "missing": missing, "min_scaled": min(scaled) if scaled else 0.0}, not missing


def _left_configs(ell):
    from .fock import enumerate_half_filled
    from .paths import hole_particle_config

    seen = []
    for c in enumerate_half_filled(ell):
        left = hole_particle_config(c, ell)[0]
        if left not in seen:
            seen.append(left)
    return seen


def cmd_transforms(cfg, csv_dir=None):
    from .transforms import hole_particle_identities, lang_firsov_gap, reflection_identities

    _need_odd(cfg)
    p = cfg.params
    hp = hole_particle_identities(p.ell)
    refl = reflection_identities(p.with_(n_max=min(p.n_max, 2)))
    lf_params = ModelParams(ell=1, t=p.t, g=p.g if p.g else 0.5, omega=p.omega)
    gaps = [float(lang_firsov_gap(lf_params.with_(n_max=n))[0]) for n in (2, 4, 6, 8)]
    mono = all(b < a for a, b in zip(gaps, gaps[1:]))
    res = {"hole_particle": hp, "reflection": refl, "lang_firsov_gaps": gaps,
           "lang_firsov_monotone": mono,
           "vacuum_printed_prefactor_holds": hp["vacuum_printed"] <= 1e-12}
    exact = max(hp["odd"], hp["even"], hp["dn_stagger"], hp["vacuum_corrected"]) <= 1e-12
    ok = exact and max(refl.values()) <= 1e-10 and mono and gaps[-1] <= 1e-3
    return res, bool(ok)


def cmd_paths(cfg, csv_dir=None):
    from .fock import enumerate_half_filled
    from .paths import LeftSpace, check_path, connect_to_vacuum, hole_particle_config, leading_order_fit

    _need_odd(cfg)
    p = cfg.params
    ell = p.ell
    valid = {}
    for c in enumerate_half_filled(ell):
        left = hole_particle_config(c, ell)[0]
        ok, reason = check_path(connect_to_vacuum(left, ell))
        valid[",".join(map(str, c))] = {"left": list(left), "valid": ok, "reason": reason}
    space = LeftSpace(p)
    fits = {}
    for left in _left_configs(ell):
        f = leading_order_fit(connect_to_vacuum(left, ell), space)
        fits[",".join(map(str, left)) or "empty"] = {"order": f["order"], "slope": f["slope"], "ok": f["ok"]}
    keyex, ok_keyex = _keyex(cfg)
    ok = all(v["valid"] for v in valid.values()) and all(f["ok"] for f in fits.values()) and ok_keyex
    return {"paths": valid, "slopes": fits, "keyex": keyex}, bool(ok)


def cmd_correlations(cfg, csv_dir=None):
    from .observables import (GroundData, all_strings, cdw_string, correlation_matrix,
                              correlation_rows, stagger, structure_factor, write_correlation_csv)

    _need_odd(cfg)
    gd = GroundData.build(cfg.params)
    ell = gd.basis.ell
    D = np.diag(stagger(np.ones(2 * ell)))
    C = D @ correlation_matrix(gd.psi, gd.basis) @ D
    rows = correlation_rows(C, ell)
    p, S, G = structure_factor(C)
    strings = {",".join(map(str, s)) or "empty": cdw_string(gd.psi, gd.basis, s, picture="transformed")
               for s in all_strings(ell, 3)}
    nonempty = [v for k, v in strings.items() if k != "empty"]
    if csv_dir:
        write_correlation_csv(rows, Path(csv_dir) / "correlations.csv")
    res = {"E0": gd.E0, "gap": gd.gap, "G": G, "S": S, "p": p,
           "sum_rule_defect": abs(G[0] - 0.25), "cdw_strings": strings,
           "cdw_min": min(nonempty) if nonempty else None,
           "staggered_by_distance": {str(j): float((-1) ** j * G[j]) for j in range(len(G))}}
    ok = abs(G[0] - 0.25) <= 1e-12 and (not nonempty or min(nonempty) >= -1e-10)
    return res, bool(ok)


def cmd_inequalities(cfg, csv_dir=None):
    from .observables import GroundData, energy_monotonicity, infrared_bound, susceptibility_bound

    _need_odd(cfg)
    gd = GroundData.build(cfg.params)
    n = 2 * gd.basis.ell
    rng = np.random.default_rng(cfg.seed)
    kinds = ("energy", "susceptibility", "infrared") if cfg.inequality == "all" else (cfg.inequality,)
    res, ok = {}, True
    for kind in kinds:
        count = cfg.fields or (50 if kind == "energy" else 20)
        worst, fails, resid = math.inf, 0, 0.0
        for _ in range(count):
            if kind == "energy":
                r = energy_monotonicity(gd, rng.uniform(-1, 1, n))
                slack = r["Eh"] - r["E0"]
            else:
                h = rng.uniform(-1, 1, n) + 1j * rng.uniform(-1, 1, n)
                fn = susceptibility_bound if kind == "susceptibility" else infrared_bound
                r = fn(gd, h)
                slack = r["rhs"] - (r["lhs"] if kind == "susceptibility" else r["lhs_sq"])
                resid = max(resid, r["ground_residual"])
            worst = min(worst, slack)
            fails += not r["holds"]
        entry = {"fields": count, "failures": fails, "min_slack": worst}
        if kind != "energy":
            entry["max_ground_residual"] = resid
        res[kind] = entry
        ok = ok and fails == 0 and resid <= cfg.residual_tol
    return res, bool(ok)


def cmd_irbound(cfg, csv_dir=None):
    from . import irbound as ib

    p = cfg.params
    r = ib.sigma(p.interaction, p.t, cfg.quad_tol, oracle=True)
    res = {"c2_holds": r.c2_holds, "t": p.t, "sigma": r.sigma, "integral": r.integral_value,
           "error_estimate": r.quadrature_error_estimate, "diagnostics": r.diagnostics}
    if not r.c2_holds:
        return res, False
    closed, root = ib.t_star(p.interaction, cfg.quad_tol, bisect=True)
    s1 = ib.sigma(p.interaction, p.t, cfg.quad_tol).sigma
    s4 = ib.sigma(p.interaction, 4 * p.t, cfg.quad_tol).sigma
    scaling = abs((s4 - ib.SIGMA0) - 2 * (s1 - ib.SIGMA0))
    res.update(t_star=closed, t_star_bisection=root, t_star_diff=abs(closed - root),
               sqrt_t_scaling_defect=scaling)
    if csv_dir:
        ib.write_integrand_csv(ib.integrand_rows(p.interaction, p.t), Path(csv_dir) / "irbound_integrand.csv")
    ok = (r.diagnostics["oracle_diff"] <= 1e-6 and abs(closed - root) <= 1e-8 and scaling <= 1e-8)
    return res, bool(ok)


HANDLERS = {
    "spectrum": cmd_spectrum, "check-conditions": cmd_check_conditions,
    "positivity": cmd_positivity, "ergodicity": cmd_ergodicity,
    "transforms-test": cmd_transforms, "paths": cmd_paths,
    "correlations": cmd_correlations, "inequalities": cmd_inequalities,
    "irbound": cmd_irbound,
    "positivity-background": lambda cfg, csv_dir=None: _positivity_background(cfg),
}


def _run_one(name, cfg, csv_dir):
    t0 = time.perf_counter()
    try:
        res, ok = HANDLERS[name](cfg, csv_dir)
    except ConfigError:
        raise
    except (RuntimeError, ValueError, ArithmeticError) as exc:
        res, ok = {"error": f"{type(exc).__name__}: {exc}"}, False
    return name, res, bool(ok), time.perf_counter() - t0


def _all_commands(cfg):
    names = ["spectrum", "check-conditions", "irbound"]
    if cfg.params.ell % 2 == 1:
        names += ["transforms-test", "positivity", "ergodicity", "paths", "correlations", "inequalities"]
    if cfg.params.ell == 1:
        names.append("positivity-background")
    return names


def run(command, cfg: RunConfig, csv_dir=None, threads=1):
    """Run a command and return the report dict (``meta`` holds volatile fields)."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    if csv_dir:
        Path(csv_dir).mkdir(parents=True, exist_ok=True)
    names = _all_commands(cfg) if command == "all" else [command]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        done = list(pool.map(lambda n: _run_one(n, cfg, csv_dir), names))
    results = {n: {"passed": ok, "results": res} for n, res, ok, _ in done}
    report = {
        "command": command, "version": __version__, "config": cfg.to_dict(),
        "passed": all(ok for _, _, ok, _ in done),
        "results": results if command == "all" else done[0][1],
        "meta": {"timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
                 "timings_s": {n: round(dt, 4) for n, _, _, dt in done}},
    }
    return report


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, np.generic):
        return _clean(x.item())
    if isinstance(x, complex):
        return [_clean(x.real), _clean(x.imag)]
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def to_json(report):
    return json.dumps(_clean(report), indent=2, sort_keys=True) + "\n"


def deterministic_part(report):
    """The report without its volatile ``meta`` field, serialized."""
    return to_json({k: v for k, v in report.items() if k != "meta"})


# ------------------------------------------------------------ entry point

def build_parser():
    ap = argparse.ArgumentParser(prog="rpchain", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="flat key=value config file")
    ap.add_argument("--out", help="write the JSON report here (default stdout)")
    ap.add_argument("--csv-dir", help="directory for CSV side files")
    ap.add_argument("--seed", type=int, help="override run.seed")
    ap.add_argument("--threads", type=int, help="worker pool size (env RPCHAIN_THREADS)")
    ap.add_argument("--verbose", action="store_true")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    threads = args.threads or int(os.environ.get("RPCHAIN_THREADS", "1") or 1)
    try:
        cfg = load_config(args.config, args.seed)
        log.info("running %s with %s", args.command, cfg.to_dict())
        report = run(args.command, cfg, args.csv_dir, threads)
    except ConfigError as exc:
        print(f"rpchain: config error: {exc}", file=sys.stderr)
        return 2
    text = to_json(report)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    log.info("passed=%s", report["passed"])
    return 0 if report["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
