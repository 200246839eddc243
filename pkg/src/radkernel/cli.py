"""Command-line front end.

Every subcommand reads an optional YAML config; flags and ``--set key.path=value``
override it. Outputs go to ``--output-dir``, else ``output_dir`` in the config,
else ``$RADKERNEL_OUTPUT_DIR``, else ``./radkernel_out``. Each JSON carries the
hash of the merged config, so identical inputs give byte-identical files.

Exit codes: 0 success, 2 invalid input or unmet hypothesis, 3 numerical
failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import bounds, criticality, heatkernel, weights
from .errors import NumericalError, ValidationError
from .grid import RadialGrid
from .harmonic import f_of_u, solve_harmonic
from .io import load_config, write_json
from .potential import Bump, PotentialSpec, exponents

OUTPUT_ENV = "RADKERNEL_OUTPUT_DIR"

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


# ---------------------------------------------------------------- config plumbing

def _set_path(cfg: dict, dotted: str, value):
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        node = node.setdefault(k, {})
    node[keys[-1]] = value


def merged_config(args) -> dict:
    cfg = load_config(args.config) if getattr(args, "config", None) else {}
    cfg = copy.deepcopy(cfg)
    flag_map = {"dimension": "potential.dimension", "family": "potential.family",
                "lambda1": "potential.lambda1", "lambda2": "potential.lambda2",
                "theta": "potential.theta", "ppd": "grid.points_per_decade", "seed": "seed"}
    for flag, path in flag_map.items():
        val = getattr(args, flag, None)
        if val is not None:
            _set_path(cfg, path, val)
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ValidationError(f"--set expects key.path=value, got {item!r}")
        key, raw = item.split("=", 1)
        _set_path(cfg, key.strip(), yaml.safe_load(raw))
    pot = cfg.get("potential")
    if pot and pot.get("family") == "pure" and "lambda1" not in pot and "lambda" in pot:
        pot["lambda1"] = pot["lambda"]
    return cfg


def output_dir(args, cfg: dict) -> Path:
    out = args.output_dir or cfg.get("output_dir") or os.environ.get(OUTPUT_ENV) or "radkernel_out"
    return Path(out)


def spec_from(cfg: dict) -> PotentialSpec:
    pot = cfg.get("potential")
    if not pot:
        raise ValidationError("config has no 'potential' section")
    pot = dict(pot)
    if pot.get("family") == "pure" and "lambda2" in pot and "lambda1" in pot:
        pot.pop("lambda2")
    return PotentialSpec.from_dict(pot)


def grid_from(cfg: dict) -> RadialGrid | None:
    g = cfg.get("grid")
    if not g:
        return None
    return RadialGrid(float(g.get("r_min", 1e-6)), float(g.get("r_max", 1e6)),
                      int(g.get("points_per_decade", 64)))


def solver_from(cfg: dict) -> heatkernel.SolverConfig:
    return heatkernel.SolverConfig(**(cfg.get("solver") or {}))


def _axis(spec_val, log: bool):
    """A list, or ``{lo, hi, n}`` spaced geometrically when ``log``."""
    if isinstance(spec_val, dict):
        lo, hi, n = float(spec_val["lo"]), float(spec_val["hi"]), int(spec_val["n"])
        return np.geomspace(lo, hi, n) if log else np.linspace(lo, hi, n)
    return np.atleast_1d(np.asarray(spec_val, dtype=float))


def samples_from(cfg: dict):
    """Kernel sample points: a cartesian product of axes, or seeded random draws."""
    s = cfg.get("samples")
    if not s:
        raise ValidationError("config has no 'samples' section")
    if "random" in s:
        r = s["random"]
        rng = np.random.default_rng(int(cfg.get("seed", 0)))
        n = int(r["n"])
        x = np.exp(rng.uniform(*np.log(r["x"]), n))
        y = np.exp(rng.uniform(*np.log(r["y"]), n))
        t = np.exp(rng.uniform(*np.log(r["t"]), n))
        c = rng.uniform(-1.0, 1.0, n) if "angles" not in r else np.resize(
            np.cos(np.linspace(0.0, np.pi, int(r["angles"]))), n)
        return x, y, c, t
    axes = [_axis(s[k], k != "cos_theta") for k in ("x", "y", "cos_theta", "t")]
    grid = np.meshgrid(*axes, indexing="ij")
    return tuple(g.ravel() for g in grid)


def kernel_slice(spec: PotentialSpec, cfg: dict, source: str):
    x, y, c, t = samples_from(cfg)
    if source == "oracle":
        if spec.family not in ("pure", "zero") or spec.bumps:
            raise ValidationError("the Bessel oracle covers pure inverse-square potentials only")
        return heatkernel.oracle_slice(spec.dimension, spec.lambda1, x, y, c, t)
    return heatkernel.compute_slice(spec, x, y, c, t, solver_from(cfg))


def _emit(payload: dict, path: Path, cfg: dict, quiet: bool):
    write_json(path, payload, cfg)
    if not quiet:
        print(f"wrote {path}")


# ---------------------------------------------------------------- subcommands

def cmd_exponents(args, cfg):
    n_dim = args.N if args.N is not None else int(cfg.get("potential", {}).get("dimension", 3))
    lam = args.lam if args.lam is not None else float(cfg.get("potential", {}).get("lambda1", 0.0))
    ex = exponents(n_dim, lam)
    doc = {"dimension": n_dim, "lambda": lam, "a_plus": ex.a_plus, "a_minus": ex.a_minus,
           "discriminant": ex.discriminant}
    print(json.dumps(doc, indent=2, sort_keys=True))
    return doc


def cmd_harmonic(args, cfg):
    spec = spec_from(cfg)
    prof = solve_harmonic(spec, grid_from(cfg))
    out = output_dir(args, cfg)
    prof.write_csv(out / "harmonic_profile.csv")
    doc = {"potential": spec.to_dict(), "profile": prof.to_dict()}
    _emit(doc, out / "harmonic_fit.json", cfg, args.quiet)
    return doc


def cmd_classify(args, cfg):
    spec = spec_from(cfg)
    rep = criticality.classify_operator(spec, grid_from(cfg))
    doc = {"potential": spec.to_dict(), "report": rep.to_dict()}
    _emit(doc, output_dir(args, cfg) / "classify.json", cfg, args.quiet)
    if not args.quiet:
        print(f"{rep.verdict.value} (case {rep.case_label})")
    return doc


def cmd_mu_star(args, cfg):
    spec = spec_from(cfg)
    m = cfg.get("mu_star") or {}
    bump = Bump(**(m.get("bump") or {"coeff": 1.0, "outer": 1.0, "inner": 0.0, "width": 1e-3}))
    res = criticality.find_mu_star(spec, bump, tuple(m.get("bracket", (0.0, 10.0))),
                                   float(m.get("tol", 5e-3)), grid_from(cfg))
    doc = {"potential": spec.to_dict(), "bump": bump.to_dict(), "result": res.to_dict()}
    _emit(doc, output_dir(args, cfg) / "mu_star.json", cfg, args.quiet)
    if not args.quiet:
        print(f"mu* = {res.mu_star:.6f} (bracket width {res.bracket_width:.1e})")
    return doc


def _default_balls():
    return [(d, r) for d in (0.0, 0.1, 1.0, 10.0) for r in (0.01, 0.1, 1.0, 10.0)]


def cmd_a2(args, cfg):
    spec = spec_from(cfg)
    prof = solve_harmonic(spec, grid_from(cfg))
    w = weights.WeightProfile.from_profile(prof)
    balls = [tuple(map(float, b)) for b in (cfg.get("a2") or {}).get("balls", _default_balls())]
    verdict = weights.a2_quick_test(w)
    est = weights.a2_constant(w, balls)
    out = output_dir(args, cfg)
    ok = [b for b in balls if tuple(b) not in set(est.skipped)]
    weights.ball_mass_table(w, ok, out / "ball_masses.csv")
    doc = {"potential": spec.to_dict(), "quick_test": verdict.value,
           "near_zero_power": w.near_zero_power, "tail_power_bounds": w.tail_power_bounds,
           "a2_estimate": est.to_dict()}
    _emit(doc, out / "a2.json", cfg, args.quiet)
    if not args.quiet:
        print(f"{verdict.value}; sampled [omega] >= {est.value:.6g}")
    return doc


def cmd_kernel(args, cfg):
    spec = spec_from(cfg)
    source = (cfg.get("kernel") or {}).get("source", "solver")
    sl = kernel_slice(spec, cfg, source)
    out = output_dir(args, cfg)
    sl.write_csv(out / "kernel_slice.csv")
    doc = {"potential": spec.to_dict(), "slice": sl.to_dict()}
    _emit(doc, out / "kernel_slice.json", cfg, args.quiet)
    return doc


def cmd_verify(args, cfg):
    spec = spec_from(cfg)
    v = cfg.get("verify") or {}
    kind = v.get("envelope", "GlobalEq16")
    sl = kernel_slice(spec, cfg, v.get("source", "solver"))
    prof = solve_harmonic(spec, grid_from(cfg))
    env = bounds.make_envelope(kind, prof, spec, v.get("critical"), float(v.get("epsilon", 0.5)))
    bracket = tuple(v.get("c_bracket", (1e-8, 1e8)))
    fits = {}
    for side in (bounds.Side.UPPER, bounds.Side.LOWER):
        if kind == bounds.EnvelopeKind.GAUSSIAN.value and side is bounds.Side.LOWER:
            continue
        fits[side.value] = bounds.fit_constant(sl, env, side, bracket).to_dict()
    out = output_dir(args, cfg)
    bounds.ratio_scatter(sl, env, fits["Upper"]["fitted_constant"], out / "ratio_scatter.csv")
    doc = {"potential": spec.to_dict(), "envelope": kind, "fits": fits, "slice": sl.to_dict()}
    if v.get("gaussian_rate", False):
        doc["gaussian_rate"] = bounds.gaussian_rate(sl, float(v.get("epsilon", 0.5))).to_dict()
    _emit(doc, out / "fit_report.json", cfg, args.quiet)
    if not args.quiet:
        print(" ".join(f"{k}: C={f['fitted_constant']:.6g}" for k, f in fits.items()))
    return doc


def cmd_supersolution(args, cfg):
    spec = spec_from(cfg)
    s = cfg.get("supersolution") or {}
    prof = solve_harmonic(spec, grid_from(cfg))
    F = f_of_u(prof)
    zeta = bounds.zeta_for(spec, prof, s.get("critical"))
    kappa = s.get("kappa")
    kappa = bounds.zeta_kappa(*zeta) if kappa is None else float(kappa)
    kappa *= float(s.get("kappa_scale", 1.0))
    t = s.get("times", {"lo": 0.1, "hi": 100.0, "n": 7})
    times = _axis(t, True)
    r_range = tuple(s["r_range"]) if "r_range" in s else None
    rep = bounds.verify_supersolution(prof, F, zeta, kappa, spec, times, r_range)
    doc = {"potential": spec.to_dict(), "zeta": list(zeta), "kappa": kappa, "report": rep.to_dict()}
    _emit(doc, output_dir(args, cfg) / "supersolution.json", cfg, args.quiet)
    if not args.quiet:
        print(f"{'pass' if rep.passed else 'FAIL'}: min residual {rep.min_residual:.3e}, "
              f"{rep.violations} violations")
    return doc


COMMANDS = {
    "exponents": cmd_exponents, "harmonic": cmd_harmonic, "classify": cmd_classify,
    "mu-star": cmd_mu_star, "a2": cmd_a2, "kernel": cmd_kernel, "verify": cmd_verify,
    "supersolution": cmd_supersolution,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="radkernel", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("config", nargs="?", help="YAML run config")
        sp.add_argument("--output-dir", "-o", default=None)
        sp.add_argument("--dimension", type=int)
        sp.add_argument("--family", choices=["pure", "zero", "blended", "bump"])
        sp.add_argument("--lambda1", type=float)
        sp.add_argument("--lambda2", type=float)
        sp.add_argument("--theta", type=float)
        sp.add_argument("--ppd", type=int, help="harmonic grid points per decade")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--set", action="append", metavar="KEY.PATH=VALUE")
        sp.add_argument("--quiet", "-q", action="store_true")
        if name == "exponents":
            sp.add_argument("--N", type=int)
            sp.add_argument("--lam", type=float)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = merged_config(args)
        COMMANDS[args.command](args, cfg)
    except (ValidationError, yaml.YAMLError) as exc:
        print(f"radkernel {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (KeyError, TypeError) as exc:
        print(f"radkernel {args.command}: malformed config: {exc!r}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"radkernel {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"radkernel {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
