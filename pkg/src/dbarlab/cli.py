"""Command-line experiment runner.

Usage: ``dbarlab <subcommand> [--config FILE] [flags]``.  Configuration is
resolved as built-in defaults, then the flat ``key = value`` config file,
then command-line flags.  Every output file starts with the resolved
configuration and the package version.  Exit codes: 0 all verdicts pass,
1 a verdict failed, 2 invalid input.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from typing import Dict, List, Optional

import numpy as np

from . import __version__, forms
from .certify import (
    canonical_certificate,
    catlin_lower_bound,
    check_catlin_on_spectrum,
    check_certificate,
    check_hardy,
    load_certificate,
)
from .discretize import AssemblyError, build_system, default_sigma
from .eigen import SolverError, variational_eigenvalues
from .forms import PolyForm
from .geometry import make_domain, parse_descriptor
from .oracles import sigma_extrapolate, top_degree_oracle
from .poly import Poly, parse_poly
from .selftest import run_checks
from .stability import dilate_sweep, offset_sweep, resolvent_convergence

SUBCOMMANDS = ("spectrum", "sweep", "certify", "hardy", "resolvent", "oracle", "selftest")

DEFAULTS: Dict[str, object] = {
    "domain": "ball",
    "q": 1,
    "k": 4,
    "N": 4,
    "sigma": None,
    "quad_level": None,
    "deltas": "0.08,0.04,0.02",
    "radii": None,
    "side": "both",
    "mode": "offset",
    "cert": None,
    "samples": 1000,
    "seed": 0,
    "func": None,
    "out": None,
    "format": "csv",
    "fault": None,
}

FAULTS = ("theta-sign",)


class InputError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration


def read_config(path: str) -> dict:
    if not os.path.exists(path):
        raise InputError(f"config file not found: {path}")
    out = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise InputError(f"malformed config line: {raw.strip()!r}")
            key = key.strip().replace("-", "_")
            if key not in DEFAULTS:
                raise InputError(f"unknown config key {key!r}")
            out[key] = val.strip()
    return out


def _floats(text, name) -> List[float]:
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise InputError(f"--{name} must be a comma-separated list of numbers") from None


def resolve(sub: str, args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        cfg.update(read_config(args.config))
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    cfg["subcommand"] = sub
    if cfg["radii"] is None:
        cfg["radii"] = "0.9,0.95,0.99" if sub == "resolvent" else "0.9,0.95,0.975,1.025,1.05,1.1"
    try:
        for key in ("q", "k", "N", "samples", "seed"):
            cfg[key] = int(cfg[key])
        if cfg["quad_level"] is not None:
            cfg["quad_level"] = int(cfg["quad_level"])
        if cfg["sigma"] is not None:
            cfg["sigma"] = float(cfg["sigma"])
    except (TypeError, ValueError) as exc:
        raise InputError(f"invalid numeric value: {exc}") from None
    cfg["deltas"] = _floats(cfg["deltas"], "deltas")
    cfg["radii"] = _floats(cfg["radii"], "radii")
    validate(cfg)
    return cfg


def validate(cfg: dict) -> None:
    if not 1 <= cfg["q"] <= 2:
        raise InputError(f"q={cfg['q']} outside 1..2")
    if cfg["k"] < 1:
        raise InputError("k must be >= 1")
    if cfg["N"] < 0:
        raise InputError("N must be >= 0")
    if cfg["sigma"] is not None and cfg["sigma"] < 0:
        raise InputError("sigma must be >= 0")
    if cfg["quad_level"] is not None and cfg["quad_level"] < 1:
        raise InputError("quadrature level must be >= 1")
    if cfg["samples"] < 100:
        raise InputError("samples must be >= 100")
    if cfg["format"] not in ("csv", "json"):
        raise InputError("format must be csv or json")
    if cfg["side"] not in ("inner", "outer", "both"):
        raise InputError("side must be inner, outer or both")
    if cfg["mode"] not in ("offset", "dilate"):
        raise InputError("mode must be offset or dilate")
    if any(x <= 0 for x in cfg["deltas"]):
        raise InputError("deltas must be positive")
    if cfg["subcommand"] == "sweep" and cfg["mode"] == "dilate":
        if any(not 0.5 < r < 1.5 for r in cfg["radii"]):
            raise InputError("dilation radii must lie in (0.5, 1.5)")
    if cfg["subcommand"] == "resolvent" and any(not 0 < r <= 1 for r in cfg["radii"]):
        raise InputError("resolvent radii must lie in (0, 1]")
    cfg["_cert"] = None
    if cfg["cert"] is not None:
        if not os.path.exists(cfg["cert"]):
            raise InputError(f"certificate file not found: {cfg['cert']}")
        try:
            cfg["_cert"] = load_certificate(cfg["cert"])
        except (ValueError, SyntaxError) as exc:
            raise InputError(f"invalid certificate: {exc}") from None
    if cfg["fault"] is not None and cfg["fault"] not in FAULTS:
        raise InputError(f"unknown fault {cfg['fault']!r}")
    cfg["_domain"] = load_domain(cfg["domain"])
    if cfg["sigma"] is None:
        cfg["sigma"] = default_sigma(cfg["_domain"])


def load_domain(text: str):
    if os.path.exists(text):
        with open(text) as fh:
            text = fh.read()
    try:
        return make_domain(parse_descriptor(text))
    except (ValueError, KeyError, SyntaxError) as exc:
        raise InputError(f"invalid domain descriptor: {exc}") from None


def public_config(cfg: dict) -> dict:
    out = {k: v for k, v in cfg.items() if not k.startswith("_")}
    out["version"] = __version__
    return out


# ---------------------------------------------------------------------------
# output


def _header(cfg: dict) -> str:
    items = public_config(cfg)
    return f"# dbarlab {__version__}\n# config: {json.dumps(items, sort_keys=True)}\n"


def write_output(cfg: dict, csv_text: str, json_obj: dict) -> None:
    if not cfg["out"]:
        return
    with open(cfg["out"], "w") as fh:
        if cfg["format"] == "csv":
            fh.write(_header(cfg))
            fh.write(csv_text)
        else:
            obj = {"config": public_config(cfg), "version": __version__, **json_obj}
            fh.write(json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n")


def _default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, np.ndarray):
        return _default(x.tolist()) if x.dtype.kind == "c" else x.tolist()
    if isinstance(x, list):
        return [_default(v) if isinstance(v, complex) else v for v in x]
    return str(x)


def _fmt(x: float) -> str:
    return f"{x:.10g}"


# ---------------------------------------------------------------------------
# subcommands


def cmd_spectrum(cfg) -> int:
    S = build_system(cfg["_domain"], cfg["q"], cfg["N"], sigma=cfg["sigma"], level=cfg["quad_level"])
    sp = variational_eigenvalues(S, min(cfg["k"], S.basis.size))
    for i, lam in enumerate(sp.eigenvalues, 1):
        print(f"k={i} lambda={_fmt(lam)}")
    print("discrete variational values: " + ", ".join(_fmt(x) for x in sp.eigenvalues))
    write_output(cfg, sp.to_csv(), json.loads(sp.to_json()))
    return 0


def _report_lines(rep) -> None:
    for r in rep.rows:
        where = f"r={_fmt(r.param)}" if r.side == "dilate" else f"side={r.side}"
        print(f"delta={_fmt(r.delta)} {where} lambda=" + ",".join(_fmt(x) for x in r.values))
    for name, v in sorted(rep.verdicts.items()):
        status = {True: "PASS", False: "FAIL", None: "N/A"}[v.get("pass")]
        print(f"verdict {name}: {status}")


def cmd_sweep(cfg) -> int:
    d = cfg["_domain"]
    cert = cfg["_cert"]
    if cfg["mode"] == "dilate":
        rep = dilate_sweep(d, cfg["q"], cfg["k"], cfg["radii"], cfg["N"], cfg["sigma"], level=cfg["quad_level"])
    else:
        if cert is not None and not check_certificate(d, cert, cfg["samples"], cfg["seed"]).passed:
            print("certificate rejected")
            return 1
        rep = offset_sweep(
            d, cfg["q"], cfg["k"], cfg["deltas"], cfg["side"], cfg["N"], cfg["sigma"],
            level=cfg["quad_level"], certificate=cert,
        )
    rep.metadata.pop("seconds", None)
    _report_lines(rep)
    write_output(cfg, rep.to_csv(), rep.to_json_obj())
    if cfg["out"]:
        header = _header(cfg)
        stem = os.path.splitext(cfg["out"])[0] + "."
        for path in rep.write_curves(stem):
            with open(path) as fh:
                body = fh.read()
            with open(path, "w") as fh:
                fh.write(header + body)
    return 0 if rep.passed else 1


def cmd_certify(cfg) -> int:
    d = cfg["_domain"]
    c = cfg["_cert"] or canonical_certificate(d, cfg["q"])
    v = check_certificate(d, c, cfg["samples"], cfg["seed"])
    print(f"certificate: {'PASS' if v.passed else 'FAIL'}")
    result = {"certificate": {"pass": v.passed, **v.detail}}
    rows = ["index,Q,hessian_integral,margin,pass"]
    ok = v.passed
    if v.passed:
        bound = catlin_lower_bound(c, cfg["q"])
        S = build_system(d, cfg["q"], cfg["N"], sigma=cfg["sigma"], level=cfg["quad_level"])
        sp = variational_eigenvalues(S, min(cfg["k"], S.basis.size))
        lam1 = float(sp.eigenvalues[0])
        margins = check_catlin_on_spectrum(S, sp, c)
        lower_ok = lam1 >= bound * 0.98
        print(f"lambda1={_fmt(lam1)} catlin_bound={_fmt(bound)} verdict={'PASS' if lower_ok else 'FAIL'}")
        for m in margins["margins"]:
            print(f"eigenform={m['index']} margin={_fmt(m['margin'])} {'PASS' if m['pass'] else 'FAIL'}")
            rows.append(f"{m['index']},{m['Q']!r},{m['hessian_integral']!r},{m['margin']!r},{m['pass']}")
        ok = ok and lower_ok and margins["pass"]
        result.update({"lambda1": lam1, "bound": bound, "lower_bound_pass": lower_ok, "margins": margins})
    write_output(cfg, "\n".join(rows) + "\n", result)
    return 0 if ok else 1


def hardy_family(d) -> list:
    """Scalar and form tests vanishing on the boundary, built from ``rho``."""
    if d.rho_poly is None:
        raise InputError("the Hardy family needs a polynomial defining function")
    rc = float(np.real(d.rho_poly.evaluate(d.center[None, :])[0]))
    g = d.rho_poly * (-1.0 / abs(rc))
    zb2 = Poly.zbar(2, 1) - complex(np.conj(d.center[1]))
    return [
        ("g", g),
        ("g^2", g * g),
        ("g dzb1", PolyForm.basic(2, (0,), g)),
        ("g dzb2", PolyForm.basic(2, (1,), g)),
        ("g zb2 dzb1", PolyForm.basic(2, (0,), g * zb2)),
    ]


def cmd_hardy(cfg) -> int:
    d = cfg["_domain"]
    if cfg["func"]:
        fam = [(cfg["func"], parse_poly(cfg["func"]))]
    else:
        fam = hardy_family(d)
    level = cfg["quad_level"] or 6
    rows = ["test,kind,lhs,energy,mass,minimal_A,level_agreement,pass"]
    out, ok = [], True
    for name, f in fam:
        try:
            rep = check_hardy(d, f, level=level)
        except ValueError as exc:
            raise InputError(str(exc)) from None
        ok &= rep.passed
        rhs = rep.rhs_energy if rep.kind == "scalar" else rep.constant * rep.rhs_energy
        print(
            f"test={name} lhs={_fmt(rep.lhs)} rhs={_fmt(rhs)} "
            f"minimal_A={_fmt(rep.minimal_A)} {'PASS' if rep.passed else 'FAIL'}"
        )
        rows.append(
            f"{name},{rep.kind},{rep.lhs!r},{rep.rhs_energy!r},{rep.rhs_mass!r},"
            f"{rep.minimal_A!r},{rep.level_agreement!r},{rep.passed}"
        )
        out.append({"test": name, **rep.to_json_obj()})
    write_output(cfg, "\n".join(rows) + "\n", {"tests": out})
    return 0 if ok else 1


def cmd_resolvent(cfg) -> int:
    d = cfg["_domain"]
    J = (0,) if cfg["q"] == 1 else (0, 1)
    coef = parse_poly(cfg["func"]) if cfg["func"] else Poly.constant(2, 1.0)
    f = PolyForm.basic(2, J, coef)
    rep = resolvent_convergence(d, cfg["radii"], f, cfg["q"], cfg["N"], cfg["sigma"], level=cfg["quad_level"])
    for r, dist in zip(rep.radii, rep.distances):
        print(f"r={_fmt(r)} distance={_fmt(dist)}")
    print(f"verdict strictly_decreasing: {'PASS' if rep.passed else 'FAIL'}")
    write_output(cfg, rep.to_csv(), rep.to_json_obj())
    return 0 if rep.passed else 1


def cmd_oracle(cfg) -> int:
    d = cfg["_domain"]
    if cfg["q"] != 2 or d.kind != "ball":
        raise InputError("the Dirichlet oracle applies to top-degree forms (q=2) on a ball")
    base = cfg["sigma"] if cfg["sigma"] >= 1e3 else 1e3
    sigmas = [base, 2 * base, 4 * base]
    S = build_system(d, 2, cfg["N"], sigma=sigmas[0], level=cfg["quad_level"])
    vals = [float(variational_eigenvalues(S.with_sigma(s), 1).eigenvalues[0]) for s in sigmas]
    ext = sigma_extrapolate(sigmas, vals)
    ref = top_degree_oracle(d)
    rel = abs(ext - ref) / ref
    for s, v in zip(sigmas, vals):
        print(f"sigma={_fmt(s)} lambda1={_fmt(v)}")
    print(f"discrete lambda1 (extrapolated)={_fmt(ext)} oracle j11^2/4={_fmt(ref)} rel_err={_fmt(rel)}")
    ok = rel <= 0.10
    print(f"verdict within_10_percent: {'PASS' if ok else 'FAIL'}")
    rows = ["sigma,lambda1"] + [f"{s!r},{v!r}" for s, v in zip(sigmas, vals)] + [f"inf,{ext!r}"]
    write_output(cfg, "\n".join(rows) + "\n", {"sigmas": sigmas, "values": vals, "extrapolated": ext, "oracle": ref, "pass": ok})
    return 0 if ok else 1


def cmd_selftest(cfg) -> int:
    results = run_checks(level=cfg["quad_level"], seed=cfg["seed"])
    print(f"{'check':<26} {'verdict':<5} detail")
    for r in results:
        print(r.line())
        print(f"{r.name}: {r.seconds:.2f}s", file=sys.stderr)
    ok = all(r.passed for r in results)
    print(f"selftest: {'PASS' if ok else 'FAIL'} ({sum(r.passed for r in results)}/{len(results)})")
    rows = ["check,pass,detail"] + [f"{r.name},{r.passed},\"{r.detail}\"" for r in results]
    write_output(cfg, "\n".join(rows) + "\n", {"checks": [{"name": r.name, "pass": r.passed, "detail": r.detail} for r in results]})
    return 0 if ok else 1


COMMANDS = {
    "spectrum": cmd_spectrum,
    "sweep": cmd_sweep,
    "certify": cmd_certify,
    "hardy": cmd_hardy,
    "resolvent": cmd_resolvent,
    "oracle": cmd_oracle,
    "selftest": cmd_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dbarlab", description="dbar-Neumann spectral experiments")
    parser.add_argument("--version", action="version", version=f"dbarlab {__version__}")
    subs = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = subs.add_parser(name)
        p.add_argument("--config")
        p.add_argument("--domain")
        p.add_argument("--q", type=int)
        p.add_argument("--k", type=int)
        p.add_argument("--N", type=int)
        p.add_argument("--sigma", type=float)
        p.add_argument("--quad-level", dest="quad_level", type=int)
        p.add_argument("--deltas")
        p.add_argument("--radii")
        p.add_argument("--side", choices=["inner", "outer", "both"])
        p.add_argument("--mode", choices=["offset", "dilate"])
        p.add_argument("--cert")
        p.add_argument("--samples", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--func", help="polynomial in z1, z2, zb1, zb2")
        p.add_argument("--out")
        p.add_argument("--format", choices=["csv", "json"])
        if name == "selftest":
            p.add_argument("--fault", choices=list(FAULTS), help=argparse.SUPPRESS)
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    saved = forms._THETA_SIGN
    try:
        cfg = resolve(args.subcommand, args)
        if cfg.get("fault") == "theta-sign":
            forms._THETA_SIGN = -saved
        t0 = time.perf_counter()
        code = COMMANDS[args.subcommand](cfg)
        print(f"elapsed {time.perf_counter() - t0:.2f}s", file=sys.stderr)
        return code
    except (InputError, AssemblyError, SolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    finally:
        forms._THETA_SIGN = saved


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
