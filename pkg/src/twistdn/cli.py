"""Command-line front end: ``twistdn {mesh,dn,invert,stability,approx,verify}``.

Configuration is a flat ``key = value`` file (``#`` starts a comment) plus
``--set key=value`` overrides. Every output file is written to a temporary
name in the output directory and renamed into place.
"""

import argparse
import json
import os
import sys
import tempfile

from . import _jit
from .dn import BoundaryBasis, GridError, XiGrid, dn_3d_synthesize, dn_bullet_mode_matrix, dn_mode_matrix
from .fem import CoercivityError, SolverError
from .geometry import CrossSection, MeshError, build_mesh, write_mesh

EXIT_FAILED_CHECK = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class ConfigError(ValueError):
    pass


def _floats(text):
    return tuple(float(v) for v in str(text).split(",") if v.strip())


def _bool(text):
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> (parser, default)
SCHEMA = {
    "section": (CrossSection.parse, "unit_disc"),
    "h": (float, "0.1"),
    "K": (int, "4"),
    "a": (float, "0.3"),
    "xi": (float, "0"),
    "variant": (str, "standard"),
    "family": (_bool, "false"),
    "xi_half_width": (float, "8"),
    "xi_step": (float, "0.25"),
    "sigma_g": (float, "1"),
    "mode": (str, "family"),
    "search": (_floats, "-0.5,0.5"),
    "noise": (float, "0"),
    "seed": (int, "0"),
    "a_grid": (_floats, "-0.4,-0.3,-0.2,-0.1,0,0.1,0.2,0.3,0.4"),
    "close": (float, "0.001"),
    "refine": (_bool, "false"),
    "approx_section": (CrossSection.parse, "ellipse:0.5,0.5"),
    "approx_h": (float, "0.05"),
    "a_values": (_floats, "0.8,0.9,0.95,1,1.05,1.1,1.2"),
    "verify_xi_half_width": (float, "6"),
    "verify_xi_step": (float, "0.375"),
}


def read_config_file(path):
    pairs = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            pairs[key] = value
    return pairs


def build_config(file_pairs=None, overrides=()):
    """Merge defaults, file values and ``key=value`` overrides; parse every value."""
    raw = {k: default for k, (_, default) in SCHEMA.items()}
    raw.update(file_pairs or {})
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        raw[key] = value
    unknown = sorted(set(raw) - set(SCHEMA))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    cfg = {}
    for key, (parse, _) in SCHEMA.items():
        try:
            cfg[key] = parse(raw[key])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {raw[key]!r} ({exc})") from None
    if not cfg["h"] > 0 or not cfg["approx_h"] > 0:
        raise ConfigError("h must be positive")
    if cfg["K"] < 0:
        raise ConfigError("K must be nonnegative")
    if cfg["mode"] not in ("family", "reduced"):
        raise ConfigError("mode must be family or reduced")
    if cfg["variant"] not in ("standard", "bullet"):
        raise ConfigError("variant must be standard or bullet")
    if len(cfg["search"]) != 2 or cfg["search"][0] >= cfg["search"][1]:
        raise ConfigError("search must be lo,hi with lo < hi")
    cfg["_raw"] = {k: raw[k] for k in SCHEMA}
    return cfg


def _grid(cfg, prefix="xi"):
    return XiGrid(cfg[f"{prefix}_half_width"], cfg[f"{prefix}_step"])


def _atomic_write(outdir, name, text):
    os.makedirs(outdir, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=outdir)
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, os.path.join(outdir, name))
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return os.path.join(outdir, name)


def _json(obj):
    return json.dumps(obj, indent=1, sort_keys=True, allow_nan=True) + "\n"


def _config_text(cfg):
    return "".join(f"{k} = {v}\n" for k, v in cfg["_raw"].items())


def cmd_mesh(cfg, out):
    mesh = build_mesh(cfg["section"], cfg["h"])
    os.makedirs(out, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".mesh.", dir=out)
    os.close(fd)
    write_mesh(mesh, tmp)
    os.replace(tmp, os.path.join(out, "mesh.txt"))
    print(f"mesh: {mesh.n_vertices} vertices, {len(mesh.triangles)} triangles, h={mesh.h:.4g}")
    return 0


def cmd_dn(cfg, out):
    mesh = build_mesh(cfg["section"], cfg["h"])
    basis = BoundaryBasis.from_mesh(mesh, cfg["K"])
    if cfg["family"]:
        fam = dn_3d_synthesize(mesh, cfg["a"], basis, cfg["sigma_g"], _grid(cfg), cfg["variant"])
        _atomic_write(out, "dn_family.json", _json(fam.to_dict()))
        M = fam.at(0.0)
    elif cfg["variant"] == "bullet":
        M = dn_bullet_mode_matrix(mesh, cfg["a"], cfg["xi"], basis)
    else:
        M = dn_mode_matrix(mesh, cfg["a"], cfg["xi"], basis)
    _atomic_write(out, "dn.json", _json(M.to_dict()))
    _atomic_write(out, "dn_diag.csv", M.diagonal_csv())
    print(f"dn: a={cfg['a']} xi={M.xi} K={cfg['K']} symmetry residual {M.symmetry_residual():.2e}")
    return 0


def _forward(cfg, mesh=None):
    from .inverse import ForwardModel

    mesh = mesh or build_mesh(cfg["section"], cfg["h"])
    return ForwardModel(mesh, cfg["K"], cfg["sigma_g"], _grid(cfg))


def cmd_invert(cfg, out):
    from .inverse import measure, recover_rate

    fwd = _forward(cfg)
    meas = measure(fwd, cfg["a"], cfg["mode"], cfg["noise"], cfg["seed"])
    res = recover_rate(meas, cfg["search"])
    payload = dict(res.to_dict(), a_true=cfg["a"], provenance=meas.provenance)
    _atomic_write(out, "recovery.json", _json(payload))
    csv = "a,misfit\n" + "".join(f"{a!r},{v!r}\n" for a, v in res.misfit_curve)
    _atomic_write(out, "misfit.csv", csv)
    print(f"invert: a_hat={res.a_hat:.6f} (true {cfg['a']}), sign ambiguous: {res.sign_ambiguous}")
    return 0


def cmd_stability(cfg, out):
    from .inverse import default_pairs, stability_experiment

    pairs = default_pairs(cfg["a_grid"], cfg["close"])
    mesh = build_mesh(cfg["section"], cfg["h"])
    rep = stability_experiment(pairs, _forward(cfg, mesh))
    payload = rep.to_dict()
    if cfg["refine"]:
        fine = build_mesh(cfg["section"], 0.5 * cfg["h"])
        rep2 = stability_experiment(pairs, _forward(cfg, fine))
        payload["refined"] = {"c_hat": rep2.c_hat, "mesh_h": fine.h}
        payload["c_hat_drift"] = abs(rep2.c_hat - rep.c_hat) / rep2.c_hat
    _atomic_write(out, "stability.json", _json(payload))
    _atomic_write(out, "ratios.csv", rep.ratio_csv())
    print(f"stability: C_hat={rep.c_hat:.6g} over {len(rep.pairs)} pairs")
    return 0


def cmd_approx(cfg, out):
    from .inverse import approximation_experiment

    mesh = build_mesh(cfg["approx_section"], cfg["approx_h"])
    tab = approximation_experiment(cfg["a_values"], mesh, cfg["K"], _grid(cfg).points)
    _atomic_write(out, "approx.csv", tab.to_csv())
    print(f"approx: C_approx={tab.c_approx:.6g}, ratio variation {tab.variation:.2%}")
    return 0


def cmd_verify(cfg, out):
    from .checks import run_checks

    results = run_checks(cfg["h"], cfg["K"], cfg["sigma_g"], _grid(cfg, "verify_xi"))
    report = {
        "config": cfg["_raw"],
        "checks": [r.to_dict() for r in results],
        "passed": all(r.passed for r in results),
    }
    _atomic_write(out, "verify.json", _json(report))
    for r in results:
        mark = "PASS" if r.passed else "FAIL"
        print(f"{mark}  {r.name}: {r.value:.3e} {r.comparison} {r.threshold:g}")
    return 0 if report["passed"] else EXIT_FAILED_CHECK


COMMANDS = {
    "mesh": cmd_mesh,
    "dn": cmd_dn,
    "invert": cmd_invert,
    "stability": cmd_stability,
    "approx": cmd_approx,
    "verify": cmd_verify,
}


def make_parser():
    p = argparse.ArgumentParser(prog="twistdn", description="DN maps of twisted waveguides and twist-rate recovery.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    p.add_argument("--out", default="twistdn-out", help="output directory")
    p.add_argument("--threads", type=int, help="thread count (default: $TWISTDN_THREADS)")
    return p


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    threads = args.threads or os.environ.get("TWISTDN_THREADS")
    try:
        if threads:
            _jit.set_num_threads(int(threads))
        cfg = build_config(read_config_file(args.config) if args.config else {}, args.set)
    except (ConfigError, OSError, ValueError) as exc:
        parser.print_usage(sys.stderr)
        print(f"twistdn: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        code = COMMANDS[args.command](cfg, args.out)
        _atomic_write(args.out, f"{args.command}.config", _config_text(cfg))
        return code
    except (CoercivityError, SolverError, GridError, MeshError) as exc:
        print(f"twistdn: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (FloatingPointError, ArithmeticError) as exc:
        print(f"twistdn: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
