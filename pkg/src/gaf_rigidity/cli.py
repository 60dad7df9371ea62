"""Command-line runner: ``gaf-rigidity <subcommand> [--config FILE] [flags]``.

Settings come from defaults, then an optional ``key=value`` config file,
then flags.  Every artifact written under ``output_dir`` carries the
effective configuration and the package version.  Exit status is 0 on
success, 2 for configuration errors and 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from . import __version__
from . import admissibility as A
from . import kernel as K
from . import linstat as LS
from . import rigidity as RG
from . import sampler as S
from . import svg
from . import zerofinder as Z
from .errors import ConfigError, GafError, NumericalError

VERSION = f"gaf-rigidity {__version__}"


def _float_list(text):
    return [float(x) for x in str(text).split(",") if x.strip()]


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


COMMON = {
    "family": (str, "gef", "kernel family: gef, mittag-leffler[:alpha], double-exp, lindelof[:alpha], custom:PATH"),
    "alpha": (float, None, "family parameter when not given as family:alpha"),
    "output_dir": (str, "gaf_out", "directory for reports"),
}

SEEDED = {
    "seed": (int, 0, "experiment seed"),
    "tail_tol": (float, S.DEFAULT_TAIL_TOL, "relative tail tolerance of the truncation"),
}

KEYS = {
    "kernel-info": {
        "r": (_float_list, [1.0], "comma-separated radii r (arguments of G)"),
    },
    "admissibility": {
        "r_min": (float, None, "first r of the doubling grid (default: first power of 2 with b >= 10)"),
        "r_points": (int, 5, "number of grid points r_min * 2^j"),
        "delta_rule": (str, "power", "cutoff rule: power (b^-2/5) or log (sqrt(2 log b / b))"),
        "claim1": (_bool, True, "also evaluate the Claim-1 ratio"),
    },
    "sample-zeros": {
        "radius": (float, 2.0, "disk radius"),
        "trials": (int, 1, "number of samples"),
        **SEEDED,
    },
    "variance": {
        "k": (int, 0, "power k of the test function"),
        "eta": (float, 0.5, "bump parameter in (0, 1]"),
        "L": (_float_list, [2.0], "comma-separated inner radii L"),
        "trials": (int, 10000, "Monte Carlo trials"),
        **SEEDED,
    },
    "rigidity": {
        "d_radius": (float, 1.0, "radius of the disk D"),
        "k_max": (int, 2, "largest reported power sum"),
        "eta": (float, 0.5, "bump parameter in (0, 1]"),
        "trials": (int, 100, "number of trials"),
        **SEEDED,
    },
}


def _flag(key):
    return "--" + key.replace("_", "-").lower()


def build_parser():
    p = argparse.ArgumentParser(prog="gaf-rigidity", description="Zeros of Gaussian entire functions: rigidity lab.")
    p.add_argument("--version", action="version", version=VERSION)
    sub = p.add_subparsers(dest="command", required=True)
    for name, keys in KEYS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="file of key=value lines (flags override it)")
        sp.add_argument("--workers", type=int, default=1, help="worker threads (does not change results)")
        for key, (_, default, help_) in {**COMMON, **keys}.items():
            sp.add_argument(_flag(key), dest=key, default=None, help=f"{help_} (default: {default})")
    return p


def read_config_file(path, allowed):
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, val = (x.strip() for x in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in allowed:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = val
    return out


def resolve_config(command, args):
    keys = {**COMMON, **KEYS[command]}
    raw = {}
    if args.config:
        raw.update(read_config_file(args.config, keys))
    for key in keys:
        val = getattr(args, key)
        if val is not None:
            raw[key] = val
    cfg = {}
    for key, (conv, default, _) in keys.items():
        if key in raw:
            try:
                cfg[key] = conv(raw[key])
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}") from None
        else:
            cfg[key] = default
    return cfg


def spec_from_config(cfg):
    fam = cfg["family"]
    if cfg.get("alpha") is not None:
        if ":" in fam:
            raise ConfigError("give alpha either in the family string or as alpha, not both")
        fam = f"{fam}:{cfg['alpha']!r}"
    return K.parse_family(fam)


# ------------------------------------------------------------------- output


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, complex):
        return [_clean(x.real), _clean(x.imag)]
    return x


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


class Writer:
    def __init__(self, cfg, command):
        self.dir = cfg["output_dir"]
        self.echo = {"command": command, **cfg}
        self.config_json = json.dumps(_clean(self.echo), sort_keys=True)
        self.meta = f"{VERSION}; config: {self.config_json}"

    def path(self, name):
        os.makedirs(self.dir, exist_ok=True)
        return os.path.join(self.dir, name)

    def json(self, name, payload):
        doc = {"version": VERSION, "config": _clean(self.echo), **_clean(payload)}
        with open(self.path(name), "w") as fh:
            json.dump(doc, fh, sort_keys=True, indent=1)
            fh.write("\n")

    def csv(self, name, fields, rows):
        buf = io.StringIO()
        buf.write(f"# {VERSION}\n# config: {self.config_json}\n")
        w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _cell(v) for k, v in row.items()})
        with open(self.path(name), "w") as fh:
            fh.write(buf.getvalue())

    def svg(self, name, text):
        with open(self.path(name), "w") as fh:
            fh.write(text)


def read_csv(path):
    """Rows of a CSV written by this tool (comment lines skipped)."""
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


# --------------------------------------------------------------- subcommands


def _g(x):
    return f"{x:.12g}"


def cmd_kernel_info(cfg, out, workers):
    spec = spec_from_config(cfg)
    rows = []
    for r in cfg["r"]:
        if r < 0:
            raise ConfigError("r must be >= 0")
        row = {
            "r": r,
            "log_G": K.log_G_real(spec, r),
            "a": K.a_of(spec, r),
            "b": K.b_of(spec, r),
            "rho1": K.first_intensity(spec, math.sqrt(r)),
        }
        rows.append(row)
        print(f"{spec.name}: log G({_g(r)})={_g(row['log_G'])} a({_g(r)})={_g(row['a'])} "
              f"b({_g(r)})={_g(row['b'])} rho1(|z|^2={_g(r)})={_g(row['rho1'])}")
    payload = {"family": spec.name, "closed_form": K.has_closed_form(spec), "values": rows}
    try:
        est = K.lower_order_estimate(spec, np.geomspace(10.0, 1e5, 16))
        payload["lower_order"] = {"B": est.value, "diverging": est.diverging, "level": K.rigidity_level(est)}
    except NumericalError as exc:
        payload["lower_order"] = {"unavailable": str(exc)}
    out.json("kernel_info.json", payload)


def _auto_r_min(spec):
    r = 1.0
    while K.b_of(spec, r) < 10:
        r *= 2
        if r > 1e8:
            raise ConfigError("b stays below 10; give r_min explicitly")
    return r


def cmd_admissibility(cfg, out, workers):
    spec = spec_from_config(cfg)
    if cfg["delta_rule"] not in A.DELTA_RULES:
        raise ConfigError(f"delta_rule must be one of {A.DELTA_RULES}")
    if cfg["r_points"] < 2:
        raise ConfigError("r_points must be >= 2")
    r0 = cfg["r_min"] if cfg["r_min"] is not None else _auto_r_min(spec)
    grid = [r0 * 2.0**j for j in range(cfg["r_points"])]
    rep = A.admissibility_report(spec, grid, delta_rule=cfg["delta_rule"], claim1=cfg["claim1"])
    out.json("admissibility.json", {"report": rep.as_dict()})
    fields = ["r", "b", "delta_hat", "major_arc_err", "minor_arc_ratio", "minor_arc_ratio_quarter", "claim1_ratio"]
    out.csv("admissibility.csv", fields, rep.rows())
    for row in rep.rows():
        print(f"r={_g(row['r'])} delta={_g(row['delta_hat'])} major={_g(row['major_arc_err'])} "
              f"minor={_g(row['minor_arc_ratio'])}")


def cmd_sample_zeros(cfg, out, workers):
    spec = spec_from_config(cfg)
    R = cfg["radius"]
    if not R > 0 or cfg["trials"] < 1:
        raise ConfigError("need radius > 0 and trials >= 1")
    sets = []
    for i in range(cfg["trials"]):
        fn = S.sample_for_radius(spec, R, S.trial_seed(cfg["seed"], i), cfg["tail_tol"])
        sets.append(Z.zeros_in_disk(fn, R))
    rows = [row for zs in sets for row in zs.csv_rows()]
    out.csv("zeros.csv", list(Z.CSV_FIELDS), rows)
    counts = [len(zs) for zs in sets]
    out.json("sample_zeros.json", {
        "expected_count": K.expected_count(spec, R),
        "counts": counts,
        "mean_count": float(np.mean(counts)),
        "disk_radii": [zs.disk_radius for zs in sets],
        "max_residual": max((float(zs.residuals.max()) for zs in sets if len(zs)), default=0.0),
    })
    out.svg("zeros.svg", svg.scatter([("zeros", sets[0].points, "dot")], 1.05 * R,
                                     title=f"zeros of one {spec.name} sample", meta=out.meta, circles=(R,)))
    print(f"{spec.name}: mean count {np.mean(counts):.6g} vs a(R^2) = {K.expected_count(spec, R):.6g}")


def cmd_variance(cfg, out, workers):
    spec = spec_from_config(cfg)
    reports = []
    for L in cfg["L"]:
        tf = LS.TestFunction(cfg["k"], cfg["eta"], L)
        rep = LS.variance_mc(spec, tf, cfg["trials"], cfg["seed"], workers=workers, tail_tol=cfg["tail_tol"])
        reports.append(rep)
        print(f"L={_g(L)} mc={_g(rep.mc_estimate)} +- {_g(rep.mc_stderr)} quadrature={_g(rep.quadrature_value)} "
              f"bound={_g(rep.bound_value)}")
    out.json("variance.json", {"reports": [r.as_dict() for r in reports]})
    fields = ["family", "k", "eta", "L", "trials", "seed", "mc_estimate", "mc_stderr", "quadrature_value", "bound_value"]
    out.csv("variance.csv", fields, ({f: getattr(r, f) for f in fields} for r in reports))
    if len(reports) >= 2:
        Ls = [r.L for r in reports]
        out.svg("variance.svg", svg.loglog(
            [("monte carlo", Ls, [r.mc_estimate for r in reports]),
             ("quadrature", Ls, [r.quadrature_value for r in reports])],
            title="variance vs L", meta=out.meta, xlabel="L", ylabel="Var"))


def cmd_rigidity(cfg, out, workers):
    spec = spec_from_config(cfg)
    rep = RG.rigidity_experiment(spec, cfg["d_radius"], cfg["k_max"], cfg["eta"], cfg["trials"], cfg["seed"],
                                 workers=workers, tail_tol=cfg["tail_tol"])
    doc = rep.as_dict()
    doc["experiment"] = doc.pop("config")
    out.json("rigidity.json", doc)
    fields = ["index", "seed", "error", "true_count", "count_estimate", "recovered_count", "matching_distance"]
    for k in range(cfg["k_max"] + 1):
        fields += [f"S{k}_re", f"S{k}_im", f"S{k}_hat_re", f"S{k}_hat_im"]
    rows = []
    for r in rep.records:
        row = {f: getattr(r, f) for f in fields[:7]}
        for k in range(cfg["k_max"] + 1):
            if r.ok:
                row.update({f"S{k}_re": r.true_power_sums[k].real, f"S{k}_im": r.true_power_sums[k].imag,
                            f"S{k}_hat_re": r.recovered_power_sums[k].real,
                            f"S{k}_hat_im": r.recovered_power_sums[k].imag})
        rows.append(row)
    out.csv("rigidity_trials.csv", fields, rows)
    for r in rep.good[:10]:
        out.svg(f"rigidity_trial_{r.index:03d}.svg", svg.scatter(
            [("true", r.true_points, "dot"), ("reconstructed", r.reconstructed_points, "cross")],
            1.5 * cfg["d_radius"], title=f"trial {r.index}", meta=out.meta, circles=(cfg["d_radius"],)))
    agg = rep.as_dict()["aggregate"]
    print(f"{spec.name}: count success {agg['count_success_rate']}, rms {agg['rms_error']}, "
          f"failed {agg['failed_trials']}")


COMMANDS = {
    "kernel-info": cmd_kernel_info,
    "admissibility": cmd_admissibility,
    "sample-zeros": cmd_sample_zeros,
    "variance": cmd_variance,
    "rigidity": cmd_rigidity,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args.command, args)
        out = Writer(cfg, args.command)
        if args.workers < 1:
            raise ConfigError("workers must be >= 1")
        COMMANDS[args.command](cfg, out, args.workers)
    except NumericalError as exc:
        print(f"error: numerical failure in {exc.op or 'unknown'}: {exc}", file=sys.stderr)
        return 3
    except (GafError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
