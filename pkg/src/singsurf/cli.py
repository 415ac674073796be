"""Command-line driver: ``singsurf <command> [flags]``.

Values come from built-in defaults, then a YAML ``--config`` file, then explicit flags;
later sources win.  Every CSV and text file starts with a ``#`` line naming the tool
version and a hash of the effective configuration (``output_dir`` and ``jobs`` excluded,
since they do not change results).  JSON files carry the same line under ``_provenance``.
Without ``--output-dir`` nothing is written to disk and the main CSV goes to stdout.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import yaml

from . import __version__

DEFAULTS = {
    "surface": None,
    "r_min": 1e-3,
    "r_max": None,  # min(0.1, eps0 / 2)
    "n_levels": 16,
    "theta_count": 64,
    "m_override": None,
    "n_terms": 4,
    "eps0": None,
    "output_dir": None,
    "jobs": 1,
    # model family
    "a": None,
    "b": None,
    "metric": None,  # "e,f,g"
    "cutoff": None,  # "inner,outer"
    # mellin
    "re_z": 1.0,
    "monomial": None,  # "a:d,a:d"
    # gauss-bonnet
    "n_halvings": 8,
    "mesh_h": 0.02,
    # resolve
    "germ": None,
    "max_depth": 12,
}
NOT_HASHED = ("output_dir", "jobs")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    values: Dict[str, object] = field(default_factory=dict)

    def __getattr__(self, name):
        try:
            return self.__dict__["values"][name]
        except KeyError:
            raise AttributeError(name) from None

    def validate(self) -> None:
        v = self.values
        if v["r_max"] is not None and not 0 < v["r_min"] < v["r_max"]:
            raise ConfigError("need 0 < r_min < r_max")
        if v["n_levels"] < 4:
            raise ConfigError("n_levels must be at least 4")
        t = v["theta_count"]
        if t < 32 or t & (t - 1):
            raise ConfigError("theta_count must be a power of two >= 32")
        if v["jobs"] < 1:
            raise ConfigError("jobs must be positive")

    def digest(self) -> str:
        data = {k: v for k, v in sorted(self.values.items()) if k not in NOT_HASHED}
        data["command"] = self.command
        return hashlib.sha256(json.dumps(data, sort_keys=True, default=str).encode()).hexdigest()[:16]

    @property
    def header(self) -> str:
        return f"singsurf {__version__} {self.command} config {self.digest()}"


def _cast(key, value):
    if value is None:
        return None
    if key in ("n_levels", "theta_count", "m_override", "n_terms", "jobs", "a", "b", "n_halvings", "max_depth"):
        return int(value)
    if key in ("r_min", "r_max", "eps0", "re_z", "mesh_h"):
        return float(value)
    return str(value)


def load_config(command: str, flags: Dict[str, object], config_path: Optional[str]) -> RunConfig:
    values = dict(DEFAULTS)
    if config_path:
        try:
            raw = yaml.safe_load(Path(config_path).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config file must be a mapping")
        for k, v in raw.items():
            key = str(k).replace("-", "_")
            if key not in DEFAULTS:
                raise ConfigError(f"unknown config key {k!r}")
            values[key] = _cast(key, v)
    for k, v in flags.items():
        if v is not None:
            values[k] = _cast(k, v)
    cfg = RunConfig(command, values)
    cfg.validate()
    return cfg


# --------------------------------------------------------------------------- output


class Output:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.dir = Path(cfg.output_dir) if cfg.output_dir else None
        if self.dir is not None:
            self.dir.mkdir(parents=True, exist_ok=True)

    def text(self, name: str, body: str, stdout: bool = False) -> None:
        """Write a CSV/text file with the provenance line; print it instead without a directory."""
        content = body if body.startswith("# ") else f"# {self.cfg.header}\n{body}"
        if self.dir is not None:
            (self.dir / name).write_text(content)
        elif stdout:
            sys.stdout.write(content)

    def json(self, name: str, data: dict) -> None:
        if self.dir is not None:
            payload = {"_provenance": self.cfg.header, **data}
            (self.dir / name).write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")


def _csv(header: List[str], rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(float(v)) if isinstance(v, (float, np.floating)) else str(v) for v in row))
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------- helpers


def _spec(cfg: RunConfig):
    from .surface_model import resolve_surface

    if not cfg.surface:
        raise ConfigError("--surface is required")
    return resolve_surface(cfg.surface, cfg.eps0)


def _range(cfg: RunConfig, spec):
    from .mellin_asymptotics import default_fit_range

    lo, hi = default_fit_range(spec.eps0, cfg.r_min)
    hi = cfg.r_max if cfg.r_max is not None else hi
    if not 0 < lo < hi:
        raise ConfigError("need 0 < r_min < r_max")
    return lo, hi


def _table(cfg: RunConfig, spec):
    from .link_tracer import length_table

    lo, hi = _range(cfg, spec)
    return length_table(spec, lo, hi, cfg.n_levels, jobs=cfg.jobs)


def _fit_kwargs(cfg: RunConfig, gamma_min=1) -> dict:
    kw = {"n_terms": cfg.n_terms, "gamma_min": gamma_min}
    if cfg.m_override is not None:
        kw["m"] = cfg.m_override
    return kw


def _fit_table(cfg, table):
    from .mellin_asymptotics import fit_table

    return fit_table(table, **_fit_kwargs(cfg))


def _leading_line(cid, fit) -> str:
    g, C, _ = fit.leading
    return f"component {cid}: gamma={g} C={C:.10g} has_log={'true' if fit.has_log else 'false'}"


def _model_family(cfg: RunConfig):
    from .model_flows import ModelFamily

    d = {"a": cfg.a, "b": cfg.b}
    if cfg.metric:
        parts = [s.strip() for s in cfg.metric.split(",")]
        if len(parts) != 3:
            raise ConfigError("--metric takes three entries e,f,g")
        d["metric"] = dict(zip("efg", parts))
    if cfg.cutoff:
        inner, outer = (float(s) for s in cfg.cutoff.split(","))
        d["cutoff"] = {"inner": inner, "outer": outer}
    return ModelFamily.from_config(d)


# --------------------------------------------------------------------------- commands


def cmd_trace(cfg: RunConfig, out: Output) -> int:
    spec = _spec(cfg)
    table = _table(cfg, spec)
    out.text("lengths.csv", table.to_csv(cfg.header), stdout=True)
    if out.dir is not None:
        print(f"{spec.name}: {len(table.component_ids)} components over {cfg.n_levels} levels")
    return 0


def cmd_asymptotics(cfg: RunConfig, out: Output) -> int:
    from .mellin_asymptotics import fit_expansion

    if cfg.a is not None or cfg.b is not None:
        from .model_flows import weighted_length

        if cfg.a is None or cfg.b is None:
            raise ConfigError("model asymptotics need both --a and --b")
        fam = _model_family(cfg)
        hi = cfg.r_max if cfg.r_max is not None else 1e-2
        r = np.geomspace(cfg.r_min, hi, cfg.n_levels)
        l = np.array([weighted_length(fam, float(x)) for x in r])
        fits = {0: fit_expansion(r, l, **_fit_kwargs(cfg, gamma_min=0))}
        series = {0: (r, l)}
        out.text("lengths.csv", _csv(["r", "component_id", "length"], [(x, 0, y) for x, y in zip(r, l)]))
    else:
        spec = _spec(cfg)
        table = _table(cfg, spec)
        fits = _fit_table(cfg, table)
        series = {cid: table.series(cid) for cid in fits}
        out.text("lengths.csv", table.to_csv(cfg.header))
    for cid, fit in fits.items():
        r, l = series[cid]
        out.json(f"expansion_{cid}.json", fit.to_dict())
        out.text(f"expansion_{cid}.txt", fit.to_text())
        model = fit(r)
        out.text(f"fit_{cid}.csv", _csv(["r", "length", "model", "rel_error"],
                                         [(a, b, c, abs(b - c) / abs(b)) for a, b, c in zip(r, l, model)]))
        print(_leading_line(cid, fit))
    return 0


def cmd_gauss_bonnet(cfg: RunConfig, out: Output) -> int:
    from .curvature_gb import gauss_bonnet_report, geodesic_kappa, MissingMetadataError

    spec = _spec(cfg)
    if spec.euler_char is None:
        raise MissingMetadataError(f"{spec.name}: no Euler characteristic known; "
                                   "Gauss-Bonnet needs a catalog surface with topology metadata")
    fits = None
    table = None
    if spec.singular:
        table = _table(cfg, spec)
        fits = _fit_table(cfg, table)
    rep = gauss_bonnet_report(spec, fits, n_halvings=cfg.n_halvings, mesh_h=cfg.mesh_h)
    out.json("gauss_bonnet.json", rep.to_dict())
    out.text("gauss_bonnet.txt", rep.to_text())
    out.text("eps_sequence.csv", rep.k_integral.to_csv(cfg.header))
    if table is not None:
        rows = []
        for (r, cid), c in sorted(table.curves.items()):
            s, a = geodesic_kappa(c, spec)
            rows.append((r, cid, s, a))
        out.text("kappa.csv", _csv(["r", "component_id", "int_kappa", "int_abs_kappa"], rows))
    print(f"{spec.name}: chi={rep.chi} R={rep.R} N={rep.N} int_K={rep.int_K:.8g} "
          f"sum_l={sum(rep.l_values):.8g}")
    print(f"singular residual={rep.chi_singular_residual:.3e} classical residual={rep.chi_classical_residual:.3e} "
          f"chi_l2={rep.chi_l2:.6g} (chi_l2 - chi_gb = {rep.l2_exact.difference}, N - R = {rep.N - rep.R})")
    return 0


def cmd_quasi_iso(cfg: RunConfig, out: Output) -> int:
    from .blowup_resolver import resolve_surface_germ
    from .curvature_gb import geodesic_kappa
    from .quasi_iso import build_phi_grid, classify, constant_ledger_check, defect_curve, model_constants

    spec = _spec(cfg)
    table = _table(cfg, spec)
    lines, summary = [], {"surface": spec.name, "components": {}}
    C1 = max(geodesic_kappa(c, spec)[1] for c in table.curves.values())
    report = resolve_surface_germ(spec, cfg.max_depth)
    C0, k = model_constants(report.model_charts, r_max=float(table.r_grid.max()))
    alphas = []
    for cid in table.component_ids:
        grid = build_phi_grid(spec, cid, theta_count=cfg.theta_count, table=table)
        cur = defect_curve(grid)
        led = constant_ledger_check(grid, C0, C1, k)
        out.text(f"defect_{cid}.csv", cur.to_csv(cfg.header))
        alpha = None if cur.fitted is None else cur.fitted[1]
        alphas.append("noise-floor" if cur.status == "noise-floor" else f"{alpha:.4g}")
        summary["components"][str(cid)] = {
            "status": cur.status, "C": None if cur.fitted is None else cur.fitted[0], "alpha": alpha,
            "delta_max": led.delta, "ledger_bound": led.bound, "ledger_pass": led.passed,
        }
        if cur.status == "noise-floor":
            lines.append(f"component {cid}: defect below measurable threshold")
    if spec.singular:
        dec = classify(_fit_table(cfg, table), lattice_m=report.lattice_m)
        label = dec.to_text()
        summary["classification"] = dec.labels()
        summary["N"] = dec.N
    else:
        label = "smooth point"
        summary["classification"] = []
        summary["N"] = 0
    summary.update({"C0": C0, "C1": C1, "k": k})
    out.json("qi_summary.json", summary)
    out.text("classification.txt", label + "\n")
    print(f"{label}, alpha={','.join(alphas)}")
    for line in lines:
        print(line)
    return 0


def cmd_model(cfg: RunConfig, out: Output) -> int:
    from .model_flows import measure_identity_check, verify_model_bound, weighted_length

    if cfg.a is None or cfg.b is None:
        raise ConfigError("model needs --a and --b")
    fam = _model_family(cfg)
    bound = verify_model_bound(fam.a, fam.b)
    hi = cfg.r_max if cfg.r_max is not None else 0.1
    r = np.geomspace(cfg.r_min, hi, cfg.n_levels)
    rows = [(x, weighted_length(fam, float(x))) for x in r]
    ident = measure_identity_check(fam, (0.05, 0.2), (-0.2, 0.2))
    out.json("model_bound.json", {"a": fam.a, "b": fam.b, "sup": bound.sup, "argmax": list(bound.argmax),
                                  "passed": bound.passed, "measure_identity_rel_diff": ident})
    out.text("model_length.csv", _csv(["r", "weighted_length"], rows), stdout=True)
    print(f"model a={fam.a} b={fam.b}: sup |Psi_r| r^(1-1/(a+b)) = {bound.sup:.12g} "
          f"({'pass' if bound.passed else 'FAIL'})", file=sys.stderr if out.dir is None else sys.stdout)
    return 0 if bound.passed else 1


def cmd_mellin(cfg: RunConfig, out: Output) -> int:
    from .mellin_asymptotics import TableMellin, decay_check, find_poles, monomial_mellin_continuation, table_poles

    spec = _spec(cfg)
    table = _table(cfg, spec)
    fits = _fit_table(cfg, table)
    result = {"surface": spec.name, "components": {}}
    I_list = [1, 2, 4, 8, 16, 32]
    for cid, fit in fits.items():
        r, l = table.series(cid)
        tm = TableMellin(r, l, fit)
        poles = table_poles(tm)
        g = float(fit.gamma)
        power = table_poles(TableMellin(r, l, tail="power"), (-g - 1, -g + 1))
        dec = decay_check(r, l, cfg.re_z, I_list, fit)
        result["components"][str(cid)] = {
            "poles": json.loads(poles.to_json()),
            "power_tail_poles": json.loads(power.to_json()),
            "fitted_exponents": sorted({str(t.i) for t in fit.terms}),
            "decay_slope": dec.slope,
            "decay_pass": dec.passed,
        }
        z = [complex(cfg.re_z, t) for t in np.linspace(0, 32, 65)]
        out.text(f"mellin_line_{cid}.csv", _csv(["im_z", "abs_M"], [(zz.imag, float(np.abs(np.ravel(tm(zz))[0]))) for zz in z]))
        locs = ", ".join(f"{p.z0.real:.6g}(order {p.order})" for p in poles.poles)
        print(f"component {cid}: poles at {locs}; decay slope {dec.slope:.3g} on Re z = {cfg.re_z:g}")
    if cfg.monomial:
        exps = [tuple(float(v) for v in item.split(":")) for item in cfg.monomial.split(",")]
        f = np.vectorize(lambda zz: monomial_mellin_continuation(exps, zz))
        mp = find_poles(f, (-3.3, -0.7))
        result["monomial_poles"] = json.loads(mp.to_json())
        for p in mp.poles:
            print(f"monomial pole {p.z0.real:.6g} order {p.order} residue {p.residue.real:.10g}")
    out.json("mellin.json", result)
    return 0


def cmd_resolve(cfg: RunConfig, out: Output) -> int:
    from .blowup_resolver import link_alpha, monomialize, resolve_surface_germ, verify_consistency
    from .polynomial import parse_polynomial

    if cfg.germ:
        rep = monomialize(parse_polynomial(cfg.germ, ("x", "y")), cfg.max_depth)
    else:
        rep = resolve_surface_germ(_spec(cfg), cfg.max_depth)
    ok = verify_consistency(rep)
    text = rep.to_text()
    out.text("resolution.txt", text)
    sys.stdout.write(text)
    extra = f"consistency: {'ok' if ok else 'FAILED'}; alpha: {rep.alpha}"
    if rep.tracked:
        extra += f"; link alpha: {link_alpha(rep)}"
    print(extra)
    return 0 if ok else 1


COMMANDS = {
    "trace": cmd_trace,
    "asymptotics": cmd_asymptotics,
    "gauss-bonnet": cmd_gauss_bonnet,
    "quasi-iso": cmd_quasi_iso,
    "model": cmd_model,
    "mellin": cmd_mellin,
    "resolve": cmd_resolve,
}

HELP = {
    "trace": "trace links and write the length table",
    "asymptotics": "fit the small-r expansion of link lengths (surface or model family)",
    "gauss-bonnet": "curvature integrals and Gauss-Bonnet residuals",
    "quasi-iso": "quasi-isometry defect curves and cone/horn classification",
    "model": "bound and weighted length of a model curve family",
    "mellin": "poles and vertical decay of the Mellin transform of the link lengths",
    "resolve": "monomialize a plane germ by point blowups",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="singsurf", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"singsurf {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HELP[name], description=HELP[name])
        p.add_argument("--config", help="YAML file with option values (flags override it)")
        p.add_argument("--surface", help="catalog name or polynomial in x, y, z")
        p.add_argument("--eps0", type=float, help="override the local radius")
        p.add_argument("--r-min", type=float, help="smallest radius (default 1e-3)")
        p.add_argument("--r-max", type=float, help="largest radius (default min(0.1, eps0/2))")
        p.add_argument("--n-levels", type=int, help="number of radii (default 16)")
        p.add_argument("--theta-count", type=int, help="angular samples per level, power of two >= 32")
        p.add_argument("--m", dest="m_override", type=int, help="force the exponent lattice 1/m")
        p.add_argument("--n-terms", type=int, help="lattice exponents in the fit (default 4)")
        p.add_argument("--output-dir", help="directory for output files")
        p.add_argument("--jobs", type=int, help="worker processes for tracing (default 1)")
        if name in ("asymptotics", "model"):
            p.add_argument("--a", type=int, help="model exponent a")
            p.add_argument("--b", type=int, help="model exponent b")
            p.add_argument("--metric", help="model metric entries e,f,g as polynomials in x, y")
            p.add_argument("--cutoff", help="cutoff radii inner,outer")
        if name == "mellin":
            p.add_argument("--re-z", type=float, help="real part of the decay line (default 1)")
            p.add_argument("--monomial", help="monomial continuation check, e.g. 1:0 or 1:0,2:1")
        if name == "gauss-bonnet":
            p.add_argument("--n-halvings", type=int, help="eps halvings toward the singular point (default 8)")
            p.add_argument("--mesh-h", type=float, help="marching-cubes spacing (default 0.02)")
        if name in ("resolve", "quasi-iso"):
            p.add_argument("--max-depth", type=int, help="blowup depth limit (default 12)")
        if name == "resolve":
            p.add_argument("--germ", help="plane germ in x, y (instead of --surface)")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    from .blowup_resolver import ResolutionError
    from .curvature_gb import CurvatureError
    from .link_tracer import TraceError
    from .mellin_asymptotics import FitError
    from .model_flows import ModelError
    from .polynomial import PolynomialParseError
    from .quasi_iso import QiError
    from .surface_model import SurfaceSpecError

    args = build_parser().parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        cfg = load_config(args.command, flags, args.config)
        return COMMANDS[args.command](cfg, Output(cfg))
    except PolynomialParseError as exc:
        print(f"error: cannot parse expression: {exc}", file=sys.stderr)
    except (ConfigError, TraceError, FitError, CurvatureError, QiError, ModelError, ResolutionError,
            SurfaceSpecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
