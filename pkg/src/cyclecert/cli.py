"""Command-line interface.

Subcommands (each takes a JSON config file):
  certify    run the full checklist; JSON verdict to stdout, optional orbit CSV
  scan       sweep a parameter grid of a model family; region CSV
  cycle      locate the cycle only; CycleInfo JSON + orbit CSV
  lipschitz  gap/Lipschitz report as JSON
  norms      per-grid-point norm table as CSV

Exit codes: 0 certified/complete, 2 refuted, 3 inconclusive, 1 usage or
config error.
"""

import argparse
import csv
import itertools
import json
import sys as _sys

import numpy as np

from . import systems
from .certify import CertifyConfig, certify
from .equilibria import find_equilibria
from .expressions import ExpressionError, parse_system
from .flow import CycleSearchError, CycleSettings, locate_cycle
from .linalg import norm_1, norm_2, norm_inf
from .lipschitz import gap_report, region_scan
from .systems import BoxDomain, ModelError, apply_change


class ConfigError(ValueError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"config field {field!r}: {message}")


def _get(cfg, field, default=None, required=False, kind=None):
    if field not in cfg:
        if required:
            raise ConfigError(field, "missing required field")
        return default
    value = cfg[field]
    if kind is not None and not isinstance(value, kind):
        names = kind if isinstance(kind, tuple) else (kind,)
        raise ConfigError(
            field, f"expected {'/'.join(k.__name__ for k in names)}, "
            f"got {type(value).__name__}")
    return value


def _build_model(cfg):
    model = _get(cfg, "model", required=True, kind=str)
    params = _get(cfg, "params", default={}, kind=dict)
    if model == "satellite":
        try:
            sys_ = systems.satellite_system(
                float(params.get("mu1", 0.05)), float(params.get("mu2", 0.05)),
                float(params.get("mu3", 2.1)))
        except (ModelError, ValueError, TypeError) as exc:
            raise ConfigError("params", str(exc)) from exc
        auto = systems.satellite_domain(
            float(params.get("mu1", 0.05)), float(params.get("mu2", 0.05)),
            float(params.get("mu3", 2.1)))
    elif model == "cell":
        try:
            k = float(params.get("k", 3.0))
            q = float(params.get("q", 0.1))
            T = float(params.get("T", 10.0))
            L = float(params.get("L", 1e6))
            sys_ = systems.cell_system(k, q, T=T, L=L)
            auto = systems.cell_domain(k, q, T=T, L=L)
        except (ModelError, ValueError, TypeError) as exc:
            raise ConfigError("params", str(exc)) from exc
    elif model == "hopf":
        try:
            sys_ = systems.hopf_oracle(
                float(params.get("omega", 1.0)), float(params.get("lambda_z", 1.0)))
        except (ModelError, ValueError, TypeError) as exc:
            raise ConfigError("params", str(exc)) from exc
        auto = systems.hopf_domain()
    elif model == "custom":
        expressions = _get(cfg, "expressions", required=True, kind=list)
        A = _get(cfg, "A", required=True, kind=list)
        try:
            sys_ = parse_system(expressions, np.asarray(A, dtype=float),
                                analytic=bool(cfg.get("analytic", False)))
        except ExpressionError as exc:
            raise ConfigError("expressions", str(exc)) from exc
        except (ValueError, TypeError) as exc:
            raise ConfigError("A", str(exc)) from exc
        auto = None
    else:
        raise ConfigError("model", f"unknown model {model!r}")
    return sys_, auto


def _build_domain(cfg, auto):
    dom_cfg = _get(cfg, "domain", default="auto")
    if dom_cfg == "auto":
        if auto is None:
            raise ConfigError("domain", "'auto' unavailable for custom models")
        return auto
    if not isinstance(dom_cfg, dict):
        raise ConfigError("domain", "must be 'auto' or {lower: [...], upper: [...]}")
    try:
        return BoxDomain(lower=np.asarray(dom_cfg["lower"], dtype=float),
                         upper=np.asarray(dom_cfg["upper"], dtype=float))
    except KeyError as exc:
        raise ConfigError(f"domain.{exc.args[0]}", "missing") from exc
    except ValueError as exc:
        raise ConfigError("domain", str(exc)) from exc


def _build_certify_config(cfg):
    gap = _get(cfg, "gap", default={}, kind=dict)
    cyc = _get(cfg, "cycle", default={}, kind=dict)
    try:
        return CertifyConfig(
            m=int(gap.get("m", 2)), grid=int(gap.get("grid", 32)),
            refine=int(gap.get("refine", 3)),
            tol_rel=float(cyc.get("tol_rel", 1e-9)),
            tol_abs=float(cyc.get("tol_abs", 1e-12)),
            transient_factor=float(cyc.get("transient_factor", 50.0)),
            n_samples=int(cyc.get("n_samples", 2048)),
            seed=int(_get(cfg, "seed", default=0, kind=(int,))),
            analytic=cfg.get("analytic"),
            cone_check=bool(cfg.get("cone_check", False)),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError("gap/cycle", str(exc)) from exc


def _write_orbit_csv(path, ts, samples):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        n = samples.shape[1]
        w.writerow(["t"] + [f"x{i + 1}" for i in range(n)])
        for t, row in zip(ts, samples):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in row])


def _load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError("<file>", str(exc)) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("<json>", f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    return cfg


def _cmd_certify(cfg):
    sys_, auto = _build_model(cfg)
    dom = _build_domain(cfg, auto)
    ccfg = _build_certify_config(cfg)
    verdict = certify(sys_, dom, ccfg)
    print(json.dumps(verdict.to_dict(), indent=2))
    orbit_csv = _get(cfg, "orbit_csv", kind=str)
    if orbit_csv and verdict.conclusion is not None:
        # re-sample the located orbit for export
        eq = np.asarray(verdict.hypothesis_i["equilibria"][0]["x_s"])
        settings = CycleSettings(tol_rel=ccfg.tol_rel, tol_abs=ccfg.tol_abs,
                                 transient_factor=ccfg.transient_factor,
                                 n_samples=ccfg.n_samples)
        cycle = locate_cycle(sys_, dom, eq, settings)
        _write_orbit_csv(orbit_csv, cycle.t_samples, cycle.samples)
    if verdict.overall == "certified":
        return 0
    if verdict.overall.startswith("refuted"):
        return 2
    return 3


def _scan_points(cfg, n_params):
    scan = _get(cfg, "scan", default={}, kind=dict)
    if "points" in scan:
        return [tuple(map(float, p)) for p in scan["points"]]
    if "linspace" in scan:
        axes = []
        for spec in scan["linspace"]:
            axes.append(np.linspace(float(spec["start"]), float(spec["stop"]),
                                    int(spec["count"])))
        if len(axes) != n_params:
            raise ConfigError("scan.linspace",
                              f"expected {n_params} parameter axes")
        return list(itertools.product(*axes))
    raise ConfigError("scan", "needs 'points' or 'linspace'")


def _cmd_scan(cfg):
    model = _get(cfg, "model", required=True, kind=str)
    if model not in ("satellite", "cell"):
        raise ConfigError("model", "scan supports 'satellite' or 'cell'")
    n_params = 3 if model == "satellite" else 2
    points = _scan_points(cfg, n_params)
    out = _get(cfg, "output_csv", kind=str)
    rows = region_scan(model, points, csv_path=out)
    if out is None:
        w = csv.writer(_sys.stdout)
        fields = sorted({k for r in rows for k in r})
        w.writerow(fields)
        for r in rows:
            w.writerow([r.get(k, "") for k in fields])
    return 0


def _gap_objects(cfg):
    sys_, auto = _build_model(cfg)
    dom = _build_domain(cfg, auto)
    gap = _get(cfg, "gap", default={}, kind=dict)
    change = sys_.gap_change
    gsys = apply_change(sys_, change) if change is not None else sys_
    pmap = change.forward if change is not None else None
    rep = gap_report(gsys, dom, m=int(gap.get("m", 2)),
                     grid=int(gap.get("grid", 32)),
                     refine_levels=int(gap.get("refine", 3)), point_map=pmap)
    return sys_, dom, gsys, pmap, rep


def _cmd_lipschitz(cfg):
    _, _, _, _, rep = _gap_objects(cfg)
    print(json.dumps(rep.to_dict(), indent=2))
    return 0


def _cmd_norms(cfg):
    sys_, auto = _build_model(cfg)
    dom = _build_domain(cfg, auto)
    gap = _get(cfg, "gap", default={}, kind=dict)
    grid = int(gap.get("grid", 8))
    change = sys_.gap_change
    gsys = apply_change(sys_, change) if change is not None else sys_
    pmap = change.forward if change is not None else (lambda p: p)
    out = _get(cfg, "output_csv", kind=str)
    fh = open(out, "w", newline="", encoding="utf-8") if out else _sys.stdout
    try:
        w = csv.writer(fh)
        n = dom.n
        w.writerow([f"x{i + 1}" for i in range(n)]
                   + ["norm_1", "norm_inf", "norm_2", "k_bound"])
        for p in dom.grid(grid):
            x = pmap(p)
            J = np.asarray(gsys.jac_F(x), dtype=float)
            n1, ni, n2 = norm_1(J), norm_inf(J), norm_2(J)
            w.writerow([repr(float(v)) for v in x]
                       + [repr(n1), repr(ni), repr(n2), repr(float(np.sqrt(n1 * ni)))])
    finally:
        if out:
            fh.close()
    return 0


def _cmd_cycle(cfg):
    sys_, auto = _build_model(cfg)
    dom = _build_domain(cfg, auto)
    ccfg = _build_certify_config(cfg)
    eqs = find_equilibria(sys_, dom)
    unstable = [e for e in eqs if e.unstable]
    if not unstable:
        print(json.dumps({"error": "no unstable equilibrium in the domain"}))
        return 3
    settings = CycleSettings(tol_rel=ccfg.tol_rel, tol_abs=ccfg.tol_abs,
                             transient_factor=ccfg.transient_factor,
                             n_samples=ccfg.n_samples)
    try:
        cycle = locate_cycle(sys_, dom, unstable[0].x_s, settings)
    except CycleSearchError as exc:
        print(json.dumps({"error": str(exc), "reason": exc.reason}))
        return 3
    summary = {
        "anchor": cycle.anchor.tolist(), "period": cycle.period,
        "period_lower_bound": cycle.period_lower_bound,
        "closure_error": cycle.closure_error,
        "multipliers": [[v.real, v.imag] for v in cycle.multipliers],
        "stability": cycle.verdict, "stable": cycle.stable,
        "n_samples": int(cycle.samples.shape[0]),
    }
    print(json.dumps(summary, indent=2))
    orbit_csv = _get(cfg, "orbit_csv", kind=str)
    if orbit_csv:
        _write_orbit_csv(orbit_csv, cycle.t_samples, cycle.samples)
    return 0


_COMMANDS = {
    "certify": _cmd_certify,
    "scan": _cmd_scan,
    "cycle": _cmd_cycle,
    "lipschitz": _cmd_lipschitz,
    "norms": _cmd_norms,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="cyclecert",
        description="Certify and locate stable limit cycles of ODE systems.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="path to a JSON config file")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        cfg = _load_config(args.config)
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
