"""Command-line front end: ``solve``, ``sweep``, ``example`` and ``metrics``.

Configuration is an INI file (see README for the schema).  Exit codes:
0 when every assertion passes, 1 for configuration errors, 2 for solver
failures and 3 when a run completes with failed assertions.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import re
import sys
from dataclasses import dataclass, fields
from functools import lru_cache
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .experiments import (
    EXAMPLES,
    Instance,
    run_example,
    run_map_sweep,
    run_sharpness,
    run_value_sweep,
)
from .maps import PiecewiseAffineMap
from .metrics import MetricRecord, disc_p, map_distance_p, oscillation_sum
from .partitions import discretize, singleton_partition, uniform_interval_partition
from .projections import barycentric_projection, gm_projection
from .solver import SolverError, plan_cost, solve_entropic, solve_exact
from .spaces import FiniteMeasure, FiniteSpace, Interval, Measure1D, get_cost
from .transforms import SemidiscreteVersion, bad_set_mass

log = logging.getLogger("discrete_ot")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_FAILED = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config


@dataclass
class RunConfig:
    """Flat view of an INI run configuration; all fields keep their text form."""

    x: str = "interval:0:1"
    y: str = "interval:0:1"
    mu: str = "uniform(0,1)"
    nu: str = "uniform(0,1)"
    cost: str = "quadratic"
    k_star: str = ""
    t_star: str = ""
    k: str = "8"
    anchors_x: str = "center"
    anchors_y: str = "center"
    solver: str = "exact"
    eps_target: str = "1e-3"
    projection: str = "B"
    p: str = "2"
    deltas: str = "0.02,0.05,0.1,0.2,0.4"
    sweep: str = "value"
    final_threshold: str = ""
    out: str = ""
    seed: str = "0"

    SECTIONS = {
        "problem": ("x", "y", "mu", "nu", "cost", "k_star", "t_star"),
        "partition": ("k", "anchors_x", "anchors_y"),
        "solver": ("solver", "eps_target"),
        "projection": ("projection",),
        "metrics": ("p", "deltas"),
        "sweep": ("sweep", "final_threshold"),
        "output": ("out", "seed"),
    }

    @classmethod
    def from_ini(cls, text: str) -> "RunConfig":
        cp = configparser.ConfigParser(interpolation=None)
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from exc
        known = {f.name for f in fields(cls)}
        values = {}
        for section in cp.sections():
            if section not in cls.SECTIONS:
                raise ConfigError(f"unknown section [{section}]")
            for key, val in cp.items(section):
                if key not in cls.SECTIONS[section] or key not in known:
                    raise ConfigError(f"unknown key {key!r} in [{section}]")
                values[key] = val.strip()
        cfg = cls(**values)
        cfg.validate()
        return cfg

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        for section, keys in self.SECTIONS.items():
            cp[section] = {k: getattr(self, k) for k in keys}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def validate(self) -> None:
        self.space(self.x)
        self.space(self.y)
        self.measure("mu")
        self.measure("nu")
        self.cost_fn()
        if self.solver not in ("exact", "entropic"):
            raise ConfigError(f"unknown solver {self.solver!r}")
        if self.projection not in ("B", "GM"):
            raise ConfigError("projection must be B or GM")
        if self.sweep not in ("value", "map"):
            raise ConfigError("sweep must be value or map")
        self.k_list()
        self.t_star_map()
        for name in ("eps_target", "p", "seed"):
            _number(getattr(self, name), name)

    # parsed views ---------------------------------------------------------

    @staticmethod
    def space(spec: str):
        return _parse_space(spec)

    def measure(self, which: str):
        space = self.space(self.x if which == "mu" else self.y)
        return parse_measure(getattr(self, which), space)

    def cost_fn(self):
        try:
            return get_cost(self.cost)
        except (KeyError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def k_list(self):
        try:
            ks = [int(v) for v in self.k.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad k list {self.k!r}") from exc
        if not ks or any(k < 1 for k in ks):
            raise ConfigError("k must list positive integers")
        return ks

    def t_star_map(self) -> Optional[PiecewiseAffineMap]:
        if not self.t_star:
            return None
        kind, _, rest = self.t_star.partition(":")
        if kind != "affine":
            raise ConfigError("t_star must be of the form affine:slope,intercept")
        try:
            a, b = (float(v) for v in rest.split(","))
        except ValueError as exc:
            raise ConfigError(f"bad t_star {self.t_star!r}") from exc
        return PiecewiseAffineMap.affine(a, b, self.space(self.x).whole())

    def anchors(self, which: str, k: int):
        rule = self.anchors_x if which == "x" else self.anchors_y
        if rule.startswith("shift:"):
            return np.full(k, _number(rule[6:], "anchor shift"))
        if rule not in ("center", "left", "right"):
            raise ConfigError(f"unknown anchor rule {rule!r}")
        return rule

    def instance(self) -> Instance:
        X, Y = self.space(self.x), self.space(self.y)
        if not (isinstance(X, Interval) and isinstance(Y, Interval)):
            raise ConfigError("sweeps need interval spaces")
        k_star = _number(self.k_star, "k_star") if self.k_star else None
        return Instance("config", X, Y, self.measure("mu"), self.measure("nu"), self.cost_fn(),
                        k_star, self.t_star_map())


def _abs_diff(a, b):
    return np.abs(np.subtract.outer(a, b))


@lru_cache(maxsize=64)
def _parse_space(spec: str):
    # cached so that measures and partitions built from one spec share a space
    kind, _, rest = spec.partition(":")
    try:
        if kind == "interval":
            lo, hi = (float(v) for v in rest.split(":"))
            return Interval(lo, hi)
        if kind == "points":
            return FiniteSpace.from_points([float(v) for v in rest.split(",")], _abs_diff)
    except ValueError as exc:
        raise ConfigError(f"bad space {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown space kind in {spec!r}")


def _number(text: str, name: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{name} must be a number, got {text!r}") from None


_TERM = re.compile(r"^\s*(?:([0-9.eE+-]+)\s*\*\s*)?(delta|uniform|weights)\(([^)]*)\)\s*$")


def parse_measure(spec: str, space):
    """Parse ``0.5*delta(-2) + 0.5*uniform(-1,0)`` or ``weights(0.3,0.7)``."""
    terms = [t for t in re.split(r"\+(?![^(]*\))", spec) if t.strip()]
    atoms, dens = [], []
    for term in terms:
        m = _TERM.match(term)
        if not m:
            raise ConfigError(f"cannot parse measure term {term!r}")
        try:
            weight = float(m.group(1)) if m.group(1) else 1.0
            args = [float(v) for v in m.group(3).split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"bad number in measure term {term!r}") from None
        kind = m.group(2)
        if kind == "weights":
            if not isinstance(space, FiniteSpace):
                raise ConfigError("weights(...) needs a points: space")
            try:
                return FiniteMeasure(space, np.asarray(args) * weight)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        if kind == "delta":
            if len(args) != 1:
                raise ConfigError("delta takes one location")
            atoms.append((args[0], weight))
        else:
            if len(args) != 2:
                raise ConfigError("uniform takes two bounds")
            lo, hi = args
            dens.append((lo, hi, weight / (hi - lo)))
    if isinstance(space, FiniteSpace):
        raise ConfigError("finite spaces take weights(...)")
    try:
        return Measure1D(space, tuple(atoms), tuple(dens))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# output helpers


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def summary_json(experiment: str, records) -> str:
    doc = {"version": __version__, "experiment": experiment,
           "records": [_jsonable(r.to_dict()) for r in records]}
    return json.dumps(doc, indent=2, sort_keys=True)


def records_csv(records, leading=("k", "h", "cost", "gap", "bound")) -> str:
    rows = [r for r in records if "k" in r.params or "h" in r.params]
    keys = []
    for r in rows:
        for key, val in list(r.params.items()) + list(r.values.items()):
            if np.isscalar(val) and not isinstance(val, str) and key not in keys:
                keys.append(key)
    lead = [k for k in leading if k in keys]
    rest = sorted(k for k in keys if k not in lead)
    cols = ["experiment"] + lead + rest + ["pass"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        merged = {**r.params, **r.values}
        w.writerow([r.experiment] + [_fmt(merged.get(c, "")) for c in lead + rest]
                   + [str(r.passed).lower()])
    return buf.getvalue()


def _write(out: Optional[str], name: str, text: str) -> None:
    if not out:
        return
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    (path / name).write_text(text)


def _finish(records, experiment: str, out: Optional[str]) -> int:
    _write(out, f"{experiment}.csv", records_csv(records))
    _write(out, f"{experiment}.json", summary_json(experiment, records))
    failed = [(r.experiment, a.name) for r in records for a in r.assertions if not a.passed]
    for exp, name in failed:
        print(f"FAIL {exp}: {name}", file=sys.stderr)
    n = sum(len(r.assertions) for r in records)
    print(f"{experiment}: {n - len(failed)}/{n} assertions passed")
    return EXIT_OK if not failed else EXIT_FAILED


# ---------------------------------------------------------------------------
# commands


def _discretized(cfg: RunConfig, k: int):
    X, Y = cfg.space(cfg.x), cfg.space(cfg.y)
    mu, nu = cfg.measure("mu"), cfg.measure("nu")
    if isinstance(X, FiniteSpace):
        P = singleton_partition(X, mu)
    else:
        P = uniform_interval_partition(X, k, cfg.anchors("x", k))
    if isinstance(Y, FiniteSpace):
        Q = singleton_partition(Y, nu)
    else:
        Q = uniform_interval_partition(Y, k, cfg.anchors("y", k))
    return discretize(mu, P), discretize(nu, Q)


def _solve(cfg: RunConfig, k: int):
    mu_h, nu_h = _discretized(cfg, k)
    c = cfg.cost_fn()
    if cfg.solver == "exact":
        plan, cert = solve_exact(mu_h, nu_h, c)
    else:
        plan, cert = solve_entropic(mu_h, nu_h, c, float(cfg.eps_target))
    return plan, cert, c


def cmd_solve(cfg: RunConfig, k: Optional[int] = None) -> int:
    k = k if k is not None else cfg.k_list()[0]
    plan, cert, c = _solve(cfg, k)
    K = plan_cost(plan, c)
    _write(cfg.out, "plan.json", plan.to_json(cert))
    _write(cfg.out, "plan.csv", plan.to_csv())
    print("cost %.17g" % K)
    print("gap %.17g" % cert.gap)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, jobs: int = 1) -> int:
    inst = cfg.instance()
    ks = cfg.k_list()
    final = float(cfg.final_threshold) if cfg.final_threshold else None
    if cfg.sweep == "value":
        recs = run_value_sweep(inst, ks, cfg.solver, float(cfg.eps_target), jobs, final)
    else:
        recs = run_map_sweep(inst, ks, cfg.projection, float(cfg.p),
                             tuple(float(v) for v in cfg.deltas.split(",")), cfg.solver,
                             float(cfg.eps_target), jobs, final)
    return _finish(recs, f"sweep-{cfg.sweep}", cfg.out)


def cmd_example(name: str, ks, p: float, out: Optional[str], jobs: int = 1,
                seed: int = 0) -> int:
    if name == "sharpness":
        recs = run_sharpness(seed=seed)
        return _finish(recs, name, out)
    if name not in EXAMPLES:
        known = ", ".join(sorted(EXAMPLES) + ["sharpness"])
        raise ConfigError(f"unknown example {name!r}; known: {known}")
    recs = run_example(name, ks, p, jobs)
    return _finish(recs, name, out)


def cmd_metrics(cfg: RunConfig) -> int:
    """Solve at the first ``k`` and report projection metrics against ``t_star``."""
    inst = cfg.instance()
    if inst.t_star is None:
        raise ConfigError("metrics needs t_star")
    k = cfg.k_list()[0]
    plan, cert, c = _solve(cfg, k)
    T = barycentric_projection(plan) if cfg.projection == "B" else gm_projection(plan)
    p = float(cfg.p)
    recs = [MetricRecord("cost", plan_cost(plan, c), "exact-sum", cert.gap)]
    dp = map_distance_p(T, inst.t_star, inst.mu, p)
    recs.append(MetricRecord(f"d_{p:g}", dp.value, dp.method, dp.delta))
    recs.append(MetricRecord(f"disc_{p:g}", disc_p(T, inst.t_star, p), "exact-sum", 0.0))
    recs.append(MetricRecord(f"osc_{p:g}", oscillation_sum(inst.t_star, plan.source.partition, p),
                             "exact-piecewise", 0.0))
    sd = SemidiscreteVersion(plan)
    for d in (float(v) for v in cfg.deltas.split(",")):
        est = bad_set_mass(sd, inst.t_star, d)
        recs.append(MetricRecord(f"bad_set[{d:g}]", est.value, est.method, est.delta))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["name", "value", "method", "tolerance"])
    for r in recs:
        w.writerow([r.name, _fmt(r.value), r.method, _fmt(r.tolerance)])
    _write(cfg.out, "metrics.csv", buf.getvalue())
    sys.stdout.write(buf.getvalue())
    return EXIT_OK


def _parse_k(text: Optional[str]):
    if not text:
        return None
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad --k list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="discrete-ot", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("solve", "sweep", "metrics"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--k")
        sp.add_argument("--jobs", type=int, default=1)
    ex = sub.add_parser("example")
    ex.add_argument("name")
    ex.add_argument("--k")
    ex.add_argument("--p", type=float, default=1.0)
    ex.add_argument("--out")
    ex.add_argument("--seed", type=int)
    ex.add_argument("--jobs", type=int, default=1)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "example":
            return cmd_example(args.name, _parse_k(args.k), args.p, args.out, args.jobs,
                               args.seed or 0)
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        cfg = RunConfig.from_ini(text)
        if args.out:
            cfg.out = args.out
        if args.seed is not None:
            cfg.seed = str(args.seed)
        if args.k:
            cfg.k = ",".join(str(k) for k in _parse_k(args.k))
            cfg.k_list()
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.jobs)
        return cmd_metrics(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
