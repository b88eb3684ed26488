"""Experiment runner: ``python -m dcxperc <subcommand> [--config file.ini] ...``.

Configuration is an INI file with the sections and keys listed in
``SCHEMA``; unknown sections or keys are rejected.  Command-line flags
``--seed --reps --window --out --threads`` override ``[run]``, and
``--set section.key=value`` overrides anything else.  Every CSV row
carries the seed and a hash of the resolved configuration; with ``--out``
the resolved configuration is also written next to the CSV as ``<out>.ini``
so the artifact can be regenerated with ``--config <out>.ini``.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import io
import json
import math
import re
import sys
from fractions import Fraction

import numpy as np

from . import bounds as bd
from . import discrete as ds
from . import generators as gn
from . import ordering as od
from . import percolation as pc
from . import shotnoise as sn
from .core import RngStream, Window, format_float, write_pattern_csv

SCHEMA = {
    "run": {"seed": int, "reps": int, "window": float, "threads": int, "margin": float, "axis": int},
    "process": {
        "family": str, "intensity": float, "d": int, "lattice": str, "spacing": float,
        "replication": str, "translation": str, "alpha": float, "R": float, "delta": float,
        "mu": float, "a": float, "r_open": float,
    },
    "grid": {"r_grid": str, "gammas": str},
    "estimator": {
        "r": float, "r_lo": float, "r_hi": float, "tol": float, "target_p": float, "k": int,
        "mode": str, "resolution": float, "n": int, "max_len": int, "m": float, "cap": int,
        "threshold": float, "n_list": str,
    },
    "sinr": {"P": float, "N": float, "T": float, "beta": float, "t_max": float, "margin": float,
             "interferers": str},
    "bounds": {"lambda": float, "d": int, "k": int, "r": float, "lambda_ref": float, "rc_ref": float},
    "order": {"chain": str, "cap": int, "tol": float, "table": str, "models": str, "s_grid": str},
    "stats": {"r_grid": str, "boxes": str, "pairs": str},
}

DEFAULTS = {
    "run": {"seed": "0", "reps": "50", "window": "30", "threads": "1", "margin": "0", "axis": "0"},
    "process": {"family": "poisson", "intensity": "1.154701", "d": "2", "lattice": "hexagonal",
                "spacing": "1", "replication": "poisson(1)", "translation": "cell"},
}

HEX_INTENSITY = 2 / math.sqrt(3)


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# configuration


def _num(text: str) -> float:
    return float(Fraction(text.strip())) if "/" in text else float(text)


def parse_grid(text: str) -> list:
    """``start:step:stop`` (inclusive) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        a, h, b = (_num(x) for x in text.split(":"))
        if h <= 0 or b < a:
            raise ConfigError(f"bad grid {text!r}")
        n = int(round((b - a) / h)) + 1
        return [round(a + i * h, 12) for i in range(n)]
    return [_num(x) for x in text.split(",") if x.strip()]


_CALL = re.compile(r"^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$")


def parse_kernel(text: str):
    """``binomial(2,1/2)``, ``poisson(1)``, ``negbinomial(2,1/2)``, ``geometric(1/3)``,
    ``hypergeometric(12,6,4)``, ``dirac(1)``, ``geomixture(0.5|0.5, 1/2|1/4)``."""
    m = _CALL.match(text)
    if not m:
        raise ConfigError(f"cannot parse kernel {text!r}")
    name, args = m.group(1), [a for a in (m.group(2) or "").split(",") if a.strip()]
    try:
        if name == "geomixture":
            w = tuple(_num(x) for x in args[0].split("|"))
            p = tuple(_num(x) for x in args[1].split("|"))
            return gn.GeoMixture(w, p)
        vals = [_num(a) for a in args]
        table = {
            "dirac": lambda: gn.Dirac(int(vals[0]) if vals else 1),
            "binomial": lambda: gn.Binomial(int(vals[0]), vals[1]),
            "poisson": lambda: gn.Poisson(vals[0]),
            "negbinomial": lambda: gn.NegBinomial(vals[0], vals[1]),
            "geometric": lambda: gn.Geometric(vals[0]),
            "hypergeometric": lambda: gn.HyperGeometric(int(vals[0]), int(vals[1]), int(vals[2])),
        }
        if name not in table:
            raise ConfigError(f"unknown kernel {name!r}")
        return table[name]()
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"kernel {text!r}: {exc}") from exc


def parse_translation(text: str, lattice: gn.LatticeSpec):
    m = _CALL.match(text)
    if not m:
        raise ConfigError(f"cannot parse translation kernel {text!r}")
    name, args = m.group(1), [_num(a) for a in (m.group(2) or "").split(",") if a.strip()]
    if name == "cell":
        return gn.UniformCell(lattice)
    if name == "ball":
        return gn.UniformBall(args[0], lattice.d)
    if name == "annulus":
        return gn.UniformAnnulus(args[0], args[1])
    raise ConfigError(f"unknown translation kernel {name!r}")


def parse_box(text: str) -> Window:
    v = [_num(x) for x in text.split()]
    if len(v) % 2 or not v:
        raise ConfigError(f"box needs 2d numbers: {text!r}")
    d = len(v) // 2
    return Window(tuple(v[:d]), tuple(v[d:]))


class Config:
    """Resolved, typed configuration."""

    def __init__(self, raw: dict):
        self.raw = raw

    @classmethod
    def load(cls, path=None, overrides: dict | None = None, defaults: dict | None = None) -> "Config":
        raw = {s: dict(v) for s, v in DEFAULTS.items()}
        for s, v in (defaults or {}).items():
            raw.setdefault(s, {}).update(v)
        if path:
            cp = configparser.ConfigParser(interpolation=None)
            cp.optionxform = str
            with open(path) as fh:
                cp.read_file(fh)
            for section in cp.sections():
                for key, value in cp.items(section):
                    raw.setdefault(section, {})[key] = value
        for (section, key), value in (overrides or {}).items():
            raw.setdefault(section, {})[key] = str(value)
        cfg = cls(raw)
        cfg.validate()
        return cfg

    def validate(self):
        for section, items in self.raw.items():
            if section not in SCHEMA:
                raise ConfigError(f"[{section}]: unknown section")
            for key, value in items.items():
                if key not in SCHEMA[section]:
                    raise ConfigError(f"[{section}] {key}: unknown key")
                try:
                    SCHEMA[section][key](value)
                except ValueError as exc:
                    raise ConfigError(f"[{section}] {key}: {exc}") from exc

    def get(self, section, key, default=None):
        if key in self.raw.get(section, {}):
            value = self.raw[section][key]
            typ = SCHEMA[section][key]
            return _num(value) if typ is float else typ(value)
        return default

    def canonical(self) -> str:
        return json.dumps({s: dict(sorted(v.items())) for s, v in sorted(self.raw.items()) if v},
                          sort_keys=True, separators=(",", ":"))

    def hash(self, subcommand: str) -> str:
        blob = (subcommand + "\n" + self.canonical()).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        for s, v in sorted(self.raw.items()):
            if v:
                cp[s] = dict(sorted(v.items()))
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    # convenient accessors
    @property
    def seed(self) -> int:
        return self.get("run", "seed", 0)

    @property
    def reps(self) -> int:
        reps = self.get("run", "reps", 50)
        if reps < 1:
            raise ConfigError("[run] reps: must be >= 1")
        return reps

    @property
    def threads(self) -> int:
        return max(1, self.get("run", "threads", 1))

    def window(self) -> Window:
        side = self.get("run", "window", 30.0)
        if not side > 0:
            raise ConfigError("[run] window: must be positive")
        return Window.square(side, self.get("process", "d", 2))

    def process(self):
        fam = self.get("process", "family")
        d = self.get("process", "d", 2)
        if fam == "poisson":
            lam = self.get("process", "intensity")
            if lam is None or lam < 0:
                raise ConfigError("[process] intensity: must be >= 0")
            return gn.PoissonProcess(lam, d)
        lattice = gn.LatticeSpec(self.get("process", "lattice", "hexagonal"), self.get("process", "spacing", 1.0), d)
        if fam == "lattice":
            return gn.LatticeProcess(lattice)
        if fam == "perturbed":
            repl = parse_kernel(self.get("process", "replication", "poisson(1)"))
            trans = parse_translation(self.get("process", "translation", "cell"), lattice)
            return gn.PerturbedLattice(lattice, repl, trans)
        if fam == "annular_cox":
            keys = ("alpha", "R", "delta", "mu")
            vals = [self.get("process", k) for k in keys]
            if None in vals:
                raise ConfigError("[process] annular_cox needs alpha, R, delta, mu")
            return gn.AnnularCox(*vals)
        if fam == "counterexample":
            a, r = self.get("process", "a"), self.get("process", "r_open")
            if a is None or r is None:
                raise ConfigError("[process] counterexample needs a and r_open")
            p = gn.counterexample_params(a, r)
            return gn.AnnularCox(p.alpha, p.R, p.delta, p.mu)
        raise ConfigError(f"[process] family: unknown family {fam!r}")


def _process_label(proc) -> str:
    return json.dumps(proc.to_dict(), sort_keys=True, separators=(",", ":"))


# --------------------------------------------------------------------------
# output


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    if v is None:
        return ""
    s = str(v)
    return '"' + s.replace('"', '""') + '"' if ("," in s or '"' in s) else s


class Table:
    def __init__(self, columns, seed, config_hash):
        self.columns = list(columns) + ["seed", "config_hash"]
        self.rows = []
        self.tail = [seed, config_hash]

    def add(self, *values):
        if len(values) + 2 != len(self.columns):
            raise AssertionError("row width differs from header")
        self.rows.append(list(values) + self.tail)

    def text(self) -> str:
        lines = [",".join(self.columns)] + [",".join(_fmt(v) for v in r) for r in self.rows]
        return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# subcommands


def _grid(cfg, default):
    return parse_grid(cfg.get("grid", "r_grid", default))


def cmd_generate(cfg, h):
    proc = cfg.process()
    pat = proc.sample(cfg.window(), RngStream(cfg.seed).derive("generate"), cfg.get("run", "margin", 0.0))
    buf = io.StringIO()
    buf.write(f"# seed {cfg.seed}\n# config_hash {h}\n")
    write_pattern_csv(pat, buf)
    return buf.getvalue()


def cmd_percolate(cfg, h):
    proc = cfg.process()
    r = cfg.get("estimator", "r", 0.55)
    pat = proc.sample(cfg.window(), RngStream(cfg.seed).derive("percolate"), 0.0).restrict()
    st = pc.components(pc.build_gilbert(pat, r), pat, r)
    axes = [f"span_{a}" for a in range(pat.dim)]
    t = Table(["r", "n_points", "n_components", "frac1", "frac2", *axes], cfg.seed, h)
    t.add(r, len(pat), len(st.sizes), st.fraction_largest, st.fraction_second, *st.spans)
    return t.text()


def _sweep_table(rows, seed, h, prefix=()):
    t = Table([*(c for c, _ in prefix), "r", "mean_frac1", "mean_frac2", "p_span", "ci_lo", "ci_hi", "reps"], seed, h)
    for row in rows:
        t.add(*(v for _, v in prefix), row.r, row.mean_frac1, row.mean_frac2, row.p_span, row.ci_lo, row.ci_hi, row.reps)
    return t


def cmd_sweep_r(cfg, h):
    rows = pc.sweep_r(cfg.process(), _grid(cfg, "0.5:0.01:0.7"), cfg.reps, RngStream(cfg.seed).derive("sweep-r"),
                      cfg.window(), cfg.get("run", "axis", 0), cfg.get("run", "margin", 0.0), cfg.threads)
    return _sweep_table(rows, cfg.seed, h).text()


def cmd_estimate_rc(cfg, h):
    est = pc.estimate_rc(
        cfg.process(), cfg.get("estimator", "r_lo", 0.4), cfg.get("estimator", "r_hi", 0.8), cfg.reps,
        cfg.get("estimator", "target_p", 0.5), cfg.get("estimator", "tol", 1e-3),
        RngStream(cfg.seed).derive("estimate-rc"), cfg.window(), cfg.get("run", "axis", 0),
        cfg.get("run", "margin", 0.0), cfg.threads,
    )
    t = Table(["rc", "ci_lo", "ci_hi", "r_lo", "r_hi", "p_lo", "p_hi", "reps"], cfg.seed, h)
    t.add(est.value, est.ci_lo, est.ci_hi, est.r_lo, est.r_hi, est.p_lo, est.p_hi, cfg.reps)
    return t.text()


def cmd_kperc(cfg, h):
    proc = cfg.process()
    k = cfg.get("estimator", "k", 2)
    mode = cfg.get("estimator", "mode", "lattice")
    res = cfg.get("estimator", "resolution", None)
    grid = _grid(cfg, "0.5:0.1:1.5")
    stream = RngStream(cfg.seed).derive("kperc")
    pats = [proc.sample(cfg.window(), stream.derive(i), cfg.get("run", "margin", 0.0)) for i in range(cfg.reps)]
    t = Table(["r", "k", "mode", "p_span", "ci_lo", "ci_hi", "reps"], cfg.seed, h)
    for r in grid:
        resolution = res if res is not None else r / (4 * math.sqrt(pats[0].dim))
        hits = sum(pc.k_coverage_percolates(p, r, k, mode, resolution, cfg.get("run", "axis", 0)) for p in pats)
        lo, hi = pc.wilson_interval(hits, cfg.reps)
        t.add(r, k, mode, hits / cfg.reps, lo, hi, cfg.reps)
    return t.text()


_DISCRETE_COLS = ["r", "value", "ci_lo", "ci_hi", "truncated_rate", "n", "max_len", "m", "reps"]


def cmd_rbar(cfg, h):
    n = cfg.get("estimator", "n", 4)
    L = cfg.get("estimator", "max_len", 12)
    grid = _grid(cfg, "0.3:0.1:1.2")
    value, results = ds.rbar_upper_scan(cfg.process(), n, grid, L, cfg.reps, RngStream(cfg.seed).derive("rbar"),
                                        cfg.threads)
    t = Table(_DISCRETE_COLS + ["tail_bound", "rho_hat", "summable", "rbar_surrogate"], cfg.seed, h)
    for r, res in zip(grid, results):
        t.add(r, res.truncated_sum, res.truncated_sum - 1.96 * res.se, res.truncated_sum + 1.96 * res.se,
              0.0, n, L, None, cfg.reps, res.tail_bound, res.rho_hat, res.summable, value)
    return t.text()


def cmd_rpaths(cfg, h):
    m = cfg.get("estimator", "m", 3.0)
    cap = cfg.get("estimator", "cap", 10 ** 6)
    grid = _grid(cfg, "0.36:0.03:0.48")
    rows = ds.expected_paths_sweep(cfg.process(), grid, m, cfg.reps, cap, RngStream(cfg.seed).derive("rpaths"),
                                   cfg.threads)
    surrogate = ds.paths_surrogate(rows, cfg.get("estimator", "threshold", 0.1))
    t = Table(_DISCRETE_COLS + ["rlow_surrogate"], cfg.seed, h)
    for row in rows:
        t.add(row.r, row.mean, row.ci_lo, row.ci_hi, row.truncated_rate, None, None, m, cfg.reps, surrogate)
    return t.text()


def _response(cfg):
    beta = cfg.get("sinr", "beta", 4.0)
    t_max = cfg.get("sinr", "t_max", None)
    return sn.TruncatedPowerLaw(beta, t_max) if t_max else sn.PowerLaw(beta)


def cmd_sinr_sweep(cfg, h):
    params = sn.SinrParams(cfg.get("sinr", "P", 1.0), cfg.get("sinr", "N", 0.03), cfg.get("sinr", "T", 1.0), 0.0)
    gammas = parse_grid(cfg.get("grid", "gammas", "0,1e-4,1e-3,1e-2,1e-1,1"))
    inter = cfg.get("sinr", "interferers", None)
    inter_cfg = None
    if inter:
        inter_cfg = gn.PoissonProcess(_num(inter))
    rows = sn.sinr_sweep(cfg.process(), params, _response(cfg), gammas, cfg.reps,
                         RngStream(cfg.seed).derive("sinr-sweep"), cfg.window(), cfg.get("sinr", "margin", None),
                         inter_cfg, cfg.get("run", "axis", 0), cfg.threads)
    t = Table(["gamma", "p_span", "ci_lo", "ci_hi", "reps"], cfg.seed, h)
    for row in rows:
        t.add(row.gamma, row.p_span, row.ci_lo, row.ci_hi, row.reps)
    return t.text()


def cmd_bounds(cfg, h):
    lam = cfg.get("bounds", "lambda", HEX_INTENSITY)
    d = cfg.get("bounds", "d", 2)
    k = cfg.get("bounds", "k", 2)
    t = Table(["quantity", "value", "lambda", "d", "k"], cfg.seed, h)
    lo, up = bd.rc_lower(lam, d), bd.rc_upper_tilde(lam, d)
    t.add("rc_lower", lo, lam, d, None)
    t.add("rc_upper_tilde", up, lam, d, None)
    t.add("c_lambda", bd.c_lambda(lam, d), lam, d, None)
    t.add("c_lambda_k", bd.c_lambda_k(lam, k, d), lam, d, k)
    r = cfg.get("bounds", "r", None)
    if r is not None:
        lam_c = bd.critical_intensity(r, cfg.get("bounds", "lambda_ref", HEX_INTENSITY),
                                      cfg.get("bounds", "rc_ref", 0.5576495), d)
        t.add("critical_intensity", lam_c, lam, d, None)
    return t.text()


def _bounds_text(csv_text: str) -> str:
    lines = [l.split(",") for l in csv_text.strip().splitlines()[1:]]
    w = max(len(l[0]) for l in lines)
    return "\n".join(f"{l[0]:<{w}}  {float(l[1]):.6g}" for l in lines) + "\n"


_ORDER_COLS = ["statistic", "config_a", "config_b", "value_a", "value_b", "ci", "flag"]

DEFAULT_CHAINS = (
    "hypergeometric(12,6,4); binomial(6,1/3); binomial(12,1/6); binomial(48,1/24); poisson(2)"
)


def cmd_cx_check(cfg, h):
    cap = cfg.get("order", "cap", 200)
    tol = cfg.get("order", "tol", 1e-12)
    names = [s.strip() for s in cfg.get("order", "chain", DEFAULT_CHAINS).split(";") if s.strip()]
    dists = [od.IntDistribution.from_kernel(parse_kernel(s), cap) for s in names]
    t = Table(_ORDER_COLS, cfg.seed, h)
    for (na, a), (nb, b) in zip(zip(names, dists), zip(names[1:], dists[1:])):
        v = od.cx_order_check(a, b, tol)
        t.add("cx", na, nb, a.mean, b.mean, v.max_gap, v.verdict)
    return t.text()


def _table_arg(text: str) -> np.ndarray:
    return np.array([[_num(x) for x in row.split(",")] for row in text.split(";") if row.strip()])


def cmd_counts_dcx(cfg, h):
    table = gn.EigenTable(_table_arg(cfg.get("order", "table", "0.3,0.2; 0.2,0.1; 0.1,0.3")))
    models = [m.strip() for m in cfg.get("order", "models", "det,poi,perm").split(",")]
    s_grid = parse_grid(cfg.get("order", "s_grid", "0.2,0.5,1.0"))
    battery = [od.ExpPlus((a, b)) for a in s_grid for b in s_grid]
    battery += [od.Ramp(0.0), od.ProductCounts()]
    stream = RngStream(cfg.seed).derive("counts-dcx")
    samples = {m: gn.sample_count_vectors(m, table, cfg.reps, stream.derive(m)) for m in models}
    t = Table(_ORDER_COLS, cfg.seed, h)
    for a, b in zip(models, models[1:]):
        for row in od.dcx_counts_check(samples[a], samples[b], battery):
            t.add(row.name, a, b, row.mean_a, row.mean_b, row.slack, row.consistent)
    return t.text()


def cmd_stats(cfg, h):
    proc = cfg.process()
    label = cfg.get("process", "family")
    stream = RngStream(cfg.seed).derive("stats")
    t = Table(_ORDER_COLS, cfg.seed, h)
    lam = proc.intensity
    r_grid = parse_grid(cfg.get("stats", "r_grid", "0.25,0.5,1.0"))
    ks = np.array([od.ripley_k(proc.sample(cfg.window(), stream.derive("k").derive(i), 0.0), r_grid)
                   for i in range(cfg.reps)])
    for a, r in enumerate(r_grid):
        m = float(np.mean(ks[:, a]))
        se = float(np.std(ks[:, a], ddof=1) / math.sqrt(cfg.reps)) if cfg.reps > 1 else 0.0
        ref = lam * math.pi * r * r
        flag = "sub" if m < ref - 3 * se else ("super" if m > ref + 3 * se else "inconclusive")
        t.add(f"ripley_k({format_float(r)})", label, "poisson", m, ref, 3 * se, flag)
    boxes = [parse_box(b) for b in cfg.get("stats", "boxes", "0 0 1 1; 2 2 4 3").split(";") if b.strip()]
    pairs = []
    for p in cfg.get("stats", "pairs", "0 0 0.5 1 | 0.5 0 1 1").split(";"):
        if p.strip():
            pairs.append(tuple(parse_box(b) for b in p.split("|")))
    for f in od.weak_poisson_report(proc, boxes, cfg.reps, stream.derive("faces"), pairs):
        name = f"{f.face}(" + " | ".join(" ".join(format_float(v) for v in b.lower + b.upper) for b in f.boxes) + ")"
        t.add(name, label, "poisson", f.estimate, f.poisson, 3 * f.sigma, f.label)
    return t.text()


FIG2_N = (1, 2, 3, 5, 10, 20)
FIG4_N = (1, 2, 3, 5, 10)


def _figure(cfg, h, family):
    hexl = gn.LatticeSpec("hexagonal", 1.0)
    n_list = cfg.get("estimator", "n_list", None)
    ns = [int(x) for x in n_list.split(",")] if n_list else list(FIG2_N if family == "binomial" else FIG4_N)
    curves = [("lattice", 0, gn.LatticeProcess(hexl))] if family == "binomial" else []
    for n in ns:
        k = gn.Binomial(n, 1 / n) if family == "binomial" else gn.NegBinomial(n, 1 / (1 + n))
        curves.append((family, n, gn.PerturbedLattice(hexl, k)))
    curves.append(("poisson", "inf", gn.PerturbedLattice(hexl, gn.Poisson(1.0))))
    grid = _grid(cfg, "0.5:0.005:0.7")
    stream = RngStream(cfg.seed).derive(f"figure-{family}")
    t = None
    for fam, n, proc in curves:
        rows = pc.sweep_r(proc, grid, cfg.reps, stream.derive(f"{fam}-{n}"), cfg.window(),
                          cfg.get("run", "axis", 0), 0.0, cfg.threads)
        part = _sweep_table(rows, cfg.seed, h, prefix=(("family", fam), ("n", n)))
        if t is None:
            t = part
        else:
            t.rows.extend(part.rows)
    return t.text()


def cmd_figure2(cfg, h):
    return _figure(cfg, h, "binomial")


def cmd_figure4(cfg, h):
    return _figure(cfg, h, "negbinomial")


COMMANDS = {
    "generate": cmd_generate,
    "percolate": cmd_percolate,
    "sweep-r": cmd_sweep_r,
    "estimate-rc": cmd_estimate_rc,
    "kperc": cmd_kperc,
    "rbar": cmd_rbar,
    "rpaths": cmd_rpaths,
    "sinr-sweep": cmd_sinr_sweep,
    "bounds": cmd_bounds,
    "cx-check": cmd_cx_check,
    "counts-dcx": cmd_counts_dcx,
    "stats": cmd_stats,
    "figure2": cmd_figure2,
    "figure4": cmd_figure4,
}

# full-size presets; flags and config files override them
PRESETS = {
    "figure2": {"run": {"window": "50", "reps": "300"}},
    "figure4": {"run": {"window": "50", "reps": "300"}},
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--seed", type=int)
    common.add_argument("--reps", type=int)
    common.add_argument("--window", type=float, help="side of the square window [0, w]^d")
    common.add_argument("--out", help="write CSV here (and the resolved config to <out>.ini)")
    common.add_argument("--threads", type=int)
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
    parser = argparse.ArgumentParser(prog="dcxperc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "bounds":
            p.add_argument("--lambda", dest="lam", type=float)
            p.add_argument("--d", type=int)
            p.add_argument("--k", type=int)
    return parser


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    overrides = {}
    for key in ("seed", "reps", "window", "threads"):
        v = getattr(args, key)
        if v is not None:
            overrides[("run", key)] = v
    if args.command == "bounds":
        for flag, key in (("lam", "lambda"), ("d", "d"), ("k", "k")):
            v = getattr(args, flag)
            if v is not None:
                overrides[("bounds", key)] = v
    for item in args.set:
        try:
            lhs, value = item.split("=", 1)
            section, key = lhs.split(".", 1)
        except ValueError:
            print(f"config error: --set expects SECTION.KEY=VALUE, got {item!r}", file=stderr)
            return 2
        overrides[(section, key)] = value
    try:
        cfg = Config.load(args.config, overrides, PRESETS.get(args.command))
        h = cfg.hash(args.command)
        text = COMMANDS[args.command](cfg, h)
    except ConfigError as exc:
        print(f"config error: {exc}", file=stderr)
        return 2
    except (ValueError, ArithmeticError, NotImplementedError) as exc:
        print(f"error: {exc}", file=stderr)
        return 1
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
        with open(args.out + ".ini", "w") as fh:
            fh.write(f"# {args.command}\n" + cfg.to_ini())
    else:
        stdout.write(text)
    if args.command == "bounds":
        stderr.write(_bounds_text(text))
    return 0


def main():
    sys.exit(run())
