"""Command line front end.

Usage::

    avglab run CONFIG.json [--out DIR] [--seed N]
    avglab --bounds CONFIG.json [--out DIR]
    avglab --plot RESULT.json

``run`` exits with 0 when every check of the scenario passes, 1 when a
threshold check fails and 2 on configuration or runtime errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import bounds, experiments
from .integrator import IntegratorConfig, METHODS
from .models import MODELS, PROFILES, ForcingSpec, ResonanceError, SimParams

__all__ = ["RunConfig", "ConfigError", "parse_config", "serialize_config", "run_scenario", "dispatch",
           "compute_bounds", "emit_plot_script", "main"]

AVERAGING_SCENARIOS = ("averaging_gap", "burgers_scaling")
FORCING_KEYS = {"k", "re", "im", "profile", "omega_slow", "phase"}


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class RunConfig:
    """Everything needed to run one scenario.

    ``alpha`` is the mean flow for single-point scenarios, ``alphas`` the
    sweep of magnitudes and ``alpha_dirs`` the directions used by the 2D
    scenario.  Integrator fields left at ``None`` use the defaults of
    :class:`avglab.integrator.IntegratorConfig` and of each scenario.
    """

    scenario: str
    model: str = "burgers"
    nu: float = 1.0
    m: int = 16
    alpha: float | list = 0.0
    alphas: list = field(default_factory=list)
    alpha_dirs: list = field(default_factory=list)
    forcing: list = field(default_factory=list)
    s_V: float = 6.0
    h0: float = 0.1
    ic_pairs: int = 3
    C_hat: float = 0.0
    E_tilde: float | None = None
    omega: float = 10.0
    h: float = 1.0
    ibp_n: int = 2
    method: str = "IF-RK4"
    dt: float | None = None
    sample_every: float | None = None
    t_end: float | None = None
    out: str = "results"
    seed: int = 0

    def params(self, alpha=None) -> SimParams:
        return SimParams(self.nu, self.alpha if alpha is None else alpha, self.m, self.model)

    def forcing_spec(self) -> ForcingSpec:
        return ForcingSpec.build(self.model, self.forcing, self.s_V)

    def integrator(self, t_end: float = 1.0) -> IntegratorConfig:
        return IntegratorConfig(t_end=t_end, dt=self.dt, method=self.method,
                                sample_every=self.sample_every)


_FIELDS = {f.name: f for f in fields(RunConfig)}
_NUMBER = (int, float)


def _is_num(x) -> bool:
    return isinstance(x, _NUMBER) and not isinstance(x, bool) and math.isfinite(x)


def _vec_ok(x, d) -> bool:
    if d == 1:
        return _is_num(x) or (isinstance(x, list) and len(x) == 1 and _is_num(x[0]))
    return isinstance(x, list) and len(x) == d and all(_is_num(c) for c in x)


def _as_vec(x, d):
    return np.asarray([x] if _is_num(x) else x, dtype=float).reshape(d)


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON configuration.

    Raises :class:`ConfigError` carrying every validation error at once.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"invalid JSON: {exc}"]) from None
    if not isinstance(raw, dict):
        raise ConfigError(["configuration must be a JSON object"])
    errors = []
    for key in raw:
        if key not in _FIELDS:
            errors.append(f"unknown key {key!r}")
    if "scenario" not in raw:
        errors.append("missing required key 'scenario'")
    elif raw["scenario"] not in experiments.SCENARIOS:
        errors.append(f"unknown scenario {raw['scenario']!r}, expected one of {experiments.SCENARIOS}")
    model = raw.get("model", "burgers")
    if model not in MODELS:
        errors.append(f"unknown model {model!r}, expected one of {tuple(MODELS)}")
        model = None
    d = MODELS[model][0] if model else None

    def num(key, positive=False, integer=False, optional=False):
        if key not in raw:
            return
        v = raw[key]
        if v is None and optional:
            return
        if not _is_num(v) or (integer and int(v) != v):
            errors.append(f"{key} must be {'an integer' if integer else 'a finite number'}, got {v!r}")
        elif positive and not v > 0:
            errors.append(f"{key} must be positive, got {v!r}")

    num("nu", positive=True)
    num("m", positive=True, integer=True)
    num("s_V", positive=True)
    num("h0", positive=True)
    num("ic_pairs", positive=True, integer=True)
    num("C_hat")
    num("E_tilde", positive=True, optional=True)
    num("omega")
    num("h", positive=True)
    num("ibp_n", positive=True, integer=True)
    num("dt", positive=True, optional=True)
    num("sample_every", positive=True, optional=True)
    num("t_end", positive=True, optional=True)
    num("seed", integer=True)
    if "omega" in raw and _is_num(raw["omega"]) and raw["omega"] == 0:
        errors.append("omega must be nonzero")
    if raw.get("method", "IF-RK4") not in METHODS:
        errors.append(f"unknown method {raw.get('method')!r}, expected one of {METHODS}")
    if not isinstance(raw.get("out", ""), str):
        errors.append("out must be a string")

    if d is not None:
        if "alpha" in raw and not _vec_ok(raw["alpha"], d):
            errors.append(f"alpha must be a {d}-vector for model {model}")
        alphas = raw.get("alphas", [])
        if not isinstance(alphas, list) or not all(_is_num(a) for a in alphas):
            errors.append("alphas must be a list of numbers")
            alphas = []
        dirs = raw.get("alpha_dirs", [])
        if not isinstance(dirs, list) or not all(_vec_ok(v, d) for v in dirs):
            errors.append(f"alpha_dirs must be a list of {d}-vectors")
            dirs = []
        elif any(not np.any(_as_vec(v, d)) for v in dirs):
            errors.append("alpha_dirs entries must be nonzero")
            dirs = []

        entries = raw.get("forcing", [])
        good = []
        if not isinstance(entries, list):
            errors.append("forcing must be a list of mode entries")
            entries = []
        for i, e in enumerate(entries):
            bad = _forcing_entry_errors(e, d, MODELS[model][1])
            errors += [f"forcing[{i}]: {b}" for b in bad]
            if not bad:
                good.append(e)
        spec = None
        try:
            spec = ForcingSpec.build(model, good, raw.get("s_V", 6.0) if _is_num(raw.get("s_V", 6.0)) else 6.0)
        except ValueError as exc:
            errors.append(f"forcing: {exc}")
        if spec is not None:
            m = raw.get("m", 16)
            if _is_num(m) and spec.max_k > m:
                errors.append(f"m={m} is below the largest forced |k| = {spec.max_k:g}")
            scen = raw.get("scenario")
            if scen in AVERAGING_SCENARIOS and _is_num(raw.get("s_V", 6.0)) and raw.get("s_V", 6.0) <= 5:
                errors.append(f"s_V must exceed 5 for scenario {scen}, got {raw['s_V']}")
            if scen in ("averaging_gap", "burgers_scaling", "attraction_rate"):
                if d == 1:
                    checks = [np.array([a]) for a in alphas]
                else:
                    checks = [a * _as_vec(v, d) / np.linalg.norm(_as_vec(v, d)) for v in dirs for a in alphas]
                if scen == "attraction_rate" and _vec_ok(raw.get("alpha", 0.0), d):
                    checks = [_as_vec(raw.get("alpha", 0.0), d)]
                errors += _resonance_errors(spec, checks)
            if scen == "nse2d":
                errors += _resonance_errors(spec, [_as_vec(v, d) for v in dirs])
        if raw.get("scenario") == "nse2d" and model != "nse2d":
            errors.append("scenario nse2d requires model nse2d")
        if raw.get("scenario") == "burgers_scaling" and model != "burgers":
            errors.append("scenario burgers_scaling requires model burgers")
        if raw.get("scenario") in ("burgers_scaling", "averaging_gap", "nse2d") and not alphas:
            errors.append(f"scenario {raw.get('scenario')} needs a non-empty alphas list")
        if raw.get("scenario") == "nse2d" and not dirs:
            errors.append("scenario nse2d needs at least one entry in alpha_dirs")
        if raw.get("scenario") == "averaging_gap" and model == "nse2d" and not dirs:
            errors.append("averaging_gap for nse2d needs alpha_dirs")
        if raw.get("scenario") == "toy_ode" and not alphas:
            errors.append("scenario toy_ode needs a non-empty alphas list")
    if errors:
        raise ConfigError(errors)
    kw = dict(raw)
    if "alpha" in kw and isinstance(kw["alpha"], list) and d == 1:
        kw["alpha"] = float(kw["alpha"][0])
    elif d > 1:
        kw["alpha"] = [float(c) for c in kw.get("alpha", [0.0] * d)]
    return RunConfig(**kw)


def _forcing_entry_errors(e, d, n) -> list:
    if not isinstance(e, dict):
        return ["entry must be an object"]
    out = [f"unknown key {k!r}" for k in e if k not in FORCING_KEYS]
    k = e.get("k")
    kv = [k] if _is_num(k) else k
    if not isinstance(kv, list) or len(kv) != d or not all(_is_num(c) and int(c) == c for c in kv):
        out.append(f"k must be an integer {d}-vector")
    elif not any(kv):
        out.append("k = 0 cannot be forced")
    for key in ("re", "im"):
        if key in e:
            v = e[key]
            if not (_is_num(v) or (isinstance(v, list) and len(v) == n and all(_is_num(c) for c in v))):
                out.append(f"{key} must be a number or a list of {n} numbers")
    if e.get("profile", "constant") not in PROFILES:
        out.append(f"unknown profile {e.get('profile')!r}, expected one of {PROFILES}")
    for key in ("omega_slow", "phase"):
        if key in e and not _is_num(e[key]):
            out.append(f"{key} must be a number")
    return out


def _resonance_errors(spec: ForcingSpec, alphas) -> list:
    out = []
    for a in alphas:
        try:
            spec.check_nonresonant(a)
        except ResonanceError as exc:
            out.append(f"resonant configuration at alpha={np.round(a, 12).tolist()}: {exc}")
    return out


def serialize_config(cfg: RunConfig) -> str:
    """JSON text that :func:`parse_config` maps back to an equal config."""
    return json.dumps(asdict(cfg), indent=2)


# ---------------------------------------------------------------------------
# Running scenarios
# ---------------------------------------------------------------------------

def run_scenario(cfg: RunConfig, out_dir=None, seed=None):
    """Run the configured scenario and write its outputs.

    Returns ``(result, paths)``.
    """
    seed = cfg.seed if seed is None else seed
    forcing = cfg.forcing_spec()
    integ = IntegratorConfig(t_end=1.0, dt=cfg.dt, method=cfg.method, sample_every=cfg.sample_every)
    s = cfg.scenario
    if s == "toy_ode":
        res = experiments.run_toy_ode(cfg.nu, cfg.alphas, integ)
    elif s == "averaging_gap":
        d = 1 if cfg.model == "burgers" else 2
        alist = cfg.alphas if d == 1 else [
            a * np.asarray(v, float) / np.linalg.norm(v) for v in cfg.alpha_dirs for a in cfg.alphas]
        res = experiments.run_averaging_gap(cfg.params(), forcing, alist, cfg.h0, C_hat=cfg.C_hat,
                                            seed=seed, config=integ)
    elif s == "burgers_scaling":
        res = experiments.run_burgers_scaling(cfg.nu, forcing, cfg.alphas, cfg.m, t_end=cfg.t_end,
                                              config=integ, E_tilde=cfg.E_tilde)
    elif s == "attraction_rate":
        res = experiments.run_attraction_rate(cfg.params(), forcing, cfg.alpha, cfg.ic_pairs,
                                              seed=seed, t_end=cfg.t_end, config=integ)
    elif s == "nse2d":
        res = experiments.run_nse2d(cfg.nu, forcing, cfg.alpha_dirs, cfg.alphas, cfg.m,
                                    t_end=cfg.t_end, config=integ)
    elif s == "ibp_identity":
        res = experiments.run_ibp_identity({"nu": cfg.nu, "n": cfg.ibp_n}, cfg.omega, cfg.h)
    else:  # parse_config rejects unknown names
        raise ValueError(f"unknown scenario {s!r}")
    res.meta["seed"] = seed
    paths = res.write(cfg.out if out_dir is None else out_dir)
    return res, paths


def compute_bounds(cfg: RunConfig) -> bounds.BoundsReport:
    """Closed-form constants for the configured model, forcing and ``alphas``."""
    rep = bounds.BoundsReport()
    forcing = cfg.forcing_spec()
    A_V, B_V, s_V = forcing.envelope()
    rep.add("A_V", A_V, s_V=s_V)
    rep.add("B_V", B_V, s_V=s_V)
    if cfg.model == "burgers":
        E0 = forcing.sup_energy() / cfg.nu ** 2
        E_tilde = cfg.E_tilde if cfg.E_tilde is not None else (2 * E0 if E0 > 0 else 1.0)
        tc = bounds.burgers_trapping_constants(E_tilde, 2.0, cfg.nu, forcing)
        for key in ("E0", "D", "N", "C_min"):
            rep.add(key, tc[key], E_tilde=E_tilde, s=2.0, nu=cfg.nu)
        for lvl in bounds.burgers_absorbing_sequence(E_tilde, cfg.nu, forcing, 4, eps=0.0):
            rep.add(f"C_{lvl.i}", lvl.C, s=lvl.s, E_tilde=E_tilde, nu=cfg.nu)
        C_hat = tc["D"] * math.sqrt(E_tilde)
        for a in cfg.alphas:
            if a == 0:
                continue
            p = cfg.params(a)
            rep.add(f"Delta(alpha={a:g})", bounds.averaging_delta(forcing, 0.0, cfg.h0, a, p, C_hat=C_hat),
                    "lattice-sum", l=0.0, h0=cfg.h0, C_hat=C_hat)
            if s_V > 5:
                e1 = bounds.burgers_E1(A_V, B_V, s_V, cfg.nu, a, C_hat)
                rep.add(f"sqrt_E1(alpha={a:g})", e1, "lattice-sum", C_hat=C_hat)
                rep.add(f"attractor_radius(alpha={a:g})", bounds.attractor_radius(e1), "lattice-sum")
    else:
        V_star = forcing.sup_enstrophy() / cfg.nu ** 2
        rep.add("V_star", V_star, nu=cfg.nu)
        for v in cfg.alpha_dirs:
            mn, arg = bounds.nonresonance_scan(v, 100)
            rep.add(f"min|k.alpha|/|alpha| dir={list(v)}", mn / float(np.linalg.norm(v)), K=100, argmin=arg)
    return rep


# ---------------------------------------------------------------------------
# Plotting
# ---------------------------------------------------------------------------

_PLOTS = {
    "toy_ode": ("alpha", ["trailing_mean", "exact"], "logscale xy"),
    "averaging_gap": ("alpha", ["sup_gap", "delta"], "logscale xy"),
    "burgers_scaling": ("alpha", ["trailing_sup", "attractor_radius"], "logscale xy"),
    "nse2d": ("alpha", ["trailing_sup", "trailing_gradbound"], "logscale xy"),
}


def _header(path: Path) -> list:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ValueError(f"{path} has no data rows")
    return rows[0]


def emit_plot_script(result_path) -> Path:
    """Write a gnuplot script next to a result JSON and return its path.

    Scaling scenarios are drawn on log-log axes; the attraction scenario
    plots each distance series on a logarithmic y axis.  Only columns that
    exist in the CSV headers are referenced.
    """
    result_path = Path(result_path)
    summary = json.loads(result_path.read_text())
    name = summary.get("name")
    folder = result_path.parent
    lines = ["set terminal pngcairo size 900,600", f"set output '{name}.png'", "set grid",
             "set datafile separator ','", "set key left bottom"]
    plots = []
    if name == "attraction_rate":
        lines.append("set logscale y")
        lines += ["set xlabel 't'", "set ylabel 'distance'"]
        for label in summary.get("series", []):
            p = folder / f"{name}_{label}.csv"
            head = _header(p)
            if "t" in head and "distance" in head:
                plots.append(f"'{p.name}' using {head.index('t') + 1}:{head.index('distance') + 1} "
                             f"with lines title '{label}'")
    else:
        p = folder / f"{name}_points.csv"
        if not p.exists():
            raise ValueError(f"{result_path} has no per-point table to plot")
        head = _header(p)
        x, ys, scale = _PLOTS.get(name, (head[0], head[1:], ""))
        if scale:
            lines.append(f"set {scale}")
        if x not in head:
            raise ValueError(f"column {x!r} missing from {p.name}")
        lines += [f"set xlabel '{x}'"]
        for y in ys:
            if y in head:
                plots.append(f"'{p.name}' using {head.index(x) + 1}:{head.index(y) + 1} "
                             f"with linespoints title '{y}'")
    if not plots:
        raise ValueError(f"nothing to plot for {result_path}")
    lines.append("plot " + ", \\\n     ".join(plots))
    script = folder / f"{name}.gp"
    script.write_text("\n".join(lines) + "\n")
    return script


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="avglab", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", nargs="?", choices=["run"], help="run the scenario in CONFIG")
    ap.add_argument("config", nargs="?", help="JSON configuration file")
    ap.add_argument("--bounds", metavar="CONFIG", help="print closed-form constants for CONFIG")
    ap.add_argument("--plot", metavar="RESULT", help="write a gnuplot script for a result JSON")
    ap.add_argument("--out", metavar="DIR", help="output directory (overrides the config)")
    ap.add_argument("--seed", type=int, help="random seed (overrides the config)")
    return ap


def _load(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc}"]) from None
    return parse_config(text)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.plot:
            print(emit_plot_script(args.plot))
            return 0
        if args.bounds:
            cfg = _load(args.bounds)
            rep = compute_bounds(cfg)
            text = rep.to_json()
            out = Path(args.out or cfg.out)
            out.mkdir(parents=True, exist_ok=True)
            (out / "bounds.json").write_text(text)
            print(text)
            return 0
        if args.command != "run" or not args.config:
            _parser().print_usage(sys.stderr)
            print("avglab: error: expected 'run CONFIG', '--bounds CONFIG' or '--plot RESULT'",
                  file=sys.stderr)
            return 2
        cfg = _load(args.config)
    except ConfigError as exc:
        _report(exc)
        return 2
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return dispatch(cfg, args.out, args.seed)


def _report(exc: ConfigError) -> None:
    for e in exc.errors:
        print(f"config error: {e}", file=sys.stderr)


def dispatch(cfg, out_dir=None, seed=None) -> int:
    """Run a scenario and return the exit code.

    ``cfg`` is a :class:`RunConfig` or JSON text.  Returns 0 when every
    check passes, 1 on a threshold failure and 2 on configuration or runtime
    errors, which are written to stderr.
    """
    try:
        if isinstance(cfg, str):
            cfg = parse_config(cfg)
        res, paths = run_scenario(cfg, out_dir, seed)
    except ConfigError as exc:
        _report(exc)
        return 2
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for c in res.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.value:.6g} ({c.threshold})")
    print(f"results written to {paths['json']}")
    return 0 if res.passed else 1
