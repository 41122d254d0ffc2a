"""Command-line front end.

Subcommands: ``analytic``, ``mc``, ``sweep``, ``optimize``, ``validate``.
Exit status is 0 on success, 2 for an invalid configuration, 3 when a
validation check fails and 4 on numerical non-convergence.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .analytic import DENSITY_MODES, AnalyticModel, ConvergenceError
from .montecarlo import Simulator, default_threads
from .optimizer import METRICS, argmax_first, optimal_beta, optimal_mu
from .params import (ConfigError, ScenarioConfig, Violation, check_config, config_from_mapping,
                     read_config_file)

EXIT_OK, EXIT_CONFIG, EXIT_VALIDATION, EXIT_NUMERIC = 0, 2, 3, 4

SWEEP_VARIABLES = ("beta", "mu", "lambda_b", "lambda_l", "m_b", "k_b", "snr_db", "tau_db", "frame_len")
OUTPUTS = ("coverage", "ase", "ee", "assoc")


# ------------------------------------------------------------------ config

def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def build_config(path, sets) -> ScenarioConfig:
    """Load defaults or a file, then apply ``key=value`` overrides.

    Overrides use the units declared in the file (or the defaults' units).
    """
    if path is None:
        text = resources.files("ris_stogeo.data").joinpath("defaults.json").read_text()
        raw = json.loads(text)
        units = raw.pop("units")
    else:
        raw, units = read_config_file(path)
    for item in sets or ():
        if "=" not in item:
            raise ConfigError([Violation(item, "override must look like key=value")])
        k, v = item.split("=", 1)
        raw[k.strip()] = _parse_value(v.strip())
    return check_config(config_from_mapping(raw, units))


def apply_sweep_value(cfg: ScenarioConfig, var: str, value: float) -> ScenarioConfig:
    """Sweep values use per-km^2 densities and dB for `*_db` variables."""
    if var == "snr_db":
        return cfg.replace(snr=10 ** (value / 10))
    if var == "tau_db":
        return cfg.replace(tau=10 ** (value / 10))
    if var in ("lambda_b", "lambda_l"):
        return cfg.replace(**{var: value * 1e-6})
    if var == "m_b":
        if value != int(value):
            raise ConfigError([Violation("m_b", "must be a positive integer")])
        return cfg.replace(m_b=int(value))
    return cfg.replace(**{var: float(value)})


# ------------------------------------------------------------------ output

def _emit_json(obj, out):
    text = json.dumps(obj, indent=2, default=_json_default)
    _write(text + "\n", out)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o).__name__)


def _write(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


# ------------------------------------------------------------------ commands

def analytic_record(cfg: ScenarioConfig, density="joint", check=False) -> dict:
    m = AnalyticModel(cfg, density=density)
    ap = m.association_probabilities()
    rec = {
        "tau": cfg.tau,
        "coverage": m.coverage_probability(),
        "ase": m.ase(),
        "ee": m.ee(),
        "p_direct": ap.p_direct,
        "p_reflected": ap.p_reflected,
        "p_outage": ap.p_outage,
        "density": density,
    }
    if check:
        rec["grid_refinement_change"] = m.convergence_check()
    return rec


def mc_record(cfg: ScenarioConfig, trials, seed, threads, mode="per_link") -> dict:
    est = Simulator(cfg, mode).estimate_metrics(trials, seed, threads)
    return {
        "tau": cfg.tau,
        "coverage": est.coverage.value, "coverage_hw": est.coverage.half_width,
        "ase": est.ase.value, "ase_hw": est.ase.half_width,
        "ee": est.ee.value, "ee_hw": est.ee.half_width,
        "p_direct": est.assoc_freq[0], "p_reflected": est.assoc_freq[1], "p_outage": est.assoc_freq[2],
        "n_trials": est.n_trials, "seed": seed, "mode": mode,
    }


@dataclass
class SweepSpec:
    variable: str
    values: list
    outputs: tuple = ("coverage", "ase", "ee")
    engine: str = "analytic"
    mc_trials: int = 10_000
    master_seed: int = 1

    def validate(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ConfigError([Violation("variable", f"must be one of {SWEEP_VARIABLES}")])
        if len(self.values) < 2:
            raise ConfigError([Violation("values", "need at least two sweep values")])
        if self.engine not in ("analytic", "montecarlo", "both"):
            raise ConfigError([Violation("engine", "must be analytic, montecarlo or both")])
        bad = [o for o in self.outputs if o not in OUTPUTS]
        if bad:
            raise ConfigError([Violation("outputs", f"unknown {bad}")])


def parse_values(text: str) -> list:
    """``a,b,c`` or ``start:stop:count[:lin|log]``."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) not in (3, 4):
            raise ConfigError([Violation("values", "range must be start:stop:count[:lin|log]")])
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
        if n < 2:
            raise ConfigError([Violation("values", "count must be at least 2")])
        kind = parts[3] if len(parts) == 4 else "lin"
        if kind == "log":
            return list(np.geomspace(a, b, n))
        return list(np.linspace(a, b, n))
    return [float(v) for v in text.split(",") if v.strip()]


def _metric_columns(outputs):
    cols = []
    for o in outputs:
        if o == "assoc":
            cols += ["p_direct", "p_reflected", "p_outage"]
        else:
            cols += [o, f"{o}_hw"]
    return cols


def run_sweep(spec: SweepSpec, cfg: ScenarioConfig, threads=None, timing: bool = True) -> str:
    """CSV table, one row per (engine, value).  Apart from `wall_time`,
    which can be blanked with ``timing=False``, the output is deterministic."""
    spec.validate()
    engines = ["analytic", "montecarlo"] if spec.engine == "both" else [spec.engine]
    cols = ["variable", "value", "engine"] + _metric_columns(spec.outputs) + ["wall_time", "optimum", "error"]
    analytic_pool = (threads or 1) > 1 and spec.engine == "analytic"

    def point(args):
        engine, value = args
        row = {"variable": spec.variable, "value": value, "engine": engine, "error": ""}
        t0 = time.perf_counter()
        try:
            c = check_config(apply_sweep_value(cfg, spec.variable, value))
            if engine == "analytic":
                rec = analytic_record(c)
            else:
                rec = mc_record(c, spec.mc_trials, spec.master_seed, 1 if analytic_pool else threads)
            for col in cols:
                if col in rec:
                    row[col] = rec[col]
        except (ConfigError, ConvergenceError, ValueError) as exc:
            row["error"] = str(exc)
        row["wall_time"] = time.perf_counter() - t0
        return row

    jobs = [(e, v) for e in engines for v in spec.values]
    if analytic_pool:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(point, jobs))
    else:
        rows = [point(j) for j in jobs]

    # mark, per engine, the rows that maximise each metric (e.g. "ase;ee")
    for r in rows:
        r["optimum"] = []
    for e in engines:
        for metric in (o for o in spec.outputs if o != "assoc"):
            sub = [r for r in rows if r["engine"] == e and not r["error"] and metric in r]
            if sub:
                sub[argmax_first([r[metric] for r in sub])]["optimum"].append(metric)
    for r in rows:
        r["optimum"] = ";".join(r["optimum"])
        if not timing:
            r["wall_time"] = ""

    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({c: _fmt(r.get(c, "")) for c in cols})
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def run_optimize(cfg: ScenarioConfig, target: str, metric: str = "ase", method: str = "scan",
                 resolution: int = 11) -> dict:
    if target == "beta":
        res = optimal_beta(cfg, method)
        return {"target": "beta", "value": res.beta_star, "objective": res.objective,
                "method": res.method,
                "diagnostics": dict(res.diagnostics, residual=res.residual, boundary=res.boundary)}
    if target == "mu":
        res = optimal_mu(cfg, metric, resolution)
        return {"target": "mu", "value": res.mu_star, "objective": res.objective, "method": "grid",
                "diagnostics": {"metric": metric, "grid": res.grid, "curve": res.curve}}
    raise ValueError("target must be beta or mu")


def run_validate(cfg: ScenarioConfig, mc_trials: int, master_seed: int, threads=None):
    from .validation import run_all

    return run_all(cfg, mc_trials, master_seed, threads)


# ------------------------------------------------------------------ argparse

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (defaults to the built-in scenario)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config field, in the units declared by the config")
    common.add_argument("--out", default="-", help="output path, '-' for stdout")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: RIS_STOGEO_THREADS or CPU count)")
    common.add_argument("--seed", type=int, default=1, help="master seed for simulation")

    p = argparse.ArgumentParser(prog="ris-stogeo", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analytic", parents=[common], help="analytic coverage, ASE, EE")
    a.add_argument("--density", choices=DENSITY_MODES, default="joint")
    a.add_argument("--check", action="store_true", help="verify by grid refinement")

    m = sub.add_parser("mc", parents=[common], help="Monte Carlo estimates")
    m.add_argument("--trials", type=int, default=100_000)
    m.add_argument("--mode", choices=("per_link", "per_bs"), default="per_link")

    s = sub.add_parser("sweep", parents=[common], help="sweep one variable, CSV output")
    s.add_argument("--var", required=True, choices=SWEEP_VARIABLES,
                   help="densities in per km^2; *_db in dB")
    s.add_argument("--values", required=True, help="a,b,c or start:stop:count[:lin|log]")
    s.add_argument("--outputs", default="coverage,ase,ee")
    s.add_argument("--engine", choices=("analytic", "montecarlo", "both"), default="analytic")
    s.add_argument("--trials", type=int, default=10_000)
    s.add_argument("--no-timing", action="store_true", help="leave the wall_time column empty")

    o = sub.add_parser("optimize", parents=[common], help="optimal beta or mu")
    o.add_argument("--target", choices=("beta", "mu"), required=True)
    o.add_argument("--metric", choices=METRICS, default="ase")
    o.add_argument("--method", choices=("scan", "root"), default="scan")
    o.add_argument("--resolution", type=int, default=11)

    v = sub.add_parser("validate", parents=[common], help="analytic vs simulation oracle suite")
    v.add_argument("--trials", type=int, default=100_000)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    threads = args.threads or default_threads()
    try:
        cfg = build_config(args.config, args.set)
        if args.command == "analytic":
            _emit_json(analytic_record(cfg, args.density, args.check), args.out)
        elif args.command == "mc":
            _emit_json(mc_record(cfg, args.trials, args.seed, threads, args.mode), args.out)
        elif args.command == "sweep":
            spec = SweepSpec(args.var, parse_values(args.values),
                             tuple(x.strip() for x in args.outputs.split(",") if x.strip()),
                             args.engine, args.trials, args.seed)
            _write(run_sweep(spec, cfg, threads, not args.no_timing), args.out)
        elif args.command == "optimize":
            _emit_json(run_optimize(cfg, args.target, args.metric, args.method, args.resolution), args.out)
        elif args.command == "validate":
            results = run_validate(cfg, args.trials, args.seed, threads)
            lines = [r.line() for r in results]
            _write("\n".join(lines) + "\n", args.out)
            if not all(r.passed for r in results):
                return EXIT_VALIDATION
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"numerical non-convergence: {exc} (achieved {exc.achieved})", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
