"""Command-line experiment runner.

Subcommands ``simulate``, ``check``, ``converge`` and ``gh`` read a JSON
experiment file and write CSV tables plus a JSON manifest.  Every output is
a function of (config, seed) only, so re-running reproduces the files byte
for byte.

Exit codes: 0 success, 2 configuration error, 3 runtime failure or a
statistical control that did not come out as expected.
"""
from __future__ import annotations

import argparse
import json
import math
import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import heavy_tail as ht
from ._lp import INF
from .chain_space import sample_grid_chain
from .diagnostics import (
    StepFunction,
    check_B,
    check_C,
    check_laplace_functional,
    check_tail_function,
    ks_two_sample,
    ks_vs_cdf,
)
from .generators import ConfigError, ModelKind, ModelSpec, tail_measure_of, validate_scheme
from .gh import gh_bounds, gh_exact, ORACLE_CAP
from .io import (
    ChainFileError,
    atomic_write_text,
    chain_points_text,
    csv_text,
    json_text,
    read_chain_points_csv,
)
from .limit_process import limit_chain, sample_cluster_process
from .svgplot import write_line_plot

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

# stream tags: replicate k of the prelimit chain at grid index g uses
# stream(seed, PRELIMIT, scheme, g, k); limit draws use LIMIT
PRELIMIT, LIMIT = 0, 1


class ControlFailure(RuntimeError):
    """A statistical control did not produce its expected verdict."""


def _parse_p(value) -> float:
    if isinstance(value, str):
        if value.lower() in ("inf", "infinity"):
            return INF
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"p must be a number or 'inf', got {value!r}") from None
    if isinstance(value, (int, float)):
        return float(value)
    raise ConfigError(f"p must be a number or 'inf', got {value!r}")


def _req(d: dict, key: str, kind, where: str):
    if key not in d:
        raise ConfigError(f"{where}: missing required field '{key}'")
    v = d[key]
    if kind is float and isinstance(v, int) and not isinstance(v, bool):
        v = float(v)
    if not isinstance(v, kind) or isinstance(v, bool):
        raise ConfigError(f"{where}: field '{key}' must be {kind.__name__}")
    return v


@dataclass
class ExperimentConfig:
    """Validated experiment description (see README for the JSON layout)."""

    model: ModelSpec
    raw_model: dict
    scheme: str = "maxima"
    p: float = INF
    T: float = 1.0
    n_grid: list = field(default_factory=list)
    s: float = 1e-3
    s_grid: list = field(default_factory=list)
    grid_points: int = 11
    replicates: int = 100
    seed: int | None = None
    out: str | None = None
    plots: bool = False
    dense_budget: int = 1 << 22
    export_chains: int = 0
    check: dict = field(default_factory=dict)
    schemes: list = field(default_factory=list)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {
            "schema_version", "model", "scheme", "p", "T", "n", "n_grid", "s", "s_grid",
            "grid_points", "replicates", "seed", "out", "plots", "dense_budget",
            "export_chains", "check", "schemes",
        }
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config fields: {', '.join(unknown)}")
        version = data.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version}")
        m = data.get("model")
        if not isinstance(m, dict):
            raise ConfigError("config: 'model' must be an object")
        p = _parse_p(data.get("p", "inf"))
        kind = _req(m, "kind", str, "model")
        tail = _req(m, "tail", float, "model")
        beta = float(m.get("beta", 1.0))
        weights = m.get("weights", "uniform")
        if weights != "uniform":
            raise ConfigError("model.weights: only 'uniform' is available from a config file")
        spec = ModelSpec(kind, tail, beta, p, "uniform")
        scheme = str(data.get("scheme", "maxima")).lower()
        if scheme not in ("maxima", "walk"):
            raise ConfigError("scheme must be 'maxima' or 'walk'")
        schemes = [str(x).lower() for x in data.get("schemes", [scheme])]
        for sc in schemes:
            if sc not in ("maxima", "walk"):
                raise ConfigError("schemes entries must be 'maxima' or 'walk'")
            validate_scheme(spec, sc)
        n_grid = data.get("n_grid")
        if n_grid is None:
            n_grid = [data["n"]] if "n" in data else []
        if not isinstance(n_grid, list) or not all(isinstance(n, int) and n >= 1 for n in n_grid):
            raise ConfigError("n_grid must be a list of positive integers")
        if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
            raise ConfigError("n_grid must be increasing")
        T = float(data.get("T", 1.0))
        if not T > 0:
            raise ConfigError("T must be positive")
        s = float(data.get("s", 1e-3))
        if not s > 0:
            raise ConfigError("s must be positive")
        s_grid = [float(x) for x in data.get("s_grid", [])]
        if any(not x > 0 for x in s_grid):
            raise ConfigError("s_grid entries must be positive")
        replicates = data.get("replicates", 100)
        if not isinstance(replicates, int) or replicates < 0:
            raise ConfigError("replicates must be a nonnegative integer")
        grid_points = data.get("grid_points", 11)
        if not isinstance(grid_points, int) or grid_points < 2:
            raise ConfigError("grid_points must be an integer >= 2")
        seed = data.get("seed")
        if seed is not None and (not isinstance(seed, int) or not 0 <= seed < 2**64):
            raise ConfigError("seed must be an unsigned 64-bit integer")
        check = data.get("check", {})
        if not isinstance(check, dict):
            raise ConfigError("check must be an object")
        return cls(
            model=spec, raw_model=dict(m), scheme=scheme, p=p, T=T, n_grid=list(n_grid), s=s,
            s_grid=s_grid, grid_points=grid_points, replicates=replicates, seed=seed,
            out=data.get("out"), plots=bool(data.get("plots", False)),
            dense_budget=int(data.get("dense_budget", 1 << 22)),
            export_chains=int(data.get("export_chains", 0)), check=dict(check), schemes=schemes,
        )

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "model": self.raw_model,
            "scheme": self.scheme,
            "schemes": self.schemes,
            "p": "inf" if self.p == INF else self.p,
            "T": self.T,
            "n_grid": self.n_grid,
            "s": self.s,
            "s_grid": self.s_grid,
            "grid_points": self.grid_points,
            "replicates": self.replicates,
            "seed": self.seed,
            "plots": self.plots,
            "dense_budget": self.dense_budget,
            "export_chains": self.export_chains,
            "check": self.check,
        }

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.grid_points)

    def require_limit(self):
        tm = tail_measure_of(self.model)
        if not math.isfinite(tm.tail_mass(1.0, self.p)):
            raise ConfigError(
                f"{self.model.kind.value} has no tail measure for p={self.p}; use p = inf"
            )
        return tm


def load_config(path, seed=None, out=None) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    cfg = ExperimentConfig.from_dict(data)
    if seed is not None:
        cfg.seed = int(seed)
    if out is not None:
        cfg.out = str(out)
    if cfg.seed is None:
        raise ConfigError("a seed is required (config field 'seed' or --seed)")
    if cfg.out is None:
        raise ConfigError("an output directory is required (config field 'out' or --out)")
    return cfg


def _manifest(cfg: ExperimentConfig, command: str, outputs: dict, extra: dict | None = None) -> str:
    body = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "versions": {
            "heavymetric": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "outputs": outputs,
    }
    if extra:
        body.update(extra)
    return json_text(body)


def _map(fn, items, threads: int):
    items = list(items)
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def _scheme_id(scheme: str) -> int:
    return 0 if scheme == "maxima" else 1


# ---------------------------------------------------------------- simulate

def _one_replicate(cfg: ExperimentConfig, scheme: str, gi: int, n: int, k: int):
    """Prelimit chain and an independent limit chain for replicate k."""
    grid = cfg.grid
    chain = sample_grid_chain(cfg.model, scheme, n, cfg.T, grid,
                              ht.stream(cfg.seed, PRELIMIT, _scheme_id(scheme), gi, k),
                              dense_budget=cfg.dense_budget)
    tm = tail_measure_of(cfg.model)
    proc = sample_cluster_process(tm, cfg.T, cfg.s, cfg.p, ht.stream(cfg.seed, LIMIT, _scheme_id(scheme), gi, k))
    lim = limit_chain(proc, grid)
    if chain.points is not None:
        est = gh_bounds(chain, lim)
        gh = (est.lower, est.upper)
    else:
        gh = (math.nan, math.nan)
    return chain, lim, gh


def cmd_simulate(cfg: ExperimentConfig, threads: int = 1) -> dict:
    """Per-replicate functionals of the prelimit chain at n = n_grid[-1]."""
    cfg.require_limit()
    if not cfg.n_grid:
        raise ConfigError("simulate needs 'n' or 'n_grid'")
    out = Path(cfg.out)
    n = cfg.n_grid[-1]
    gi = len(cfg.n_grid) - 1
    grid = cfg.grid
    d = cfg.model.dimension(n)
    results = _map(lambda k: _one_replicate(cfg, cfg.scheme, gi, n, k), range(cfg.replicates), threads)
    header = ["replicate", "n", "d", "a_n", "diameter"] + [f"rho_t{t:g}" for t in grid] + ["gh_lower", "gh_upper"]
    rows = []
    for k, (chain, _lim, gh) in enumerate(results):
        rows.append([k, n, d, cfg.model.a_n(n), chain.diameter, *chain.origin_distances.tolist(), *gh])
    outputs = {"simulate.csv": header}
    atomic_write_text(out / "simulate.csv", csv_text(header, rows))
    for k in range(min(cfg.export_chains, len(results))):
        chain = results[k][0]
        if chain.points is not None:
            name = f"chain_{k}.csv"
            atomic_write_text(out / name, chain_points_text(chain))
            outputs[name] = ["index", "time", "x1..."]
    if cfg.plots and results:
        prof = np.mean([r[0].origin_distances for r in results], axis=0)
        limp = np.mean([r[1].distances_from_origin() for r in results], axis=0)
        write_line_plot(out / "profile.svg", grid, {"prelimit": prof, "limit": limp},
                        title="mean distance to origin", xlabel="t", ylabel="rho(0, t)")
        outputs["profile.svg"] = []
    atomic_write_text(out / "manifest.json", _manifest(cfg, "simulate", outputs, {"grid": grid.tolist()}))
    return {"rows": len(rows)}


# ------------------------------------------------------------------- check

def cmd_check(cfg: ExperimentConfig, threads: int = 1) -> dict:
    """Run one condition check and write its reports."""
    chk = cfg.check
    cond = str(chk.get("condition", "")).upper()
    spec = cfg.model
    if not cfg.n_grid:
        raise ConfigError("check needs 'n_grid'")
    if cond == "B":
        eps = float(chk.get("eps", 0.5))
        res = check_B(spec, cfg.p, eps, cfg.n_grid, cfg.replicates, cfg.seed,
                      max_replicates=int(chk.get("max_replicates", 5_000_000)), threads=threads)
    elif cond == "C":
        if not cfg.s_grid:
            raise ConfigError("check C needs 's_grid'")
        if cfg.scheme == "maxima" and cfg.p == INF:
            raise ConfigError("check C in the maxima scheme needs finite p")
        res = check_C(spec, cfg.p, cfg.scheme, cfg.s_grid, cfg.n_grid, cfg.replicates, cfg.seed, threads=threads)
    elif cond == "A":
        if not cfg.s_grid:
            raise ConfigError("check A needs 's_grid'")
        res = check_tail_function(spec, cfg.p, cfg.s_grid, cfg.n_grid, cfg.replicates, cfg.seed, threads=threads)
    elif cond == "LAPLACE":
        f = chk.get("f")
        if not isinstance(f, dict):
            raise ConfigError("check laplace needs 'f': {'edges': [...], 'values': [...]}")
        try:
            step = StepFunction(tuple(_parse_p(e) for e in f["edges"]), tuple(f["values"]))
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"check laplace: bad step function ({exc})") from None
        res = check_laplace_functional(spec, cfg.s, step, cfg.n_grid, cfg.replicates, cfg.seed,
                                       p=cfg.p, threads=threads)
    else:
        raise ConfigError("check.condition must be one of A, B, C, laplace")
    out = Path(cfg.out)
    header = ["condition", "n", "d", "p", "s", "eps", "replicates", "estimate", "stderr",
              "reference", "reference_kind", "verdict"]
    rows = []
    for r in res.reports:
        pr = r.params
        rows.append([r.condition, pr.get("n"), pr.get("d"), pr.get("p"), pr.get("s", ""), pr.get("eps", ""),
                     pr.get("replicates"), r.estimate, r.stderr,
                     "" if r.reference is None else r.reference, r.reference_kind or "", r.verdict])
    atomic_write_text(out / "check.csv", csv_text(header, rows))
    atomic_write_text(out / "check.json", json_text(res.as_dict()))
    if cfg.plots:
        ns = [r.params["n"] for r in res.reports]
        write_line_plot(out / "check.svg", ns, {"estimate": [r.estimate for r in res.reports]},
                        title=f"condition {res.condition}", xlabel="n", logx=True)
    atomic_write_text(out / "manifest.json", _manifest(cfg, "check", {"check.csv": header, "check.json": []},
                                                       {"verdict": res.verdict}))
    expect = chk.get("expect")
    if expect is not None and expect != res.verdict:
        raise ControlFailure(f"check {res.condition}: expected verdict {expect!r}, got {res.verdict!r}")
    return {"verdict": res.verdict}


# ---------------------------------------------------------------- converge

def limit_diameter_cdf(cfg: ExperimentConfig):
    """Closed-form CDF of rho(0, T) for p = inf, when available."""
    if cfg.p != INF:
        return None
    tm = tail_measure_of(cfg.model)
    T = cfg.T
    if tm.is_regular:
        a = tm.alpha
        return lambda x: np.exp(-T * np.maximum(x, 1e-300) ** (-a))
    return lambda x: np.exp(-T / np.maximum(x, 1e-300))


def cmd_converge(cfg: ExperimentConfig, threads: int = 1) -> dict:
    """KS trend of prelimit against limit functionals along n_grid."""
    cfg.require_limit()
    if not cfg.n_grid:
        raise ConfigError("converge needs 'n_grid'")
    out = Path(cfg.out)
    grid = cfg.grid
    half = int(np.argmin(np.abs(grid - cfg.T / 2)))
    cdf = limit_diameter_cdf(cfg)
    trend, samples = [], []
    for scheme in cfg.schemes:
        for gi, n in enumerate(cfg.n_grid):
            res = _map(lambda k: _one_replicate(cfg, scheme, gi, n, k), range(cfg.replicates), threads)
            pre_d = np.array([r[0].diameter for r in res])
            lim_d = np.array([r[1].diameter() for r in res])
            pre_h = np.array([r[0].origin_distances[half] for r in res])
            lim_h = np.array([r[1].distances_from_origin()[half] for r in res])
            ghl = np.array([r[2][0] for r in res])
            ghu = np.array([r[2][1] for r in res])
            for k in range(len(res)):
                samples.append([scheme, n, k, pre_d[k], lim_d[k], pre_h[k], lim_h[k], ghl[k], ghu[k]])
            base = [scheme, n, cfg.model.dimension(n), cfg.model.a_n(n)]
            gh_means = [float(np.mean(ghl)) if len(res) else math.nan, float(np.mean(ghu)) if len(res) else math.nan]
            if len(res):
                ks = ks_two_sample(pre_d, lim_d)
                trend.append(base + ["diameter", ks.statistic, ks.pvalue] + gh_means)
                ks = ks_two_sample(pre_h, lim_h)
                trend.append(base + ["rho_half", ks.statistic, ks.pvalue] + gh_means)
                if cdf is not None:
                    ks = ks_vs_cdf(pre_d, cdf)
                    trend.append(base + ["diameter_vs_limit_cdf", ks.statistic, ks.pvalue] + gh_means)
    header = ["scheme", "n", "d", "a_n", "functional", "ks_statistic", "ks_pvalue", "gh_lower_mean", "gh_upper_mean"]
    sheader = ["scheme", "n", "replicate", "prelimit_diameter", "limit_diameter",
               "prelimit_rho_half", "limit_rho_half", "gh_lower", "gh_upper"]
    atomic_write_text(out / "converge.csv", csv_text(header, trend))
    atomic_write_text(out / "converge_samples.csv", csv_text(sheader, samples))
    outputs = {"converge.csv": header, "converge_samples.csv": sheader}
    if cfg.plots and trend:
        for scheme in cfg.schemes:
            rows = [r for r in trend if r[0] == scheme and r[4] == "diameter"]
            write_line_plot(out / f"converge_{scheme}.svg", [r[1] for r in rows], {"KS diameter": [r[5] for r in rows]},
                            title=f"{scheme}: KS prelimit vs limit", xlabel="n", logx=True)
            outputs[f"converge_{scheme}.svg"] = []
    atomic_write_text(out / "manifest.json", _manifest(cfg, "converge", outputs, {"grid": grid.tolist()}))
    return {"rows": len(trend)}


# ---------------------------------------------------------------------- gh

def cmd_gh(file_a, file_b, out=None) -> dict:
    """GH estimate between two exported chains; exact when both are tiny."""
    a = read_chain_points_csv(file_a)
    b = read_chain_points_csv(file_b)
    if a.p != b.p:
        raise ChainFileError(f"chains use different p ({a.p} vs {b.p})")
    if len(a) <= ORACLE_CAP and len(b) <= ORACLE_CAP:
        est = gh_exact(a, b)
        method = "exact"
    else:
        est = gh_bounds(a, b)
        method = "bounds"
    report = {"schema_version": SCHEMA_VERSION, "method": method, **est.as_dict()}
    text = json_text(report)
    if out is not None:
        atomic_write_text(Path(out) / "gh.json", text)
    sys.stdout.write(text)
    return report


# --------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heavymetric", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "check", "converge"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON experiment file")
        sp.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
        sp.add_argument("--out", default=None, help="output directory (overrides the config)")
        sp.add_argument("--threads", type=int, default=1, help="worker threads for replicates")
    sp = sub.add_parser("gh")
    sp.add_argument("file_a")
    sp.add_argument("file_b")
    sp.add_argument("--config", default=None, help="unused; accepted for symmetry")
    sp.add_argument("--out", default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--threads", type=int, default=1)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        if args.command == "gh":
            cmd_gh(args.file_a, args.file_b, args.out)
            return EXIT_OK
        cfg = load_config(args.config, args.seed, args.out)
        handler = {"simulate": cmd_simulate, "check": cmd_check, "converge": cmd_converge}[args.command]
        handler(cfg, threads=args.threads)
        return EXIT_OK
    except (ConfigError, ChainFileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ControlFailure as exc:
        print(f"control failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, RuntimeError, ValueError, FloatingPointError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
