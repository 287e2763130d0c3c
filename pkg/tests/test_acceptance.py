"""Numbered acceptance criteria.

Each test prints one ``criterion N: PASS|FAIL`` line; the lines are also
collected into the pytest terminal summary.  Seeds are fixed up front and
never tuned.
"""
from __future__ import annotations

import contextlib
import csv
import json
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from heavymetric import heavy_tail as ht
from heavymetric._lp import INF, row_norms
from heavymetric.chain_space import build_chain, sample_grid_chain
from heavymetric.cli import ExperimentConfig, cmd_converge, main
from heavymetric.counting_measure import CountingMeasure, dm
from heavymetric.diagnostics import CONSISTENT, INCONSISTENT, check_B, check_tail_function, ks_two_sample, ks_vs_cdf
from heavymetric.generators import ModelSpec, logistic_cdf, sample_increments
from heavymetric.gh import gh_bounds, gh_exact
from heavymetric.io import write_chain_points_csv
from heavymetric.limit_process import (
    TailMeasureSpec,
    laplace_of_diameter,
    rho,
    sample_cluster_process,
    small_jump_laplace_factor,
)

pytestmark = pytest.mark.acceptance

SEED = 20261016


@contextlib.contextmanager
def criterion(number: int, budget: float):
    """Time the block, record PASS/FAIL with the runtime, re-raise failures."""
    start = time.perf_counter()
    failure = None
    try:
        yield
    except AssertionError as exc:
        failure = exc
    elapsed = time.perf_counter() - start
    if failure is None and elapsed > budget:
        failure = AssertionError(f"runtime {elapsed:.1f}s above the {budget:.0f}s budget")
    status = "PASS" if failure is None else "FAIL"
    line = f"criterion {number}: {status} ({elapsed:.1f}s)"
    if failure is not None:
        line += f" - {str(failure).splitlines()[0]}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    if failure is not None:
        raise failure


def _within(estimate, stderr, reference, sigmas=3.0):
    return abs(estimate - reference) <= sigmas * stderr


# ----------------------------------------------------------------- 1

def test_criterion_1_metric_axioms():
    with criterion(1, 10.0):
        rng = ht.stream(SEED, 1)
        tol = 1e-9
        for p in (1.0, 2.0, INF):
            for _ in range(10_000):
                ms = []
                for _ in range(3):
                    k = int(rng.integers(0, 8))
                    vals = rng.standard_normal(k) * 10.0 ** rng.uniform(-3, 3, k)
                    # some exact ties between measures
                    if ms and rng.random() < 0.2:
                        vals = ms[-1].atoms.copy()
                    ms.append(CountingMeasure(vals))
                a, b, c = ms
                ab, ba, bc, ac = dm(a, b, p), dm(b, a, p), dm(b, c, p), dm(a, c, p)
                assert ab >= 0.0 and ab == ba, "nonnegativity/symmetry"
                assert dm(a, a, p) == 0.0, "identity"
                assert (ab == 0.0) == (a == b), "separation"
                assert ac <= (ab + bc) * (1 + tol), f"triangle p={p}"


# ----------------------------------------------------------------- 2

def _max_orthogonality_exact(x: np.ndarray, y: np.ndarray, p: float) -> np.ndarray:
    """Exact integer check of | ||x v y - x|| - ||y|| | <= ||x ^ y|| row by row."""
    a = np.maximum(x, y) - x
    c = np.minimum(x, y)
    if p == 1.0:
        return np.abs(a.sum(1) - y.sum(1)) <= c.sum(1)
    if p == INF:
        return np.abs(a.max(1) - y.max(1)) <= c.max(1)
    # p = 2: ||a|| <= ||y|| always, so the claim is ||y|| <= ||a|| + ||c||,
    # i.e. Y - A - C <= 2 sqrt(AC), decided in integers
    A, C, Y = (a * a).sum(1), (c * c).sum(1), (y * y).sum(1)
    g = Y - A - C
    return (g <= 0) | (g * g <= 4 * A * C)


def test_criterion_2_max_orthogonality():
    with criterion(2, 30.0):
        rng = ht.stream(SEED, 2)
        for d in (2, 10, 100):
            pairs = 100_000
            done = 0
            while done < pairs:
                m = min(10_000, pairs - done)
                # heavy-tailed nonnegative integers with many zeros and ties
                x = np.minimum(np.floor(ht.sample_pareto(0.7, 1.0, rng, (m, d)) - 1), 1000).astype(np.int64)
                y = np.minimum(np.floor(ht.sample_pareto(0.7, 1.0, rng, (m, d)) - 1), 1000).astype(np.int64)
                for p in (1.0, 2.0, INF):
                    ok = _max_orthogonality_exact(x, y, p)
                    assert ok.all(), f"violated at d={d}, p={p}"
                # continuous inputs through the library norms, rounding slack of a few ulps
                xf = ht.sample_pareto(0.7, 1.0, rng, (m, d)) * (rng.random((m, d)) < 0.5)
                yf = ht.sample_pareto(0.7, 1.0, rng, (m, d)) * (rng.random((m, d)) < 0.5)
                for p in (1.0, 2.0, INF):
                    lhs = np.abs(row_norms(np.maximum(xf, yf) - xf, p) - row_norms(yf, p))
                    rhs = row_norms(np.minimum(xf, yf), p)
                    assert np.all(lhs <= rhs + 8 * np.finfo(float).eps * row_norms(yf, p)), f"float d={d} p={p}"
                done += m


# ----------------------------------------------------------------- 3

def test_criterion_3_sampler_laws():
    with criterion(3, 30.0):
        m = 100_000
        rng = ht.stream(SEED, 3)
        checks = []
        x = ht.sample_pareto(1.5, 2.0, rng, m)
        for t in (3.0, 5.0, 20.0):
            ind = x > t
            checks.append(("pareto", t, ind.mean(), ind.std(ddof=1) / math.sqrt(m), (t / 2.0) ** -1.5))
        x = ht.sample_frechet(2.0, rng, m)
        for t in (0.5, 1.0, 3.0):
            ind = x <= t
            checks.append(("frechet", t, ind.mean(), ind.std(ddof=1) / math.sqrt(m), math.exp(-(t ** -2.0))))
        x = ht.sample_positive_stable(0.6, rng, m)
        for t in (0.1, 1.0, 5.0):
            v = np.exp(-t * x)
            checks.append(("stable", t, v.mean(), v.std(ddof=1) / math.sqrt(m), math.exp(-(t**0.6))))
        n = ht.sample_sibuya(0.4, rng, m).astype(float)
        for z in (0.2, 0.5, 0.9):
            v = z**n
            checks.append(("sibuya", z, v.mean(), v.std(ddof=1) / math.sqrt(m), 1 - (1 - z) ** 0.4))
        bad = [c for c in checks if not _within(c[2], c[3], c[4])]
        assert not bad, f"outside 3 SE: {bad}"


# ----------------------------------------------------------------- 4

def test_criterion_4_logistic_law():
    with criterion(4, 120.0):
        m = 100_000
        bad = []
        for r in (1.25, 1.5):
            for d in (2, 5):
                # beta = 1 and n = d gives dimension d
                spec = ModelSpec("Logistic", r, 1.0)
                x = sample_increments(spec, d, m, ht.stream(SEED, 4, int(r * 100), d))
                probes = [np.full(d, v) for v in (0.5, 1.0, 2.0, 5.0)]
                probes.append(np.linspace(0.5, 4.0, d))
                for u in probes:
                    ind = np.all(x <= u, axis=1)
                    est, se = ind.mean(), ind.std(ddof=1) / math.sqrt(m)
                    ref = logistic_cdf(u, r)
                    if not _within(est, se, ref):
                        bad.append((r, d, u.tolist(), est, ref))
        assert not bad, f"cdf mismatch: {bad}"
        spec = ModelSpec("Logistic", 1.5, 0.5)
        grid = np.array([0.0, 1.0])
        for n in (100, 1000):
            diam = [sample_grid_chain(spec, "maxima", n, 1.0, grid, ht.stream(SEED, 4, 0, n, k)).diameter
                    for k in range(1000)]
            ks = ks_vs_cdf(diam, lambda v: np.exp(-1.0 / np.maximum(v, 1e-300)))
            assert ks.pvalue > 0.01, f"KS vs exp(-1/x) at n={n}: p={ks.pvalue:.4f}"


# ----------------------------------------------------------------- 5

def test_criterion_5_tail_function():
    with criterion(5, 300.0):
        spec = ModelSpec("IidRegVar", 0.5, 1.0)
        res = check_tail_function(spec, INF, [0.5, 1.0, 2.0], [10_000], 100_000, SEED, threads=4)
        bad = [(r.params["s"], r.estimate, r.stderr, r.reference) for r in res.reports
               if not _within(r.estimate, r.stderr, r.params["s"] ** -0.5)]
        assert not bad, f"outside 3 SE of s^-alpha: {bad}"


# ----------------------------------------------------------------- 6

CONTROLS = [
    ("IidRegVar", ModelSpec("IidRegVar", 0.5, 1.0), [4, 8, 16, 32, 64], 20_000, CONSISTENT),
    ("SingleSpike", ModelSpec("SingleSpike", 1.0, 1.0), [4, 8, 16, 32, 64], 100_000, CONSISTENT),
    ("MovingMaxima", ModelSpec("MovingMaxima", 0.5, 0.5), [16, 32, 64, 128, 256], 20_000, CONSISTENT),
    ("Logistic r=1.5", ModelSpec("Logistic", 1.5, 0.5), [16, 32, 64, 128], 80_000, CONSISTENT),
    # on this grid the exact r=3 reference rises (3.13 -> 3.56); it turns
    # down only for larger n, see test_logistic_r3_reference_turns_down
    ("Logistic r=3", ModelSpec("Logistic", 3.0, 0.25), [8, 16, 32, 64], 80_000, INCONSISTENT),
]


def test_criterion_6_condition_controls():
    with criterion(6, 600.0):
        wrong = []
        for k, (name, spec, grid, reps, expected) in enumerate(CONTROLS):
            res = check_B(spec, INF, 0.5, grid, reps, ht.stream(SEED, 6, k), threads=4)
            print(f"  {name}: {res.verdict} {[round(r.estimate, 3) for r in res.reports]}")
            if res.verdict != expected:
                wrong.append((name, res.verdict, expected))
        assert not wrong, f"control verdicts: {wrong}"


# ----------------------------------------------------------------- 7

def test_criterion_7_limit_laws():
    with criterion(7, 120.0):
        T = 1.0
        spec = TailMeasureSpec.regular(0.5, 1)
        rng = ht.stream(SEED, 7, 0)
        diam = [rho(sample_cluster_process(spec, T, 1e-6, INF, rng), 0.0, T) for _ in range(10_000)]
        ks = ks_vs_cdf(diam, lambda v: np.exp(-T * np.maximum(v, 1e-300) ** -0.5))
        assert ks.pvalue > 0.01, f"p=inf diameter KS p={ks.pvalue:.4f}"
        p, s = 2.0, 1e-3
        rng = ht.stream(SEED, 7, 1)
        powers = np.array([rho(sample_cluster_process(spec, T, s, p, rng), 0.0, T) ** p for _ in range(10_000)])
        for lam in (0.5, 1.0, 2.0):
            v = np.exp(-lam * powers)
            est, se = v.mean(), v.std(ddof=1) / math.sqrt(v.size)
            # dropping clusters below s can only raise the transform, by at most 1/factor
            factor = small_jump_laplace_factor(spec, T, p, s, lam)
            ref = laplace_of_diameter(spec, T, p, lam)
            assert est * factor - 3 * se <= ref <= est + 3 * se, f"lambda={lam}: {est}+-{se} vs {ref}"


# ----------------------------------------------------------------- 8

def _integer_chain(rng):
    k = int(rng.integers(1, 5))
    d = int(rng.integers(1, 4))
    inc = rng.integers(0, 12, size=(k, d)).astype(float)
    return inc, str(rng.choice(["maxima", "walk"]))


def test_criterion_8_gh_sandwich():
    with criterion(8, 60.0):
        rng = ht.stream(SEED, 8)
        for i in range(1000):
            p = [1.0, 2.0, INF][i % 3]
            (ia, sa), (ib, sb) = _integer_chain(rng), _integer_chain(rng)
            a, b = build_chain(ia, sa, p), build_chain(ib, sb, p)
            exact = gh_exact(a, b).upper
            est = gh_bounds(a, b)
            assert est.lower <= exact <= est.upper, f"sandwich broken on pair {i}"
            if p == 2.0:
                continue
            # integer distances make scaling exact in floating point
            for c in (0.5, 2.0, 10.0):
                ca, cb = build_chain(ia, sa, p, scale=c), build_chain(ib, sb, p, scale=c)
                assert gh_exact(ca, cb).upper == c * exact, f"exact not equivariant, c={c}"
                sc = gh_bounds(ca, cb)
                assert (sc.lower, sc.upper) == (c * est.lower, c * est.upper), f"bounds not equivariant, c={c}"


# ----------------------------------------------------------------- 9

def test_criterion_9_convergence_trend(tmp_path):
    with criterion(9, 900.0):
        cfg = ExperimentConfig.from_dict({
            "model": {"kind": "IidRegVar", "tail": 0.5, "beta": 1.0},
            "p": "inf",
            "schemes": ["maxima", "walk"],
            "T": 1.0,
            "n_grid": [100, 1000, 10_000],
            "s": 1e-4,
            "grid_points": 3,
            "replicates": 1000,
            "seed": SEED,
            "out": str(tmp_path),
        })
        cmd_converge(cfg, threads=4)
        with open(tmp_path / "converge.csv", newline="") as fh:
            trend = [r for r in csv.DictReader(fh) if r["functional"] == "diameter"]
        stats = [float(r["ks_statistic"]) for r in trend if r["scheme"] == "maxima"]
        print(f"  maxima KS(prelimit, limit) diameter: {stats}")
        inversions = sum(b > a for a, b in zip(stats, stats[1:]))
        with open(tmp_path / "converge_samples.csv", newline="") as fh:
            rows = [r for r in csv.DictReader(fh) if r["n"] == "10000"]
        walk = [float(r["prelimit_diameter"]) for r in rows if r["scheme"] == "walk"]
        maxima = [float(r["prelimit_diameter"]) for r in rows if r["scheme"] == "maxima"]
        same = ks_two_sample(walk, maxima)
        print(f"  walk vs maxima at n=1e4: KS={same.statistic:.4f} p={same.pvalue:.4f}")
        assert inversions <= 1, f"KS statistics not decreasing: {stats}"
        assert stats[-1] < 0.08, f"KS at n=1e4 is {stats[-1]:.4f}"
        assert same.pvalue > 0.01, f"walk and maxima differ: p={same.pvalue:.4f}"


# ---------------------------------------------------------------- 10

def _tree_bytes(path):
    return {p.relative_to(path).as_posix(): p.read_bytes() for p in sorted(path.rglob("*")) if p.is_file()}


def test_criterion_10_determinism(tmp_path, capsys):
    with criterion(10, 600.0):
        base = {"model": {"kind": "IidRegVar", "tail": 0.5, "beta": 1.0}, "p": "inf", "T": 1.0,
                "grid_points": 5, "seed": SEED, "plots": True}
        configs = {
            "simulate": {**base, "n": 200, "replicates": 20, "export_chains": 2},
            "check": {**base, "n_grid": [8, 16, 32], "replicates": 5000, "check": {"condition": "B", "eps": 0.5}},
            "converge": {**base, "n_grid": [50, 100], "replicates": 40, "schemes": ["maxima", "walk"]},
        }
        for command, body in configs.items():
            path = tmp_path / f"{command}.json"
            path.write_text(json.dumps(body))
            outs = []
            for run, threads in enumerate(("1", "3")):
                out = tmp_path / f"{command}_{run}"
                assert main([command, "--config", str(path), "--out", str(out), "--threads", threads]) == 0
                outs.append(_tree_bytes(out))
            assert outs[0] == outs[1], f"{command} outputs differ between runs"
        a, b = tmp_path / "simulate_0" / "chain_0.csv", tmp_path / "simulate_0" / "chain_1.csv"
        printed = []
        for _ in range(2):
            assert main(["gh", str(a), str(b)]) == 0
            printed.append(capsys.readouterr().out)
        assert printed[0] == printed[1], "gh output differs between runs"
