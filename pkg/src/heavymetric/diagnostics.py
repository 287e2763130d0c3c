"""Monte Carlo checks of the tail, pair and truncated-moment conditions.

Each check estimates a functional on a grid of n (and sometimes s),
compares each point with a reference value when one is known, and returns a
sequence-level verdict.  Verdicts are finite-sample consistency statements:
a 3-sigma band plus a monotone-trend test over the grid, and
"inconclusive" when the grid is too short or the pattern is mixed.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import stats

from . import heavy_tail as ht
from ._lp import INF, check_p, row_norms
from .generators import ModelKind, ModelSpec, sample_increments, sample_spikes, tail_measure_of

CONSISTENT = "consistent"
INCONSISTENT = "inconsistent"
INCONCLUSIVE = "inconclusive"
SIGMAS = 3.0
MIN_TREND_POINTS = 3
BATCH_ELEMENTS = 1 << 21


@dataclass
class ConditionReport:
    """One grid point of a condition check.

    ``reference`` is the value the estimate should match at this grid point
    (an exact finite-n value or the limit, see ``reference_kind``).
    """

    condition: str
    params: dict
    estimate: float
    stderr: float
    reference: float | None = None
    reference_kind: str | None = None
    verdict: str = INCONCLUSIVE
    seed: int | None = None

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class CheckResult:
    condition: str
    reports: list
    verdict: str
    limit: float | None
    note: str = ""
    seed: int | None = None
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "condition": self.condition,
            "verdict": self.verdict,
            "limit": self.limit,
            "note": self.note,
            "seed": self.seed,
            "extra": self.extra,
            "reports": [r.as_dict() for r in self.reports],
        }


# -------------------------------------------------------------- verdicts

def point_verdict(estimate: float, stderr: float, reference: float | None) -> str:
    """3-sigma agreement between an estimate and its reference value."""
    if reference is None or not math.isfinite(reference) or not math.isfinite(estimate):
        return INCONCLUSIVE
    return CONSISTENT if abs(estimate - reference) <= SIGMAS * stderr else INCONSISTENT


def sequence_verdict(estimates, stderrs, limit: float | None) -> str:
    """Does a grid sequence of estimates head to ``limit``?

    consistent: no step moves significantly away from the limit, and the
    last point is within 3 sigma of it or significantly closer than the
    first.  inconsistent: the last point is significantly away from the
    limit and no closer (within 3 sigma) than the first.  ``limit=None``
    means no finite limit is claimed; significant growth is then reported
    as inconsistent with a finite limit.
    """
    e = np.asarray(estimates, dtype=float)
    s = np.asarray(stderrs, dtype=float)
    if e.size < MIN_TREND_POINTS or not np.all(np.isfinite(e)):
        return INCONCLUSIVE
    comb_end = math.hypot(s[0], s[-1])
    if limit is None:
        return INCONSISTENT if e[-1] - e[0] > SIGMAS * comb_end else INCONCLUSIVE
    gap = np.abs(e - limit)
    steps_ok = all(
        gap[i + 1] <= gap[i] + SIGMAS * math.hypot(s[i], s[i + 1]) for i in range(e.size - 1)
    )
    near = gap[-1] <= SIGMAS * s[-1]
    approach = gap[0] - gap[-1] > SIGMAS * comb_end
    if steps_ok and (near or approach):
        return CONSISTENT
    if not near and not approach:
        return INCONSISTENT
    return INCONCLUSIVE


# ------------------------------------------------------ batched sampling

def _seed_of(rng) -> int:
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(0, 2**63 - 1))
    return int(rng)


def _run_batches(seed: int, keys: tuple, total: int, batch: int, fn, threads: int = 1):
    """Apply ``fn(rng, size)`` to consecutive batches with their own streams
    and return the list of per-batch results in batch order."""
    sizes = [batch] * (total // batch) + ([total % batch] if total % batch else [])
    jobs = [(ht.stream(seed, *keys, b), size) for b, size in enumerate(sizes)]
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda job: fn(*job), jobs))
    return [fn(*job) for job in jobs]


def _rows_per_batch(d: int, pair: bool = False) -> int:
    return max(1, BATCH_ELEMENTS // (max(d, 1) * (2 if pair else 1)))


def _binomial_se(hits: int, total: int) -> float:
    # one-event floor keeps the error positive when nothing was observed
    q = max(hits, 1) / total
    return math.sqrt(q * (1.0 - min(q, 1.0 - 1e-12)) / total)


# --------------------------------------------------------- reference values

def logistic_pair_exceedance(r: float, d: int, t: float, nodes: int = 3000) -> float:
    """P{ ||min(X1, X2)||_inf > t } for two iid logistic vectors, by quadrature.

    Conditionally on the stable factors the coordinates are independent,
    so the probability is 1 - E[(1 - h(z1) h(z2))^d] with
    h(z) = 1 - exp(-z t^(-r)).  The stable density comes from Kanter's
    representation, P{z <= x} = E_theta exp(-A(theta) x^(-g/(1-g))).
    """
    g = 1.0 / r
    c = g / (1.0 - g)
    lx = np.linspace(-25.0, 110.0, nodes)
    x = np.exp(lx)
    tt, ww = leggauss(200)
    theta = (tt + 1.0) * math.pi / 2.0
    wtheta = ww / 2.0
    a = ht.kanter_a(theta, g)[:, None]
    dens = (wtheta[:, None] * a * c * x ** (-c - 1.0) * np.exp(-a * x ** (-c))).sum(axis=0)
    w = dens * x * (lx[1] - lx[0])
    h = -np.expm1(-x * t ** (-r))
    hh = np.outer(h, h)
    with np.errstate(divide="ignore"):
        inner = -np.expm1(d * np.log1p(-np.minimum(hh, 1.0)))
    return float(w @ inner @ w)


def moving_maxima_pair_exceedance(alpha: float, d: int, t: float) -> float:
    """P{ ||min(X1, X2)||_inf > t } for two independent moving-maxima vectors.

    With B_i = 1{Z_i > t} for each vector, coordinate i of the minimum
    exceeds t iff (B1_i or B1_{i-1}) and (B2_i or B2_{i-1}); the joint
    indicator pair is a Markov chain in i, so the complement probability is
    a product of 4x4 transfer matrices.
    """
    f = min(1.0, t ** (-alpha))
    states = [(a, b) for a in (0, 1) for b in (0, 1)]
    prob = np.array([(f if a else 1 - f) * (f if b else 1 - f) for a, b in states])
    trans = np.zeros((4, 4))
    for i, (a0, b0) in enumerate(states):
        for j, (a1, b1) in enumerate(states):
            if not ((a0 or a1) and (b0 or b1)):
                trans[i, j] = prob[j]
    v = prob.copy()
    for _ in range(d):
        v = v @ trans
    return float(1.0 - v.sum())


def _b_reference(spec: ModelSpec, p: float, eps: float, n: int):
    d = spec.dimension(n)
    t = eps * spec.a_n(n)
    if spec.kind is ModelKind.MOVING_MAXIMA and p == INF:
        return n * n * moving_maxima_pair_exceedance(spec.tail, d, t), "exact"
    if spec.kind is ModelKind.IID and p == INF:
        fbar = min(1.0, t ** (-spec.tail))
        return n * n * -math.expm1(d * math.log1p(-fbar * fbar)), "exact"
    if spec.kind is ModelKind.SINGLE_SPIKE:
        fbar = min(1.0, t ** (-spec.tail))
        w = spec.spike_weights(d)
        sq = 1.0 / d if w is None else float(np.sum(w * w))
        return n * n * fbar * fbar * sq, "exact"
    if spec.kind is ModelKind.LOGISTIC and p == INF:
        return n * n * logistic_pair_exceedance(spec.tail, d, t), "exact"
    return None, None


# ---------------------------------------------------------------- check B

def check_B(spec: ModelSpec, p: float, eps: float, n_grid, replicates: int, rng, *,
            max_replicates: int = 5_000_000, importance: bool = True, threads: int = 1) -> CheckResult:
    """Estimate n^2 P{ ||min(X1, X2)||_p > eps a_n } along ``n_grid``.

    Plain Monte Carlo uses ``replicates * (n / n_grid[0])**2`` pairs at each
    n, capped at ``max_replicates``.  For SingleSpike the spike values are
    drawn conditionally above eps*a_n and reweighted by P{zeta > eps a_n}^2.
    """
    p = check_p(p)
    n_grid = [int(n) for n in n_grid]
    if not eps > 0:
        raise ValueError("eps must be positive")
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ValueError("n_grid must be increasing")
    seed = _seed_of(rng)
    reports = []
    for gi, n in enumerate(n_grid):
        d = spec.dimension(n)
        t = eps * spec.a_n(n)
        if spec.kind is ModelKind.SINGLE_SPIKE and importance:
            R = int(replicates)
            lo = max(t, 1.0)
            fbar = lo ** (-spec.tail)

            def batch(g, size, n=n, lo=lo):
                k1, _ = sample_spikes(spec, n, size, g)
                k2, _ = sample_spikes(spec, n, size, g)
                return int(np.count_nonzero(k1 == k2))

            hits = sum(_run_batches(seed, (gi,), R, 1 << 20, batch, threads))
            frac = hits / R
            est = n * n * fbar * fbar * frac
            se = n * n * fbar * fbar * _binomial_se(hits, R)
            method = "importance"
        else:
            R = int(min(max_replicates, math.ceil(replicates * (n / n_grid[0]) ** 2)))

            def batch(g, size, n=n, t=t):
                x1 = sample_increments(spec, n, size, g)
                x2 = sample_increments(spec, n, size, g)
                return int(np.count_nonzero(row_norms(np.minimum(x1, x2), p) > t))

            hits = sum(_run_batches(seed, (gi,), R, _rows_per_batch(d, True), batch, threads))
            est = n * n * hits / R
            se = n * n * _binomial_se(hits, R)
            method = "plain"
        ref, kind = _b_reference(spec, p, eps, n)
        reports.append(ConditionReport(
            "B", dict(n=n, d=d, p=p, eps=eps, replicates=R, method=method, a_n=spec.a_n(n)),
            est, se, ref, kind, point_verdict(est, se, ref), seed,
        ))
    verdict = sequence_verdict([r.estimate for r in reports], [r.stderr for r in reports], 0.0)
    return CheckResult("B", reports, verdict, 0.0,
                       "finite-n consistency test of n^2 P{||X1 ^ X2||_p > eps a_n} -> 0", seed)


# ---------------------------------------------------------------- check C

def truncated_moment_limit(spec: ModelSpec, p: float, scheme: str, s: float) -> float | None:
    """Limit in n of the truncated-moment functional for the regular models:
    the integral of ||mu||^q over {||mu||_p <= s} against the tail measure,
    q = p (maxima) or 1 (walk)."""
    tm = tail_measure_of(spec)
    if not tm.is_regular:
        return None
    a, m = tm.alpha, tm.m
    q = p if scheme == "maxima" else 1.0
    if not q > a:
        return None
    mf = 1.0 if p == INF else m ** (a / p)
    return mf * a / (q - a) * s ** (q - a)


def check_C(spec: ModelSpec, p: float, scheme: str, s_grid, n_grid, replicates: int, rng, *,
            threads: int = 1) -> CheckResult:
    """Truncated-moment functional on the (s, n) grid.

    Maxima: (n / a_n^p) E[ ||X||_p^p ; ||X||_p <= s a_n ] (finite p only).
    Walk: (n / a_n) E[ ||X||_p ; ||X||_p <= s a_n ].
    The verdict first asks that the last two n agree for every s (within
    3 sigma), then that the stabilized values decrease to 0 as s decreases.
    """
    p = check_p(p)
    scheme = str(scheme).lower()
    if scheme == "maxima" and p == INF:
        raise ValueError("the truncated-moment condition is not needed for the maxima scheme with p = inf")
    if scheme not in ("maxima", "walk"):
        raise ValueError("scheme must be 'maxima' or 'walk'")
    s_grid = sorted((float(s) for s in s_grid), reverse=True)
    n_grid = [int(n) for n in n_grid]
    seed = _seed_of(rng)
    q = p if scheme == "maxima" else 1.0
    reports = []
    table = {}
    for gi, n in enumerate(n_grid):
        d = spec.dimension(n)
        a = spec.a_n(n)

        def batch(g, size, n=n):
            x = sample_increments(spec, n, size, g)
            return row_norms(x, p) / a

        norms = np.concatenate(_run_batches(seed, (gi,), int(replicates), _rows_per_batch(d), batch, threads))
        for s in s_grid:
            vals = np.where(norms <= s, norms**q, 0.0) * n
            est = float(vals.mean())
            se = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else INF
            se = max(se, 1e-300)
            ref = truncated_moment_limit(spec, p, scheme, s)
            reports.append(ConditionReport(
                "C", dict(n=n, d=d, p=p, s=s, scheme=scheme, replicates=int(replicates), a_n=a),
                est, se, ref, None if ref is None else "limit", point_verdict(est, se, ref), seed,
            ))
            table[(s, n)] = (est, se)
    verdict = INCONCLUSIVE
    if len(n_grid) >= 2:
        n1, n2 = n_grid[-2], n_grid[-1]
        stable = all(
            abs(table[(s, n2)][0] - table[(s, n1)][0]) <= SIGMAS * math.hypot(table[(s, n2)][1], table[(s, n1)][1])
            for s in s_grid
        )
        if stable:
            verdict = sequence_verdict([table[(s, n2)][0] for s in s_grid], [table[(s, n2)][1] for s in s_grid], 0.0)
        else:
            verdict = INCONCLUSIVE
            grows = all(table[(s, n2)][0] - table[(s, n_grid[0])][0] > SIGMAS * math.hypot(table[(s, n2)][1], table[(s, n_grid[0])][1]) for s in s_grid)
            if grows and len(n_grid) >= MIN_TREND_POINTS:
                verdict = INCONSISTENT
    return CheckResult("C", reports, verdict, 0.0,
                       "double limit: n first (stabilization across the last two n), then s -> 0", seed)


# ------------------------------------------------------- tail function

def check_tail_function(spec: ModelSpec, p: float, s_grid, n_grid, replicates: int, rng, *,
                        threads: int = 1) -> CheckResult:
    """n P{ ||X||_p > s a_n } against the tail mass nu_p((s, inf))."""
    p = check_p(p)
    n_grid = [int(n) for n in n_grid]
    s_grid = [float(s) for s in s_grid]
    seed = _seed_of(rng)
    tm = tail_measure_of(spec)
    reports = []
    per_s = {s: [] for s in s_grid}
    for gi, n in enumerate(n_grid):
        d = spec.dimension(n)
        a = spec.a_n(n)

        def batch(g, size, n=n, a=a):
            x = sample_increments(spec, n, size, g)
            nx = row_norms(x, p) / a
            return np.array([np.count_nonzero(nx > s) for s in s_grid])

        hits = np.sum(_run_batches(seed, (gi,), int(replicates), _rows_per_batch(d), batch, threads), axis=0)
        for si, s in enumerate(s_grid):
            h = int(hits[si])
            est = n * h / replicates
            se = n * _binomial_se(h, int(replicates))
            mass = tm.tail_mass(s, p)
            ref = mass if math.isfinite(mass) else None
            rep = ConditionReport(
                "A", dict(n=n, d=d, p=p, s=s, replicates=int(replicates), a_n=a),
                est, se, ref, None if ref is None else "limit", point_verdict(est, se, ref), seed,
            )
            reports.append(rep)
            per_s[s].append(rep)
    verdicts = []
    for s in s_grid:
        mass = tm.tail_mass(s, p)
        lim = mass if math.isfinite(mass) else None
        rs = per_s[s]
        if len(rs) < MIN_TREND_POINTS and lim is not None:
            verdicts.append(rs[-1].verdict)
        else:
            verdicts.append(sequence_verdict([r.estimate for r in rs], [r.stderr for r in rs], lim))
    if all(v == CONSISTENT for v in verdicts):
        verdict = CONSISTENT
    elif any(v == INCONSISTENT for v in verdicts):
        verdict = INCONSISTENT
    else:
        verdict = INCONCLUSIVE
    return CheckResult("A", reports, verdict, None,
                       "n P{||X||_p > s a_n} against the tail mass above s", seed,
                       {"per_s": dict(zip(map(str, s_grid), verdicts))})


# --------------------------------------------------- Laplace functional

@dataclass(frozen=True)
class StepFunction:
    """f = values[k] on (edges[k], edges[k+1]], zero elsewhere."""

    edges: tuple
    values: tuple

    def __post_init__(self):
        e = [float(x) for x in self.edges]
        v = [float(x) for x in self.values]
        if len(e) != len(v) + 1 or not v:
            raise ValueError("need len(edges) == len(values) + 1 >= 2")
        if any(b <= a for a, b in zip(e, e[1:])) or e[0] <= 0:
            raise ValueError("edges must be positive and increasing")
        if any(not (0 <= x < INF) for x in v):
            raise ValueError("values must be finite and nonnegative")
        object.__setattr__(self, "edges", tuple(e))
        object.__setattr__(self, "values", tuple(v))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for lo, hi, v in zip(self.edges, self.edges[1:], self.values):
            out = np.where((x > lo) & (x <= hi), v, out)
        return out


def laplace_functional_reference(spec: ModelSpec, s: float, f: StepFunction) -> float:
    """Integral of exp(-int f dmu) over clusters with an atom above s."""
    tm = tail_measure_of(spec)
    e, v = f.edges, f.values
    if tm.is_regular:
        a, m = tm.alpha, tm.m

        def mass(lo, hi):
            return lo ** (-a) - (0.0 if hi == INF else hi ** (-a))

        total = mass(s, e[0])
        for lo, hi, c in zip(e, e[1:], v):
            total += math.exp(-m * c) * mass(lo, hi)
        if e[-1] < INF:
            total += e[-1] ** (-a)
        return total
    r = tm.r
    integral = sum(
        -math.expm1(-c) * (lo ** (-r) - (0.0 if hi == INF else hi ** (-r)))
        for lo, hi, c in zip(e, e[1:], v)
    )
    return 1.0 / s - integral ** (1.0 / r)


def check_laplace_functional(spec: ModelSpec, s: float, f: StepFunction, n_grid, replicates: int, rng, *,
                             p: float = INF, threads: int = 1) -> CheckResult:
    """n E[ exp(-sum_i f(X_i / a_n)) ; max_i X_i > s a_n ] against its limit."""
    if check_p(p) != INF:
        raise ValueError("the Laplace-functional check is implemented for p = inf")
    if not isinstance(f, StepFunction):
        raise ValueError("f must be a StepFunction")
    if f.edges[0] < s:
        raise ValueError("f must be supported in (s, inf)")
    n_grid = [int(n) for n in n_grid]
    seed = _seed_of(rng)
    ref = laplace_functional_reference(spec, s, f)
    reports = []
    for gi, n in enumerate(n_grid):
        d = spec.dimension(n)
        a = spec.a_n(n)

        def batch(g, size, n=n, a=a):
            y = sample_increments(spec, n, size, g) / a
            hit = y.max(axis=1) > s
            val = np.where(hit, np.exp(-f(y).sum(axis=1)), 0.0)
            return val.sum(), (val * val).sum()

        parts = _run_batches(seed, (gi,), int(replicates), _rows_per_batch(d), batch, threads)
        tot = sum(x for x, _ in parts)
        tot2 = sum(y for _, y in parts)
        R = int(replicates)
        mean = tot / R
        var = max(tot2 / R - mean * mean, (1.0 / R) * (1.0 - 1.0 / R))
        est = n * mean
        se = n * math.sqrt(var * R / max(R - 1, 1) / R)
        reports.append(ConditionReport(
            "laplace", dict(n=n, d=d, p=p, s=s, replicates=R, a_n=a, edges=list(f.edges), values=list(f.values)),
            est, se, ref, "limit", point_verdict(est, se, ref), seed,
        ))
    verdict = sequence_verdict([r.estimate for r in reports], [r.stderr for r in reports], ref)
    if len(reports) < MIN_TREND_POINTS:
        verdict = reports[-1].verdict
    return CheckResult("laplace", reports, verdict, ref,
                       "Laplace functional of the normalized point measure above s", seed)


# ------------------------------------------------------- pair alignment

def estimate_pair_alignment(spec: ModelSpec, p: float, s: float, eps: float, n: int, replicates: int, rng) -> ConditionReport:
    """P{ sum_j (|X1j|/||X1||)(|X2j|/||X2||)^(p-1) >= eps | both norms >= s a_n }.

    Plain Monte Carlo with rejection of pairs that are not both large.  No
    generator model is claimed to satisfy the corresponding condition.
    """
    p = check_p(p)
    if p == INF:
        raise ValueError("the alignment functional needs finite p")
    seed = _seed_of(rng)
    d = spec.dimension(n)
    a = spec.a_n(n)

    def batch(g, size):
        x1 = sample_increments(spec, n, size, g)
        x2 = sample_increments(spec, n, size, g)
        n1, n2 = row_norms(x1, p), row_norms(x2, p)
        keep = (n1 >= s * a) & (n2 >= s * a)
        if not np.any(keep):
            return 0, 0
        u = np.abs(x1[keep]) / n1[keep, None]
        v = (np.abs(x2[keep]) / n2[keep, None]) ** (p - 1.0)
        return int(keep.sum()), int(np.count_nonzero((u * v).sum(axis=1) >= eps))

    parts = _run_batches(seed, (0,), int(replicates), _rows_per_batch(d, True), batch)
    kept = sum(k for k, _ in parts)
    hits = sum(h for _, h in parts)
    if kept == 0:
        return ConditionReport("pair_alignment", dict(n=n, d=d, p=p, s=s, eps=eps, replicates=int(replicates), kept=0),
                               math.nan, math.inf, None, None, INCONCLUSIVE, seed)
    return ConditionReport("pair_alignment", dict(n=n, d=d, p=p, s=s, eps=eps, replicates=int(replicates), kept=kept),
                           hits / kept, _binomial_se(hits, kept), None, None, INCONCLUSIVE, seed)


# ---------------------------------------------------------------- KS tests

@dataclass(frozen=True)
class KsResult:
    statistic: float
    pvalue: float


def ks_two_sample(sample_a, sample_b) -> KsResult:
    """Two-sample Kolmogorov-Smirnov test with the asymptotic p-value."""
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("samples must be nonempty")
    res = stats.ks_2samp(a, b, method="asymp")
    return KsResult(float(res.statistic), float(res.pvalue))


def ks_vs_cdf(sample, cdf) -> KsResult:
    """One-sample Kolmogorov-Smirnov test against a continuous CDF."""
    x = np.asarray(sample, dtype=float)
    if x.size == 0:
        raise ValueError("sample must be nonempty")
    res = stats.kstest(x, cdf, method="asymp")
    return KsResult(float(res.statistic), float(res.pvalue))
