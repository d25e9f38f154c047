"""Seeded ensemble runs and the full battery of verification checks.

A replication k of an ensemble always runs on stream (master_seed, k), so
results are a deterministic function of (config, master seed) no matter how
many workers execute them: per-replication values are folded in replication
order. Independent oracles (Brownian marginals, quadrature of closed forms,
brute-force pair sums) run on reserved streams so disabling one check never
perturbs another's numbers.

Every verdict carries (expected, measured, se, threshold) so reports are
auditable without rerunning. Mean comparisons use a standard-error multiplier
(default 4); distributional comparisons use a p-value floor (default 0.01).
Undefined per-replication values (statistics after extinction) are stored as
NaN and skipped by the aggregators, with valid counts reported.
"""

from __future__ import annotations

import hashlib
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import integrate
from scipy import stats as scipy_stats

from . import limits as blimits
from . import stats as bstats
from .core import DEFAULT_PARTICLE_CAP, SimConfig, simulate
from .sampling import (
    OffspringDistribution,
    RngStream,
    StableSpec,
    sample_stable_positive,
)

PASS = "pass"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"
VACUOUS = "vacuous"
WARN = "warn"

MIN_SURVIVORS = 100  # below this an asymptotic check refuses to conclude


@dataclass
class Verdict:
    """One check outcome; never a bare pass/fail, always with the numbers."""

    name: str
    status: str
    expected: Optional[float]
    measured: Optional[float]
    se: Optional[float]
    threshold: Optional[float]
    detail: str = ""

    def row(self):
        def fmt(x):
            return "" if x is None else repr(float(x))

        return (
            self.name,
            self.status,
            fmt(self.expected),
            fmt(self.measured),
            fmt(self.se),
            fmt(self.threshold),
            self.detail,
        )


def _mean_verdict(name, expected, measured, se, multiplier, detail=""):
    """Two-sided |measured - expected| <= multiplier * se."""
    tol = multiplier * se
    ok = abs(measured - expected) <= tol
    return Verdict(
        name,
        PASS if ok else FAIL,
        expected,
        measured,
        se,
        multiplier,
        detail or f"|diff|={abs(measured - expected):.6g} vs {multiplier:g}*SE={tol:.6g}",
    )


def _pvalue_verdict(name, pvalue, threshold, detail=""):
    ok = pvalue > threshold
    return Verdict(name, PASS if ok else FAIL, threshold, pvalue, None, threshold, detail)


def _rel_verdict(name, expected, measured, rel_tol, detail=""):
    err = abs(measured - expected) / abs(expected)
    ok = err <= rel_tol
    return Verdict(
        name,
        PASS if ok else FAIL,
        expected,
        measured,
        None,
        rel_tol,
        detail or f"relative error {err:.4f} vs tolerance {rel_tol:g}",
    )


# --------------------------------------------------------------------------
# Experiment configuration
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    """One named, fully seeded ensemble experiment.

    times is the statistic grid (a subset of snapshot_times); a_values are
    overlap cuts, and every a*t over a_values x times must itself be a
    requested snapshot time. options carries experiment-specific knobs
    (collected statistic families, functional ids, fluctuation regime, ...)
    as plain strings/numbers so configs stay picklable and hashable.
    """

    name: str
    horizon: float
    snapshot_times: tuple
    offspring: OffspringDistribution
    replications: int
    master_seed: int
    betas: tuple = ()
    a_values: tuple = ()
    times: tuple = ()
    particle_cap: int = DEFAULT_PARTICLE_CAP
    barrier: Optional[tuple] = None
    record_tree: bool = False
    se_multiplier: float = 4.0
    p_threshold: float = 0.01
    workers: int = 1
    output_dir: Optional[str] = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if int(self.replications) < 1:
            raise ValueError("replications must be >= 1")
        object.__setattr__(self, "snapshot_times", tuple(float(t) for t in self.snapshot_times))
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        object.__setattr__(self, "a_values", tuple(float(a) for a in self.a_values))
        snap = set(self.snapshot_times)
        for t in self.times:
            if t not in snap:
                raise ValueError(f"statistic time {t!r} is not a requested snapshot time")
        for a in self.a_values:
            for t in self.times:
                if a * t not in snap:
                    raise ValueError(
                        f"overlap needs a snapshot at a*t = {a * t!r} (a={a!r}, t={t!r}); add it to snapshot_times"
                    )
        if int(self.workers) < 1:
            raise ValueError("workers must be >= 1")

    def sim_config(self) -> SimConfig:
        return SimConfig(
            horizon=self.horizon,
            snapshot_times=self.snapshot_times,
            offspring=self.offspring,
            particle_cap=self.particle_cap,
            barrier=self.barrier,
            record_tree=self.record_tree,
        )


def config_digest(cfg: ExperimentConfig) -> str:
    """sha256 over the resolved config (stable across runs and workers)."""
    parts = [
        cfg.name,
        repr(cfg.horizon),
        repr(cfg.snapshot_times),
        repr(sorted(cfg.offspring.weights.items())),
        repr(cfg.replications),
        repr(cfg.master_seed),
        repr(cfg.betas),
        repr(cfg.a_values),
        repr(cfg.times),
        repr(cfg.particle_cap),
        repr(cfg.barrier),
        repr(cfg.record_tree),
        repr(cfg.se_multiplier),
        repr(cfg.p_threshold),
        repr(sorted(cfg.options.items())),
    ]
    return hashlib.sha256("\x1f".join(parts).encode()).hexdigest()


# --------------------------------------------------------------------------
# Per-replication extraction
# --------------------------------------------------------------------------


def death_pair_sum(real, t, f) -> float:
    """sum over ordered pairs u != v alive at t of f(death time of u^v).

    Grouped route, linear in the arena: a reverse index sweep accumulates,
    for every particle w, the number of its alive-at-t descendants; the
    ordered pairs meeting exactly at a dead w number cnt(w)^2 - sum of
    squared per-child counts. Children always carry larger indices than
    their parents, so one descending pass suffices.
    """
    snap = real.alive_at(t)
    n_tot = real.n_particles
    cnt = np.zeros(n_tot, dtype=np.int64)
    cnt[snap.indices] = 1
    sq = np.zeros(n_tot)
    parent = real.parent
    for u in range(n_tot - 1, 0, -1):
        c = cnt[u]
        if c:
            p = parent[u]
            cnt[p] += c
            sq[p] += float(c) * float(c)
    dead = real.death_time <= float(t)
    if not dead.any():
        return 0.0
    pairs = cnt[dead].astype(float) ** 2 - sq[dead]
    weights = np.asarray(f(real.death_time[dead]), dtype=float)
    return float((weights * pairs).sum())


def death_pair_sum_pairwise(real, t, f) -> float:
    """Quadratic reference for death_pair_sum (ancestor-chain LCA walks)."""
    snap = real.alive_at(t)
    idx = snap.indices
    total = 0.0
    for i in range(len(idx)):
        for j in range(i + 1, len(idx)):
            d = real.lca_death_time(int(idx[i]), int(idx[j]))
            total += 2.0 * float(f(d))
    return total


def ever_alive_count(real, s, t) -> int:
    """Lineage chains alive at some point of [s, t].

    A chain continues through the first child at each branching, so the
    count equals n(t) plus the number of childless deaths in (s, t].
    """
    n_t = real.alive_at(t).n
    dtimes = real.death_time
    ended = (real.child_count == 0) & (dtimes > float(s)) & (dtimes <= float(t))
    return int(n_t + ended.sum())


def extract_statistics(real, cfg: ExperimentConfig) -> dict:
    """Per-replication scalar statistics, keyed by canonical tuples.

    Which families are computed is driven by cfg.options["collect"] (default
    n and W) plus the explicit lists in options; undefined values (after
    extinction) come out as NaN.
    """
    out = {}
    opts = cfg.options
    collect = opts.get("collect", ("n", "W"))
    for t in cfg.times:
        snap = real.alive_at(t)
        if "n" in collect:
            out[("n", t)] = float(snap.n)
        if "M" in collect:
            out[("M", t)] = bstats.max_displacement(snap) if snap.n else float("nan")
        if "Zc" in collect:
            out[("Zc", t)] = bstats.critical_derivative_martingale(snap)
        for beta in cfg.betas:
            if "W" in collect:
                out[("W", beta, t)] = bstats.additive_martingale(snap, beta)
            if "Z" in collect:
                out[("Z", beta, t)] = bstats.derivative_martingale(snap, beta)

    for beta, fid, t in opts.get("functional", ()):
        f = bstats.resolve_function(fid)
        out[("Wf", beta, fid, t)] = bstats.functional_martingale(real.alive_at(t), beta, f)
    for beta, fid, t in opts.get("growth", ()):
        f = bstats.resolve_function(fid)
        out[("V", beta, fid, t)] = bstats.growth_statistic(real.alive_at(t), beta, f)
    for fid, t in opts.get("many_to_one", ()):
        f = bstats.resolve_function(fid)
        snap = real.alive_at(t)
        out[("sumF", fid, t)] = float(np.asarray(f(snap.positions), dtype=float).sum())
    for fid, t in opts.get("death_functional", ()):
        f = bstats.resolve_function(fid)
        out[("pairsum", fid, t)] = death_pair_sum(real, t, f)
    for s, t in opts.get("ever_alive", ()):
        out[("ever", s, t)] = float(ever_alive_count(real, s, t))
    for beta, a, t in opts.get("overlap", ()):
        nu = bstats.overlap_mass(real, beta, t, a)
        out[("nu", beta, a, t)] = nu
        w = bstats.additive_martingale(real.alive_at(t), beta)
        # Rescaled, martingale-weighted pair mass: the quantity with an
        # exact finite-horizon mean (see check_overlap_rescaled_mass).
        out[("nuw2", beta, a, t)] = (
            math.exp((1.0 - beta**2) * a * t) * nu * w * w if not math.isnan(nu) else float("nan")
        )
    L = opts.get("exceed_line")
    if L is not None:
        hit = 0
        for tau, snap in real.snapshots.items():
            if tau > 0.0 and snap.n and float(snap.positions.max()) > bstats.BETA_CRITICAL * tau + L:
                hit = 1
                break
        out[("exceed", float(L))] = float(hit)
    return out


# --------------------------------------------------------------------------
# Ensemble runner
# --------------------------------------------------------------------------


@dataclass
class EnsembleSummary:
    """Aggregated per-replication statistics plus verdicts.

    samples holds one array per statistic key, aligned across keys in
    replication order (truncated replications dropped entirely and counted).
    survived marks replications alive at the horizon. SE convention:
    sample std (ddof=1) / sqrt(valid count).
    """

    config: ExperimentConfig
    samples: dict
    survived: np.ndarray
    truncated_count: int
    verdicts: list = field(default_factory=list)

    @property
    def kept(self) -> int:
        return len(self.survived)

    @property
    def survival_count(self) -> int:
        return int(self.survived.sum())

    def values(self, key) -> np.ndarray:
        try:
            return self.samples[key]
        except KeyError:
            raise KeyError(
                f"statistic {key!r} was not collected; configure it before checking"
            ) from None

    def mean_se(self, key):
        """(nan-skipping mean, SE, valid count) for one statistic."""
        vals = self.values(key)
        good = vals[~np.isnan(vals)]
        n = len(good)
        if n == 0:
            return float("nan"), float("nan"), 0
        mean = float(good.mean())
        se = float(good.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
        return mean, se, n

    def aggregate_rows(self):
        """(key name, mean, se, variance, n_valid, q25, median, q75) per statistic."""
        rows = []
        for key in sorted(self.samples, key=_key_name):
            vals = self.samples[key]
            good = vals[~np.isnan(vals)]
            n = len(good)
            if n:
                q25, q50, q75 = (float(q) for q in np.quantile(good, [0.25, 0.5, 0.75]))
                mean = float(good.mean())
                var = float(good.var(ddof=1)) if n > 1 else 0.0
                se = math.sqrt(var / n) if n > 1 else float("nan")
            else:
                mean = var = se = q25 = q50 = q75 = float("nan")
            rows.append((_key_name(key), mean, se, var, n, q25, q50, q75))
        return rows


def _key_name(key) -> str:
    stat, *params = key
    return stat if not params else stat + "[" + ",".join(repr(p) for p in params) + "]"


def _run_block(cfg: ExperimentConfig, start: int, stop: int):
    sim_cfg = cfg.sim_config()
    rows = []
    for rep in range(start, stop):
        real = simulate(sim_cfg, RngStream(cfg.master_seed, rep))
        if real.truncated:
            rows.append(None)
        else:
            rows.append((extract_statistics(real, cfg), real.extinct_at is None))
    return start, rows


def run_ensemble(cfg: ExperimentConfig) -> EnsembleSummary:
    """Run R seeded replications and fold their statistics in index order.

    Replication k uses stream (master_seed, k) regardless of scheduling, and
    aggregation folds blocks by replication index, so summaries are
    bit-identical across reruns and worker counts. Truncated replications
    (particle cap) are excluded from every estimator and counted.
    """
    R = int(cfg.replications)
    workers = int(cfg.workers)
    blocks = []
    if workers > 1 and R > 1:
        n_blocks = min(R, workers * 4)
        bounds = np.linspace(0, R, n_blocks + 1).astype(int)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_run_block, cfg, int(a), int(b))
                for a, b in zip(bounds[:-1], bounds[1:])
                if b > a
            ]
            blocks = sorted((f.result() for f in futures), key=lambda r: r[0])
    else:
        blocks = [_run_block(cfg, 0, R)]

    rows = []
    for _start, block_rows in blocks:
        rows.extend(block_rows)
    kept = [r for r in rows if r is not None]
    truncated_count = len(rows) - len(kept)
    if not kept:
        raise RuntimeError("every replication hit the particle cap; nothing to aggregate")
    keys = list(kept[0][0].keys())
    samples = {k: np.fromiter((vals[k] for vals, _s in kept), dtype=float, count=len(kept)) for k in keys}
    survived = np.fromiter((s for _v, s in kept), dtype=bool, count=len(kept))
    return EnsembleSummary(
        config=cfg, samples=samples, survived=survived, truncated_count=truncated_count
    )


# --------------------------------------------------------------------------
# Closed-form oracles
# --------------------------------------------------------------------------


def gw_extinction_probability(offspring: OffspringDistribution, tol=1e-13, max_iter=100_000) -> float:
    """Smallest fixed point of the offspring generating function on [0, 1].

    Fixed-point iteration from q = 0 converges monotonically to the
    extinction probability of the embedded Galton-Watson process.
    """
    items = sorted(offspring.weights.items())
    q = 0.0
    for _ in range(max_iter):
        nxt = math.fsum(p * q**k for k, p in items)
        if abs(nxt - q) < tol:
            return nxt
        q = nxt
    raise RuntimeError("extinction fixed-point iteration did not converge")


def death_functional_expectation(offspring: OffspringDistribution, t, f) -> float:
    """K e^{2t} * integral_0^t f(s) e^{-s} ds by adaptive quadrature (rel <= 1e-9)."""
    t = float(t)
    K = offspring.pair_rate
    val, err = integrate.quad(lambda s: float(f(s)) * math.exp(-s), 0.0, t, epsabs=0.0, epsrel=1e-9, limit=200)
    if val != 0.0 and err > 1e-8 * abs(val):
        raise RuntimeError(
            f"quadrature did not reach the 1e-9 relative target: value {val!r}, abserr {err!r}"
        )
    return K * math.exp(2.0 * t) * val


def second_moment_expectation(offspring: OffspringDistribution, beta, t) -> float:
    """E[W_t(beta)^2] = e^{-(1-beta^2)t} + K * integral_0^t e^{-(1-beta^2)s} ds."""
    beta = float(beta)
    t = float(t)
    K = offspring.pair_rate
    r = 1.0 - beta**2
    if abs(r) < 1e-14:
        integral = t
    else:
        integral = (1.0 - math.exp(-r * t)) / r
    return math.exp(-r * t) + K * integral


# --------------------------------------------------------------------------
# Check battery
# --------------------------------------------------------------------------


def check_population_moments(summary: EnsembleSummary, geometric_times=()) -> list:
    """Mean n(t) vs e^t; ever-alive counts vs closed form; geometric fit.

    The chi-square fit of n(t) to a geometric law on {1, 2, ...} with known
    parameter e^{-t} applies to binary branching only (no fitted parameters,
    tail bins pooled to expected count >= 5).
    """
    cfg = summary.config
    mult = cfg.se_multiplier
    verdicts = []
    for key in sorted(summary.samples, key=_key_name):
        if key[0] == "n":
            t = key[1]
            mean, se, _n = summary.mean_se(key)
            verdicts.append(_mean_verdict(f"population mean n({t:g}) vs e^t", math.exp(t), mean, se, mult))
        elif key[0] == "ever":
            s, t = key[1], key[2]
            mu0 = cfg.offspring.weights.get(0, 0.0)
            expected = math.exp(t) + mu0 * (math.exp(t) - math.exp(s))
            mean, se, _n = summary.mean_se(key)
            verdicts.append(
                _mean_verdict(f"ever-alive count over [{s:g},{t:g}]", expected, mean, se, mult)
            )
    is_binary = cfg.offspring.weights == {2: 1.0}
    for t in geometric_times:
        if not is_binary:
            verdicts.append(
                Verdict(
                    f"geometric law of n({t:g})",
                    INCONCLUSIVE,
                    None,
                    None,
                    None,
                    None,
                    "geometric population law holds for binary branching only",
                )
            )
            continue
        vals = summary.values(("n", float(t))).astype(np.int64)
        p = math.exp(-float(t))
        verdicts.append(_geometric_chisquare(vals, p, cfg.p_threshold, f"geometric law of n({t:g})"))
    return verdicts


def _geometric_chisquare(counts, p, threshold, name):
    """Chi-square against Geometric(p) on {1,2,...}; parameter known, ddof 0."""
    R = len(counts)
    # Choose the tail cut so every expected bin count is >= 5: the expected
    # mass of bin k is R p (1-p)^{k-1}, decreasing in k, and the pooled tail
    # R (1-p)^{K-1} only shrinks below 5 after individual bins do.
    kmax = 1
    while R * p * (1.0 - p) ** kmax >= 5.0 and kmax < 100_000:
        kmax += 1
    while kmax > 1 and R * (1.0 - p) ** (kmax - 1) < 5.0:
        kmax -= 1
    if kmax < 2:
        return Verdict(
            name,
            INCONCLUSIVE,
            None,
            None,
            None,
            threshold,
            f"too few replications ({R}) to form two bins of expected count >= 5",
        )
    observed = np.bincount(np.minimum(counts, kmax), minlength=kmax + 1)[1:]
    expected = np.array(
        [R * p * (1.0 - p) ** (k - 1) for k in range(1, kmax)] + [R * (1.0 - p) ** (kmax - 1)]
    )
    stat, pvalue = scipy_stats.chisquare(observed, expected, ddof=0)
    return _pvalue_verdict(
        name, float(pvalue), threshold, f"chi2={float(stat):.4g} over {kmax} bins (tail pooled)"
    )


def check_many_to_one(summary: EnsembleSummary, fid, t, oracle_draws=200_000) -> Verdict:
    """Mean of sum_u F(X_u(t)) vs e^t * E[F(B_t)] from an independent oracle.

    The oracle samples plain Brownian marginals on a reserved stream; the
    verdict combines both standard errors.
    """
    cfg = summary.config
    t = float(t)
    mean, se, _n = summary.mean_se(("sumF", fid, t))
    f = bstats.resolve_function(fid)
    gen = RngStream(cfg.master_seed).oracle(_stable_check_index(fid, t)).generator()
    draws = np.asarray(f(gen.normal(0.0, math.sqrt(t), size=int(oracle_draws))), dtype=float)
    o_mean = float(draws.mean())
    o_se = float(draws.std(ddof=1) / math.sqrt(len(draws)))
    expected = math.exp(t) * o_mean
    combined_se = math.sqrt(se**2 + (math.exp(t) * o_se) ** 2)
    return _mean_verdict(
        f"many-to-one with F={fid} at t={t:g}",
        expected,
        mean,
        combined_se,
        cfg.se_multiplier,
        f"oracle mean {o_mean:.6g} over {oracle_draws} Brownian draws",
    )


def _stable_check_index(fid, t) -> int:
    # Deterministic oracle sub-stream per (functional, time) pair.
    h = hashlib.sha256(f"{fid}@{t!r}".encode()).digest()
    return int.from_bytes(h[:4], "big")


def check_death_functional(summary: EnsembleSummary, fid, t) -> Verdict:
    """Mean ordered-pair sum vs K e^{2t} * integral f(s) e^{-s} ds."""
    cfg = summary.config
    t = float(t)
    mean, se, _n = summary.mean_se(("pairsum", fid, t))
    f = bstats.resolve_function(fid)
    expected = death_functional_expectation(cfg.offspring, t, lambda s: float(f(np.array([s]))[0]))
    return _mean_verdict(f"death functional f={fid} at t={t:g}", expected, mean, se, cfg.se_multiplier)


def check_second_moment(summary: EnsembleSummary, beta, t) -> Verdict:
    """Mean W_t(beta)^2 vs the closed form; beta >= 1 is allowed with a warning.

    The closed form stays exact at finite t for every beta, but its t -> inf
    limit diverges for beta >= 1 (the martingale is no longer L2-bounded), so
    those verdicts are flagged warn instead of pass.
    """
    cfg = summary.config
    beta = float(beta)
    t = float(t)
    w = summary.values(("W", beta, t))
    good = w[~np.isnan(w)] ** 2
    mean = float(good.mean())
    se = float(good.std(ddof=1) / math.sqrt(len(good)))
    expected = second_moment_expectation(cfg.offspring, beta, t)
    verdict = _mean_verdict(
        f"second moment of W_{t:g}({beta:g})", expected, mean, se, cfg.se_multiplier
    )
    if beta >= 1.0:
        verdict.status = WARN if verdict.status == PASS else verdict.status
        verdict.detail += "; beta >= 1: finite-t identity only, the integral diverges as t grows"
    return verdict


def check_barrier_bound(summary: EnsembleSummary, L) -> Verdict:
    """One-sided: exceedance frequency of the sqrt2 t + L line <= e^{-sqrt2 L} + k SE.

    Snapshot-grid monitoring can only undercount continuous crossings, so the
    inequality direction is preserved. A bound above 1 is vacuous.
    """
    cfg = summary.config
    L = float(L)
    bound = math.exp(-bstats.BETA_CRITICAL * L)
    freq, se, n = summary.mean_se(("exceed", L))
    if bound > 1.0:
        return Verdict(
            f"barrier exceedance for L={L:g}",
            VACUOUS,
            bound,
            freq,
            se,
            cfg.se_multiplier,
            "bound exceeds 1; every frequency satisfies it",
        )
    se_eff = se if (n > 1 and freq > 0) else math.sqrt(bound * (1 - bound) / max(n, 1))
    ok = freq <= bound + cfg.se_multiplier * se_eff
    return Verdict(
        f"barrier exceedance for L={L:g}",
        PASS if ok else FAIL,
        bound,
        freq,
        se_eff,
        cfg.se_multiplier,
        f"one-sided check over {n} replications",
    )


def check_extinction_probability(summary: EnsembleSummary) -> Verdict:
    """Extinction frequency at a long horizon vs the Galton-Watson fixed point."""
    cfg = summary.config
    n = summary.kept
    q_hat = 1.0 - summary.survival_count / n
    se = math.sqrt(max(q_hat * (1.0 - q_hat), 1e-12) / n)
    expected = gw_extinction_probability(cfg.offspring)
    return _mean_verdict(
        f"extinction frequency by t={cfg.horizon:g} vs fixed point",
        expected,
        q_hat,
        se,
        cfg.se_multiplier,
        f"{summary.survival_count}/{n} replications survived",
    )


def check_martingale_means(summary: EnsembleSummary) -> list:
    """Mean W_t(beta) = 1 for every collected (beta, t); mean Z_t(beta) = 0 if collected."""
    cfg = summary.config
    verdicts = []
    for key in sorted(summary.samples, key=_key_name):
        if key[0] == "W":
            _, beta, t = key
            mean, se, _n = summary.mean_se(key)
            verdicts.append(
                _mean_verdict(f"martingale mean W_{t:g}({beta:g})", 1.0, mean, se, cfg.se_multiplier)
            )
        elif key[0] == "Z":
            _, beta, t = key
            mean, se, _n = summary.mean_se(key)
            verdicts.append(
                _mean_verdict(
                    f"derivative martingale mean Z_{t:g}({beta:g})", 0.0, mean, se, cfg.se_multiplier
                )
            )
    return verdicts


def check_functional_limits(summary: EnsembleSummary, rel_tol=0.10) -> list:
    """Ensemble means of W_t(beta, f) and V_t against their limit integrals.

    The mean of W_t(beta, f) equals the integral of f against the standard
    Gaussian exactly at every t (a measure-change identity), so it gets an
    SE-gated verdict. The growth statistic V_t only converges to
    integral f(x) e^{-beta x} dx / sqrt(2 pi) — compactly supported f
    assumed — so its finite-horizon bias is absorbed by a relative
    tolerance (default 10%).
    """
    cfg = summary.config
    verdicts = []
    for key in sorted(summary.samples, key=_key_name):
        if key[0] == "Wf":
            _, beta, fid, t = key
            f = bstats.resolve_function(fid)
            x = np.linspace(-12.0, 12.0, 200_001)
            target = float(
                np.trapezoid(np.asarray(f(x), dtype=float) * np.exp(-0.5 * x * x), x)
                / math.sqrt(2.0 * math.pi)
            )
            mean, se, _n = summary.mean_se(key)
            verdicts.append(
                _mean_verdict(
                    f"functional martingale mean, f={fid}, beta={beta:g}, t={t:g}",
                    target,
                    mean,
                    se,
                    cfg.se_multiplier,
                )
            )
        elif key[0] == "V":
            _, beta, fid, t = key
            f = bstats.resolve_function(fid)
            x = np.linspace(-60.0, 60.0, 600_001)
            target = float(
                np.trapezoid(np.asarray(f(x), dtype=float) * np.exp(-beta * x), x)
                / math.sqrt(2.0 * math.pi)
            )
            mean, se, _n = summary.mean_se(key)
            verdicts.append(
                _rel_verdict(
                    f"growth statistic mean, f={fid}, beta={beta:g}, t={t:g}",
                    target,
                    mean,
                    rel_tol,
                    detail=f"SE {se:.3g}",
                )
            )
    return verdicts


def check_critical_scaling(summary: EnsembleSummary, iqr_times=(4.0, 6.0, 8.0)) -> list:
    """Critical martingale coupling, tightness of the recentered maximum,
    and the first-order speed of the maximum.

    (i) Rank correlation between sqrt(t) W_t(sqrt2) and the positive
        critical derivative martingale at the largest collected horizon
        must exceed 0.9 (both converge to multiples of the same limit).
        Rank, not moment: the common limit has a 1/x^2 right tail, so the
        sample Pearson coefficient of the pair is dominated by the largest
        draw and does not converge at any horizon.
    (ii) IQR of M(t) - m(t) stays within a [0.67, 1.5] ratio band across
        iqr_times (tightness proxy).
    (iii) medians of M(t)/t increase toward sqrt2.
    """
    cfg = summary.config
    verdicts = []
    w_times = sorted(t for (s, *rest) in summary.samples.keys() if s == "W" for t in [rest[1]] if rest[0] == bstats.BETA_CRITICAL)
    if w_times:
        tmax = w_times[-1]
        w = summary.values(("W", bstats.BETA_CRITICAL, tmax))
        z = summary.values(("Zc", tmax))
        good = ~(np.isnan(w) | np.isnan(z))
        corr = float(scipy_stats.spearmanr(math.sqrt(tmax) * w[good], z[good]).statistic)
        verdicts.append(
            Verdict(
                f"critical coupling corr at t={tmax:g}",
                PASS if corr > 0.9 else FAIL,
                0.9,
                corr,
                None,
                0.9,
                f"rank corr(sqrt t W_t(sqrt2), critical derivative martingale), {int(good.sum())} reps",
            )
        )
    iqrs = {}
    for t in iqr_times:
        m = summary.values(("M", float(t)))
        good = m[~np.isnan(m)]
        q75, q25 = np.quantile(good, [0.75, 0.25])
        iqrs[float(t)] = float(q75 - q25)
    if iqrs:
        ts = sorted(iqrs)
        ratio_ends = iqrs[ts[-1]] / iqrs[ts[0]]
        spread = max(iqrs.values()) / min(iqrs.values())
        ok = 0.67 <= ratio_ends <= 1.5 and spread <= 1.5
        verdicts.append(
            Verdict(
                f"tightness of M(t)-m(t) over t in {tuple(int(t) if t == int(t) else t for t in ts)}",
                PASS if ok else FAIL,
                1.0,
                ratio_ends,
                None,
                1.5,
                f"IQRs {', '.join(f'{t:g}:{iqrs[t]:.4f}' for t in ts)}; max/min {spread:.4f}",
            )
        )
        medians = {}
        for t in ts:
            m = summary.values(("M", t))
            good = m[~np.isnan(m)]
            medians[t] = float(np.median(good) / t)
        med_list = [medians[t] for t in ts]
        increasing = all(b > a for a, b in zip(med_list, med_list[1:]))
        below = med_list[-1] < bstats.BETA_CRITICAL
        verdicts.append(
            Verdict(
                "median M(t)/t increases toward sqrt2",
                PASS if (increasing and below) else FAIL,
                bstats.BETA_CRITICAL,
                med_list[-1],
                None,
                None,
                "medians " + ", ".join(f"{t:g}:{medians[t]:.4f}" for t in ts),
            )
        )
    return verdicts


def check_overlap_rescaled_mass(summary: EnsembleSummary, beta, a, t) -> Verdict:
    """Mean of e^{(1-b^2)at} nu W_t(b)^2 against its exact finite-t value.

    Splitting the pair sum at the cut time gives, for every beta,

        E[e^{(1-b^2)at} nu W_t(b)^2] = E[W_{(1-a)t}(b)^2]

    exactly at finite t (diagonal terms give the e^{-(1-b^2)(1-a)t} part;
    pairs splitting after at reproduce the second-moment integral over
    [at, t]). At beta = 0, binary, this is 2 - e^{-(1-a)t}. The unweighted
    mean of e^{(1-b^2)at} nu has no finite limit — it behaves like
    K E[1/W_t], which grows with t — so the weighted form is the quantity
    with a closed form.
    """
    cfg = summary.config
    beta = float(beta)
    t = float(t)
    a = float(a)
    mean, se, n = summary.mean_se(("nuw2", beta, a, t))
    if n < MIN_SURVIVORS:
        return Verdict(
            f"rescaled overlap mass mean (beta={beta:g}, a={a:g}, t={t:g})",
            INCONCLUSIVE,
            None,
            mean,
            se,
            None,
            f"only {n} surviving replications (< {MIN_SURVIVORS})",
        )
    expected = second_moment_expectation(cfg.offspring, beta, t - a * t)
    return _mean_verdict(
        f"rescaled overlap mass mean (beta={beta:g}, a={a:g}, t={t:g})",
        expected,
        mean,
        se,
        cfg.se_multiplier,
        detail="exact finite-horizon identity: equals the second moment of W at (1-a)t",
    )


# --------------------------------------------------------------------------
# Fluctuation experiment
# --------------------------------------------------------------------------


def fluctuation_report(
    summary: EnsembleSummary,
    regime: str,
    beta: float,
    t: float,
    delta: float,
    *,
    p_threshold: float = 0.01,
    hill_tolerance: float = 0.25,
    max_replications: int | None = None,
) -> dict:
    """Rescaled-fluctuation verdicts from an already-run ensemble.

    The ensemble must hold W(beta) at both t and t+delta, plus the variance
    proxy for Gaussian regimes: W(2 beta) at t+delta when subcritical, the
    critical pair (sqrt(t+delta) W(sqrt2)) when on the boundary.  Pass
    max_replications to restrict the test to a deterministic prefix of the
    replication streams, e.g. when one large ensemble feeds several checks.
    """
    offspring = summary.config.offspring
    spec = blimits.FluctuationSpec(regime=regime, beta=beta, K=offspring.pair_rate)
    horizon = t + delta

    def grab(key):
        vals = summary.values(key)
        return vals[:max_replications] if max_replications is not None else vals

    w_t = grab(("W", beta, t))
    w_inf = grab(("W", beta, horizon))
    rate = blimits.fluctuation_rate(spec, t)
    resid = rate * (w_inf - w_t)

    report = {
        "regime": regime,
        "beta": beta,
        "t": t,
        "delta": delta,
        "rate": rate,
        "replications": int(len(resid)),
        "survival_count": summary.survival_count,
        "truncated_count": summary.truncated_count,
    }
    verdicts = []
    if regime in (blimits.SUBCRITICAL, blimits.BOUNDARY):
        if regime == blimits.SUBCRITICAL:
            proxy = grab(("W", 2.0 * beta, horizon))
        else:
            w_crit = grab(("W", bstats.BETA_CRITICAL, horizon))
            proxy = math.sqrt(horizon) * w_crit * math.sqrt(math.pi / 2.0)
        sigma2 = np.array(
            [blimits.gaussian_fluctuation_variance(spec, max(p, 0.0)) for p in proxy]
        )
        good = sigma2 > 0.0
        standardized = resid[good] / np.sqrt(sigma2[good])
        report["excluded_zero_variance"] = int((~good).sum())
        ks_stat, ks_p = scipy_stats.kstest(standardized, "norm")
        cvm = scipy_stats.cramervonmises(standardized, "norm")
        report["ks_stat"], report["ks_p"] = float(ks_stat), float(ks_p)
        report["cvm_stat"], report["cvm_p"] = float(cvm.statistic), float(cvm.pvalue)
        verdicts.append(
            _pvalue_verdict(
                f"{regime} fluctuation KS normality (beta={beta:g}, t={t:g})",
                float(ks_p),
                p_threshold,
                f"KS stat {float(ks_stat):.4g} on {len(standardized)} standardized residuals",
            )
        )
        verdicts.append(
            _pvalue_verdict(
                f"{regime} fluctuation Cramer-von-Mises (beta={beta:g}, t={t:g})",
                float(cvm.pvalue),
                p_threshold,
                "EDF cross-check of the same residuals",
            )
        )
    else:
        target = spec.stable_index
        pos = resid[resid > 0.0]
        report["positive_count"] = int(len(pos))
        sens = blimits.hill_sensitivity(pos)
        report["hill_sensitivity"] = {f: (k, est) for f, (k, est) in sens.items()}
        k1, est = sens[0.01]
        report["hill_k"], report["hill_estimate"] = k1, est
        ok = abs(est - target) <= hill_tolerance
        verdicts.append(
            Verdict(
                f"extremal fluctuation tail index (beta={beta:g}, t={t:g})",
                PASS if ok else FAIL,
                target,
                est,
                None,
                hill_tolerance,
                "Hill at k=1%; sensitivity "
                + ", ".join(f"{f:.3%}:{e:.4f}" for f, (_k, e) in sorted(sens.items())),
            )
        )
    report["verdicts"] = verdicts
    return report


def fluctuation_experiment(cfg: ExperimentConfig) -> dict:
    """Distribution of the rescaled martingale fluctuation at one (beta, t).

    options: regime (subcritical/boundary/extremal), beta, t, delta.
    The unknown limit W_inf(beta) is replaced by W_{t+delta}(beta); Gaussian
    regimes standardize each replication by its own limit-variance proxy and
    test standard normality (KS primary, Cramer-von-Mises alongside); the
    extremal regime estimates the positive-tail index and compares it with
    sqrt2/beta.
    """
    opts = cfg.options
    regime = opts["regime"]
    beta = float(opts["beta"])
    t = float(opts["t"])
    delta = float(opts["delta"])
    horizon = t + delta

    betas = {beta}
    if regime == blimits.SUBCRITICAL:
        betas.add(2.0 * beta)
    if regime == blimits.BOUNDARY:
        betas.add(bstats.BETA_CRITICAL)
    run_cfg = replace(
        cfg,
        horizon=horizon,
        snapshot_times=tuple(sorted({t, horizon})),
        times=tuple(sorted({t, horizon})),
        betas=tuple(sorted(betas)),
        options={"collect": ("W",)},
    )
    summary = run_ensemble(run_cfg)
    report = fluctuation_report(
        summary,
        regime,
        beta,
        t,
        delta,
        p_threshold=cfg.p_threshold,
        hill_tolerance=float(opts.get("hill_tolerance", 0.25)),
    )
    report["summary"] = summary
    return report


# --------------------------------------------------------------------------
# Overlap decay experiment
# --------------------------------------------------------------------------


def overlap_decay_experiment(cfg: ExperimentConfig) -> dict:
    """Decay rate of the typical overlap mass nu_{beta,t}([a,1]) across horizons.

    options: beta, a; cfg.times is the horizon grid. Regimes by beta:
      beta < sqrt2/2:  slope of ln median nu vs t is -(1-beta^2) a;
      beta = sqrt2/2:  slope is -a/2 after adding back (1/2) ln(at);
      beta > sqrt2/2:  slope is -(sqrt2-beta)^2 a after adding back
                       (3 beta/sqrt2) ln(at), plus a tail-index check of the
                       rescaled mass against sqrt2/(2 beta).

    The regression uses per-horizon medians, not means: the rescaled overlap
    converges in probability/distribution, and its limit carries a
    1/W_infinity^2 factor whose heavy left-0 tail makes the plain mean decay
    strictly slower than the typical value (for beta = 0 the limit's mean is
    infinite). Medians commute with convergence in law to a continuous
    limit; means here do not converge at the theorem's rate at all. Both
    are reported. Fewer than 100 surviving replications at any horizon is
    inconclusive.
    """
    opts = cfg.options
    beta = float(opts["beta"])
    a = float(opts["a"])
    rel_tol = float(opts.get("slope_tolerance", 0.20))
    t_grid = sorted(cfg.times)
    if len(t_grid) < 2:
        raise ValueError("overlap decay needs at least two horizons in times")

    run_cfg = replace(
        cfg,
        record_tree=True,
        betas=(beta,),
        a_values=(a,),
        options={"collect": ("n", "W"), "overlap": tuple((beta, a, t) for t in t_grid)},
    )
    summary = run_ensemble(run_cfg)

    means, medians, counts = [], [], []
    for t in t_grid:
        vals = summary.values(("nu", beta, a, t))
        good = vals[~np.isnan(vals)]
        counts.append(len(good))
        means.append(float(good.mean()) if len(good) else float("nan"))
        medians.append(float(np.median(good)) if len(good) else float("nan"))
    report = {
        "beta": beta,
        "a": a,
        "t_grid": t_grid,
        "mean_nu": dict(zip(t_grid, means)),
        "median_nu": dict(zip(t_grid, medians)),
        "survivors": dict(zip(t_grid, counts)),
        "replications": summary.kept,
        "truncated_count": summary.truncated_count,
    }
    verdicts = []
    if min(counts) < MIN_SURVIVORS:
        verdicts.append(
            Verdict(
                f"overlap decay slope (beta={beta:g}, a={a:g})",
                INCONCLUSIVE,
                None,
                None,
                None,
                None,
                f"fewest survivors {min(counts)} < {MIN_SURVIVORS}",
            )
        )
        report["verdicts"] = verdicts
        report["summary"] = summary
        return report

    boundary = abs(beta - bstats.BETA_CRITICAL / 2.0) <= 1e-12
    ln_med = np.log(np.array(medians))
    label = f"overlap decay slope (beta={beta:g}, a={a:g})"
    if boundary:
        ln_adj = ln_med + 0.5 * np.log(a * np.array(t_grid))
        expected_slope = -a / 2.0
    elif beta > bstats.BETA_CRITICAL / 2.0:
        ln_adj = ln_med + (3.0 * beta / bstats.BETA_CRITICAL) * np.log(a * np.array(t_grid))
        expected_slope = -((bstats.BETA_CRITICAL - beta) ** 2) * a
    else:
        ln_adj = ln_med
        expected_slope = -(1.0 - beta**2) * a
    slope = float(np.polyfit(np.array(t_grid), ln_adj, 1)[0])
    report["slope"], report["expected_slope"] = slope, expected_slope
    verdicts.append(
        _rel_verdict(
            label,
            expected_slope,
            slope,
            rel_tol,
            detail="median nu: " + ", ".join(f"t={t:g}:{m:.4g}" for t, m in zip(t_grid, medians)),
        )
    )
    if beta > bstats.BETA_CRITICAL / 2.0 and not boundary:
        t_max = t_grid[-1]
        nu_max = summary.values(("nu", beta, a, t_max))
        rate = (a * t_max) ** (3.0 * beta / bstats.BETA_CRITICAL) * math.exp(
            (bstats.BETA_CRITICAL - beta) ** 2 * a * t_max
        )
        rescaled = rate * nu_max[~np.isnan(nu_max)]
        target = bstats.BETA_CRITICAL / (2.0 * beta)
        tol = float(opts.get("hill_tolerance", 0.25))
        est = blimits.hill_tail_index(rescaled, max(1, int(0.01 * len(rescaled))))
        verdicts.append(
            Verdict(
                f"overlap mass tail index (beta={beta:g}, a={a:g}, t={t_max:g})",
                PASS if abs(est - target) <= tol else FAIL,
                target,
                est,
                None,
                tol,
                "Hill at k=1% of rescaled masses",
            )
        )
    report["verdicts"] = verdicts
    report["summary"] = summary
    return report


# --------------------------------------------------------------------------
# Dual-route oracle equivalence
# --------------------------------------------------------------------------


def check_oracle_equivalence(
    master_seed,
    offspring=None,
    n_trees=100,
    horizon=3.5,
    max_population=200,
    beta=0.8,
    a=0.4,
    fids=("one", "poly:0:1"),
    rel_tol=1e-10,
) -> Verdict:
    """Grouped overlap/death-functional routes vs quadratic brute force.

    Simulates seeded trees until n_trees of them have 1 <= n(horizon) <=
    max_population, then compares overlap_mass against the pairwise oracle
    and death_pair_sum against LCA-walk summation on every tree. The verdict
    reports the worst relative discrepancy.
    """
    offspring = offspring or OffspringDistribution.binary()
    at = a * horizon
    sim_cfg = SimConfig(
        horizon=horizon,
        snapshot_times=(at, horizon),
        offspring=offspring,
        record_tree=True,
    )
    worst = 0.0
    accepted = 0
    stream = 0
    base = RngStream(int(master_seed))
    while accepted < n_trees:
        # Reserved key space: equivalence trees never share streams with
        # ensemble replications of the same master seed.
        real = simulate(sim_cfg, base.oracle(20_000 + stream))
        stream += 1
        if stream > 100 * n_trees:
            raise RuntimeError("could not collect enough small trees; widen the bounds")
        n = real.alive_at(horizon).n
        if not (1 <= n <= max_population):
            continue
        accepted += 1
        grouped = bstats.overlap_mass(real, beta, horizon, a)
        pairwise = bstats.overlap_mass_pairwise(real, beta, horizon, a)
        worst = max(worst, abs(grouped - pairwise) / max(abs(pairwise), 1e-300))
        for fid in fids:
            f = bstats.resolve_function(fid)
            fast = death_pair_sum(real, horizon, f)
            slow = death_pair_sum_pairwise(real, horizon, lambda d: float(f(np.array([d]))[0]))
            denom = max(abs(slow), 1.0)
            worst = max(worst, abs(fast - slow) / denom)
    ok = worst <= rel_tol
    return Verdict(
        f"oracle equivalence over {n_trees} trees (n <= {max_population})",
        PASS if ok else FAIL,
        0.0,
        worst,
        None,
        rel_tol,
        "worst relative discrepancy across overlap and death-functional routes",
    )


# --------------------------------------------------------------------------
# Limit-object self-tests (no branching simulation involved)
# --------------------------------------------------------------------------


def limit_selftests(
    master_seed,
    alpha=0.7,
    n_stable=100_000,
    n_gumbel=1_000_000,
    n_pareto=100_000,
    p_threshold=0.01,
    se_multiplier=4.0,
) -> list:
    """Self-contained checks of the limit-law layer.

    Cross-validates the two positive-stable routes, the defining stability
    property, the Laplace transform at alpha = 1/2, the Gumbel-mixture
    median, and the Hill estimator on exact Pareto input.
    """
    verdicts = []
    base = RngStream(int(master_seed)).oracle(10_000)

    spec = StableSpec(alpha=alpha)
    direct = sample_stable_positive(spec, RngStream(base.master_seed, base.stream_index + 1), size=n_stable)
    series = sample_stable_positive(
        spec, RngStream(base.master_seed, base.stream_index + 2), size=n_stable, method="series"
    )
    _stat, p = scipy_stats.ks_2samp(direct, series)
    verdicts.append(
        _pvalue_verdict(
            f"stable sampler cross-method KS (alpha={alpha:g})",
            float(p),
            p_threshold,
            f"{n_stable} draws per route",
        )
    )

    s1 = sample_stable_positive(spec, RngStream(base.master_seed, base.stream_index + 3), size=n_stable)
    s2 = sample_stable_positive(spec, RngStream(base.master_seed, base.stream_index + 4), size=n_stable)
    s3 = sample_stable_positive(spec, RngStream(base.master_seed, base.stream_index + 5), size=n_stable)
    _stat, p = scipy_stats.ks_2samp((s1 + s2) / 2.0 ** (1.0 / alpha), s3)
    verdicts.append(
        _pvalue_verdict(
            f"stable scaling identity S1+S2 = 2^(1/alpha) S (alpha={alpha:g})",
            float(p),
            p_threshold,
        )
    )

    half = StableSpec(alpha=0.5)
    s = sample_stable_positive(half, RngStream(base.master_seed, base.stream_index + 6), size=n_stable)
    lt = np.exp(-s)
    measured = float(lt.mean())
    se = float(lt.std(ddof=1) / math.sqrt(len(lt)))
    expected = math.exp(-math.gamma(0.5))
    verdicts.append(
        _mean_verdict(
            "stable Laplace transform at lambda=1 (alpha=0.5)", expected, measured, se, se_multiplier
        )
    )

    gspec = blimits.GumbelMixtureSpec(z_samples=np.array([1.0]), C=1.0)
    draws = blimits.sample_limit_maximum(
        gspec, RngStream(base.master_seed, base.stream_index + 7), size=n_gumbel
    )
    med = float(np.median(draws))
    expected_med = -math.log(math.log(2.0)) / bstats.BETA_CRITICAL
    # Asymptotic SE of a sample median: 1 / (2 f(med) sqrt(n)) with
    # f(x) = sqrt2 ln2 / 2 at the median of the sqrt2-scaled Gumbel.
    dens = bstats.BETA_CRITICAL * math.log(2.0) / 2.0
    med_se = 1.0 / (2.0 * dens * math.sqrt(n_gumbel))
    verdicts.append(
        _mean_verdict("limit-maximum median (z=1, C=1)", expected_med, med, med_se, se_multiplier)
    )

    gen = RngStream(base.master_seed, base.stream_index + 8).generator()
    pareto = (gen.pareto(1.5, size=n_pareto) + 1.0)  # survival x^{-1.5} on [1, inf)
    est = blimits.hill_tail_index(pareto, k=1000)
    verdicts.append(
        Verdict(
            "Hill estimator on exact Pareto(1.5)",
            PASS if abs(est - 1.5) <= 0.15 else FAIL,
            1.5,
            est,
            None,
            0.15,
            f"k=1000 of {n_pareto}",
        )
    )

    stable_for_hill = sample_stable_positive(
        StableSpec(alpha=0.7), RngStream(base.master_seed, base.stream_index + 9), size=n_pareto
    )
    est = blimits.hill_tail_index(stable_for_hill, k=1000)
    verdicts.append(
        Verdict(
            "Hill estimator on stable draws (alpha=0.7)",
            PASS if abs(est - 0.7) <= 0.1 else FAIL,
            0.7,
            est,
            None,
            0.1,
            f"k=1000 of {n_pareto}",
        )
    )
    return verdicts


# --------------------------------------------------------------------------
# Output writers (atomic, deterministic)
# --------------------------------------------------------------------------


def _atomic_write(path, text):
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _header(cfg: ExperimentConfig) -> str:
    return (
        f"# experiment = {cfg.name}\n"
        f"# config_sha256 = {config_digest(cfg)}\n"
        f"# master_seed = {cfg.master_seed}\n"
    )


def write_summary_table(summary: EnsembleSummary, path):
    cols = ("statistic", "mean", "se", "variance", "n_valid", "q25", "median", "q75")
    lines = [_header(summary.config) + "\t".join(cols)]
    for row in summary.aggregate_rows():
        name, *vals = row
        lines.append(name + "\t" + "\t".join(repr(v) for v in vals))
    _atomic_write(path, "\n".join(lines) + "\n")


def write_verdict_table(cfg: ExperimentConfig, verdicts, path):
    cols = ("check", "status", "expected", "measured", "se", "threshold", "detail")
    lines = [_header(cfg) + "\t".join(cols)]
    for v in verdicts:
        lines.append("\t".join(str(x) for x in v.row()))
    _atomic_write(path, "\n".join(lines) + "\n")


def write_replication_table(summary: EnsembleSummary, path):
    """Per-replication rows: (replication, statistic, beta, a, t, value, survived)."""
    lines = [
        _header(summary.config)
        + "\t".join(("replication", "statistic", "beta", "a", "t", "value", "survived"))
    ]
    keys = sorted(summary.samples, key=_key_name)
    for rep in range(summary.kept):
        survived = int(summary.survived[rep])
        for key in keys:
            stat = key[0]
            beta = a = ""
            t = key[-1]
            if stat in ("W", "Z"):
                beta = repr(key[1])
            elif stat in ("Wf", "V"):
                beta = repr(key[1])
            elif stat == "nu" or stat == "nuw2":
                beta, a = repr(key[1]), repr(key[2])
            value = float(summary.samples[key][rep])
            lines.append(
                f"{rep}\t{_key_name(key)}\t{beta}\t{a}\t{t!r}\t{value!r}\t{survived}"
            )
    _atomic_write(path, "\n".join(lines) + "\n")


def write_metadata(cfg: ExperimentConfig, path, extra=None):
    from . import __version__

    lines = [
        f"experiment = {cfg.name}",
        f"config_sha256 = {config_digest(cfg)}",
        f"master_seed = {cfg.master_seed}",
        f"code_version = {__version__}",
        f"replications = {cfg.replications}",
        f"workers = {cfg.workers}",
        f"horizon = {cfg.horizon!r}",
        f"snapshot_times = {','.join(repr(t) for t in cfg.snapshot_times)}",
        f"offspring = {dict(sorted(cfg.offspring.weights.items()))!r}",
        f"particle_cap = {cfg.particle_cap}",
        f"barrier = {cfg.barrier!r}",
        f"record_tree = {cfg.record_tree}",
        f"se_multiplier = {cfg.se_multiplier!r}",
        f"p_threshold = {cfg.p_threshold!r}",
    ]
    for k, v in sorted((extra or {}).items()):
        lines.append(f"{k} = {v}")
    _atomic_write(path, "\n".join(lines) + "\n")
