"""Per-realization statistics: martingales, growth, extremes, overlap.

All exponential sums are computed with a running-maximum shift (log-sum-exp
discipline): at inverse temperature near sqrt(2) and horizons around 12 the
raw exponents reach ~34 and squared group sums ~e^68, so naive exponentials
would overflow long before the statistics themselves become large. After the
shift every summand is <= 1 and the sums stay well inside double range.

Sums run over snapshot entries in stored order, which the engine guarantees
to be increasing particle index — results are bit-reproducible per stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# The critical inverse temperature: growth of the population (rate 1) exactly
# balances the Gaussian displacement cost beta^2/2 when beta^2/2 + 1 = beta^2,
# i.e. beta = sqrt(2).
BETA_CRITICAL = math.sqrt(2.0)


def martingale_rate(beta) -> float:
    """c(beta) = 1 + beta^2/2, the growth rate of E[sum e^{beta X_u(t)}]."""
    return 1.0 + 0.5 * float(beta) ** 2


@dataclass(frozen=True)
class BetaGrid:
    """Sorted grid of inverse temperatures (finite, >= 0, no duplicates)."""

    values: tuple

    def __post_init__(self):
        vals = tuple(float(b) for b in self.values)
        if any(not math.isfinite(b) for b in vals):
            raise ValueError("beta values must be finite")
        if any(b < 0.0 for b in vals):
            raise ValueError("beta values must be >= 0")
        if len(set(vals)) != len(vals):
            raise ValueError("duplicate beta values rejected")
        object.__setattr__(self, "values", tuple(sorted(vals)))


def additive_martingale(snap, beta) -> float:
    """W_t(beta) = e^{-c(beta) t} * sum_u e^{beta X_u(t)}; empty snapshot -> 0."""
    beta = float(beta)
    if snap.n == 0:
        return 0.0
    t = snap.time
    if beta == 0.0:
        # Degenerate log-sum-exp: every term is 1, so W = n e^{-t} exactly.
        return snap.n * math.exp(-t)
    vals = beta * snap.positions
    m = float(vals.max())
    return math.exp(m - martingale_rate(beta) * t) * float(np.exp(vals - m).sum())


def derivative_martingale(snap, beta) -> float:
    """Z_t(beta) = e^{-c(beta) t} * sum_u (X_u(t) - beta t) e^{beta X_u(t)}.

    This is the beta-derivative of the additive martingale (sign included);
    note that at beta = sqrt(2) it converges to a *negative* limit — see
    critical_derivative_martingale for the positively-normalized variant.
    """
    beta = float(beta)
    if snap.n == 0:
        return 0.0
    t = snap.time
    vals = beta * snap.positions
    m = float(vals.max())
    s = float(((snap.positions - beta * t) * np.exp(vals - m)).sum())
    return math.exp(m - martingale_rate(beta) * t) * s


def critical_derivative_martingale(snap) -> float:
    """sum_u (sqrt2 t - X_u(t)) e^{sqrt2 X_u(t) - 2t}, positive for large t.

    Equals minus the beta-derivative of W at the critical point; this is the
    orientation whose almost-sure limit is positive on survival, used for the
    critical-scaling correlation check and as a limit-variance input.
    """
    return -derivative_martingale(snap, BETA_CRITICAL)


def functional_martingale(snap, beta, f) -> float:
    """W_t(beta, f) = sum_u e^{beta X_u(t) - c(beta) t} f((X_u(t) - beta t)/sqrt t).

    f is a bounded scalar function of the standardized position. t must be
    positive (the standardization divides by sqrt t).
    """
    t = snap.time
    if t <= 0.0:
        raise ValueError("functional martingale needs t > 0 (standardization divides by sqrt t)")
    if snap.n == 0:
        return 0.0
    beta = float(beta)
    vals = beta * snap.positions
    m = float(vals.max())
    std = (snap.positions - beta * t) / math.sqrt(t)
    s = float((np.asarray(f(std), dtype=float) * np.exp(vals - m)).sum())
    return math.exp(m - martingale_rate(beta) * t) * s


def growth_statistic(snap, beta, f) -> float:
    """V_t = sqrt(t) e^{-(1 - beta^2/2) t} * sum_u f(X_u(t) - beta t).

    Measures the population density in a window travelling at slope beta;
    f should have compact support. Empty snapshot -> 0.
    """
    t = snap.time
    if t <= 0.0:
        raise ValueError("growth statistic needs t > 0")
    if snap.n == 0:
        return 0.0
    beta = float(beta)
    s = float(np.asarray(f(snap.positions - beta * t), dtype=float).sum())
    return math.sqrt(t) * math.exp(-(1.0 - 0.5 * beta**2) * t) * s


def max_displacement(snap) -> float:
    """M(t) = max position; undefined (error) on an empty snapshot."""
    if snap.n == 0:
        raise ValueError("max displacement is undefined for an empty snapshot")
    return float(snap.positions.max())


def centering(t) -> float:
    """m(t) = sqrt2 t - (3/(2 sqrt2)) ln t, the first-order maximum location."""
    t = float(t)
    if t <= 0.0:
        raise ValueError("centering requires t > 0")
    return BETA_CRITICAL * t - 3.0 / (2.0 * BETA_CRITICAL) * math.log(t)


def extremal_count(snap, x) -> int:
    """Number of particles with X_u(t) - m(t) >= x."""
    t = snap.time
    if t <= 0.0:
        raise ValueError("extremal count requires t > 0")
    if snap.n == 0:
        return 0
    return int((snap.positions - centering(t) >= float(x)).sum())


# -- overlap ---------------------------------------------------------------


def _ancestor_indices(real, indices, s):
    """Vectorized lift: for each index, its ancestor alive at time s."""
    birth = real.birth_time
    parent = real.parent
    v = indices.astype(np.int64, copy=True)
    mask = birth[v] > s
    while mask.any():
        v[mask] = parent[v[mask]]
        mask = birth[v] > s
    return v


def overlap_mass(real, beta, t, a) -> float:
    """nu_{beta,t}([a,1]): mass of pairs whose lineages split after time a*t.

    Grouping particles of N(t) by their ancestor alive at a*t, the mass
    equals sum_g (sum_{v in g} e^{beta X_v(t) - c t})^2 / W_t(beta)^2 — the
    diagonal pairs u = v are included, so the total pair mass (a -> 0, one
    group) is exactly 1. Linear in n(t). Returns NaN when the realization is
    extinct by t (the overlap is undefined there); the time a*t must be one
    of the requested snapshot times.
    """
    a = float(a)
    if not (0.0 < a < 1.0):
        raise ValueError("overlap cut a must lie strictly inside (0, 1)")
    beta = float(beta)
    real._require_tree()
    snap_t = real.alive_at(t)
    at = a * float(t)
    real.alive_at(at)  # membership check: a*t must be a requested snapshot time
    if snap_t.n == 0:
        return float("nan")
    anc = _ancestor_indices(real, snap_t.indices, at)
    _, ginv = np.unique(anc, return_inverse=True)
    vals = beta * snap_t.positions
    w = np.exp(vals - vals.max())  # shared shift cancels in the ratio below
    group_sums = np.bincount(ginv, weights=w)
    total = float(w.sum())
    return float((group_sums**2).sum()) / (total * total)


def overlap_mass_pairwise(real, beta, t, a) -> float:
    """Quadratic reference implementation of overlap_mass.

    Sums e^{beta(X_u + X_v) - 2ct} over ordered pairs u != v whose most
    recent common ancestor dies strictly after a*t, plus the diagonal terms
    for every u, normalized by W_t(beta)^2. Uses longest-common-prefix walks
    over ancestor chains — deliberately independent of the grouped route.
    Intended for verification on small populations only.
    """
    a = float(a)
    if not (0.0 < a < 1.0):
        raise ValueError("overlap cut a must lie strictly inside (0, 1)")
    beta = float(beta)
    real._require_tree()
    snap_t = real.alive_at(t)
    at = a * float(t)
    if snap_t.n == 0:
        return float("nan")
    idx = snap_t.indices
    vals = beta * snap_t.positions
    w = np.exp(vals - vals.max())
    n = len(idx)
    chains = []
    for u in idx:
        chain = []
        v = int(u)
        while v != -1:
            chain.append(v)
            v = int(real.parent[v])
        chains.append(chain[::-1])  # root first
    mass = float((w**2).sum())  # diagonal
    for i in range(n):
        ci = chains[i]
        for j in range(i + 1, n):
            cj = chains[j]
            lca = ci[0]
            for x, y in zip(ci, cj):
                if x != y:
                    break
                lca = x
            if real.death_time[lca] > at:
                mass += 2.0 * float(w[i] * w[j])
    total = float(w.sum())
    return mass / (total * total)


def overlap_cdf(real, beta, t, a_grid) -> np.ndarray:
    """nu_{beta,t}([a,1]) for each a of a sorted grid in (0,1); non-increasing."""
    grid = [float(a) for a in a_grid]
    if sorted(grid) != grid:
        raise ValueError("a_grid must be sorted ascending")
    return np.array([overlap_mass(real, beta, t, a) for a in grid])


# -- named functions for configs --------------------------------------------

_INF_TOKENS = {"inf": math.inf, "+inf": math.inf, "-inf": -math.inf}


def _parse_bound(tok):
    if tok in _INF_TOKENS:
        return _INF_TOKENS[tok]
    return float(tok)


def resolve_function(spec: str):
    """Turn a function name into a vectorized callable.

    Grammar (colon-separated):
      one                  constant 1
      indicator:lo:hi      1 on [lo, hi] (bounds may be -inf/inf)
      poly:c0:c1:c2        c0 + c1 x + c2 x^2 (degree <= 2)
      gauss:center:width   exp(-(x-center)^2 / (2 width^2))
      exp:a                e^{a x}
    Experiment configs reference functions by these strings; arbitrary
    callables are accepted everywhere a function argument is, via the API.
    """
    parts = str(spec).split(":")
    kind, args = parts[0], parts[1:]
    if kind == "one":
        if args:
            raise ValueError("'one' takes no arguments")
        return lambda x: np.ones_like(np.asarray(x, dtype=float))
    if kind == "indicator":
        if len(args) != 2:
            raise ValueError("indicator needs two bounds, e.g. indicator:-1:1")
        lo, hi = _parse_bound(args[0]), _parse_bound(args[1])
        if not lo <= hi:
            raise ValueError(f"indicator bounds out of order: {spec!r}")
        return lambda x: ((np.asarray(x, dtype=float) >= lo) & (np.asarray(x, dtype=float) <= hi)).astype(float)
    if kind == "poly":
        if not 1 <= len(args) <= 3:
            raise ValueError("poly takes 1-3 coefficients (degree <= 2)")
        coef = [float(c) for c in args]
        return lambda x: sum(c * np.asarray(x, dtype=float) ** k for k, c in enumerate(coef))
    if kind == "gauss":
        if len(args) != 2:
            raise ValueError("gauss needs center and width, e.g. gauss:0:1")
        center, width = float(args[0]), float(args[1])
        if width <= 0:
            raise ValueError("gauss width must be positive")
        return lambda x: np.exp(-((np.asarray(x, dtype=float) - center) ** 2) / (2.0 * width**2))
    if kind == "exp":
        if len(args) != 1:
            raise ValueError("exp needs one rate, e.g. exp:0.5")
        rate = float(args[0])
        return lambda x: np.exp(rate * np.asarray(x, dtype=float))
    raise ValueError(
        f"unknown function {spec!r}; known kinds: one, indicator:lo:hi, "
        "poly:c0[:c1[:c2]], gauss:center:width, exp:a"
    )


@dataclass
class StatisticSeries:
    """Values of one named statistic over a time grid, for one replication.

    NaN marks grid times where the statistic is undefined (e.g. overlap after
    extinction); the flagged property reports whether any such time exists.
    """

    name: str
    times: tuple
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = tuple(float(t) for t in self.times)
        self.values = np.asarray(self.values, dtype=float)
        if len(self.times) != len(self.values):
            raise ValueError("one value per grid time required")

    @property
    def flagged(self) -> bool:
        return bool(np.isnan(self.values).any())

    def rows(self, replication, survived):
        """Delimited-row view: (rep id, statistic, beta, a, t, value, survived)."""
        beta = self.meta.get("beta", "")
        a = self.meta.get("a", "")
        out = []
        for t, v in zip(self.times, self.values):
            out.append((replication, self.name, beta, a, t, v, int(bool(survived))))
        return out
