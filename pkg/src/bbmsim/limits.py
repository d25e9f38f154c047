"""Samplers and evaluators for the limiting objects of the simulator.

The limit laws this package compares against involve constants that are not
known in closed form (the location constant of the recentered maximum, the
prefactor of the stable fluctuation limit). Everything here is therefore
parametrized so comparisons can be made at the shape/exponent level, with
location or scale treated as fitted inputs; proxies for the limit variables
(martingale limits at a large horizon) are passed in explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sampling import _as_generator, sample_exponential_ppp
from .stats import BETA_CRITICAL, centering, martingale_rate

SUBCRITICAL = "subcritical"
BOUNDARY = "boundary"
EXTREMAL = "extremal"
_BOUNDARY_BETA = BETA_CRITICAL / 2.0


@dataclass(frozen=True)
class GumbelMixtureSpec:
    """Mixture inputs for the limiting law of the recentered maximum.

    z_samples are empirical stand-ins for the positive martingale limit
    (drawn uniformly at sampling time); C is the unknown multiplicative
    constant, treated as a fit parameter.
    """

    z_samples: np.ndarray
    C: float = 1.0

    def __post_init__(self):
        z = np.asarray(self.z_samples, dtype=float)
        if z.size == 0:
            raise ValueError("z_samples must be non-empty")
        if not np.all(z > 0.0):
            raise ValueError("z_samples must all be positive")
        if not (self.C > 0.0):
            raise ValueError("C must be positive")
        object.__setattr__(self, "z_samples", z)


def sample_limit_maximum(spec: GumbelMixtureSpec, rng, size=None):
    """Draw (G + ln(C Z)) / sqrt2, G standard Gumbel, Z uniform over z_samples."""
    gen = _as_generator(rng)
    n = 1 if size is None else int(size)
    g = gen.gumbel(0.0, 1.0, size=n)
    z = spec.z_samples[gen.integers(0, len(spec.z_samples), size=n)]
    out = (g + np.log(spec.C * z)) / BETA_CRITICAL
    return float(out[0]) if size is None else out


@dataclass(frozen=True)
class FluctuationSpec:
    """Martingale-fluctuation regime selector.

    subcritical: beta < sqrt2/2 (Gaussian limit, rate e^{(1-beta^2)t/2});
    boundary:    beta = sqrt2/2 (Gaussian limit, rate t^{1/4} e^{t/4});
    extremal:    sqrt2/2 < beta < sqrt2 (one-sided stable limit of index
                 sqrt2/beta, rate e^{c(beta)t - beta m(t)}).
    K is the ordered-pair branching factor of the offspring law.
    """

    regime: str
    beta: float
    K: float

    def __post_init__(self):
        if self.regime not in (SUBCRITICAL, BOUNDARY, EXTREMAL):
            raise ValueError(f"unknown regime {self.regime!r}")
        b = float(self.beta)
        if self.regime == SUBCRITICAL and not (0.0 <= b < _BOUNDARY_BETA):
            raise ValueError(f"subcritical regime needs beta in [0, {_BOUNDARY_BETA!r}), got {b!r}")
        if self.regime == BOUNDARY and abs(b - _BOUNDARY_BETA) > 1e-12:
            raise ValueError(f"boundary regime needs beta = sqrt2/2, got {b!r}")
        if self.regime == EXTREMAL and not (_BOUNDARY_BETA < b < BETA_CRITICAL):
            raise ValueError(
                f"extremal regime needs beta in ({_BOUNDARY_BETA!r}, {BETA_CRITICAL!r}), got {b!r}"
            )
        if float(self.K) < 0.0:
            raise ValueError("K must be >= 0")

    @property
    def stable_index(self) -> float:
        """Tail index sqrt2/beta of the extremal-regime limit."""
        return BETA_CRITICAL / float(self.beta)


def gaussian_fluctuation_variance(spec: FluctuationSpec, w_or_z) -> float:
    """Limit variance sigma^2 for the Gaussian regimes.

    subcritical: (K/(1-beta^2) - 1) * W  with W the realization's
                 double-temperature martingale limit proxy;
    boundary:    (2K - 1) * sqrt(2/pi) * Z  with Z the critical derivative
                 martingale limit proxy.
    The variance is homogeneous of degree 1 in the proxy. The extremal
    regime has no Gaussian variance and is rejected.
    """
    w = float(w_or_z)
    if w < 0.0:
        raise ValueError("martingale limit proxy must be >= 0")
    if spec.regime == SUBCRITICAL:
        return (spec.K / (1.0 - spec.beta**2) - 1.0) * w
    if spec.regime == BOUNDARY:
        return (2.0 * spec.K - 1.0) * math.sqrt(2.0 / math.pi) * w
    raise ValueError("no Gaussian variance exists in the extremal regime")


def fluctuation_rate(spec: FluctuationSpec, t) -> float:
    """The regime's divergence rate at horizon t."""
    t = float(t)
    if spec.regime == SUBCRITICAL:
        return math.exp((1.0 - spec.beta**2) * t / 2.0)
    if spec.regime == BOUNDARY:
        return t**0.25 * math.exp(t / 4.0)
    return math.exp(martingale_rate(spec.beta) * t - spec.beta * centering(t))


def rescale_fluctuation(spec: FluctuationSpec, t, w_t, w_inf_proxy) -> float:
    """rate(t) * (w_inf_proxy - w_t): the quantity whose law stabilizes."""
    if not float(t) > 0.0:
        raise ValueError("t must be positive")
    return fluctuation_rate(spec, t) * (float(w_inf_proxy) - float(w_t))


def sample_limit_extremal_atoms(z_proxy, C, floor, rng) -> np.ndarray:
    """Atoms of the limiting extremal point process, without decoration.

    Returns p_i + (1/sqrt2) ln(C z) for the exponential-intensity atoms p_i
    above floor - shift, i.e. all atoms of the shifted process above floor,
    in decreasing order. The decoration law is deliberately not constructed
    (its construction is outside this package's scope); a decoration sampler
    can be layered on top by adding independent displacements to each atom.
    """
    z = float(z_proxy)
    C = float(C)
    if z <= 0.0:
        raise ValueError("z_proxy must be positive")
    if C <= 0.0:
        raise ValueError("C must be positive")
    shift = math.log(C * z) / BETA_CRITICAL
    return sample_exponential_ppp(float(floor) - shift, rng) + shift


def hill_tail_index(samples, k) -> float:
    """Hill estimator over the k largest order statistics.

    k / sum_{i<=k} ln(X_(i) / X_(k+1)); requires at least k+1 positive
    samples. All-equal inputs make every log-spacing zero and are rejected
    as degenerate.
    """
    k = int(k)
    if k < 1:
        raise ValueError("k must be >= 1")
    pos = np.asarray(samples, dtype=float)
    pos = pos[pos > 0.0]
    if len(pos) < k + 1:
        raise ValueError(f"need at least k+1={k + 1} positive samples, got {len(pos)}")
    pos = np.sort(pos)[::-1]
    denom = float(np.log(pos[:k] / pos[k]).sum())
    if denom <= 0.0:
        raise ValueError("degenerate input: top order statistics carry no log-spacing")
    return k / denom


def hill_sensitivity(samples, fractions=(0.005, 0.01, 0.02)) -> dict:
    """Hill estimates across tail fractions: {fraction: (k, estimate)}.

    The working default is the 1% tail; the neighbors document how sensitive
    the estimate is to that choice.
    """
    pos = np.asarray(samples, dtype=float)
    pos = pos[pos > 0.0]
    out = {}
    for frac in fractions:
        k = max(1, int(round(frac * len(pos))))
        out[float(frac)] = (k, hill_tail_index(pos, k))
    return out
