"""Probability kernels: Poisson-binomial pmf and tails, the normal CDF,
Berry-Esseen and Markov bounds, and a seeded Monte Carlo election simulator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

if TYPE_CHECKING:
    from bvu.model import ElectionInstance

# Best known constant for the non-identically-distributed Berry-Esseen
# inequality (Shevtsova, 2010).
BERRY_ESSEEN_C0 = 0.56

# Fixed chunking keeps Monte Carlo streams independent of memory settings:
# chunk c draws from SeedSequence(seed).spawn(...)[c].
MC_CHUNK = 1 << 16


class DegenerateDistribution(ValueError):
    """Raised when a bound needs positive total variance but every p is 0 or 1."""


def _check_probs(probs: Iterable[float]) -> list[float]:
    out = []
    for i, p in enumerate(probs):
        p = float(p)
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probability {p!r} at position {i} outside [0, 1]")
        out.append(p)
    return out


def pb_pmf(probs: Sequence[float]) -> np.ndarray:
    """Exact pmf of a sum of independent Bernoulli(p_i), by in-place convolution."""
    ps = _check_probs(probs)
    pmf = np.zeros(len(ps) + 1)
    pmf[0] = 1.0
    for n, p in enumerate(ps, start=1):
        # pmf[1..n] <- pmf[1..n]*(1-p) + pmf[0..n-1]*p, high index first
        pmf[1:n + 1] = pmf[1:n + 1] * (1.0 - p) + pmf[0:n] * p
        pmf[0] *= 1.0 - p
    return pmf


def pb_tail(probs: Sequence[float], k: int) -> float:
    """Pr(sum of Bernoulli(p_i) >= k)."""
    if k <= 0:
        _check_probs(probs)
        return 1.0
    if k > len(probs):
        _check_probs(probs)
        return 0.0
    pmf = pb_pmf(probs)
    return float(min(1.0, pmf[k:].sum()))


@dataclass(frozen=True)
class PoissonBinomial:
    probs: tuple[float, ...]

    def pmf(self) -> np.ndarray:
        return pb_pmf(self.probs)

    def tail(self, k: int) -> float:
        return pb_tail(self.probs, k)

    @property
    def mean(self) -> float:
        return float(sum(self.probs))

    @property
    def variance(self) -> float:
        return float(sum(p * (1 - p) for p in self.probs))


def normal_cdf(x: float) -> float:
    """Standard normal CDF.

    Uses ``math.erfc`` (Phi(x) = erfc(-x/sqrt 2)/2), whose relative error is a
    few ulp across the real line, comfortably inside 1e-10 absolute.
    """
    if math.isnan(x):
        raise ValueError("normal_cdf of NaN")
    if x >= 40.0:
        return 1.0
    if x <= -40.0:
        return 0.0
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


@dataclass(frozen=True)
class BerryEsseenTerms:
    sigma2: tuple[float, ...]
    rho: tuple[float, ...]
    psi0: float
    c0: float = BERRY_ESSEEN_C0

    @property
    def bound(self) -> float:
        return self.c0 * self.psi0

    @classmethod
    def from_probs(cls, probs: Sequence[float], c0: float = BERRY_ESSEEN_C0) -> "BerryEsseenTerms":
        ps = np.asarray(_check_probs(probs), dtype=float)
        sigma2 = ps * (1.0 - ps)
        # third absolute central moment of a centred Bernoulli
        rho = sigma2 * (ps ** 2 + (1.0 - ps) ** 2)
        total = sigma2.sum()
        if total <= 0.0:
            raise DegenerateDistribution("all success probabilities are 0 or 1; variance is zero")
        psi0 = float(rho.sum() / total ** 1.5)
        return cls(tuple(sigma2.tolist()), tuple(rho.tolist()), psi0, c0)


def berry_esseen_bound(probs: Sequence[float], c0: float = BERRY_ESSEEN_C0) -> float:
    """Uniform bound on |Pr(S <= x) - Phi(x)| for the standardised Poisson-binomial sum S."""
    return BerryEsseenTerms.from_probs(probs, c0).bound


def standardized_threshold(probs: Sequence[float], h: float) -> float:
    """(h - sum p) / sqrt(sum p(1-p))."""
    ps = np.asarray(probs, dtype=float)
    var = float((ps * (1.0 - ps)).sum())
    if var <= 0.0:
        raise DegenerateDistribution("zero variance")
    return (h - float(ps.sum())) / math.sqrt(var)


def markov_tail_bound(mean: float, a: float) -> float:
    """Markov's inequality Pr(Z >= a) <= E[Z]/a for non-negative Z, capped at 1."""
    if a <= 0:
        raise ValueError(f"Markov bound needs a > 0, got {a}")
    if mean < 0:
        raise ValueError(f"mean of a non-negative variable cannot be {mean}")
    return min(mean / a, 1.0)


def mc_estimate_win_prob(instance: "ElectionInstance", bribed: Iterable[int], samples: int,
                         seed: int) -> tuple[float, float]:
    """Simulate the election ``samples`` times; return (win frequency, 95% CI half-width).

    Randomness comes from numpy's PCG64, seeded through ``SeedSequence(seed)``
    with one spawned child per chunk of ``MC_CHUNK`` samples, so results are
    bit-reproducible across platforms.
    """
    from bvu.model import _group_counts, xi_from_counts

    if samples < 1:
        raise ValueError("samples must be >= 1")
    counts, probs = _group_counts(instance, bribed)
    need = xi_from_counts(instance.sizes, counts) + 1
    if need <= 0:
        return 1.0, 0.0
    if need > len(probs):
        return 0.0, 0.0
    p = np.asarray(probs)
    n_chunks = -(-samples // MC_CHUNK)
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    wins = 0
    remaining = samples
    for child in children:
        size = min(MC_CHUNK, remaining)
        rng = np.random.Generator(np.random.PCG64(child))
        counted = (rng.random((size, p.size)) < p).sum(axis=1)
        wins += int((counted >= need).sum())
        remaining -= size
    est = wins / samples
    half = 1.96 * math.sqrt(est * (1.0 - est) / samples)
    return est, half
