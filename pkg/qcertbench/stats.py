"""Sample-size calculators, estimators and accept/reject boilerplate."""

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import settings
from .errors import InvalidInputError
from .randomness import as_generator

logger = logging.getLogger(__name__)

THREE_SIGMA_DELTA = 0.0027


@dataclass(frozen=True)
class ConfidenceSpec:
    """Target accuracy epsilon and failure probability delta."""

    epsilon: float
    delta: float

    def __post_init__(self):
        eps, delta = float(self.epsilon), float(self.delta)
        if math.isnan(eps) or eps <= 0:
            raise InvalidInputError(f"epsilon must be positive, got {self.epsilon}")
        if not 0 < delta < 1:
            raise InvalidInputError(f"delta must lie in (0, 1), got {self.delta}")
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "delta", delta)


@dataclass(frozen=True)
class Estimate:
    value: float
    epsilon: float
    delta: float
    n_samples_used: int
    method: str
    details: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if int(self.n_samples_used) < 1:
            raise InvalidInputError("an estimate needs at least one sample")
        object.__setattr__(self, "n_samples_used", int(self.n_samples_used))

    def to_dict(self):
        return asdict(self)


# --- SAMPLE COUNTS ---

def hoeffding_n(range_width, spec):
    """m = ceil((b - a)^2 / (2 eps^2) ln(2 / delta)), at least 1."""
    if range_width < 0:
        raise InvalidInputError("range width must be non-negative")
    if math.isinf(spec.epsilon):
        return 1
    return max(1, math.ceil(range_width**2 / (2 * spec.epsilon**2) * math.log(2 / spec.delta)))


def naive_certification_n(spec):
    return max(1, math.ceil(math.log(1 / spec.delta) / spec.epsilon))


def gap_certification_n(spec, gap):
    if not 0 < gap <= 1:
        raise InvalidInputError(f"spectral gap must lie in (0, 1], got {gap}")
    return max(1, math.ceil(math.log(1 / spec.delta) / (spec.epsilon * gap)))


def stabilizer_certification_n(spec):
    return max(1, math.ceil(2 * math.log(1 / spec.delta) / spec.epsilon))


def mom_group_size(delta):
    return max(1, math.ceil(settings.MOM_GROUP_CONSTANT * math.log(1 / delta)))


def mom_sample_plan(spec, constant=settings.SFE_CONSTANT, n_requested=None):
    """(n, k, l): n >= constant / eps^2 ln(1/delta) rounded up to a multiple of the group size k."""
    k = mom_group_size(spec.delta)
    if n_requested is None:
        n = math.ceil(constant / spec.epsilon**2 * math.log(1 / spec.delta))
        n = k * math.ceil(n / k)
    else:
        n = int(n_requested)
        if n < 1:
            raise InvalidInputError("requested sample count must be positive")
        if n % k:
            rounded = k * math.ceil(n / k)
            logger.warning("sample count %d is not a multiple of %d; rounded up to %d", n, k, rounded)
            n = rounded
    return n, k, n // k


# --- ESTIMATORS ---

def empirical_mean_with_stderr(samples):
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise InvalidInputError("empty sample")
    if x.size == 1:
        return float(x[0]), math.inf
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def median_of_means(samples, k_groups):
    """Lower median of the means of k_groups consecutive equal-size groups.

    A remainder that does not fill the last group is dropped with a warning.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise InvalidInputError("median of means needs at least one sample")
    k_groups = int(k_groups)
    if not 1 <= k_groups <= x.size:
        raise InvalidInputError(f"group count must lie in [1, {x.size}], got {k_groups}")
    size = x.size // k_groups
    used = size * k_groups
    if used < x.size:
        logger.warning("median of means: dropping %d trailing samples", x.size - used)
    means = np.sort(x[:used].reshape(k_groups, size).mean(axis=1))
    return float(means[math.ceil(k_groups / 2) - 1])


def median_of_means_error_bound(sigma, m, delta):
    return float(sigma * math.sqrt(32 * math.log(1 / delta) / m))


def importance_sampler(p, q, f, n_samples, rng):
    """Estimates sum_k f(k) p(k) from n draws k ~ q as the mean of f(k) p(k) / q(k)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise InvalidInputError("p and q must be probability vectors of equal length")
    for name, vec in (("p", p), ("q", q)):
        if np.any(vec < 0) or abs(vec.sum() - 1) > 1e-9:
            raise InvalidInputError(f"{name} is not a probability vector")
    values = np.array([f(k) for k in range(p.size)], dtype=float) if callable(f) else np.asarray(f, dtype=float)
    if values.shape != p.shape:
        raise InvalidInputError("f must give one value per outcome")
    if np.any((q == 0) & (p * values != 0)):
        raise InvalidInputError("q must be positive wherever f p is non-zero")
    n = int(n_samples)
    if n < 1:
        raise InvalidInputError("importance sampling needs at least one draw")
    gen = as_generator(rng)
    draws = gen.choice(p.size, size=n, p=q)
    weights = values[draws] * p[draws] / q[draws]
    mean = float(weights.mean())
    spread = float(weights.std(ddof=1)) if n > 1 else 0.0
    return Estimate(
        mean,
        3 * spread / math.sqrt(n),
        THREE_SIGMA_DELTA,
        n,
        "importance_sampling",
        {"sample_variance": spread**2},
    )


# --- CONFIDENCE ---

@dataclass(frozen=True)
class MajorityVote:
    accepted: bool
    n_accept: int
    n_runs: int


def amplify_confidence(trial, n_runs):
    """Majority vote over n_runs calls trial(run_index) -> bool; ties reject."""
    n_runs = int(n_runs)
    if n_runs < 1:
        raise InvalidInputError("confidence amplification needs at least one run")
    accepts = sum(1 for i in range(n_runs) if trial(i))
    return MajorityVote(2 * accepts > n_runs, accepts, n_runs)


def amplified_runs(delta):
    """Runs of a 2/3-confidence test giving failure at most delta (Hoeffding on the vote)."""
    return max(1, math.ceil(18 * math.log(1 / delta)))


def union_bound(deltas):
    deltas = [float(x) for x in deltas]
    if any(x < 0 for x in deltas):
        raise InvalidInputError("failure probabilities must be non-negative")
    return sum(deltas)


# --- TAIL ENVELOPES ---

def markov_bound(mean, t):
    """Pr[X >= t] <= E[X] / t for X >= 0."""
    if t <= 0:
        raise InvalidInputError("Markov threshold must be positive")
    return min(1.0, mean / t)


def chebyshev_bound(variance, t):
    if t <= 0:
        raise InvalidInputError("Chebyshev threshold must be positive")
    return min(1.0, variance / t**2)


def hoeffding_tail_bound(m, range_width, t):
    """Pr[|mean - mu| >= t] for m iid samples in an interval of the given width."""
    if t <= 0 or range_width <= 0:
        raise InvalidInputError("Hoeffding threshold and range must be positive")
    return min(1.0, 2 * math.exp(-2 * m * t**2 / range_width**2))
