"""Monte Carlo validation of the filter estimators.

Each trial draws a fresh hash family and private-function choices, builds
the initiator's filter, merges the responder's set, and records the three
estimates.  The summaries report the sample moments next to the closed-form
variance expressions so the two can be compared directly, the empirical
Chebyshev coverage for requested epsilons, and the accuracy of picking the
true best candidate in the bundled demo scenario.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import bloom
from .counters import EmatchParams
from .oracle import oracle_match
from .similarity import AttributeProfile


@dataclass
class EstimatorSamples:
    set_size: list[float] = field(default_factory=list)
    overlap: list[float] = field(default_factory=list)
    similarity: list[float] = field(default_factory=list)
    saturated: int = 0


@dataclass
class EstimatorSummary:
    params: EmatchParams
    trials: int
    true_size: int
    true_overlap: int
    true_similarity: float
    mean_size: float
    var_size: float
    mean_overlap: float
    var_overlap: float
    mean_similarity: float
    var_similarity: float
    claimed_var_size: float
    claimed_var_overlap: float
    coverage: dict[float, tuple[float, float]]  # eps -> (empirical, chebyshev floor)
    saturated: int


def _mean(xs: list[float]) -> float:
    return sum(xs) / len(xs)


def _variance(xs: list[float]) -> float:
    m = _mean(xs)
    return sum((x - m) ** 2 for x in xs) / (len(xs) - 1)


def skewness(xs: list[float]) -> float:
    m = _mean(xs)
    sd = math.sqrt(_variance(xs))
    return sum(((x - m) / sd) ** 3 for x in xs) / len(xs)


def sample_estimates(
    profile_a: AttributeProfile,
    profile_b: AttributeProfile,
    pool: bloom.AttributePool,
    params: EmatchParams,
    trials: int,
    seed: bytes,
) -> EstimatorSamples:
    """Run `trials` independent filter constructions and collect estimates."""
    elems_a = bloom.build_indexed_set(profile_a, pool)
    elems_b = bloom.build_indexed_set(profile_b, pool)
    samples = EstimatorSamples()
    for t in range(trials):
        trial_seed = seed + b"|" + str(t).encode()
        spec = bloom.choose_family(
            params.pool_seed, params.hash_count, params.shared_count, trial_seed, params.pool_size
        )
        filt = bloom.insert_initiator(
            bloom.IndexedBloomFilter.empty(params.length, spec), elems_a, trial_seed
        )
        d1 = bloom.count_zero_bits(filt)
        merged = bloom.insert_responder(filt, elems_b)
        d0 = bloom.count_zero_bits(merged)
        try:
            samples.set_size.append(
                bloom.estimate_set_size(d1, params.length, params.hash_count)
            )
            samples.overlap.append(
                bloom.estimate_overlap(
                    d0, d1, params.length, params.hash_count, params.shared_count, len(elems_b)
                )
            )
            samples.similarity.append(
                bloom.estimate_similarity(
                    d0, d1, params.length, params.hash_count, params.shared_count, len(elems_b)
                )
            )
        except bloom.EstimatorSaturated:
            samples.saturated += 1
    return samples


def estimator_experiment(
    profile_a: AttributeProfile,
    profile_b: AttributeProfile,
    params: EmatchParams,
    trials: int,
    seed: bytes,
    epsilons: tuple[float, ...] = (0.2, 0.3),
    pool: bloom.AttributePool | None = None,
) -> EstimatorSummary:
    if trials < 100:
        raise ValueError("trials must be >= 100")
    if pool is None:
        ids = sorted(set(profile_a.ids) | set(profile_b.ids))
        pool = bloom.AttributePool(ids=tuple(ids))
    ref = oracle_match(profile_a, profile_b)
    true_size = sum(p for _, p in profile_a.entries)
    size_b = sum(p for _, p in profile_b.entries)
    true_overlap = ref.weighted_intersection
    samples = sample_estimates(profile_a, profile_b, pool, params, trials, seed)
    claimed_var_size = bloom.set_size_variance(params.length, params.hash_count, true_size)
    claimed_var_overlap = bloom.overlap_variance(
        params.length, params.hash_count, params.shared_count, true_size, size_b, true_overlap
    )
    coverage = {}
    for eps in epsilons:
        hits = sum(1 for x in samples.set_size if abs(x - true_size) <= eps * true_size)
        p1 = claimed_var_size / (eps * true_size) ** 2
        coverage[eps] = (hits / len(samples.set_size), 1.0 - p1)
    return EstimatorSummary(
        params=params,
        trials=trials,
        true_size=true_size,
        true_overlap=true_overlap,
        true_similarity=ref.priority_ochiai,
        mean_size=_mean(samples.set_size),
        var_size=_variance(samples.set_size),
        mean_overlap=_mean(samples.overlap),
        var_overlap=_variance(samples.overlap),
        mean_similarity=_mean(samples.similarity),
        var_similarity=_variance(samples.similarity),
        claimed_var_size=claimed_var_size,
        claimed_var_overlap=claimed_var_overlap,
        coverage=coverage,
        saturated=samples.saturated,
    )


def rank_experiment(
    initiator: AttributeProfile,
    candidates: dict[str, AttributeProfile],
    params: EmatchParams,
    trials: int,
    seed: bytes,
    pool: bloom.AttributePool | None = None,
) -> tuple[float, str]:
    """Fraction of trials in which the estimated best candidate matches the
    plaintext best under the priority-aware coefficient."""
    if pool is None:
        ids = set(initiator.ids)
        for p in candidates.values():
            ids |= set(p.ids)
        pool = bloom.AttributePool(ids=tuple(sorted(ids)))
    truth = max(
        candidates,
        key=lambda name: (oracle_match(initiator, candidates[name]).priority_ochiai, name),
    )
    elems_a = bloom.build_indexed_set(initiator, pool)
    elem_sets = {name: bloom.build_indexed_set(p, pool) for name, p in candidates.items()}
    wins = 0
    for t in range(trials):
        trial_seed = seed + b"|rank|" + str(t).encode()
        spec = bloom.choose_family(
            params.pool_seed, params.hash_count, params.shared_count, trial_seed, params.pool_size
        )
        base = bloom.insert_initiator(
            bloom.IndexedBloomFilter.empty(params.length, spec), elems_a, trial_seed
        )
        d1 = bloom.count_zero_bits(base)
        best, best_value = None, -math.inf
        for name in sorted(elem_sets):
            merged = bloom.insert_responder(base, elem_sets[name])
            d0 = bloom.count_zero_bits(merged)
            value = bloom.estimate_similarity(
                d0, d1, params.length, params.hash_count, params.shared_count,
                len(elem_sets[name]),
            )
            if value > best_value:
                best, best_value = name, value
        if best == truth:
            wins += 1
    return wins / trials, truth
