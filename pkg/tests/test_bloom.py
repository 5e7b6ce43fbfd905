import math

import pytest

from pmatch.bloom import (
    AttributePool,
    EstimatorSaturated,
    HashFamilySpec,
    IndexedBloomFilter,
    build_indexed_set,
    candidate_uncertainty,
    chebyshev_bounds,
    choose_family,
    count_zero_bits,
    decode_filter,
    encode_filter,
    estimate_overlap,
    estimate_set_size,
    estimate_similarity,
    insert_initiator,
    insert_responder,
    overlap_variance,
    pool_position,
    remaining_entropy,
    set_size_variance,
)
from pmatch.montecarlo import sample_estimates
from pmatch.similarity import AttributeProfile

from conftest import DEMO_PROFILES


@pytest.fixture(scope="module")
def pool():
    ids = sorted({a.encode() for attrs in DEMO_PROFILES.values() for a in attrs})
    return AttributePool(ids=tuple(ids))


@pytest.fixture(scope="module")
def demo_profiles():
    return {n: AttributeProfile.from_mapping(a) for n, a in DEMO_PROFILES.items()}


class TestIndexedSets:
    def test_sizes_match_priority_sums(self, demo_profiles, pool):
        assert len(build_indexed_set(demo_profiles["Alice"], pool)) == 18
        assert len(build_indexed_set(demo_profiles["Bob"], pool)) == 9

    def test_single_attribute(self, pool):
        p = AttributeProfile.from_mapping({"cancer": 1})
        (elem,) = build_indexed_set(p, pool)
        assert elem.count_index == 1
        assert elem.value == elem.attr_index

    def test_counting_function(self, demo_profiles, pool):
        elems = build_indexed_set(demo_profiles["Alice"], pool)
        for e in elems:
            assert e.value == e.attr_index + e.count_index - 1

    def test_unknown_attribute(self, pool):
        p = AttributeProfile.from_mapping({"skiing": 3})
        with pytest.raises(KeyError):
            build_indexed_set(p, pool)


class TestHashFamily:
    def test_choose_family_sizes(self):
        spec = choose_family(b"pool", 12, 11, b"seed")
        assert spec.hash_count == 12 and spec.shared_count == 11
        assert len(set(spec.indices)) == 12

    def test_minimal_family(self):
        spec = choose_family(b"pool", 3, 2, b"seed")
        assert spec.hash_count == 3

    def test_shared_count_bounds(self):
        with pytest.raises(ValueError):
            choose_family(b"pool", 2, 2, b"seed")
        with pytest.raises(ValueError):
            choose_family(b"pool", 12, 1, b"seed")

    def test_deterministic(self):
        assert choose_family(b"p", 12, 11, b"s").indices == choose_family(b"p", 12, 11, b"s").indices


class TestInsertion:
    def test_empty_filter_all_zero(self):
        spec = choose_family(b"p", 12, 11, b"s")
        filt = IndexedBloomFilter.empty(400, spec)
        assert count_zero_bits(filt) == 400

    def test_all_ones(self):
        spec = choose_family(b"p", 3, 2, b"s")
        filt = IndexedBloomFilter.empty(64, spec)
        for i in range(64):
            filt.set_bit(i)
        assert count_zero_bits(filt) == 0

    def test_partial_count(self):
        spec = choose_family(b"p", 3, 2, b"s")
        filt = IndexedBloomFilter.empty(64, spec)
        for i in (0, 9, 17, 23, 31, 40, 63):
            filt.set_bit(i)
        assert count_zero_bits(filt) == 57

    def test_initiator_zero_mean_matches_occupancy(self, demo_profiles, pool):
        # E[d1] = lam * (1 - 1/lam)^(l*q1) ~ 232.94 at lam=400, l=12, q1=18
        elems = build_indexed_set(demo_profiles["Alice"], pool)
        total = 0
        trials = 1000
        for t in range(trials):
            seed = b"mean|%d" % t
            spec = choose_family(b"pool", 12, 11, seed)
            filt = insert_initiator(IndexedBloomFilter.empty(400, spec), elems, seed)
            total += count_zero_bits(filt)
        expected = 400 * math.exp(-12 * 18 / 400)
        assert abs(total / trials - expected) <= 3.0

    def test_shared_positions_deterministic(self, demo_profiles, pool):
        elems = build_indexed_set(demo_profiles["Bob"], pool)
        spec = choose_family(b"pool", 4, 2, b"fam")
        once = insert_initiator(IndexedBloomFilter.empty(256, spec), elems, b"r1")
        for e in elems:
            for t in spec.shared_indices:
                assert once.get_bit(pool_position(spec, t, e, 256))

    def test_responder_uses_full_family_bit_trace(self, pool):
        # one element, lam = 64: the responder re-sets the shared positions and
        # adds the announced family's remaining function positions
        p = AttributeProfile.from_mapping({"cancer": 1})
        (elem,) = build_indexed_set(p, pool)
        spec = choose_family(b"pool", 3, 2, b"fam2")
        base = insert_initiator(IndexedBloomFilter.empty(64, spec), (elem,), b"r")
        merged = insert_responder(base, (elem,))
        expect = {pool_position(spec, t, elem, 64) for t in spec.indices}
        for pos in expect:
            assert merged.get_bit(pos)
        # initiator bits are preserved
        for i in range(64):
            if base.get_bit(i):
                assert merged.get_bit(i)

    def test_monotone_zero_counts(self, demo_profiles, pool):
        elems_a = build_indexed_set(demo_profiles["Alice"], pool)
        elems_b = build_indexed_set(demo_profiles["Charles"], pool)
        spec = choose_family(b"pool", 12, 11, b"mono")
        filt = insert_initiator(IndexedBloomFilter.empty(400, spec), elems_a, b"mono")
        merged = insert_responder(filt, elems_b)
        assert count_zero_bits(merged) <= count_zero_bits(filt)

    def test_empty_responder_set_changes_nothing(self, demo_profiles, pool):
        elems_a = build_indexed_set(demo_profiles["Alice"], pool)
        spec = choose_family(b"pool", 12, 11, b"noop")
        filt = insert_initiator(IndexedBloomFilter.empty(400, spec), elems_a, b"noop")
        merged = insert_responder(filt, ())
        assert count_zero_bits(merged) == count_zero_bits(filt)


class TestEstimators:
    def test_size_zero_when_filter_empty(self):
        assert estimate_set_size(400, 400, 12) == 0.0

    def test_size_known_value(self):
        want = 400 * math.log(400 / 233) / 12  # ~18.01
        assert estimate_set_size(233, 400, 12) == pytest.approx(want, abs=1e-12)
        assert estimate_set_size(233, 400, 12) == pytest.approx(18.0, abs=0.05)

    def test_size_saturated(self):
        with pytest.raises(EstimatorSaturated):
            estimate_set_size(0, 400, 12)

    def test_overlap_zero_when_counts_equal_and_empty_peer(self):
        assert estimate_overlap(233, 233, 400, 12, 11, 0) == 0.0

    def test_overlap_no_drop_gives_ratio(self):
        # d0 = d1 with a non-empty responder: the logs cancel, leaving l*q2/l'
        assert estimate_overlap(233, 233, 400, 12, 11, 9) == pytest.approx(12 * 9 / 11)

    def test_overlap_saturated(self):
        with pytest.raises(EstimatorSaturated):
            estimate_overlap(0, 233, 400, 12, 11, 9)

    def test_similarity_is_exact_composition(self):
        d0, d1 = 210, 233
        sim = estimate_similarity(d0, d1, 400, 12, 11, 9)
        size = estimate_set_size(d1, 400, 12)
        overlap = estimate_overlap(d0, d1, 400, 12, 11, 9)
        assert sim == overlap / math.sqrt(size * 9)

    def test_similarity_undefined_on_empty_filter(self):
        with pytest.raises(EstimatorSaturated):
            estimate_similarity(400, 400, 400, 12, 11, 9)

    def test_identical_sets_estimate_near_one(self, demo_profiles, pool):
        p = demo_profiles["Alice"]
        samples = sample_estimates(p, p, pool, _params(4000), 300, b"same")
        mean = sum(samples.similarity) / len(samples.similarity)
        assert abs(mean - 1.0) <= 0.05

    def test_disjoint_sets_estimate_near_zero(self, pool):
        a = AttributeProfile.from_mapping({"cancer": 8, "music": 4})
        b = AttributeProfile.from_mapping({"tennis": 5, "cooking": 4})
        samples = sample_estimates(a, b, pool, _params(4000), 300, b"disj")
        mean = sum(samples.similarity) / len(samples.similarity)
        assert abs(mean) <= 0.05


def _params(length):
    from pmatch.counters import EmatchParams

    return EmatchParams(length=length, hash_count=12, shared_count=11)


class TestVarianceFormulas:
    def test_size_variance_zero_inserted(self):
        assert set_size_variance(400, 12, 0) == 0.0

    def test_size_variance_value(self):
        want = (400 / 144) * (math.exp(0.54) - 1)  # 1.98891
        assert set_size_variance(400, 12, 18) == pytest.approx(want, abs=1e-12)

    def test_overlap_variance_zero(self):
        assert overlap_variance(400, 12, 11, 0, 0, 0) == 0.0

    def test_overlap_variance_value(self):
        zeta = (12 * 18 + 12 * 9 - 11 * 8) / 400  # 0.59
        want = (400 / 121) * (math.exp(0.54) + math.exp(zeta) - 2 - zeta)  # 3.07437
        assert overlap_variance(400, 12, 11, 18, 9, 8) == pytest.approx(want, abs=1e-12)


class TestChebyshev:
    def test_vacuous_at_lower_bound(self):
        var1 = set_size_variance(400, 12, 18)
        eps1 = math.sqrt(var1) / 18
        var2 = overlap_variance(400, 12, 11, 18, 9, 8)
        eps2 = math.sqrt(var2) / 8
        p1, p2 = chebyshev_bounds(eps1, eps2, 400, 12, 11, 18, 9, 8)
        assert p1 == pytest.approx(1.0) and p2 == pytest.approx(1.0)

    def test_known_value(self):
        var1 = set_size_variance(400, 12, 18)
        p1, _ = chebyshev_bounds(0.2, 0.9, 400, 12, 11, 18, 9, 8)
        assert p1 == pytest.approx(var1 / (0.2 * 18) ** 2, abs=1e-12)

    def test_precondition_rejected(self):
        with pytest.raises(ValueError):
            chebyshev_bounds(0.01, 0.9, 400, 12, 11, 18, 9, 8)


class TestEntropy:
    @staticmethod
    def _oracle(length, hash_count, inserted, kappa, pool_attrs):
        # exhaustive high-precision summation with exact binomials
        p = 1.0 - math.exp(-hash_count * inserted / length)
        big_p = sum(
            math.comb(hash_count, i) * p**i * (1 - p) ** (hash_count - i)
            for i in range(1, hash_count + 1)
        )
        kn = kappa * pool_attrs
        per = sum(
            math.comb(kn, x) * big_p**x * (1 - big_p) ** (kn - x) * math.log2(x)
            for x in range(1, kn + 1)
        )
        return inserted * per

    def test_small_instance_matches_oracle(self):
        got = remaining_entropy(16, 3, 2, 2, kappa=2, pool_attrs=3)
        want = self._oracle(16, 3, 2, 2, 3)
        assert got == pytest.approx(want, rel=1e-6)

    def test_oracle_sweep(self):
        for (length, hc, ins, kappa, n) in [(32, 4, 3, 2, 4), (64, 5, 6, 3, 5), (128, 6, 10, 4, 4)]:
            got = remaining_entropy(length, hc, hc - 1, ins, kappa=kappa, pool_attrs=n)
            assert got == pytest.approx(self._oracle(length, hc, ins, kappa, n), rel=1e-6)

    def test_vanishes_as_filter_grows(self):
        # huge filter: nothing looks present, so nothing is hidden
        assert remaining_entropy(10**9, 3, 2, 2, kappa=2, pool_attrs=3) < 1e-6

    def test_monotone_in_pool_size(self):
        vals = [remaining_entropy(16, 3, 2, 2, kappa=2, pool_attrs=n) for n in range(3, 21)]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


class TestCandidateUncertainty:
    def test_boundaries(self):
        assert candidate_uncertainty(10, 5, 0) == pytest.approx(0.0, abs=1e-9)
        assert candidate_uncertainty(10, 5, 50) == pytest.approx(0.0, abs=1e-9)

    def test_matches_exact_binomial(self):
        got = candidate_uncertainty(10, 5, 18)
        want = math.log2(math.comb(50, 18))
        assert got == pytest.approx(want, rel=1e-9)

    def test_out_of_domain(self):
        with pytest.raises(ValueError):
            candidate_uncertainty(10, 5, 51)


class TestFilterCodec:
    def test_roundtrip(self, demo_profiles, pool):
        elems = build_indexed_set(demo_profiles["Alice"], pool)
        spec = choose_family(b"pool", 12, 11, b"codec")
        filt = insert_initiator(IndexedBloomFilter.empty(400, spec), elems, b"codec")
        back = decode_filter(encode_filter(filt))
        assert back.length == 400
        assert back.bits == filt.bits
        assert back.spec == filt.spec

    def test_payload_size(self, demo_profiles, pool):
        elems = build_indexed_set(demo_profiles["Alice"], pool)
        spec = choose_family(b"pool", 12, 11, b"codec")
        filt = insert_initiator(IndexedBloomFilter.empty(400, spec), elems, b"codec")
        data = encode_filter(filt)
        # 4 length + 50 bit bytes + (2+4) seed + 4 + 4 + 4 count + 4*12 indices
        assert len(data) == 4 + 50 + 2 + 4 + 4 + 4 + 4 + 48

    def test_malformed_rejected(self, demo_profiles, pool):
        elems = build_indexed_set(demo_profiles["Alice"], pool)
        spec = choose_family(b"pool", 12, 11, b"codec")
        filt = insert_initiator(IndexedBloomFilter.empty(400, spec), elems, b"codec")
        data = encode_filter(filt)
        with pytest.raises(ValueError):
            decode_filter(data[: len(data) // 2])
