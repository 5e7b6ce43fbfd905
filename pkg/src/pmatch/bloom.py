"""Indexed Bloom filter and the zero-bit intersection estimators.

Each attribute with priority a expands into a indexed elements (i, j, code),
j = 1..a.  The initiator inserts her elements with a partially private hash
family: of the `hash_count` functions she announces, only the first
`shared_count` (by index order) are actually applied to every element; the
remaining positions come from per-element functions drawn outside the
announced family.  The responder inserts his elements with the full
announced family, so a common element re-sets exactly the shared positions.

The zero-bit counts of the filter before and after the responder's
insertions are sufficient statistics for the set sizes:

    size*    = lam * (ln lam - ln d1) / hash_count
    overlap* = (hash_count * n_b + lam * (ln d0 - ln d1)) / shared_count

and the similarity estimate composes them as overlap*/sqrt(size* * n_b).
"""

from __future__ import annotations

import hashlib
import math
import random
import struct
from dataclasses import dataclass

from .similarity import AttributeProfile

DEFAULT_POOL_SIZE = 4096


class EstimatorSaturated(Exception):
    """A zero-bit count hit 0; the filter is too small for the inserted set."""


@dataclass(frozen=True)
class AttributePool:
    """Public ordered attribute universe.  The integer code of an attribute
    is its 1-based position, so element values never depend on the strings."""

    ids: tuple[bytes, ...]

    def __post_init__(self):
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("duplicate ids in attribute pool")

    def index_of(self, attr: bytes) -> int:
        try:
            return self.ids.index(attr) + 1
        except ValueError:
            raise KeyError(f"attribute {attr!r} not in the public pool") from None

    def __len__(self) -> int:
        return len(self.ids)


@dataclass(frozen=True)
class IndexedElement:
    attr_index: int   # position of the attribute in the pool (1-based)
    count_index: int  # 1..priority
    value: int        # attribute code + count_index - 1

    def __post_init__(self):
        object.__setattr__(
            self,
            "_encoded",
            struct.pack(">QQQ", self.attr_index, self.count_index, self.value),
        )

    def to_bytes(self) -> bytes:
        return self._encoded


@dataclass(frozen=True)
class HashFamilySpec:
    """The initiator's announced hash family: `indices` into a public pool
    of keyed hash functions, of which the first `shared_count` are the ones
    she really shares with the responder."""

    pool_seed: bytes
    indices: tuple[int, ...]
    shared_count: int
    pool_size: int = DEFAULT_POOL_SIZE

    def __post_init__(self):
        if len(set(self.indices)) != len(self.indices):
            raise ValueError("hash family indices must be unique")
        if not 1 < self.shared_count < len(self.indices):
            raise ValueError("need 1 < shared_count < hash_count")
        if any(not 0 <= t < self.pool_size for t in self.indices):
            raise ValueError("hash index outside the pool")

    @property
    def hash_count(self) -> int:
        return len(self.indices)

    @property
    def shared_indices(self) -> tuple[int, ...]:
        return self.indices[: self.shared_count]


@dataclass
class IndexedBloomFilter:
    bits: bytearray
    length: int
    spec: HashFamilySpec

    @classmethod
    def empty(cls, length: int, spec: HashFamilySpec) -> "IndexedBloomFilter":
        if length <= 0:
            raise ValueError("filter length must be positive")
        return cls(bits=bytearray((length + 7) // 8), length=length, spec=spec)

    def copy(self) -> "IndexedBloomFilter":
        return IndexedBloomFilter(bits=bytearray(self.bits), length=self.length, spec=self.spec)

    def set_bit(self, pos: int) -> None:
        self.bits[pos >> 3] |= 0x80 >> (pos & 7)  # MSB-first within each byte

    def get_bit(self, pos: int) -> bool:
        return bool(self.bits[pos >> 3] & (0x80 >> (pos & 7)))


def build_indexed_set(profile: AttributeProfile, pool: AttributePool) -> tuple[IndexedElement, ...]:
    """Expand a profile into its indexed elements; size equals the priority sum."""
    out = []
    for attr, prio in profile.entries:
        i = pool.index_of(attr)
        for j in range(1, prio + 1):
            out.append(IndexedElement(attr_index=i, count_index=j, value=i + j - 1))
    return tuple(out)


def pool_position(spec: HashFamilySpec, index: int, elem: IndexedElement, length: int) -> int:
    """Position assigned to an element by pool hash function `index`.

    The leading 8 digest bytes are reduced mod the filter length; the bias
    against 2^64 is negligible for any realistic length."""
    h = hashlib.sha256(spec.pool_seed + struct.pack(">Q", index) + elem.to_bytes()).digest()
    return int.from_bytes(h[:8], "big") % length


def choose_family(
    pool_seed: bytes,
    hash_count: int,
    shared_count: int,
    rng_seed: bytes,
    pool_size: int = DEFAULT_POOL_SIZE,
) -> HashFamilySpec:
    """Draw `hash_count` distinct pool indices, deterministic per seed."""
    if not 1 < shared_count < hash_count:
        raise ValueError("need 1 < shared_count < hash_count")
    if hash_count > pool_size:
        raise ValueError("hash_count exceeds pool size")
    rng = random.Random(int.from_bytes(hashlib.sha256(rng_seed + b"|family").digest(), "big"))
    indices = tuple(sorted(rng.sample(range(pool_size), hash_count)))
    return HashFamilySpec(pool_seed=pool_seed, indices=indices, shared_count=shared_count, pool_size=pool_size)


def insert_initiator(
    filt: IndexedBloomFilter,
    elems: tuple[IndexedElement, ...],
    rng_seed: bytes,
    hash_tally=None,
) -> IndexedBloomFilter:
    """Insert with the shared prefix of the family plus per-element private
    functions drawn outside the announced family.  Returns a new filter."""
    spec = filt.spec
    out = filt.copy()
    rng = random.Random(int.from_bytes(hashlib.sha256(rng_seed + b"|private").digest(), "big"))
    announced = set(spec.indices)
    n_private = spec.hash_count - spec.shared_count
    for elem in elems:
        for t in spec.shared_indices:
            out.set_bit(pool_position(spec, t, elem, out.length))
        drawn: set[int] = set()
        while len(drawn) < n_private:
            t = rng.randrange(spec.pool_size)
            if t in announced or t in drawn:
                continue
            drawn.add(t)
            out.set_bit(pool_position(spec, t, elem, out.length))
        if hash_tally is not None:
            hash_tally(spec.hash_count)
    return out


def insert_responder(
    filt: IndexedBloomFilter,
    elems: tuple[IndexedElement, ...],
    hash_tally=None,
) -> IndexedBloomFilter:
    """Insert with every function of the announced family.  Monotone: never
    clears bits, so the zero count can only drop."""
    out = filt.copy()
    for elem in elems:
        for t in out.spec.indices:
            out.set_bit(pool_position(out.spec, t, elem, out.length))
        if hash_tally is not None:
            hash_tally(out.spec.hash_count)
    return out


def count_zero_bits(filt: IndexedBloomFilter) -> int:
    ones = int.from_bytes(bytes(filt.bits), "big").bit_count()
    return filt.length - ones


def estimate_set_size(zero_bits: int, length: int, hash_count: int) -> float:
    """Inserted-element count from the filter's zero-bit count."""
    if zero_bits == 0:
        raise EstimatorSaturated("no zero bits left; increase the filter length")
    if not 0 < zero_bits <= length:
        raise ValueError("zero_bits outside (0, length]")
    return length * (math.log(length) - math.log(zero_bits)) / hash_count


def estimate_overlap(
    zeros_merged: int,
    zeros_initiator: int,
    length: int,
    hash_count: int,
    shared_count: int,
    responder_size: int,
) -> float:
    """Common-element count from the zero counts before/after the responder."""
    if zeros_merged == 0:
        raise EstimatorSaturated("no zero bits left; increase the filter length")
    if not 0 < zeros_merged <= zeros_initiator <= length:
        raise ValueError("need 0 < zeros_merged <= zeros_initiator <= length")
    return (
        hash_count * responder_size
        + length * (math.log(zeros_merged) - math.log(zeros_initiator))
    ) / shared_count


def estimate_similarity(
    zeros_merged: int,
    zeros_initiator: int,
    length: int,
    hash_count: int,
    shared_count: int,
    responder_size: int,
) -> float:
    """Similarity estimate: overlap* / sqrt(size* * responder_size)."""
    if responder_size <= 0:
        raise ValueError("responder_size must be positive")
    if zeros_initiator >= length:
        raise EstimatorSaturated("empty filter: size estimate is 0, similarity undefined")
    size = estimate_set_size(zeros_initiator, length, hash_count)
    overlap = estimate_overlap(
        zeros_merged, zeros_initiator, length, hash_count, shared_count, responder_size
    )
    return overlap / math.sqrt(size * responder_size)


def set_size_variance(length: int, hash_count: int, true_size: int) -> float:
    """Claimed variance of the size estimator: (lam/l^2)(e^(l*n/lam) - 1)."""
    if length <= 0 or hash_count <= 0 or true_size < 0:
        raise ValueError("parameters must be positive")
    c = hash_count * true_size / length
    return (length / hash_count**2) * (math.exp(c) - 1)


def overlap_variance(
    length: int,
    hash_count: int,
    shared_count: int,
    size_a: int,
    size_b: int,
    overlap: int,
) -> float:
    """Claimed variance of the overlap estimator, with
    zeta = (l*n_a + l*n_b - l'*overlap) / lam."""
    c = hash_count * size_a / length
    zeta = (hash_count * size_a + hash_count * size_b - shared_count * overlap) / length
    return (length / shared_count**2) * (math.exp(c) + math.exp(zeta) - 2 - zeta)


def chebyshev_bounds(
    eps1: float,
    eps2: float,
    length: int,
    hash_count: int,
    shared_count: int,
    size_a: int,
    size_b: int,
    overlap: int,
) -> tuple[float, float]:
    """Chebyshev failure probabilities (p1, p2) for the two estimators.

    Guarantee shape: Pr(|size* - n_a| <= eps1*n_a) >= 1 - p1, and likewise
    for the overlap.  The epsilons must be at least one claimed standard
    deviation in relative terms, otherwise the bound is rejected as vacuous.
    """
    var1 = set_size_variance(length, hash_count, size_a)
    var2 = overlap_variance(length, hash_count, shared_count, size_a, size_b, overlap)
    if eps1 * size_a < math.sqrt(var1):
        raise ValueError("eps1 below the estimator deviation; bound is vacuous")
    if eps2 * overlap < math.sqrt(var2):
        raise ValueError("eps2 below the estimator deviation; bound is vacuous")
    p1 = var1 / (eps1 * size_a) ** 2
    p2 = var2 / (eps2 * overlap) ** 2
    return p1, p2


def remaining_entropy(
    length: int,
    hash_count: int,
    shared_count: int,
    inserted: int,
    kappa: int,
    pool_attrs: int,
) -> float:
    """Residual uncertainty (bits) about the inserted indexed set after the
    filter is published.

    With p = 1 - e^(-l*n/lam) the per-element candidate count is binomial,
    and the entropy is n * sum_x C(kn, x) P^x (1-P)^(kn-x) log2(x) with
    P = sum_{i=1..l} C(l, i) p^i (1-p)^(l-i).  Binomial terms are evaluated
    in the log domain and the sum stops once the remaining mass is < 1e-12.
    """
    if not 1 < shared_count < hash_count:
        raise ValueError("need 1 < shared_count < hash_count")
    universe = kappa * pool_attrs
    if not 0 < inserted <= universe:
        raise ValueError("need 0 < inserted <= kappa * pool_attrs")
    p = 1.0 - math.exp(-hash_count * inserted / length)
    # P = Pr(an arbitrary indexed element looks present) over the l functions
    log_p, log_q = _safe_log(p), _safe_log(1.0 - p)
    big_p = 0.0
    for i in range(1, hash_count + 1):
        big_p += math.exp(_log_comb(hash_count, i) + i * log_p + (hash_count - i) * log_q)
    big_p = min(big_p, 1.0)
    log_bp, log_bq = _safe_log(big_p), _safe_log(1.0 - big_p)
    per_element = 0.0
    tail = 1.0
    for x in range(1, universe + 1):
        term = math.exp(_log_comb(universe, x) + x * log_bp + (universe - x) * log_bq)
        per_element += term * math.log2(x)
        tail -= term
        if tail < 1e-12 and x >= universe * big_p:
            break
    return inserted * per_element


def candidate_uncertainty(kappa: int, pool_attrs: int, estimated: float) -> float:
    """log2 of the number of possible inserted sets, via log-gamma."""
    universe = kappa * pool_attrs
    n = round(estimated)
    if not 0 <= n <= universe:
        raise ValueError("estimated count outside [0, kappa * pool_attrs]")
    return _log_comb(universe, n) / math.log(2)


def _log_comb(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def _safe_log(x: float) -> float:
    return math.log(x) if x > 0.0 else -math.inf


def encode_filter(filt: IndexedBloomFilter) -> bytes:
    """Wire form: 4-byte BE length, MSB-first bit bytes, then the family
    (length-prefixed pool seed, hash_count, shared_count, indices)."""
    spec = filt.spec
    out = bytearray()
    out += filt.length.to_bytes(4, "big")
    out += bytes(filt.bits)
    out += len(spec.pool_seed).to_bytes(2, "big") + spec.pool_seed
    out += spec.hash_count.to_bytes(4, "big")
    out += spec.shared_count.to_bytes(4, "big")
    out += len(spec.indices).to_bytes(4, "big")
    for t in spec.indices:
        out += t.to_bytes(4, "big")
    return bytes(out)


def decode_filter(data: bytes, pool_size: int = DEFAULT_POOL_SIZE) -> IndexedBloomFilter:
    try:
        length = int.from_bytes(data[0:4], "big")
        nbytes = (length + 7) // 8
        off = 4
        bits = bytearray(data[off : off + nbytes])
        if len(bits) != nbytes:
            raise ValueError("truncated filter bits")
        off += nbytes
        seed_len = int.from_bytes(data[off : off + 2], "big")
        off += 2
        pool_seed = data[off : off + seed_len]
        off += seed_len
        hash_count = int.from_bytes(data[off : off + 4], "big")
        shared_count = int.from_bytes(data[off + 4 : off + 8], "big")
        n_idx = int.from_bytes(data[off + 8 : off + 12], "big")
        off += 12
        if n_idx != hash_count or off + 4 * n_idx > len(data):
            raise ValueError("malformed hash family")
        indices = tuple(
            int.from_bytes(data[off + 4 * i : off + 4 * i + 4], "big") for i in range(n_idx)
        )
    except (IndexError, struct.error) as exc:
        raise ValueError("malformed filter payload") from exc
    spec = HashFamilySpec(
        pool_seed=pool_seed, indices=indices, shared_count=shared_count, pool_size=pool_size
    )
    if length <= 0:
        raise ValueError("malformed filter length")
    return IndexedBloomFilter(bits=bits, length=length, spec=spec)
