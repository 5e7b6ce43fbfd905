"""Commutative power cipher over a safe-prime group.

The cipher is plain modular exponentiation: E_k(x) = x^k mod p for a safe
prime p (p and (p-1)/2 both prime).  Exponentiation commutes, so two parties
can stack encryption layers in either order and strip their own layer with
the modular inverse of their exponent.  Attribute strings are mapped into
the group through a hash whose range is the quadratic residues mod p, which
keeps every ciphertext inside the prime-order subgroup.

All randomness is drawn from caller-supplied byte-string seeds; two calls
with the same seed produce bit-identical results.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass

_MR_ROUNDS = 64
_MAX_CANDIDATES_PER_BIT = 3000

# Small primes for cheap trial-division rejection before Miller-Rabin.
def _small_primes(limit: int = 2048) -> tuple[int, ...]:
    sieve = bytearray([1]) * limit
    sieve[0] = sieve[1] = 0
    for i in range(2, int(limit ** 0.5) + 1):
        if sieve[i]:
            sieve[i * i :: i] = bytearray(len(sieve[i * i :: i]))
    return tuple(i for i in range(limit) if sieve[i])


_SMALL_PRIMES = _small_primes()


class SearchExhausted(Exception):
    """Safe-prime search hit its candidate budget; retry with a new seed."""


class KeyError_(Exception):
    """Corrupted or inadmissible key material."""


def _seed_int(seed: bytes, label: bytes = b"") -> int:
    return int.from_bytes(hashlib.sha256(seed + b"|" + label).digest(), "big")


def is_probable_prime(n: int, rounds: int = _MR_ROUNDS) -> bool:
    """Miller-Rabin with deterministic, n-derived witness selection."""
    if n < 2:
        return False
    for q in _SMALL_PRIMES:
        if n == q:
            return True
        if n % q == 0:
            return False
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    rng = random.Random(n ^ 0x6D722D77746E657373)
    for _ in range(rounds):
        a = rng.randrange(2, n - 1)
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(r - 1):
            x = pow(x, 2, n)
            if x == n - 1:
                break
        else:
            return False
    return True


@dataclass(frozen=True)
class SafePrime:
    """Prime p with (p-1)/2 also prime, plus its bit length."""

    p: int
    bits: int

    def __post_init__(self):
        if self.p.bit_length() != self.bits:
            raise ValueError(f"p has {self.p.bit_length()} bits, expected {self.bits}")
        if not is_probable_prime(self.p) or not is_probable_prime((self.p - 1) // 2):
            raise ValueError("p is not a safe prime")

    @property
    def subgroup_order(self) -> int:
        return (self.p - 1) // 2


@dataclass(frozen=True)
class SecretExponent:
    """Exponent k with gcd(k, p-1) = 1 so the inverse layer exists."""

    value: int
    prime: SafePrime

    def __post_init__(self):
        p = self.prime.p
        if not 1 < self.value < p - 1:
            raise ValueError("exponent out of range (1, p-1)")
        if math.gcd(self.value, p - 1) != 1:
            raise ValueError("exponent shares a factor with p-1; not invertible")


def generate_safe_prime(bits: int, seed: bytes) -> SafePrime:
    """Deterministically search for a safe prime of exactly `bits` bits.

    Candidates q are drawn from the seed stream; p = 2q + 1 is accepted when
    both pass 64-round Miller-Rabin.  Raises SearchExhausted after a bounded
    number of rejections so callers can retry with a fresh seed.
    """
    if bits < 64:
        raise ValueError("bits must be >= 64")
    rng = random.Random(_seed_int(seed, b"safe-prime"))
    budget = _MAX_CANDIDATES_PER_BIT * bits
    for _ in range(budget):
        q = rng.getrandbits(bits - 1)
        q |= (1 << (bits - 2)) | 1  # force bit length and oddness
        p = 2 * q + 1
        composite = False
        for s in _SMALL_PRIMES:
            if q % s == 0 or p % s == 0:
                composite = q != s and p != s
                break
        if composite:
            continue
        if is_probable_prime(q, rounds=1) and is_probable_prime(p, rounds=1):
            if is_probable_prime(q) and is_probable_prime(p):
                return SafePrime(p=p, bits=bits)
    raise SearchExhausted(f"no {bits}-bit safe prime within {budget} candidates")


def derive_exponent(prime: SafePrime, seed: bytes) -> SecretExponent:
    """Uniformly sample k in [2, p-2] with gcd(k, p-1) = 1."""
    p = prime.p
    rng = random.Random(_seed_int(seed, b"exponent"))
    while True:
        k = rng.randrange(2, p - 1)
        if math.gcd(k, p - 1) == 1:
            return SecretExponent(value=k, prime=prime)


def hash_to_group(attr: bytes, prime: SafePrime) -> int:
    """Map an attribute byte string to a quadratic residue in Z*_p.

    The digest is reduced mod p and squared; squaring forces quadratic
    residuosity.  The zero residue is re-hashed with a counter suffix.
    """
    if not attr:
        raise ValueError("attribute must be non-empty")
    p = prime.p
    counter = 0
    data = attr
    while True:
        v = int.from_bytes(hashlib.sha256(data).digest(), "big") % p
        s = (v * v) % p
        if s != 0:
            return s
        counter += 1
        data = attr + b"#" + str(counter).encode()


def commute_encrypt(x: int, k: SecretExponent) -> int:
    """One encryption layer: x^k mod p."""
    p = k.prime.p
    if x % p == 0:
        raise ValueError("element is 0 mod p")
    return pow(x, k.value, p)


def invert_exponent(k: SecretExponent) -> SecretExponent:
    """Inverse exponent k' with k*k' = 1 (mod p-1), via the extended gcd."""
    p = k.prime.p
    try:
        inv = pow(k.value, -1, p - 1)
    except ValueError as exc:
        raise KeyError_("exponent is not invertible mod p-1") from exc
    return SecretExponent(value=inv, prime=k.prime)


def encrypt_priority(a: int, k: SecretExponent) -> int:
    """Encrypt an integer priority directly (no hashing): a^k mod p.

    The priority domain starts at 1; note a = 1 is a fixed point of the map.
    """
    if a < 1:
        raise ValueError("priority must be >= 1")
    if a >= k.prime.p:
        raise ValueError("priority must be below the modulus")
    return pow(a, k.value, k.prime.p)


def encode_element(x: int) -> bytes:
    """Minimal big-endian bytes with a 2-byte length prefix."""
    if x < 0:
        raise ValueError("group elements are non-negative")
    raw = x.to_bytes((x.bit_length() + 7) // 8 or 1, "big")
    if len(raw) > 0xFFFF:
        raise ValueError("element too large to frame")
    return len(raw).to_bytes(2, "big") + raw


def decode_element(data: bytes, offset: int = 0) -> tuple[int, int]:
    """Inverse of encode_element; returns (value, next_offset)."""
    if offset + 2 > len(data):
        raise ValueError("truncated element length prefix")
    n = int.from_bytes(data[offset : offset + 2], "big")
    end = offset + 2 + n
    if end > len(data):
        raise ValueError("truncated element body")
    return int.from_bytes(data[offset + 2 : end], "big"), end


@dataclass(frozen=True)
class CipherContext:
    """A party's key material: the shared safe prime plus two exponents,
    one for hashed attributes and one for raw priorities."""

    prime: SafePrime
    attr_key: SecretExponent
    prio_key: SecretExponent

    @classmethod
    def derive(cls, prime: SafePrime, seed: bytes) -> "CipherContext":
        return cls(
            prime=prime,
            attr_key=derive_exponent(prime, seed + b"|attr"),
            prio_key=derive_exponent(prime, seed + b"|prio"),
        )
