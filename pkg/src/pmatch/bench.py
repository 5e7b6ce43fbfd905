"""Wall-clock benchmarks: primitive operation timings and per-protocol
phase costs for sweeps over the attribute count and priority bound.

These numbers are hardware-bound and informational; the one assertion the
test suite makes about them is the relative ordering of online compute
between the three protocols.
"""

from __future__ import annotations

import hashlib
import random
import time

from .cipher import CipherContext, generate_safe_prime
from .counters import DEFAULT_ENERGY_MODEL, energy_estimate
from .runner import Scenario, ScenarioUser, _build_sessions, drive_session
from .similarity import AttributeProfile


def time_primitives(prime_bits: int = 1024, reps: int = 50, seed: bytes = b"bench") -> dict[str, float]:
    """Mean seconds for a hash, a modular exponentiation, and one safe-prime
    generation at the requested size."""
    prime = generate_safe_prime(prime_bits, seed)
    rng = random.Random(1)
    xs = [rng.randrange(2, prime.p - 1) for _ in range(reps)]
    ctx = CipherContext.derive(prime, seed)
    t0 = time.perf_counter()
    for x in xs:
        pow(x, ctx.attr_key.value, prime.p)
    exp_s = (time.perf_counter() - t0) / reps
    blob = b"x" * 64
    t0 = time.perf_counter()
    for _ in range(reps):
        hashlib.sha256(blob).digest()
    hash_s = (time.perf_counter() - t0) / reps
    t0 = time.perf_counter()
    generate_safe_prime(prime_bits, seed + b"|again")
    prime_s = time.perf_counter() - t0
    return {"sha256_s": hash_s, f"exp{prime_bits}_s": exp_s, f"prime{prime_bits}_s": prime_s}


def random_profiles(m: int, kappa: int, seed: bytes, users: int = 2) -> list[AttributeProfile]:
    """Seeded random profiles over a shared m-attribute universe.

    Priorities are drawn from [2, kappa]: the value 1 is a fixed point of
    the priority cipher and encodes to a single byte, which would skew the
    closed-form byte accounting these profiles are used to verify.
    """
    rng = random.Random(int.from_bytes(hashlib.sha256(seed).digest(), "big"))
    lo = min(2, kappa)
    out = []
    for _ in range(users):
        attrs = {f"attr{i:04d}": rng.randint(lo, kappa) for i in range(m)}
        out.append(AttributeProfile.from_mapping(attrs, kappa=kappa))
    return out


def bench_scenario(m: int, kappa: int, protocol: str, prime_bits: int, seed: bytes = b"bench") -> Scenario:
    prof_a, prof_b = random_profiles(m, kappa, seed + str((m, kappa)).encode())
    lam = 64
    while lam * 5 < 12 * m * kappa:  # keep the filter clear of saturation
        lam *= 2
    users = (
        ScenarioUser(name="initiator", profile=prof_a, threshold=0.0, initiator=True),
        ScenarioUser(name="responder", profile=prof_b, threshold=0.0),
    )
    scenario = Scenario(users=users, protocol=protocol, kappa=kappa, prime_bits=prime_bits)
    scenario.ematch = type(scenario.ematch)(
        length=lam, hash_count=12, shared_count=11, pool_seed=b"bench-pool"
    )
    return scenario


def measure_protocol(
    m: int, kappa: int, protocol: str, prime_bits: int, prime=None, seed: bytes = b"bench"
) -> dict:
    """Wall-clock offline/online split for one session at the given sizes."""
    scenario = bench_scenario(m, kappa, protocol, prime_bits, seed)
    if prime is None and protocol != "ematch":
        prime = generate_safe_prime(prime_bits, scenario.seeds.keys + b"|prime")
    pool = scenario.attribute_pool()
    t0 = time.perf_counter()
    ini, res = _build_sessions(scenario, scenario.responders[0], 0, prime, pool)
    t_offline = time.perf_counter() - t0
    t0 = time.perf_counter()
    drive_session(ini, res)
    t_online = time.perf_counter() - t0
    energy = energy_estimate(ini.counters, (t_online, t_online + t_offline), DEFAULT_ENERGY_MODEL)
    return {
        "protocol": protocol,
        "m": m,
        "kappa": kappa,
        "prime_bits": prime_bits,
        "offline_s": t_offline,
        "online_s": t_online,
        "bytes": ini.counters.bytes_sent + ini.counters.bytes_received,
        "energy_j": energy.joules,
    }
