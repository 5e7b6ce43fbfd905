"""Scenario definitions and the session driver.

A scenario names one initiator and a set of responder candidates, the
protocol, and every seed the run needs; identical scenarios produce
byte-identical transcripts and reports.  Scenario files are JSON:

    {
      "protocol": "pmatch",             // pmatch | pmatch+ | ematch
      "kappa": 10,
      "prime_bits": 256,
      "min_attributes": 2,
      "trials": 1,                      // repeated seeded runs (ematch)
      "ematch": {"lambda": 400, "l": 12, "lprime": 11,
                 "pool_seed": "demo-pool", "pool_size": 4096},
      "seeds": {"keys": "k0", "hash": "h0", "transcript": "t0"},
      "users": [
        {"name": "Alice", "initiator": true, "threshold": 0.5,
         "attributes": {"cancer": 8, "music": 4}},
        ...
      ]
    }
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import bloom, counters as counters_mod, protocol, transport
from .cipher import CipherContext, generate_safe_prime
from .counters import (
    DEFAULT_ENERGY_MODEL,
    EmatchParams,
    EnergyEstimate,
    OpCounters,
    PHONE_TIMINGS,
    TimingModel,
    energy_estimate,
)
from .protocol import MatchOutcome, rank_candidates
from .similarity import AttributeProfile

PROTOCOL_NAMES = ("pmatch", "pmatch+", "ematch")


@dataclass(frozen=True)
class ScenarioUser:
    name: str
    profile: AttributeProfile
    threshold: float
    initiator: bool = False


@dataclass(frozen=True)
class Seeds:
    keys: bytes = b"keys"
    hash: bytes = b"hash"
    transcript: bytes = b"transcript"


@dataclass
class Scenario:
    users: tuple[ScenarioUser, ...]
    protocol: str = "pmatch"
    kappa: int = 10
    prime_bits: int = 256
    min_attributes: int = 2
    trials: int = 1
    ematch: EmatchParams = field(
        default_factory=lambda: EmatchParams(length=400, hash_count=12, shared_count=11)
    )
    seeds: Seeds = field(default_factory=Seeds)
    link_rate_bps: int = transport.DEFAULT_LINK_RATE_BPS

    def __post_init__(self):
        if self.protocol not in PROTOCOL_NAMES:
            raise ValueError(f"unknown protocol {self.protocol!r}")
        starters = [u for u in self.users if u.initiator]
        if len(starters) != 1:
            raise ValueError("exactly one initiator must be designated")
        if len(self.users) < 2:
            raise ValueError("need at least one responder")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")

    @property
    def initiator(self) -> ScenarioUser:
        return next(u for u in self.users if u.initiator)

    @property
    def responders(self) -> tuple[ScenarioUser, ...]:
        return tuple(u for u in self.users if not u.initiator)

    def attribute_pool(self) -> bloom.AttributePool:
        ids: list[bytes] = []
        for u in self.users:
            for a in u.profile.ids:
                if a not in ids:
                    ids.append(a)
        return bloom.AttributePool(ids=tuple(sorted(ids)))


def load_scenario(path: str | Path) -> Scenario:
    raw = json.loads(Path(path).read_text())
    kappa = raw.get("kappa", 10)
    users = tuple(
        ScenarioUser(
            name=u["name"],
            profile=AttributeProfile.from_mapping(u["attributes"], kappa=kappa),
            threshold=float(u.get("threshold", 0.5)),
            initiator=bool(u.get("initiator", False)),
        )
        for u in raw["users"]
    )
    em = raw.get("ematch", {})
    seeds = raw.get("seeds", {})
    return Scenario(
        users=users,
        protocol=raw.get("protocol", "pmatch"),
        kappa=kappa,
        prime_bits=raw.get("prime_bits", 256),
        min_attributes=raw.get("min_attributes", 2),
        trials=raw.get("trials", 1),
        ematch=EmatchParams(
            length=em.get("lambda", 400),
            hash_count=em.get("l", 12),
            shared_count=em.get("lprime", 11),
            pool_seed=em.get("pool_seed", "demo-pool").encode(),
            pool_size=em.get("pool_size", 4096),
        ),
        seeds=Seeds(
            keys=seeds.get("keys", "keys").encode(),
            hash=seeds.get("hash", "hash").encode(),
            transcript=seeds.get("transcript", "transcript").encode(),
        ),
        link_rate_bps=raw.get("link_rate_bps", transport.DEFAULT_LINK_RATE_BPS),
    )


def demo_scenario(protocol: str = "pmatch", threshold: float = 0.0, trials: int = 1) -> Scenario:
    """The bundled six-user demo: one initiator, five candidates, five
    attributes with hand-picked priorities."""
    profiles = {
        "Alice": {"cancer": 8, "music": 4, "football": 1, "tennis": 3, "cooking": 2},
        "Bob": {"cancer": 7, "football": 2},
        "Charles": {"cancer": 1, "music": 9, "football": 4, "tennis": 2, "cooking": 1},
        "David": {"cancer": 9, "music": 8, "tennis": 6},
        "Emmy": {"music": 2, "football": 9, "tennis": 1, "cooking": 1},
        "Frank": {"cancer": 8, "music": 3},
    }
    users = tuple(
        ScenarioUser(
            name=name,
            profile=AttributeProfile.from_mapping(attrs, kappa=10),
            threshold=threshold,
            initiator=name == "Alice",
        )
        for name, attrs in profiles.items()
    )
    return Scenario(users=users, protocol=protocol, trials=trials)


@dataclass
class SessionResult:
    candidate: str
    outcome: MatchOutcome | None
    responder_outcome: MatchOutcome | None
    initiator_counters: OpCounters
    responder_counters: OpCounters
    energy: EnergyEstimate
    simulated_seconds: float
    error: str | None = None


@dataclass
class RunResult:
    scenario_protocol: str
    results: list[SessionResult]
    ranking: list[tuple[str, float]]
    wall_seconds: float


def drive_session(initiator, responder, kind: str = "inprocess"):
    """Pump frames between the two sessions until both are terminal."""
    end_i, end_r = transport.make_pair(kind)
    for f in initiator.step(None):
        end_i.send(f)
    guard = 0
    while not (initiator.done and responder.done):
        progressed = False
        while end_r.pending():
            frame = end_r.receive()
            for f in responder.step(frame):
                end_r.send(f)
            progressed = True
        while end_i.pending():
            frame = end_i.receive()
            for f in initiator.step(frame):
                end_i.send(f)
            progressed = True
        guard += 1
        if not progressed or guard > 64:
            raise protocol.ProtocolError("session stalled without terminating")
    initiator.counters.bytes_sent = end_i.bytes_sent
    initiator.counters.bytes_received = end_i.bytes_received
    responder.counters.bytes_sent = end_r.bytes_sent
    responder.counters.bytes_received = end_r.bytes_received
    return initiator, responder


def _build_sessions(scenario: Scenario, responder: ScenarioUser, trial: int, prime, pool):
    init_user = scenario.initiator
    session_seed = (
        scenario.seeds.transcript + b"|" + responder.name.encode() + b"|" + str(trial).encode()
    )
    if scenario.protocol == "ematch":
        params = EmatchParams(
            length=scenario.ematch.length,
            hash_count=scenario.ematch.hash_count,
            shared_count=scenario.ematch.shared_count,
            pool_seed=scenario.ematch.pool_seed or scenario.seeds.hash,
            pool_size=scenario.ematch.pool_size,
        )
        ini = protocol.EmatchInitiator(
            init_user.profile, pool, params, init_user.threshold, session_seed,
            min_attributes=scenario.min_attributes,
        )
        res = protocol.EmatchResponder(
            responder.profile, pool, responder.threshold, min_attributes=scenario.min_attributes
        )
        return ini, res
    ctx_i = CipherContext.derive(prime, scenario.seeds.keys + b"|" + init_user.name.encode())
    ctx_r = CipherContext.derive(prime, scenario.seeds.keys + b"|" + responder.name.encode())
    if scenario.protocol == "pmatch":
        ini = protocol.PmatchInitiator(
            ctx_i, init_user.profile, init_user.threshold, session_seed,
            min_attributes=scenario.min_attributes,
        )
        res = protocol.PmatchResponder(
            ctx_r, responder.profile, responder.threshold, session_seed + b"|r",
            min_attributes=scenario.min_attributes,
        )
    else:
        ini = protocol.PmatchPlusInitiator(
            ctx_i, init_user.profile, init_user.threshold, session_seed,
            min_attributes=scenario.min_attributes,
        )
        res = protocol.PmatchPlusResponder(
            ctx_r, responder.profile, responder.threshold, session_seed + b"|r",
            min_attributes=scenario.min_attributes,
        )
    return ini, res


def run_scenario(
    scenario: Scenario,
    transport_kind: str = "inprocess",
    timing_model: TimingModel = PHONE_TIMINGS,
) -> RunResult:
    """One full protocol session per responder (times `trials`), with
    instrumentation, deterministic simulated timing, and a final ranking."""
    t0 = time.perf_counter()
    prime = None
    if scenario.protocol in ("pmatch", "pmatch+"):
        prime = generate_safe_prime(scenario.prime_bits, scenario.seeds.keys + b"|prime")
    pool = scenario.attribute_pool()
    results: list[SessionResult] = []
    for trial in range(scenario.trials):
        for responder in scenario.responders:
            try:
                ini, res = _build_sessions(scenario, responder, trial, prime, pool)
                drive_session(ini, res, kind=transport_kind)
                t_comp = timing_model.phase_seconds(ini.counters.online)
                t_transfer = transport.transfer_seconds(
                    ini.counters.bytes_sent + ini.counters.bytes_received,
                    scenario.link_rate_bps,
                )
                t_run = t_comp + t_transfer
                results.append(
                    SessionResult(
                        candidate=responder.name,
                        outcome=ini.outcome,
                        responder_outcome=res.outcome,
                        initiator_counters=ini.counters,
                        responder_counters=res.counters,
                        energy=energy_estimate(ini.counters, (t_comp, t_run), DEFAULT_ENERGY_MODEL),
                        simulated_seconds=t_run,
                    )
                )
            except (protocol.ProtocolError, bloom.EstimatorSaturated, ValueError) as exc:
                results.append(
                    SessionResult(
                        candidate=responder.name,
                        outcome=None,
                        responder_outcome=None,
                        initiator_counters=OpCounters(),
                        responder_counters=OpCounters(),
                        energy=energy_estimate(OpCounters(), (0.0, 0.0)),
                        simulated_seconds=0.0,
                        error=f"{type(exc).__name__}: {exc}",
                    )
                )
    if scenario.trials == 1:
        ranking = rank_candidates(
            (r.candidate, r.outcome) for r in results if r.outcome is not None
        )
    else:
        # repeated seeded trials: rank on the per-candidate mean similarity
        sums: dict[str, list[float]] = {}
        for r in results:
            if r.outcome is not None and r.outcome.similarity is not None:
                sums.setdefault(r.candidate, []).append(r.outcome.similarity)
        ranking = sorted(
            ((name, sum(v) / len(v)) for name, v in sums.items()),
            key=lambda kv: (-kv[1], kv[0]),
        )
    return RunResult(
        scenario_protocol=scenario.protocol,
        results=results,
        ranking=ranking,
        wall_seconds=time.perf_counter() - t0,
    )
