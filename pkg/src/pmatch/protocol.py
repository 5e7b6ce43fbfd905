"""Two-party matching sessions as explicit message-driven state machines.

Each session consumes one incoming frame at a time and returns the frames
to send next; a terminal step fills in the session's MatchOutcome.  Frames
arriving out of order or after termination abort the session.  What a
terminal outcome exposes follows the privacy contract of each protocol:

* basic (pmatch): the initiator learns only the similarity value; the
  responder learns the common attributes and both sides' priorities on
  them.
* enhanced (pmatch+): the initiator additionally learns the number of
  common attributes; the responder's reply is gated by his threshold.
* filter (ematch): the responder estimates the similarity from the
  initiator's Bloom filter and replies with the estimate or a decline.

Element sequences cross the wire in the initiator's (or responder's own)
announcement order, which is a seeded random permutation of the profile;
per-position correlation replaces re-sending pairing information.
"""

from __future__ import annotations

import hashlib
import math
import random
import warnings
from dataclasses import dataclass

from . import bloom, wire
from .cipher import (
    CipherContext,
    SecretExponent,
    commute_encrypt,
    encrypt_priority,
    hash_to_group,
    invert_exponent,
)
from .counters import OpCounters
from .similarity import AttributeProfile, tanimoto
from .wire import Frame

DEFAULT_MIN_ATTRIBUTES = 2


class ProtocolError(Exception):
    """Out-of-order, malformed, or inconsistent protocol message."""


class SessionAborted(Exception):
    """The session was aborted earlier; no further steps are accepted."""


class FilterSizingWarning(UserWarning):
    """The indexed set is large enough to saturate the announced filter."""


@dataclass(frozen=True)
class MatchOutcome:
    similarity: float | None
    common_count: int | None
    accepted: bool


def _permutation(n: int, seed: bytes, label: bytes) -> list[int]:
    rng = random.Random(int.from_bytes(hashlib.sha256(seed + b"|" + label).digest(), "big"))
    order = list(range(n))
    rng.shuffle(order)
    return order


class _Session:
    """Shared machinery: phase guard, counters, counted cipher helpers."""

    protocol_id: int = 0

    def __init__(
        self,
        context: CipherContext,
        profile: AttributeProfile,
        threshold: float,
        transcript_seed: bytes,
        min_attributes: int = DEFAULT_MIN_ATTRIBUTES,
    ):
        if not 0.0 <= threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")
        if len(profile) < min_attributes:
            raise ValueError(
                f"profile has {len(profile)} attributes; minimum input rule requires {min_attributes}"
            )
        self.context = context
        self.profile = profile
        self.threshold = threshold
        self.transcript_seed = transcript_seed
        self.counters = OpCounters()
        self.outcome: MatchOutcome | None = None
        self._phase_tally = self.counters.offline
        self._expect: int | None = None
        self._aborted = False

    # counted primitive operations ------------------------------------
    def _hash(self, attr: bytes) -> int:
        self._phase_tally.hash_ops += 1
        return hash_to_group(attr, self.context.prime)

    def _exp(self, x: int, key: SecretExponent) -> int:
        self._phase_tally.add_exp(self.context.prime.bits)
        return commute_encrypt(x, key)

    def _exp_prio(self, a: int, key: SecretExponent) -> int:
        self._phase_tally.add_exp(self.context.prime.bits)
        return encrypt_priority(a, key)

    def _invert(self, key: SecretExponent) -> SecretExponent:
        self._phase_tally.add_exp(self.context.prime.bits)
        return invert_exponent(key)

    def _go_online(self) -> None:
        self._phase_tally = self.counters.online

    # frame plumbing ----------------------------------------------------
    def _check(self, frame: Frame | None, expected_tag: int | None) -> None:
        if self._aborted:
            raise SessionAborted("session already aborted")
        if self.outcome is not None:
            self._aborted = True
            raise ProtocolError("message after session end")
        if expected_tag is None:
            if frame is not None:
                self._aborted = True
                raise ProtocolError("unexpected message; session not expecting input")
            return
        if frame is None:
            self._aborted = True
            raise ProtocolError("expected a message")
        ok = frame.protocol == self.protocol_id and (
            frame.step == expected_tag or frame.step == wire.TAG_DECLINE
        )
        if not ok:
            self._aborted = True
            raise ProtocolError(
                f"out-of-order message: got step {frame.step}, expected {expected_tag}"
            )

    def _frame(self, step: int, payload: bytes = b"") -> Frame:
        return Frame(protocol=self.protocol_id, step=step, payload=payload)

    @property
    def done(self) -> bool:
        return self.outcome is not None or self._aborted


class PmatchInitiator(_Session):
    protocol_id = wire.PROTO_PMATCH

    def __init__(self, context, profile, threshold, transcript_seed, min_attributes=DEFAULT_MIN_ATTRIBUTES):
        super().__init__(context, profile, threshold, transcript_seed, min_attributes)
        order = _permutation(len(profile), transcript_seed, b"announce")
        self._entries = [profile.entries[i] for i in order]
        self._attr_cts = [self._exp(self._hash(a), context.attr_key) for a, _ in self._entries]
        self._prio_cts = [self._exp_prio(p, context.prio_key) for _, p in self._entries]
        self._prio_key_inv = self._invert(context.prio_key)
        self._go_online()
        self._reencrypted_peer: list[int] = []
        self._expect = -1  # start() not yet called

    def step(self, frame: Frame | None) -> list[Frame]:
        if self._expect == -1:
            self._check(frame, None)
            self._expect = wire.TAG_RESPONDER_SET
            return [self._frame(wire.TAG_ANNOUNCE, wire.pack_pairs(list(zip(self._attr_cts, self._prio_cts))))]
        self._check(frame, self._expect)
        if frame.step == wire.TAG_DECLINE:
            self.outcome = MatchOutcome(similarity=None, common_count=None, accepted=False)
            return []
        if frame.step == wire.TAG_RESPONDER_SET:
            peer = wire.unpack_elements(frame.payload)
            self._reencrypted_peer = [self._exp(x, self.context.attr_key) for x in peer]
            self._expect = wire.TAG_PRIORITIES_WRAPPED
            return [self._frame(wire.TAG_REENCRYPTED_SET, wire.pack_elements(self._reencrypted_peer))]
        if frame.step == wire.TAG_PRIORITIES_WRAPPED:
            wrapped = wire.unpack_elements(frame.payload)
            if len(wrapped) != len(self._entries):
                self._aborted = True
                raise ProtocolError("wrapped priority count does not match announcement")
            swapped = [self._exp(x, self._prio_key_inv) for x in wrapped]
            self._expect = wire.TAG_SIMILARITY
            return [self._frame(wire.TAG_PRIORITIES_SWAPPED, wire.pack_elements(swapped))]
        # TAG_SIMILARITY
        value = wire.unpack_similarity(frame.payload)
        if not 0.0 <= value <= 1.0:
            self._aborted = True
            raise ProtocolError("similarity outside [0, 1]")
        self.outcome = MatchOutcome(similarity=value, common_count=None, accepted=True)
        return []


class PmatchResponder(_Session):
    protocol_id = wire.PROTO_PMATCH

    def __init__(self, context, profile, threshold, transcript_seed, min_attributes=DEFAULT_MIN_ATTRIBUTES):
        super().__init__(context, profile, threshold, transcript_seed, min_attributes)
        order = _permutation(len(profile), transcript_seed, b"reply")
        self._entries = [profile.entries[i] for i in order]
        self._attr_cts = [self._exp(self._hash(a), context.attr_key) for a, _ in self._entries]
        self._own_prio_cts = [self._exp_prio(p, context.prio_key) for _, p in self._entries]
        self._prio_key_inv = self._invert(context.prio_key)
        self._go_online()
        self._announce_pairs: list[tuple[int, int]] = []
        self._double_attr_cts: list[int] = []     # initiator attrs under both keys, announce order
        self._common: dict[int, tuple[bytes, int]] = {}  # announce position -> (attr, own prio)
        # filled at the terminal step, exposed to the responder's user
        self.common_ids: tuple[bytes, ...] = ()
        self.initiator_priorities: tuple[int, ...] = ()
        self.own_priorities: tuple[int, ...] = ()
        self._expect = wire.TAG_ANNOUNCE

    def step(self, frame: Frame | None) -> list[Frame]:
        self._check(frame, self._expect)
        if frame.step == wire.TAG_DECLINE:
            self.outcome = MatchOutcome(similarity=None, common_count=None, accepted=False)
            return []
        if frame.step == wire.TAG_ANNOUNCE:
            self._announce_pairs = wire.unpack_pairs(frame.payload)
            self._expect = wire.TAG_REENCRYPTED_SET
            return [self._frame(wire.TAG_RESPONDER_SET, wire.pack_elements(self._attr_cts))]
        if frame.step == wire.TAG_REENCRYPTED_SET:
            return self._match_attributes(frame)
        # TAG_PRIORITIES_SWAPPED
        return self._recover_and_reply(frame)

    def _match_attributes(self, frame: Frame) -> list[Frame]:
        reenc = wire.unpack_elements(frame.payload)
        if len(reenc) != len(self._entries):
            self._aborted = True
            raise ProtocolError("re-encrypted set size does not match reply")
        own_by_ct = {ct: entry for ct, entry in zip(reenc, self._entries)}
        self._double_attr_cts = [
            self._exp(attr_ct, self.context.attr_key) for attr_ct, _ in self._announce_pairs
        ]
        for pos, ct in enumerate(self._double_attr_cts):
            if ct in own_by_ct:
                self._common[pos] = own_by_ct[ct]
        if not self._common:
            self.outcome = MatchOutcome(similarity=None, common_count=0, accepted=False)
            return [self._frame(wire.TAG_DECLINE)]
        wrapped = [self._exp(prio_ct, self.context.prio_key) for _, prio_ct in self._announce_pairs]
        self._expect = wire.TAG_PRIORITIES_SWAPPED
        return [self._frame(wire.TAG_PRIORITIES_WRAPPED, wire.pack_elements(wrapped))]

    def _recover_priorities(self, frame: Frame) -> list[int]:
        """Decrypt the initiator's priorities with the inverse exponent and
        validate them against the priority domain and the ciphertext-equality
        identity (equal plaintexts iff equal ciphertexts under one key)."""
        swapped = wire.unpack_elements(frame.payload)
        if len(swapped) != len(self._announce_pairs):
            self._aborted = True
            raise ProtocolError("swapped priority count does not match announcement")
        own_ct_by_prio = {p: ct for ct, (_, p) in zip(self._own_prio_cts, self._entries)}
        recovered = []
        for ct in swapped:
            a = self._exp(ct, self._prio_key_inv)
            if not 1 <= a <= self.profile.kappa:
                self._aborted = True
                raise ProtocolError(f"recovered priority {a} outside [1, {self.profile.kappa}]")
            if a in own_ct_by_prio and own_ct_by_prio[a] != ct:
                self._aborted = True
                raise ProtocolError("priority ciphertext inconsistent with recovered value")
            recovered.append(a)
        return recovered

    def _recover_and_reply(self, frame: Frame) -> list[Frame]:
        recovered = self._recover_priorities(frame)
        ordered = sorted(self._common.items(), key=lambda kv: kv[1][0])
        self.common_ids = tuple(attr for _, (attr, _) in ordered)
        self.initiator_priorities = tuple(recovered[pos] for pos, _ in ordered)
        self.own_priorities = tuple(own for _, (_, own) in ordered)
        value = tanimoto(self.initiator_priorities, self.own_priorities)
        accepted = value >= self.threshold
        self.outcome = MatchOutcome(
            similarity=value, common_count=len(self.common_ids), accepted=accepted
        )
        if not accepted:
            return [self._frame(wire.TAG_DECLINE)]
        return [self._frame(wire.TAG_SIMILARITY, wire.pack_similarity(value))]


class PmatchPlusInitiator(PmatchInitiator):
    protocol_id = wire.PROTO_PMATCH_PLUS

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._common_count: int | None = None

    def step(self, frame: Frame | None) -> list[Frame]:
        if self._expect == wire.TAG_SIMILARITY and frame is not None:
            if frame.step == wire.TAG_ATTRS_CONFIRMED and self._common_count is None:
                confirmed = wire.unpack_elements(frame.payload)
                if len(confirmed) != len(self._entries):
                    self._aborted = True
                    raise ProtocolError("confirmed attribute count does not match announcement")
                known = set(self._reencrypted_peer)
                self._common_count = sum(1 for ct in confirmed if ct in known)
                return []
            if frame.step == wire.TAG_SIMILARITY:
                self._check(frame, wire.TAG_SIMILARITY)
                value = wire.unpack_similarity(frame.payload)
                if not 0.0 <= value <= 1.0:
                    self._aborted = True
                    raise ProtocolError("similarity outside [0, 1]")
                self.outcome = MatchOutcome(
                    similarity=value, common_count=self._common_count, accepted=True
                )
                return []
            if frame.step == wire.TAG_DECLINE:
                self.outcome = MatchOutcome(
                    similarity=None, common_count=self._common_count, accepted=False
                )
                return []
        return super().step(frame)


class PmatchPlusResponder(PmatchResponder):
    protocol_id = wire.PROTO_PMATCH_PLUS

    def _recover_and_reply(self, frame: Frame) -> list[Frame]:
        # Enhanced terminal step: echo the initiator's attributes under both
        # keys so she can count the intersection, then gate the coefficient
        # reply on the threshold.
        confirmed = [
            self._exp(attr_ct, self.context.attr_key) for attr_ct, _ in self._announce_pairs
        ]
        out = [self._frame(wire.TAG_ATTRS_CONFIRMED, wire.pack_elements(confirmed))]
        recovered = self._recover_priorities(frame)
        ordered = sorted(self._common.items(), key=lambda kv: kv[1][0])
        self.common_ids = tuple(attr for _, (attr, _) in ordered)
        self.initiator_priorities = tuple(recovered[pos] for pos, _ in ordered)
        self.own_priorities = tuple(own for _, (_, own) in ordered)
        overlap = sum(min(a, b) for a, b in zip(self.initiator_priorities, self.own_priorities))
        size_a = sum(recovered)
        size_b = sum(p for _, p in self.profile.entries)
        value = overlap / math.sqrt(size_a * size_b)
        accepted = value >= self.threshold
        self.outcome = MatchOutcome(
            similarity=value, common_count=len(self.common_ids), accepted=accepted
        )
        if accepted:
            out.append(self._frame(wire.TAG_SIMILARITY, wire.pack_similarity(value)))
        else:
            out.append(self._frame(wire.TAG_DECLINE))
        return out


class EmatchInitiator(_Session):
    protocol_id = wire.PROTO_EMATCH

    def __init__(
        self,
        profile: AttributeProfile,
        pool: bloom.AttributePool,
        params,
        threshold: float,
        transcript_seed: bytes,
        min_attributes: int = DEFAULT_MIN_ATTRIBUTES,
    ):
        # No cipher keys: the filter protocol avoids exponentiation entirely.
        if not 0.0 <= threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")
        if len(profile) < min_attributes:
            raise ValueError(
                f"profile has {len(profile)} attributes; minimum input rule requires {min_attributes}"
            )
        self.profile = profile
        self.threshold = threshold
        self.counters = OpCounters()
        self.outcome: MatchOutcome | None = None
        self._aborted = False
        self.params = params
        elems = bloom.build_indexed_set(profile, pool)
        if params.hash_count * len(elems) > params.length * math.log(params.length):
            warnings.warn(
                f"{len(elems)} indexed elements may saturate a {params.length}-bit filter",
                FilterSizingWarning,
                stacklevel=2,
            )
        spec = bloom.choose_family(
            params.pool_seed,
            params.hash_count,
            params.shared_count,
            transcript_seed,
            params.pool_size,
        )
        tally = self.counters.offline
        self.filter = bloom.insert_initiator(
            bloom.IndexedBloomFilter.empty(params.length, spec),
            elems,
            transcript_seed,
            hash_tally=lambda n: setattr(tally, "hash_ops", tally.hash_ops + n),
        )
        self._expect = -1

    @property
    def done(self) -> bool:
        return self.outcome is not None or self._aborted

    def _frame(self, step: int, payload: bytes = b"") -> Frame:
        return Frame(protocol=self.protocol_id, step=step, payload=payload)

    def step(self, frame: Frame | None) -> list[Frame]:
        if self._aborted:
            raise SessionAborted("session already aborted")
        if self._expect == -1:
            if frame is not None:
                self._aborted = True
                raise ProtocolError("unexpected message before request")
            self._expect = wire.TAG_EM_ACK
            return [self._frame(wire.TAG_EM_REQ)]
        if frame is None or frame.protocol != self.protocol_id or frame.step != self._expect:
            self._aborted = True
            raise ProtocolError("out-of-order message")
        if frame.step == wire.TAG_EM_ACK:
            self._expect = wire.TAG_EM_RESULT
            return [self._frame(wire.TAG_EM_DATA, bloom.encode_filter(self.filter))]
        # TAG_EM_RESULT
        if not frame.payload or frame.payload[0] not in (0, 1):
            self._aborted = True
            raise ProtocolError("malformed result")
        if frame.payload[0] == 1:
            value = wire.unpack_similarity(frame.payload[1:])
            self.outcome = MatchOutcome(similarity=value, common_count=None, accepted=True)
        else:
            self.outcome = MatchOutcome(similarity=None, common_count=None, accepted=False)
        return []


class EmatchResponder(_Session):
    protocol_id = wire.PROTO_EMATCH

    def __init__(
        self,
        profile: AttributeProfile,
        pool: bloom.AttributePool,
        threshold: float,
        min_attributes: int = DEFAULT_MIN_ATTRIBUTES,
    ):
        if not 0.0 <= threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")
        if len(profile) < min_attributes:
            raise ValueError(
                f"profile has {len(profile)} attributes; minimum input rule requires {min_attributes}"
            )
        self.profile = profile
        self.pool = pool
        self.threshold = threshold
        self.counters = OpCounters()
        self.outcome: MatchOutcome | None = None
        self._aborted = False
        self._expect = wire.TAG_EM_REQ
        self.estimate: float | None = None

    @property
    def done(self) -> bool:
        return self.outcome is not None or self._aborted

    def _frame(self, step: int, payload: bytes = b"") -> Frame:
        return Frame(protocol=self.protocol_id, step=step, payload=payload)

    def step(self, frame: Frame | None) -> list[Frame]:
        if self._aborted:
            raise SessionAborted("session already aborted")
        if frame is None or frame.protocol != self.protocol_id or frame.step != self._expect:
            self._aborted = True
            raise ProtocolError("out-of-order message")
        if frame.step == wire.TAG_EM_REQ:
            self._expect = wire.TAG_EM_DATA
            return [self._frame(wire.TAG_EM_ACK)]
        # TAG_EM_DATA
        try:
            filt = bloom.decode_filter(frame.payload)
        except ValueError as exc:
            self._aborted = True
            raise ProtocolError(f"malformed filter: {exc}") from exc
        zeros_initiator = bloom.count_zero_bits(filt)
        elems = bloom.build_indexed_set(self.profile, self.pool)
        tally = self.counters.online
        merged = bloom.insert_responder(
            filt, elems, hash_tally=lambda n: setattr(tally, "hash_ops", tally.hash_ops + n)
        )
        zeros_merged = bloom.count_zero_bits(merged)
        value = bloom.estimate_similarity(
            zeros_merged,
            zeros_initiator,
            filt.length,
            filt.spec.hash_count,
            filt.spec.shared_count,
            len(elems),
        )
        self.estimate = value
        accepted = value >= self.threshold
        self.outcome = MatchOutcome(similarity=value, common_count=None, accepted=accepted)
        if accepted:
            payload = bytes([1]) + wire.pack_similarity(value)
        else:
            payload = bytes([0])
        return [self._frame(wire.TAG_EM_RESULT, payload)]


def rank_candidates(results) -> list[tuple[str, float]]:
    """Order candidates by similarity, highest first; ties break on the
    candidate name.  Outcomes without a similarity value are skipped."""
    scored = [
        (name, outcome.similarity)
        for name, outcome in results
        if outcome is not None and outcome.similarity is not None
    ]
    return sorted(scored, key=lambda kv: (-kv[1], kv[0]))
