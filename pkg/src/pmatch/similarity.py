"""Similarity coefficients over priority-weighted attribute profiles.

Two families are implemented.  The cosine and Tanimoto coefficients compare
the two parties' priority vectors over their *common* attributes only.  The
priority-aware Ochiai coefficient instead treats each priority as a
multiplicity and compares the resulting counting sets, so the denominator
ranges over *all* attributes of each party:

    P(A, B) = sum_i min(a_i, b_i)  /  sqrt(sum a_i) * sqrt(sum b_i)

which is 0 exactly for disjoint profiles and 1 exactly for identical ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

DEFAULT_KAPPA = 10


@dataclass(frozen=True)
class AttributeProfile:
    """A user's attribute identifiers with integer priorities.

    Attribute ids are unique byte strings; priorities lie in [1, kappa].
    Empty profiles are rejected here so the coefficients never see them.
    """

    entries: tuple[tuple[bytes, int], ...]
    kappa: int = DEFAULT_KAPPA

    def __post_init__(self):
        if not self.entries:
            raise ValueError("profile must have at least one attribute")
        ids = [a for a, _ in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate attribute ids in profile")
        for a, prio in self.entries:
            if not a:
                raise ValueError("empty attribute id")
            if not 1 <= prio <= self.kappa:
                raise ValueError(f"priority {prio} for {a!r} outside [1, {self.kappa}]")

    @classmethod
    def from_mapping(cls, mapping: dict[str, int], kappa: int = DEFAULT_KAPPA) -> "AttributeProfile":
        entries = tuple(sorted((k.encode(), v) for k, v in mapping.items()))
        return cls(entries=entries, kappa=kappa)

    @property
    def ids(self) -> tuple[bytes, ...]:
        return tuple(a for a, _ in self.entries)

    def priority_of(self, attr: bytes) -> int:
        for a, prio in self.entries:
            if a == attr:
                return prio
        raise KeyError(attr)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class CountingSet:
    """Priority-expanded view of a profile: an attribute with priority a
    contributes a elements, so the weighted size is the priority sum."""

    weighted_size: int
    per_attribute: dict[bytes, int] = field(hash=False)


def common_attributes(
    a: AttributeProfile, b: AttributeProfile
) -> tuple[tuple[bytes, ...], tuple[int, ...], tuple[int, ...]]:
    """Common attribute ids (lexicographic) and both parties' priorities on them."""
    shared = sorted(set(a.ids) & set(b.ids))
    va = tuple(a.priority_of(s) for s in shared)
    vb = tuple(b.priority_of(s) for s in shared)
    return tuple(shared), va, vb


def _check_vectors(va, vb):
    if len(va) != len(vb):
        raise ValueError("priority vectors must have equal length")
    if not va:
        raise ValueError("priority vectors must be non-empty")


def cosine(va: tuple[int, ...], vb: tuple[int, ...]) -> float:
    """Angular similarity of the two priority vectors."""
    _check_vectors(va, vb)
    dot = sum(x * y for x, y in zip(va, vb))
    return dot / (math.sqrt(sum(x * x for x in va)) * math.sqrt(sum(y * y for y in vb)))


def tanimoto(va: tuple[int, ...], vb: tuple[int, ...]) -> float:
    """Tanimoto coefficient: dot / (|va|^2 + |vb|^2 - dot)."""
    _check_vectors(va, vb)
    dot = sum(x * y for x, y in zip(va, vb))
    return dot / (sum(x * x for x in va) + sum(y * y for y in vb) - dot)


def counting_set(p: AttributeProfile) -> CountingSet:
    per = {a: prio for a, prio in p.entries}
    return CountingSet(weighted_size=sum(per.values()), per_attribute=per)


def weighted_intersection_size(a: AttributeProfile, b: AttributeProfile) -> int:
    """Size of the intersection of the two counting sets: sum of min(a_i, b_i)."""
    shared, va, vb = common_attributes(a, b)
    return sum(min(x, y) for x, y in zip(va, vb))


def ochiai_sets(intersection: int, size_a: int, size_b: int) -> float:
    """Plain set Ochiai: |A & B| / sqrt(|A| * |B|)."""
    if size_a <= 0 or size_b <= 0:
        raise ValueError("set sizes must be positive")
    if intersection > min(size_a, size_b):
        raise ValueError("intersection exceeds a set size")
    return intersection / math.sqrt(size_a * size_b)


def priority_ochiai(a: AttributeProfile, b: AttributeProfile) -> float:
    """Priority-aware Ochiai coefficient over the two counting sets."""
    inter = weighted_intersection_size(a, b)
    return ochiai_sets(inter, counting_set(a).weighted_size, counting_set(b).weighted_size)
