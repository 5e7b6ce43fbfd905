"""Plaintext reference oracle: computes every matching quantity directly
from the two profiles, with no encryption involved.  Protocol runs are
checked against it for equivalence."""

from __future__ import annotations

from dataclasses import dataclass

from .similarity import (
    AttributeProfile,
    common_attributes,
    priority_ochiai,
    tanimoto,
    weighted_intersection_size,
)


@dataclass(frozen=True)
class OracleResult:
    tanimoto: float | None  # undefined (None) on an empty intersection
    priority_ochiai: float
    common_count: int
    weighted_intersection: int


def oracle_match(a: AttributeProfile, b: AttributeProfile) -> OracleResult:
    ids, va, vb = common_attributes(a, b)
    t = tanimoto(va, vb) if ids else None
    return OracleResult(
        tanimoto=t,
        priority_ochiai=priority_ochiai(a, b),
        common_count=len(ids),
        weighted_intersection=weighted_intersection_size(a, b),
    )
