"""Priority-aware private matching: protocols, estimators, and harness."""

from .cipher import (
    CipherContext,
    SafePrime,
    SecretExponent,
    commute_encrypt,
    derive_exponent,
    encrypt_priority,
    generate_safe_prime,
    hash_to_group,
    invert_exponent,
)
from .oracle import OracleResult, oracle_match
from .protocol import (
    EmatchInitiator,
    EmatchResponder,
    MatchOutcome,
    PmatchInitiator,
    PmatchPlusInitiator,
    PmatchPlusResponder,
    PmatchResponder,
    ProtocolError,
    rank_candidates,
)
from .runner import Scenario, ScenarioUser, demo_scenario, load_scenario, run_scenario
from .similarity import (
    AttributeProfile,
    common_attributes,
    cosine,
    counting_set,
    ochiai_sets,
    priority_ochiai,
    tanimoto,
    weighted_intersection_size,
)

__version__ = "0.1.0"
