import pytest

from pmatch.cipher import SafePrime, generate_safe_prime
from pmatch.similarity import AttributeProfile

DEMO_PROFILES = {
    "Alice": {"cancer": 8, "music": 4, "football": 1, "tennis": 3, "cooking": 2},
    "Bob": {"cancer": 7, "football": 2},
    "Charles": {"cancer": 1, "music": 9, "football": 4, "tennis": 2, "cooking": 1},
    "David": {"cancer": 9, "music": 8, "tennis": 6},
    "Emmy": {"music": 2, "football": 9, "tennis": 1, "cooking": 1},
    "Frank": {"cancer": 8, "music": 3},
}

CANDIDATES = ("Bob", "Charles", "David", "Emmy", "Frank")


@pytest.fixture(scope="session")
def demo():
    return {name: AttributeProfile.from_mapping(attrs) for name, attrs in DEMO_PROFILES.items()}


@pytest.fixture(scope="session")
def tiny_prime():
    # 23 and 11 are both prime; small enough for exhaustive checks
    return SafePrime(p=23, bits=5)


@pytest.fixture(scope="session")
def prime64():
    return generate_safe_prime(64, b"test-prime-64")


@pytest.fixture(scope="session")
def prime128():
    return generate_safe_prime(128, b"test-prime-128")


@pytest.fixture(scope="session")
def prime256():
    return generate_safe_prime(256, b"test-prime-256")


@pytest.fixture(scope="session")
def prime1024():
    return generate_safe_prime(1024, b"test-prime-1024")
