"""Shared fixtures: a small synthetic dataset that every module test can reuse.

The full-size verification battery lives in test_acceptance.py with its own
module-scoped fixture; everything here is sized to run in well under a second.
"""

import pytest

from nextloc.data import SyntheticSpec, generate_synthetic


SMALL_SPEC = SyntheticSpec(n_users=10, n_pois=20, events_per_user=80, n_zones=2)


@pytest.fixture(scope="session")
def small_spec():
    return SMALL_SPEC


@pytest.fixture(scope="session")
def small_dataset():
    return generate_synthetic(SMALL_SPEC, seed=0)
