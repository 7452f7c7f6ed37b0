import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dichoptic import volume as vol
from dichoptic.scenes import SET_KINDS, SetConfig, generate_set
from dichoptic.session import build_default_plan, run_scripted_session


@pytest.fixture(scope="session")
def sets48():
    """One default-sized set per kind, shared across tests."""
    out = {}
    for kind in SET_KINDS:
        config = SetConfig(set_kind=kind, rng_seed=11)
        out[kind] = (config, generate_set(config))
    return out


@pytest.fixture(scope="session")
def small_plan():
    return build_default_plan("p-small", seed=5, scenes_per_set=8, training_scenes=4)


@pytest.fixture(scope="session")
def perfect_session(small_plan):
    return run_scripted_session(small_plan, responder="perfect")


@pytest.fixture(scope="session")
def phantoms():
    return {kind: vol.make_phantom(kind, (64, 64, 64)) for kind in vol.PHANTOM_KINDS}
