import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "spkraug",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("spkraug")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def tmp_path_factory_session(tmp_path_factory):
    """Session-scoped scratch dir, safe to reuse from hypothesis-driven tests."""
    return tmp_path_factory.mktemp("hypothesis_scratch")


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """3 speakers x 6 utterances of speech-like audio on disk, with manifest."""
    from synth import build_corpus

    root = tmp_path_factory.mktemp("small_corpus")
    manifest = build_corpus(root, per_speaker=6, seed=7, dur_range=(0.4, 0.8))
    return root, manifest
