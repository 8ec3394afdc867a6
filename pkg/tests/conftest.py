"""Shared fixtures for the test suite.

The end-to-end fixtures freeze one synthetic-corpus + training
configuration; the acceptance tests depend on these exact values, so
change them only together with a re-check of tests/test_acceptance.py.
"""

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from _synthetic import make_corpus  # noqa: E402

from frameforge import make_splits  # noqa: E402
from frameforge.training import TrainConfig  # noqa: E402

CORPUS_SEED = 7
SPLIT_SEED = 42
E2E_TRAIN = dict(learning_rate=0.02, epochs=12, seed=42)


@pytest.fixture(scope="session")
def e2e_corpus():
    """30 lemmas, 12 frames, 25% polysemous, d=16, anisotropic noise."""
    return make_corpus(seed=CORPUS_SEED, signal_dims=8)


@pytest.fixture(scope="session")
def e2e_split(e2e_corpus):
    return make_splits(e2e_corpus, seed=SPLIT_SEED)


@pytest.fixture(scope="session")
def e2e_train_config():
    return TrainConfig(**E2E_TRAIN)


def pytest_terminal_summary(terminalreporter):
    from _acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
