"""Session fixtures for the primary test suite."""

import pytest

from helpers import TOY_CORPUS


@pytest.fixture(scope="session")
def toy_corpus():
    from refrev.corpus import load_corpus
    return load_corpus(TOY_CORPUS)
