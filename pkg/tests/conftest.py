import pytest

from archtrap import corpus


@pytest.fixture(scope="session")
def systems():
    """name -> (spec, base, normalized, profiles), loaded once."""
    return {name: corpus.load_system(name) for name in corpus.NAMES}


@pytest.fixture(scope="session")
def norm(systems):
    def get(name):
        return systems[corpus._ALIASES.get(name, name)][2]

    return get
