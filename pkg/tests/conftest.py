import pytest

from nlbeam import corpus as cm
from nlbeam.tagger import train


@pytest.fixture(scope="session")
def template_set():
    return cm.load_templates(cm.default_template_path())


@pytest.fixture(scope="session")
def small_split(template_set):
    return cm.generate_corpus(template_set, 400, seed=11)


@pytest.fixture(scope="session")
def small_model(small_split):
    return train(small_split, epochs=3, seed=0)
