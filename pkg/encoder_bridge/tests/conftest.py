import pytest

from encoder_bridge.model import make_checkpoint
from encoder_bridge.vocab import Vocabulary

WORDS = (
    "the quick brown fox jumps over a lazy dog while seven wizards "
    "brew strong coffee under pale moonlight near an old stone bridge"
).split()


@pytest.fixture(scope="session")
def vocab():
    return Vocabulary.build(WORDS)


@pytest.fixture(scope="session")
def checkpoint(vocab):
    return make_checkpoint("toy-32", vocab, dim=32, seed=11)
