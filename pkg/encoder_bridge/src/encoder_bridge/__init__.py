"""Text encoder emitting embedding files in the shared binary container.

The package is a stand-in for a real neural encoder service: checkpoints are
small ``.npz`` bundles with randomly initialized weights, generated
deterministically from a seed, so everything runs offline. Its only coupling
to the selection toolkit is the on-disk interface — the ``id<TAB>text`` input
format and the versioned embedding container with its ``.ids`` sidecar.
"""

from encoder_bridge.embfile import read_embedding_file, write_embedding_file
from encoder_bridge.model import (
    Checkpoint,
    Encoder,
    load_checkpoint,
    make_checkpoint,
    save_checkpoint,
)
from encoder_bridge.vocab import MASK_TOKEN, PAD_TOKEN, UNK_TOKEN, Vocabulary

__all__ = [
    "Checkpoint",
    "Encoder",
    "MASK_TOKEN",
    "PAD_TOKEN",
    "UNK_TOKEN",
    "Vocabulary",
    "load_checkpoint",
    "make_checkpoint",
    "read_embedding_file",
    "save_checkpoint",
    "write_embedding_file",
]
