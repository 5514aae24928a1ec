"""Whitespace tokenizer with a fixed vocabulary and reserved specials."""

from __future__ import annotations

from collections.abc import Iterable, Sequence

from encoder_bridge.errors import CheckpointError

PAD_TOKEN = "[PAD]"
UNK_TOKEN = "[UNK]"
MASK_TOKEN = "[MASK]"
SPECIAL_TOKENS = (PAD_TOKEN, UNK_TOKEN, MASK_TOKEN)


def _is_special(token: str) -> bool:
    return token.startswith("[") and token.endswith("]")


def tokenize(text: str) -> list[str]:
    """Split on whitespace; case-fold everything except bracketed specials.

    Bracketed tokens such as ``[MASK]`` keep their exact spelling so that
    masked query variants hit the reserved vocabulary entry rather than
    degrading to unknowns.
    """
    out = []
    for raw in text.split():
        out.append(raw if _is_special(raw) else raw.lower())
    return out


class Vocabulary:
    """Token-to-index mapping; the three specials must occupy slots 0..2."""

    def __init__(self, tokens: Sequence[str]):
        self.tokens = tuple(tokens)
        if self.tokens[:3] != SPECIAL_TOKENS:
            raise CheckpointError(
                f"vocabulary must start with {SPECIAL_TOKENS}, got {self.tokens[:3]}"
            )
        self._index = {}
        for i, token in enumerate(self.tokens):
            if token in self._index:
                raise CheckpointError(f"duplicate vocabulary token {token!r}")
            self._index[token] = i

    def __len__(self) -> int:
        return len(self.tokens)

    def index(self, token: str) -> int:
        return self._index.get(token, self._index[UNK_TOKEN])

    def encode(self, text: str) -> list[int]:
        return [self.index(t) for t in tokenize(text)]

    @classmethod
    def build(cls, words: Iterable[str]) -> "Vocabulary":
        """Vocabulary from plain words, prefixing the reserved specials."""
        seen = dict.fromkeys(SPECIAL_TOKENS)
        for word in words:
            token = word if _is_special(word) else word.lower()
            seen.setdefault(token)
        return cls(tuple(seen))
