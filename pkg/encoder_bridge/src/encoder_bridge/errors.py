"""Error taxonomy mirrored onto process exit codes by the CLI."""


class BridgeError(Exception):
    """Base class for all encoder-bridge failures."""


class CheckpointError(BridgeError):
    """Checkpoint missing, malformed, or inconsistent with the request."""


class InputError(BridgeError):
    """Input text file malformed or empty."""
