"""Exception hierarchy shared across the engine.

Exit-code mapping used by the CLI: usage errors are handled by argparse
(exit 1), :class:`ConfigError`/:class:`DataError` map to exit 2, and
backend availability problems map to exit 3.
"""

from __future__ import annotations


class VespaError(Exception):
    """Base class for all engine errors."""


class ConfigError(VespaError):
    """A profile, backends file, or weight table is malformed or violates an invariant."""


class DataError(VespaError):
    """An input document, eval set, or store file is malformed."""


class BackendUnavailableError(VespaError):
    """A remote backend could not be reached after exhausting retries."""

    def __init__(self, backend: str, message: str = ""):
        self.backend = backend
        super().__init__(f"backend {backend!r} unavailable" + (f": {message}" if message else ""))


class PipelineError(VespaError):
    """Document-level extraction failure (e.g. every backend in the ensemble is down)."""


class ProcessorError(VespaError):
    """A registered pre/post processor raised; carries the processor name."""

    def __init__(self, name: str, cause: Exception):
        self.processor = name
        super().__init__(f"processor {name!r} failed: {cause}")
