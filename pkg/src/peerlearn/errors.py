"""Exception types shared across the package."""


class PeerlearnError(Exception):
    """Base class for all errors raised by this package."""


class CorpusError(PeerlearnError):
    """Malformed or inconsistent input data."""


class ConfigError(PeerlearnError):
    """Bad configuration file or option value."""


class ModelError(PeerlearnError):
    """Invalid model state or arguments to a model operation."""


class AnalysisError(PeerlearnError):
    """Invalid arguments to an analysis routine."""


class RecommenderError(PeerlearnError):
    """Invalid arguments or state in the recommendation pipeline."""


class InfeasibleError(PeerlearnError):
    """The constrained assignment problem has no feasible solution.

    ``discussion_id`` names a discussion whose qualification requirement
    cannot be met.
    """

    def __init__(self, message: str, discussion_id: str | None = None):
        super().__init__(message)
        self.discussion_id = discussion_id
