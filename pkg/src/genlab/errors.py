"""Exception types raised across genlab."""


class GenlabError(Exception):
    """Base class for all genlab errors."""


class ContractError(GenlabError, ValueError):
    """A precondition on an argument was violated."""


class ShapeError(ContractError):
    """Array dimensions do not agree."""


class UnsupportedConstructionError(GenlabError):
    """The requested construction does not apply to this network."""


class SeparationFailureError(GenlabError):
    """No projection direction separated the points well enough.

    ``min_gap`` is the best minimum pairwise projection gap seen.
    """

    def __init__(self, message, min_gap):
        super().__init__(message)
        self.min_gap = min_gap


class DeltaUnderflowError(GenlabError):
    """The hat half-width fell below the numeric floor."""


class TrainingDivergedError(GenlabError):
    """Parameters became non-finite; ``snapshot`` holds the last finite net."""

    def __init__(self, message, snapshot):
        super().__init__(message)
        self.snapshot = snapshot


class IdxFormatError(GenlabError):
    """Base class for IDX parse failures."""


class MagicNumberError(IdxFormatError):
    pass


class TruncatedPayloadError(IdxFormatError):
    pass


class CountMismatchError(IdxFormatError):
    pass


class HardAssertionError(GenlabError):
    """A theorem-level cap was exceeded. This is a bug in the artifact."""
