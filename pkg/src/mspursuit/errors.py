"""Exception types shared across the package."""


class PursuitError(Exception):
    """Base class for every error raised by this library."""


class InvalidInput(PursuitError):
    """A matrix or scalar argument violates its domain (non-finite, empty, ...)."""


class ShapeMismatch(PursuitError):
    """Two operands have incompatible shapes."""


class PartitionMismatch(PursuitError):
    """A class partition does not match the sample count of its matrix."""


class InvalidConfig(PursuitError):
    """A configuration value is out of range or internally inconsistent."""


class ParseError(PursuitError):
    """A persisted artifact could not be parsed; message carries file/line/field context."""


class ProjectionDidNotConverge(PursuitError):
    """Dykstra sweeps exhausted before reaching feasibility."""

    def __init__(self, message: str, worst_violation: float):
        super().__init__(f"{message} (worst relative violation {worst_violation:.3e})")
        self.worst_violation = worst_violation


class RankDeficient(PursuitError):
    """The operation needs a full-rank matrix."""


class AssumptionViolated(PursuitError):
    """A dataset/game assumption required by an operation fails; names the assumption."""

    def __init__(self, assumption: str, message: str):
        super().__init__(f"{assumption}: {message}")
        self.assumption = assumption


class Diverged(PursuitError):
    """Optimization produced non-finite values; carries the last finite state."""

    def __init__(self, message: str, encoder=None, decoder=None, history=None):
        super().__init__(message)
        self.encoder = encoder
        self.decoder = decoder
        self.history = history
