"""Exception types shared across the package."""


class DomainError(ValueError):
    """A query outside the mathematical domain of an operation."""


class AdmissibilityError(ValueError):
    """An envelope violates the transition-bound admissibility condition."""


class SearchExhaustedError(RuntimeError):
    """A bounded search finished without finding a valid answer."""


class SimulationError(RuntimeError):
    """A path simulation failed; carries the offending step index."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


class EstimationError(RuntimeError):
    """Not enough completed replications to form an estimate."""


class CapabilityError(RuntimeError):
    """An oracle lacks the information required by the requested operation."""
