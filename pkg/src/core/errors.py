"""Exception types raised by the boosting library."""

from typing import Optional


class ProxBoostError(RuntimeError):
    """Base class for library failures."""


class InvariantError(ProxBoostError):
    """A structural invariant of a type or algorithm does not hold."""


class ContractError(ProxBoostError):
    """Problem data violates the assumptions an operation relies on."""


class ConvergenceError(ProxBoostError):
    """An iterative inner solver hit its iteration cap."""


class StageError(ProxBoostError):
    """Failure inside one stage of a proximal continuation run."""

    def __init__(self, stage: int, cause: BaseException, label: Optional[str] = None):
        self.stage = stage
        self.cause = cause
        where = f"{label} stage {stage}" if label else f"stage {stage}"
        super().__init__(f"{where} failed: {cause}")
