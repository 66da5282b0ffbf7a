"""Exception types shared across the slotplan package."""


class SlotPlanError(Exception):
    """Base class for all slotplan errors."""


class InadmissibleAction(SlotPlanError):
    """Raised when a slot that is already filled is selected again."""


class InvalidConfig(SlotPlanError):
    """Raised for configurations that violate a documented precondition."""


class ModelUnavailable(SlotPlanError):
    """Raised when a remote scoring backend cannot produce a proposal."""


class TooLarge(SlotPlanError):
    """Raised when an exhaustive enumeration would exceed the K <= 8 guard."""


class PlanAborted(SlotPlanError):
    """Raised when a plan run fails mid-way; carries the failing step index."""

    def __init__(self, step_index: int, cause: Exception):
        super().__init__(f"plan aborted at step {step_index}: {cause}")
        self.step_index = step_index
        self.cause = cause
