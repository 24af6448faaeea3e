"""Exception types shared across the package."""


class SpecError(ValueError):
    """A network description is malformed or violates an invariant.

    ``violations`` holds every problem found, so callers can report all of
    them at once instead of fixing one typo per run.
    """

    def __init__(self, violations, message=None):
        self.violations = list(violations)
        if message is None:
            message = "; ".join(str(v) for v in self.violations) or "invalid spec"
        super().__init__(message)


class UnresolvedKernelError(ValueError):
    """An operation needs concrete kernel sizes but found a FREE marker."""


class InfeasibleError(ValueError):
    """A budget or receptive-field constraint cannot be met."""

    def __init__(self, message, minimal_macs=None, max_receptive_field=None):
        super().__init__(message)
        self.minimal_macs = minimal_macs
        self.max_receptive_field = max_receptive_field
