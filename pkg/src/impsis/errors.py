"""Exception hierarchy."""


class ImpsisError(Exception):
    pass


class DomainError(ImpsisError, ValueError):
    """Argument outside the domain of an operation (e.g. negative time)."""


class QuadratureError(ImpsisError):
    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class ModelConsistencyError(ImpsisError):
    """A model invariant (positive carrying capacity) was breached at runtime."""


class IntegrationError(ImpsisError):
    def __init__(self, message, t_last=None, trajectory=None):
        super().__init__(message)
        self.t_last = t_last
        self.trajectory = trajectory


class AnalysisError(ImpsisError):
    def __init__(self, message, value=None):
        super().__init__(message)
        self.value = value


class ScenarioError(ImpsisError, ValueError):
    """Scenario failed to parse or violates load-time invariants.

    ``violations`` lists every problem found, not just the first.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
