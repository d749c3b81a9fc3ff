"""Exception types shared across the package."""


class InfeasibleError(ValueError):
    """No solution exists for the requested certificate or matching problem."""


class DivergenceError(RuntimeError):
    """A simulated state left the admissible magnitude range.

    ``trajectory`` holds everything logged up to the abort so callers can
    still compute metrics (drift scenarios rely on this).
    """

    def __init__(self, message, trajectory=None, time=None):
        super().__init__(message)
        self.trajectory = trajectory
        self.time = time


class DegenerateGainError(ArithmeticError):
    """An adaptation gain matrix lost positive definiteness."""
