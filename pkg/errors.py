"""
Exception types shared by the pipeline modules.
"""
from torus_algebra import ParameterError  # noqa: F401  (re-exported)


class ValidationError(RuntimeError):
    """A built structure violates one of its invariants."""

    def __init__(self, message, problems=None):
        super().__init__(message)
        self.problems = list(problems or [])

    def __str__(self):
        base = super().__str__()
        if not self.problems:
            return base
        return base + "\n  - " + "\n  - ".join(str(p) for p in self.problems)


class InfeasibleError(RuntimeError):
    """No solution exists for the requested problem."""


class UnsupportedError(ValueError):
    """Input uses an operation outside the supported set."""


class CapacityError(ValueError):
    """Too many logical qubits for the configured module count."""


class MissingProfileError(KeyError):
    """An instruction profile or table entry is not defined."""
