"""Exception taxonomy shared across the package.

The CLI maps these onto its exit codes, so new error types should subclass
one of the four categories below.
"""


class AccelModelError(Exception):
    """Base class for all package errors."""


class SchemaError(AccelModelError):
    """A document does not conform to its file schema (exit code 1)."""


class ValidationError(AccelModelError):
    """A parsed object violates a semantic invariant (exit code 2)."""


class SimulationError(AccelModelError):
    """Run-time simulation failed (exit code 3)."""


class DeadlockError(SimulationError):
    """No IP can make progress while outputs remain unproduced."""

    def __init__(self, cycle, starved_tokens):
        self.cycle = cycle
        self.starved_tokens = sorted(starved_tokens)
        super().__init__(
            f"deadlock at cycle {cycle}: unsatisfiable tokens {self.starved_tokens}"
        )


class CycleLimitError(SimulationError):
    """Simulation exceeded the configured max_cycles cap."""
