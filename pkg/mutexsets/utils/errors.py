"""
Exception hierarchy. The CLI maps each class to an exit code.
"""


class MutexSetsError(Exception):
    """Base class for all errors raised by mutexsets."""


class DataError(MutexSetsError, ValueError):
    """Malformed or inconsistent input data."""


class ConfigError(MutexSetsError, ValueError):
    """Invalid run parameters."""


class BudgetError(MutexSetsError, RuntimeError):
    """A combinatorial expansion exceeded its configured budget."""

    def __init__(self, message, count):
        super().__init__(message)
        self.count = count
