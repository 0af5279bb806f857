"""Exception hierarchy.

Each error carries the exit code the command line maps it to, so callers of
the library can catch by category and the CLI can translate without a table.
"""


class TvudeError(Exception):
    exit_code = 1


class ConfigError(TvudeError, ValueError):
    """Invalid model, window or regression configuration."""

    exit_code = 2


class DataError(TvudeError, ValueError):
    """Malformed or inconsistent observation data."""

    exit_code = 3

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NumericalError(TvudeError, ArithmeticError):
    exit_code = 4


class DomainError(NumericalError, ValueError):
    """Argument outside the domain of a function (e.g. alpha not in (0, 1))."""


class SimulationError(NumericalError):
    def __init__(self, message, step):
        super().__init__(f"step {step}: {message}")
        self.step = step


class WindowError(NumericalError):
    """Base for failures tied to one estimation window (``m`` is 1-based)."""

    def __init__(self, message, m):
        super().__init__(f"window m={m}: {message}")
        self.m = m


class SingularWindowError(WindowError):
    pass


class DegenerateWindowError(WindowError):
    pass


class FitError(NumericalError):
    pass


class RankError(FitError):
    def __init__(self, message, iteration):
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration


class DivergenceError(FitError):
    def __init__(self, message, iteration):
        super().__init__(
            f"iteration {iteration}: {message} "
            "(try damping or a different initial value)"
        )
        self.iteration = iteration
