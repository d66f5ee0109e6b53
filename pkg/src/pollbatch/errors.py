"""Exception types shared across the package.

Each carries an exit code so the CLI can map failures without a lookup table.
"""


class PollingError(Exception):
    exit_code = 1


class InvalidModel(PollingError, ValueError):
    exit_code = 2


class InvalidDistribution(InvalidModel):
    pass


class EmptyBatchSupport(InvalidModel):
    pass


class InvalidBatch(InvalidModel):
    pass


class EmptyConditioningSet(PollingError, ValueError):
    exit_code = 2


class InvalidPeriod(PollingError, ValueError):
    exit_code = 2


class ConfigError(PollingError, ValueError):
    exit_code = 2


class TransformUnavailable(PollingError):
    """Raised when a moments-only distribution is asked for its LST or samples."""

    exit_code = 2


class Unstable(PollingError):
    exit_code = 3

    def __init__(self, rho: float):
        super().__init__(f"unstable model: rho = {rho:.12g} >= 1")
        self.rho = rho


class NonConvergence(PollingError, ArithmeticError):
    exit_code = 4


class SingularSystem(NonConvergence):
    pass
