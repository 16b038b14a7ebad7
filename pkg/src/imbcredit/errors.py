"""Exception hierarchy. The CLI maps each class to an exit code."""


class ImbCreditError(Exception):
    exit_code = 1


class ConfigError(ImbCreditError):
    """Bad configuration or missing prerequisite artifact."""

    exit_code = 1


class DataError(ImbCreditError, ValueError):
    """Input data violates a contract (parse failure, bad target, empty class)."""

    exit_code = 2


class NumericalError(ImbCreditError, ArithmeticError):
    exit_code = 3
