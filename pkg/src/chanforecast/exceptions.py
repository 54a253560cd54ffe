"""Exception hierarchy.

Each family carries the process exit code the command line tool uses when the
error escapes a subcommand.
"""


class ChanForecastError(Exception):
    exit_code = 1
    kind = "error"

    def to_dict(self):
        return {"error": self.kind, "type": type(self).__name__, "message": str(self)}


class ConfigError(ChanForecastError, ValueError):
    exit_code = 2
    kind = "config_error"


class InfeasibleError(ConfigError):
    """Requested combination would exceed the memory budget."""


class UnstableProcessError(ConfigError):
    """AR coefficients whose companion matrix has spectral radius >= 1."""


class DataError(ChanForecastError, ValueError):
    exit_code = 3
    kind = "data_error"


class NonFiniteValueError(DataError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column

    def to_dict(self):
        d = super().to_dict()
        d.update(row=self.row, column=self.column)
        return d


class NonNumericValueError(NonFiniteValueError):
    pass


class ZeroVarianceError(DataError):
    pass


class SegmentTooShortError(DataError):
    pass


class InsufficientLagsError(DataError):
    pass


class DatasetNotFoundError(DataError):
    pass


class NumericalError(ChanForecastError, ArithmeticError):
    exit_code = 4
    kind = "numerical_error"


class SingularSystemError(NumericalError):
    def __init__(self, message, condition_number=None):
        super().__init__(message)
        self.condition_number = condition_number

    def to_dict(self):
        d = super().to_dict()
        d["condition_number"] = self.condition_number
        return d


class DivergenceError(NumericalError):
    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch

    def to_dict(self):
        d = super().to_dict()
        d["epoch"] = self.epoch
        return d
