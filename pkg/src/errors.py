#!/usr/bin/env python3

"""
Exception hierarchy shared by every vireval module.

Each error also derives from the closest builtin so callers that only know
about ``ValueError`` or ``ArithmeticError`` keep working. ``exit_code`` is the
process exit status the command line uses for the error.
"""


class VirevalError(Exception):
    """Base class of all vireval errors."""
    exit_code = 1


class ConfigurationError(VirevalError, ValueError):
    """Invalid hyperparameter, architecture or experiment setting."""
    exit_code = 2


class ShapeError(VirevalError, ValueError):
    """Input dimension does not match the model."""
    exit_code = 2


class InputError(VirevalError, ValueError):
    """Invalid arguments to a metric."""
    exit_code = 2


class ParseError(ConfigurationError):
    """A data or config file could not be parsed."""

    def __init__(self, message: str, row: int = None, column: str = None):
        """
        :param message: what went wrong
        :param row: 1-based line number in the file, header is row 1
        :param column: offending column name
        """
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column '{column}'")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)
        self.row = row
        self.column = column


class NumericError(VirevalError, ArithmeticError):
    """Non-finite value where a finite one is required."""
    exit_code = 3


class DivergenceError(NumericError):
    """Training produced a NaN or infinite loss."""

    def __init__(self, epoch: int, batch: int, loss: float):
        super().__init__(f"training diverged at epoch {epoch}, batch {batch} (loss={loss})")
        self.epoch = epoch
        self.batch = batch
        self.loss = loss


class PipelineError(NumericError):
    """The virtual-residual pipeline produced a non-finite residual."""

    def __init__(self, index: int, fold: int, value: float):
        super().__init__(f"non-finite virtual residual {value} for sample {index} in fold {fold}")
        self.index = index
        self.fold = fold


class CacheIntegrityError(VirevalError):
    """A residual cache is incomplete, corrupt or holds invalid values."""
    exit_code = 4


class CacheMissError(CacheIntegrityError):
    """A batch asked for residuals the cache does not hold."""

    def __init__(self, missing):
        missing = sorted(int(i) for i in missing)
        shown = ", ".join(str(i) for i in missing[:10])
        more = f" and {len(missing) - 10} more" if len(missing) > 10 else ""
        super().__init__(f"residual cache has no entry for index {shown}{more}")
        self.missing = missing


class OutputError(VirevalError, OSError):
    """An output file or directory could not be written."""
    exit_code = 1


class CheckFailedError(VirevalError):
    """A diagnostic check of a finished run did not hold."""
    exit_code = 5

    def __init__(self, failed, report=None):
        """
        :param failed: the failing check entries of the report
        :param report: the ``RunReport`` they belong to, already written out
        """
        names = sorted({check["name"] for check in failed})
        super().__init__(f"{len(failed)} diagnostic check(s) failed: {', '.join(names)}")
        self.failed = list(failed)
        self.report = report


class StaleCacheWarning(UserWarning):
    """Loaded residual cache was built with a different fold configuration."""
