"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: data-level failures exit 2,
numeric failures exit 3.
"""


class FedidsError(Exception):
    """Base class for all package-specific failures."""


class ShapeError(FedidsError):
    """A matrix/vector dimension contract was violated."""


class InputError(FedidsError):
    """An argument value breaks a documented precondition."""


class NumericError(FedidsError):
    """A NaN or infinity appeared where finite values are required."""


class StateError(FedidsError):
    """An object was used out of order (stale cache, unfitted scaler)."""


class CaptureFormatError(FedidsError):
    """A capture file does not parse as classic libpcap."""


class TruncatedCaptureError(CaptureFormatError):
    """A capture record or protocol header ends before its declared length."""


class FileNamingError(FedidsError):
    """A dataset file name does not follow the SOURCE_TRAFFIC[_PHASE]_DEVICE convention."""


class CsvSchemaError(FedidsError):
    """A CSV file has the wrong header or a malformed row."""


class AggregationError(FedidsError):
    """Client model updates disagree in shape and cannot be averaged."""
