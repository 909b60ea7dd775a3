from typing import Any, Dict, Optional


class BiobjTuneError(Exception):
    """Base class for all toolkit errors"""


class InvalidInputError(BiobjTuneError, ValueError):
    """A precondition on an operation's input was violated"""


class OutOfRangeError(InvalidInputError):
    """A requested window lies outside the data that backs it"""


class InsufficientDataError(InvalidInputError):
    """Too few records to fit a model"""


class PmcParseError(InvalidInputError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class MeasurementError(BiobjTuneError):
    def __init__(self, message: str, diagnostic: Optional[str] = None):
        super().__init__(message if diagnostic is None else f"{message} ({diagnostic})")
        self.diagnostic = diagnostic


class AnomalousMeasurementError(MeasurementError):
    """Dynamic energy came out negative: static power exceeds the observed draw"""

    def __init__(self, dynamic_energy_j: float, diagnostic: Optional[str] = None):
        super().__init__(
            f"negative dynamic energy {dynamic_energy_j:.6g} J",
            diagnostic,
        )
        self.dynamic_energy_j = dynamic_energy_j


class ObservationError(MeasurementError):
    """An observation failed mid-loop; ``partial`` holds the statistics so far"""

    def __init__(self, message: str, partial: Dict[str, Any]):
        diagnostic = ", ".join(f"{key}={value}" for key, value in partial.items())
        super().__init__(message, diagnostic)
        self.partial = partial


class KernelError(BiobjTuneError):
    """A kernel failed while being measured"""


class SweepAbortedError(BiobjTuneError):
    def __init__(self, message: str, report: Any):
        super().__init__(message)
        self.report = report


class UsageError(BiobjTuneError):
    """Bad command line"""
