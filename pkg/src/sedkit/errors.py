"""Exception taxonomy shared by every module in the package.

All errors raised deliberately by this package derive from SedkitError so
callers (and the command line front end) can map failures to exit codes
without matching on message strings.
"""


class SedkitError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(SedkitError):
    """A file or byte stream does not conform to its declared format."""


class UnsupportedError(SedkitError):
    """The input is well formed but uses a feature this package does not handle."""


class ConfigurationError(SedkitError):
    """A configuration value is invalid or internally inconsistent."""


class DimensionError(SedkitError):
    """Array shapes, lengths, or sample rates do not line up."""


class DomainError(SedkitError):
    """A scalar argument lies outside its mathematical domain."""


class VocabularyError(SedkitError):
    """A label is missing from, or inconsistent with, a class vocabulary."""


class ParseError(SedkitError):
    """Text could not be parsed; carries the 1-based line number when known."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class ComparisonError(SedkitError):
    """Reference and estimate collections cannot be compared."""


class UndefinedMetricError(SedkitError):
    """A metric has no defined value for the given inputs (e.g. no references)."""


class SamplingError(SedkitError):
    """Random sampling could not satisfy its constraints within bounded retries."""


class DegenerateSignalError(SedkitError):
    """A signal has no energy where energy is required (e.g. SNR scaling)."""


class TrainingError(SedkitError):
    """Training aborted; carries the history accumulated up to the failure."""

    def __init__(self, message: str, history=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []


class SearchError(SedkitError):
    """Hyperparameter search produced no usable trial; carries per-trial records."""

    def __init__(self, message: str, trials=None):
        super().__init__(message)
        self.trials = list(trials) if trials is not None else []
