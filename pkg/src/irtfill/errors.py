"""Exception hierarchy shared across the package.

Data-shaped problems (bad files, impossible designs, non-estimable
matrices) derive from DataError; grader-side failures derive from
ScorerError. The CLI maps these onto distinct exit codes.
"""


class IrtFillError(Exception):
    """Base class for all package errors."""


class DataError(IrtFillError):
    """Problems with input data or requested configurations (CLI exit 2)."""


class ShapeError(DataError):
    """Array dimensions disagree."""


class CategoryRangeError(DataError):
    """A score category falls outside {1..K}."""


class DataFormatError(DataError):
    """A file on disk could not be parsed into the expected structure."""


class NotEstimableError(DataError):
    """A learner or item has no observed scores, so it cannot be estimated."""


class LinkingError(DataError):
    """The learner-item observation graph is disconnected."""


class DegenerateAbilitiesError(DataError):
    """Ability values have zero variance and cannot be normalized."""


class NotImputableError(DataError):
    """An imputation method's preconditions are not met."""


class UnsupportedDesignError(DataError):
    """A missing-data design was requested for unsupported dimensions."""


class DegenerateTestError(DataError):
    """A statistical test is undefined (e.g. zero difference variance)."""


class UndefinedCorrelationError(DataError):
    """Pearson correlation is undefined (zero variance input)."""


class CalibrationError(DataError):
    """A noise-calibration target lies outside the achievable range."""


class ScorerError(IrtFillError):
    """Grader-side failures (CLI exit 3)."""


class ScorerProtocolError(ScorerError):
    """An external scorer returned an unusable response."""

    def __init__(self, message, raw_output=None):
        super().__init__(message)
        self.raw_output = raw_output


class ScorerTransportError(ScorerError):
    """A transient transport failure talking to an external scorer."""


class BatchScoreError(ScorerError):
    """One or more cells could not be scored after retries."""

    def __init__(self, message, failed_cells):
        super().__init__(message)
        self.failed_cells = list(failed_cells)
