"""Exception hierarchy for the pointdata package.

Everything raised on purpose derives from :class:`PointDataError`, so callers
can catch one base class.  The split below mirrors how the CLI maps failures
to exit codes: format/usage problems (bad header, unparseable value, missing
required key) are distinct from domain problems (blocked pooling, degenerate
fits, empty spectra).
"""

from __future__ import annotations


class PointDataError(Exception):
    """Base class for all errors raised by this package."""


class InvariantViolation(PointDataError):
    """A record or value object failed one of its declared invariants."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


# ---------------------------------------------------------------------------
# Format / parsing errors (CLI exit code 2)
# ---------------------------------------------------------------------------

class FormatError(PointDataError):
    """Base class for canonical-format parse and write failures."""


class HeaderMismatch(FormatError):
    """The column header row does not match the canonical table header."""

    def __init__(self, message: str, column: str | None = None):
        super().__init__(message)
        self.column = column


class UnitsMismatch(FormatError):
    """A units row is present but disagrees with the canonical units."""

    def __init__(self, message: str, column: str | None = None):
        super().__init__(message)
        self.column = column


class ValueParseError(FormatError):
    """A cell could not be converted to its declared type."""

    def __init__(self, row: int, column: str, token: str, reason: str = ""):
        detail = f" ({reason})" if reason else ""
        super().__init__(f"row {row}, column {column!r}: cannot parse {token!r}{detail}")
        self.row = row
        self.column = column
        self.token = token


class UnknownKey(FormatError):
    """A metadata document contains a key outside the canonical registry."""

    def __init__(self, key: str):
        super().__init__(f"unknown metadata key {key!r}")
        self.key = key


class MissingRequired(FormatError):
    """A required key or companion file is absent."""

    def __init__(self, what: str):
        super().__init__(f"missing required {what}")
        self.what = what


# ---------------------------------------------------------------------------
# Validation / pooling errors (CLI exit code 1)
# ---------------------------------------------------------------------------

class PoolBlocked(PointDataError):
    """Pooling was refused because compatibility checks produced Block findings.

    The offending findings ride along so callers can report them.
    """

    def __init__(self, findings):
        self.findings = tuple(findings)
        codes = ", ".join(sorted({f.code for f in self.findings}))
        super().__init__(f"pooling blocked by {len(self.findings)} finding(s): {codes}")


# ---------------------------------------------------------------------------
# Derivation errors (CLI exit code 1)
# ---------------------------------------------------------------------------

class DerivationError(PointDataError):
    """Base class for failures while deriving point statistics from profiles."""


class EmptyAfterThreshold(DerivationError):
    """Thresholding removed every bin of every profile."""


class NoPower(DerivationError):
    """A profile or spectrum carries zero total power."""


class DegenerateSpectrum(DerivationError):
    """The circular mean has vanishing magnitude; the 3GPP spread is undefined."""


class MissingMetadata(DerivationError):
    """Derivation needs a metadata field that is absent."""

    def __init__(self, field: str):
        super().__init__(f"metadata field {field!r} is required for this derivation")
        self.field = field


# ---------------------------------------------------------------------------
# Analysis errors (CLI exit code 1)
# ---------------------------------------------------------------------------

class AnalysisError(PointDataError):
    """Base class for statistical-analysis failures."""


class EmptyInput(AnalysisError):
    """An analysis routine received no samples."""


class DistanceBelowReference(AnalysisError):
    """A TR separation at or below the 1 m close-in reference distance."""

    def __init__(self, distance_m: float):
        super().__init__(
            f"TR separation {distance_m} m is not strictly beyond the 1 m reference"
        )
        self.distance_m = distance_m


class RankDeficient(AnalysisError):
    """The regression design matrix does not support the requested model."""


class NonPositiveSample(AnalysisError):
    """Log-domain statistics need strictly positive samples."""

    def __init__(self, value: float):
        super().__init__(f"sample {value} is not strictly positive")
        self.value = value


class NonPositiveFrequency(AnalysisError):
    """Carrier frequencies must be strictly positive."""

    def __init__(self, freq_ghz: float):
        super().__init__(f"frequency {freq_ghz} GHz is not strictly positive")
        self.freq_ghz = freq_ghz
