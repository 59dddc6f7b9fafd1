"""Exception hierarchy.

Every error carries an ``exit_code`` used by the CLI: 1 for input/validation
problems, 2 for runtime faults.
"""


class SmartstatError(Exception):
    exit_code = 2


class ValidationError(SmartstatError):
    """Bad input or configuration; the caller can fix and retry."""

    exit_code = 1


# --- model construction -----------------------------------------------------

class InvalidParameter(ValidationError):
    """Non-positive capacitance/resistance or other out-of-range value."""


class InvalidTopology(ValidationError):
    """Network structure violates the preset (missing edge, bad fractions)."""


# --- simulation -------------------------------------------------------------

class UnstableStep(SmartstatError):
    """Integration step exceeds the explicit-scheme stability bound."""


class StateOutOfRange(SmartstatError):
    """A simulated temperature left the sanity envelope."""


class CoverageError(ValidationError):
    """A driving series does not cover the requested window, or has gaps."""


class MissingDrive(ValidationError):
    """No outdoor temperature series available."""


# --- fitting ----------------------------------------------------------------

class IllConditioned(ValidationError):
    """Observation window carries too little excitation to identify parameters."""


class StaleModel(SmartstatError):
    """The active fitted model is missing or expired."""


# --- planning / reporting ---------------------------------------------------

class UnknownZone(ValidationError):
    """Referenced zone id is not part of the network."""


# --- duty-cycle decoding ----------------------------------------------------

class GridError(ValidationError):
    """Observation series is not on a uniform time grid."""


class ModelMismatch(ValidationError):
    """Supplied fit does not match the required network preset."""


class ZeroActual(ValidationError):
    """Accuracy is undefined against a non-positive ground truth."""


# --- health monitoring ------------------------------------------------------

class ColdStart(ValidationError):
    """No usable baseline yet and no fleet prior to fall back on."""


class OutOfOrderUpdate(ValidationError):
    """Detector updates must arrive in date order."""


class NoAlarmWindow(ValidationError):
    """Counterfactual reports require an active alarm."""


# --- data io ----------------------------------------------------------------

class FormatError(ValidationError):
    """Input file is missing required columns or is otherwise unreadable."""


class EmptyInput(ValidationError):
    """Input contains no data rows."""


class GapTooLarge(ValidationError):
    """Resampling refused: a gap exceeds the configured maximum."""


class TooFewPoints(ValidationError):
    """Resampling needs at least two points."""


class ProviderUnavailable(SmartstatError):
    """Weather provider unreachable and no fresh cached response."""


class SchemaError(SmartstatError):
    """Provider payload lacks the mapped timestamp/temperature fields."""


class CorruptRecord(SmartstatError):
    """A persisted record could not be decoded."""
