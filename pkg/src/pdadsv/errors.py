"""Exception taxonomy shared across the toolkit.

Every error that crosses a module boundary is a subclass of PdadsvError so
callers (CLI, HTTP service) can map failures to exit codes / status codes
without string matching.
"""


class PdadsvError(Exception):
    """Base class for all toolkit errors."""

    code = "internal_error"


# --- audio decoding ---------------------------------------------------------

class MalformedContainer(PdadsvError):
    code = "malformed_container"


class UnsupportedEncoding(PdadsvError):
    code = "unsupported_encoding"


class EmptyAudio(PdadsvError):
    code = "empty_audio"


# --- signal / feature extraction --------------------------------------------

class ClipTooShortForFrame(PdadsvError):
    code = "clip_too_short_for_frame"


class NonPowerOfTwoLength(PdadsvError):
    code = "non_power_of_two_length"


class InvalidFrequencyRange(PdadsvError):
    code = "invalid_frequency_range"


class ClipTooShort(PdadsvError):
    code = "clip_too_short"


class SilentSignal(PdadsvError):
    code = "silent_signal"


# --- dataset ingestion -------------------------------------------------------

class MissingColumn(PdadsvError):
    code = "missing_column"


class NonNumericValue(PdadsvError):
    code = "non_numeric_value"

    def __init__(self, row: int, col: str):
        super().__init__(f"non-numeric value at row {row}, column {col!r}")
        self.row = row
        self.col = col


class ReplicationMismatch(PdadsvError):
    code = "replication_mismatch"

    def __init__(self, subject: str, count: int):
        super().__init__(f"subject {subject!r} has {count} recordings, expected 3")
        self.subject = subject
        self.count = count


class EmptyDataset(PdadsvError):
    code = "empty_dataset"


class TooFewSubjects(PdadsvError):
    code = "too_few_subjects"


# --- training ----------------------------------------------------------------

class SingleClassDataset(PdadsvError):
    code = "single_class_dataset"


class DimensionMismatch(PdadsvError):
    code = "dimension_mismatch"


class InvalidFractions(PdadsvError):
    code = "invalid_fractions"


class InvalidVote(PdadsvError):
    code = "invalid_vote"


class EmptyEvaluation(PdadsvError):
    code = "empty_evaluation"


# --- persistence ---------------------------------------------------------------

class UnsupportedVersion(PdadsvError):
    code = "unsupported_version"


class SchemaViolation(PdadsvError):
    code = "schema_violation"

    def __init__(self, field: str):
        super().__init__(f"model document is missing required field {field!r}")
        self.field = field


class ModelNotLoaded(PdadsvError):
    code = "model_not_loaded"
