"""Exception hierarchy shared by every subsystem.

Each class carries a short ``code`` that the CLI prints on its diagnostic
line so failures are easy to grep for.
"""

from __future__ import annotations


class AdvisorError(Exception):
    code = "E_ADVISOR"


class ProfileParseError(AdvisorError):
    code = "E_PARSE"

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class IncompleteRecordError(AdvisorError):
    code = "E_INCOMPLETE"


class DuplicateCounterError(AdvisorError):
    code = "E_DUPLICATE"


class ProfileFormatError(AdvisorError):
    code = "E_FORMAT"


class SchemaError(AdvisorError):
    code = "E_SCHEMA"


class MissingFeatureError(SchemaError):
    code = "E_MISSING_FEATURE"


class EntryLoadError(AdvisorError):
    code = "E_ENTRY"


class PairingError(AdvisorError):
    code = "E_PAIRING"


class ConflictError(AdvisorError):
    code = "E_CONFLICT"


class UnknownEntryError(AdvisorError):
    code = "E_UNKNOWN_ID"


class LearnerError(AdvisorError):
    code = "E_LEARNER"


class ModelFormatError(AdvisorError):
    code = "E_MODEL_FORMAT"


class SplitError(AdvisorError):
    code = "E_SPLIT"


class DatasetError(AdvisorError):
    code = "E_DATASET"
