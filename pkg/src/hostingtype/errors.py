"""Exception hierarchy.

Every error carries a short machine-readable ``code`` so the command line
front end can print a single parsable line on failure.
"""

from __future__ import annotations


class HostingTypeError(Exception):
    code = "E_GENERIC"


class DomainParseError(HostingTypeError, ValueError):
    code = "E_DOMAIN"

    def __init__(self, text: str, label: str, reason: str):
        super().__init__(f"invalid label {label!r} in {text!r}: {reason}")
        self.text = text
        self.label = label


class AddressError(HostingTypeError, ValueError):
    code = "E_ADDRESS"


class IngestError(HostingTypeError):
    """Malformed input line (raised in strict mode) or unreadable file."""

    code = "E_INPUT"

    def __init__(self, message: str, path: str | None = None, line_no: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}:{line_no}: " if line_no is not None else f"{path}: "
        super().__init__(where + message)
        self.path = path
        self.line_no = line_no


class AsnConflictError(IngestError):
    code = "E_ASN_CONFLICT"


class ForestError(HostingTypeError):
    code = "E_FOREST"


class SchemaMismatchError(ForestError):
    code = "E_SCHEMA"


class ModelFormatError(ForestError):
    code = "E_MODEL_FORMAT"


class ModelVersionError(ModelFormatError):
    code = "E_MODEL_VERSION"


class CorruptModelError(ModelFormatError):
    code = "E_MODEL_CORRUPT"


class StageMismatchError(HostingTypeError):
    code = "E_STAGE"


class LabelingError(HostingTypeError):
    code = "E_LABEL"


class ConfigError(HostingTypeError, ValueError):
    code = "E_CONFIG"


class AnalysisError(HostingTypeError):
    code = "E_ANALYSIS"
