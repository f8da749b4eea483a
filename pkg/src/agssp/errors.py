"""Exception taxonomy shared by all modules.

Everything raised on bad inputs derives from ValidationError so the CLI can
map it to exit code 2; anything else escaping a command is an internal error
(exit code 1).
"""


class AgsspError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(AgsspError):
    """Invalid input data, file, or configuration."""


# tensor / manifest I/O
class MalformedHeader(ValidationError):
    pass


class DtypeUnsupported(ValidationError):
    pass


class TruncatedPayload(ValidationError):
    pass


class IoFailure(AgsspError):
    pass


class SchemaViolation(ValidationError):
    pass


class DanglingReference(ValidationError):
    pass


# scoring
class EmptyField(ValidationError):
    pass


class DegenerateMean(ValidationError):
    pass


class ZeroVector(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class SizeMismatch(ValidationError):
    pass


class EmptyBank(ValidationError):
    pass


class EmptyMap(ValidationError):
    pass


# distillation
class DegenerateNorm(ValidationError):
    pass


class ZeroMap(ValidationError):
    pass


class ZeroTaskLoss(ValidationError):
    pass


# pseudo labels
class EmptyCategory(ValidationError):
    pass


class MissingMap(ValidationError):
    pass


class MissingScore(ValidationError):
    pass


# metrics
class DegenerateLabels(ValidationError):
    pass


# cli
class MissingEmbeddings(ValidationError):
    pass


class MissingGtMasks(ValidationError):
    pass


class UnsupportedImage(ValidationError):
    pass
