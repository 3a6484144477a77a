"""Exception hierarchy and warning categories.

Every error carries a coarse ``category`` (config / data / runtime) that the
CLI maps onto its exit codes (2 / 3 / 4).
"""


class HarnessError(Exception):
    """Base class for all errors raised by this package."""

    category = "runtime"


class ConfigError(HarnessError):
    category = "config"


class DataError(HarnessError):
    category = "data"


class RunFailure(HarnessError):
    category = "runtime"


# --- configuration / plan errors -------------------------------------------

class MalformedInput(ConfigError):
    """Input text is not syntactically valid (JSON, override token, ...)."""


class SchemaViolation(ConfigError):
    """Structured input parsed but violates the documented schema."""


class UnknownKey(ConfigError):
    """Override key does not resolve to a documented config path."""


class TypeMismatch(ConfigError):
    """Override value has the wrong type for its config slot."""


class UnsupportedProblemType(ConfigError):
    """Task declares a problem type the harness refuses to run."""


class UnknownTargetDataset(ConfigError):
    """A stage or pinned source references a dataset not in the registry."""


class EmptyWhitelist(ConfigError):
    """No whitelist candidate resolved and no pinned source was given."""


class BudgetExceedsPool(ConfigError):
    """A cumulative label budget is larger than the target train pool."""


class InvalidSpec(ConfigError):
    """Synthetic-data spec violates its invariants."""


class UsageError(ConfigError):
    """Command line could not be parsed."""


# --- data errors ------------------------------------------------------------

class MissingFile(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class UnknownLabel(DataError):
    pass


class DuplicateId(DataError):
    pass


class AlreadyLabeled(DataError):
    pass


class UnknownId(DataError):
    pass


class TooFewSamples(DataError):
    pass


class InsufficientPool(DataError):
    pass


class MissingPredictions(DataError):
    pass


class EmptyTestSet(DataError):
    pass


class SchemaMismatch(DataError):
    """Results file does not match the supported record schema."""


class EmptyResults(DataError):
    pass


# --- runtime errors ---------------------------------------------------------

class NoLabels(RunFailure):
    """A learner was asked to fit with no usable labeled samples."""


class ZeroVector(RunFailure):
    """A feature vector with (near-)zero norm cannot be cosine-normalized."""


class NonFiniteGradient(RunFailure):
    """An optimization step produced NaN or infinite values."""


class EmptyBatch(RunFailure):
    """A loss term was requested for an empty batch."""


# --- warnings ----------------------------------------------------------------

class HarnessWarning(UserWarning):
    """Base class for non-fatal conditions."""


class ShortfallWarning(HarnessWarning):
    """An acquisition could not be satisfied in full; took what was there."""


class RankDeficientWarning(HarnessWarning):
    """Requested embedding dimension exceeded the available rank; reduced."""
