"""Exception hierarchy shared across the pipeline.

Two broad families matter to the CLI: ``DataError`` (bad inputs,
exit code 2) and ``BackendError`` (encoder/LLM-client faults,
exit code 3). Everything else is a plain usage problem handled by
the argument parser.
"""


class BalcorError(Exception):
    """Base class for all library errors."""


class DataError(BalcorError):
    """Invalid or inconsistent data supplied by the caller."""


class BackendError(BalcorError):
    """A pluggable backend (encoder, LLM client) failed."""


# corpus
class MalformedRecord(DataError):
    def __init__(self, path, line_no, reason):
        super().__init__(f"{path}:{line_no}: {reason}")
        self.path = str(path)
        self.line_no = line_no
        self.reason = reason


class UnknownLabel(DataError):
    pass


class DuplicateId(DataError):
    pass


class BadRatios(DataError):
    pass


class UnlabeledDataset(DataError):
    pass


# balance
class EmptyText(DataError):
    pass


class EmptyClass(DataError):
    pass


class InsufficientAugmentation(DataError):
    pass


# classifier
class DimensionMismatch(DataError):
    pass


class LengthMismatch(DataError):
    pass


class EmptyDataset(DataError):
    pass


class DivergedLoss(BalcorError):
    pass


class BackendFailure(BackendError):
    pass


# verifier
class LabelOutOfTask(DataError):
    pass


class ConfigError(BalcorError):
    """Invalid configuration; the CLI reports these as usage errors."""


# correction
class PolicyMismatch(DataError):
    pass


class IdMismatch(DataError):
    pass


class PendingDecisions(DataError):
    def __init__(self, pending_ids):
        ids = list(pending_ids)
        shown = ", ".join(ids[:20]) + (", ..." if len(ids) > 20 else "")
        super().__init__(f"{len(ids)} review decision(s) still pending: {shown}")
        self.pending_ids = ids


class InvalidDistribution(DataError):
    pass


# projection
class PerplexityTooLarge(DataError):
    pass


class IoError(BalcorError):
    """Artifact could not be written (bad coordinates, unwritable path)."""
