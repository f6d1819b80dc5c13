"""Exception types shared across the package."""


class QueryLearnError(Exception):
    """Base class for all package errors."""


class ProblemFormatError(QueryLearnError):
    """Problem document is structurally malformed."""


class ValidationError(QueryLearnError):
    """Problem content violates an invariant (priors, labels, shapes)."""


class DuplicateRowsError(ValidationError):
    """Two objects share a response row but exact identification was requested."""


class InseparableGroupsError(ValidationError):
    """Two objects in different groups share a response row; no query sequence can tell the groups apart."""


class ExhaustedGroupError(QueryLearnError):
    """Every query in the group has already been answered."""


class BuildError(QueryLearnError):
    """Tree construction cannot make progress (no splitting query, depth guard hit)."""


class TreeDocumentError(QueryLearnError):
    """Tree document is malformed or inconsistent with the dataset."""


class ProtocolError(QueryLearnError):
    """Session answer does not match the current suggestion."""


class InconsistentResponseError(QueryLearnError):
    """Responses eliminated every candidate; the pattern lies outside the declared model."""


class TranscriptError(QueryLearnError):
    """Transcript document is malformed or does not replay against the dataset."""
