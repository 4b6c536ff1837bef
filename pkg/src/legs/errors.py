"""Exception types shared across the package."""


class GraphError(ValueError):
    """Base class for graph construction problems."""


class DuplicateEdgeError(GraphError):
    """An undirected edge was supplied more than once."""


class NonPositiveWeightError(GraphError):
    """Edge weights must be strictly positive."""


class ZeroDegreeError(GraphError):
    """A node has zero degree where a positive degree is required."""


class GraphTooLargeError(ValueError):
    """Graph exceeds the densification cap of an exact verification routine."""


class BadFilterIndexError(IndexError):
    """Filter index outside the valid range of the bank."""


class DimensionMismatchError(ValueError):
    """Array shapes are inconsistent with each other or with the graph."""


class NonScalarLossError(ValueError):
    """Reverse-mode accumulation requires a scalar root node."""


class NotEnoughSamplesError(ValueError):
    """Too few samples for the requested operation (anchors, folds, ...)."""


class TooFewSamplesError(NotEnoughSamplesError):
    """Dataset smaller than the number of requested folds."""


class DivergenceError(RuntimeError):
    """Training loss became non-finite."""


class DatasetFormatError(ValueError):
    """Base class for dataset ingestion problems."""


class MalformedLineError(DatasetFormatError):
    """A dataset file contains a line that cannot be parsed."""

    def __init__(self, path, lineno, message):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = path
        self.lineno = lineno


class DanglingNodeIdError(DatasetFormatError):
    """An edge references a node id outside the graph indicator."""


class InconsistentCountsError(DatasetFormatError):
    """Per-graph files disagree about how many graphs exist."""
