"""Exception types shared across the package."""


class DegenerateCentroidError(ValueError):
    """Instance centroid falls outside the instance mask (shape is not
    star-convex about its centroid)."""


class NumericalRankError(ValueError):
    """Least-squares basis matrix is rank deficient."""

    def __init__(self, effective_rank, expected_rank):
        self.effective_rank = effective_rank
        self.expected_rank = expected_rank
        super().__init__(
            f"basis matrix is rank deficient: effective rank "
            f"{effective_rank} < {expected_rank}"
        )


class TriangulationError(ValueError):
    """Orientation set is degenerate (e.g. coplanar), no hull exists."""


class DegenerateDetectionError(ValueError):
    """All aggregation weights around a detection are zero."""


class ShapeGenerationError(RuntimeError):
    """Random shape sampling kept producing near-degenerate radii."""


class EvaluationError(RuntimeError):
    """Metric could not be computed for any instance."""


class VolumeFormatError(ValueError):
    """Malformed volume file; ``offset`` is the offending byte position."""

    def __init__(self, message, offset):
        self.offset = offset
        super().__init__(f"{message} (byte offset {offset})")
