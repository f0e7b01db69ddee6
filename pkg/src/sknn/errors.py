"""Exception types shared across the package."""


class SknnError(Exception):
    """Base class for all errors raised by this package."""


class EmptyDataset(SknnError):
    pass


class UnlabelledElement(SknnError):
    pass


class UnknownVertex(SknnError):
    pass


class FormatVersionMismatch(SknnError):
    pass


class CorruptModel(SknnError):
    pass


class MissingLabels(SknnError):
    pass


class SchemaMismatch(SknnError):
    pass


class MetricMismatch(SknnError):
    """Model is fingerprint-bound to a different fitted metric."""


class NumericFeatureUnsupported(SknnError):
    pass


class NoFeasiblePath(SknnError):
    pass


class UnclassifiableSequence(SknnError):
    pass


class InstanceTooLarge(SknnError):
    pass


class ClusterCountExceedsElements(SknnError):
    pass


class DistanceMatrixTooLarge(SknnError):
    pass


class EmptySubgraphSet(SknnError):
    pass


class MalformedLine(SknnError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class MalformedRecord(SknnError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"record at line {lineno}: {message}")
        self.lineno = lineno


class NonFiniteCoordinate(SknnError):
    pass


class EmptyCorpus(SknnError):
    pass


class DegenerateSplit(SknnError):
    pass


class WindowAlreadyApplied(SknnError):
    pass


class ShapeMismatch(SknnError):
    pass


class ConfigError(SknnError):
    pass
