"""Exception hierarchy shared by all GENEO Lab toolkits."""
from typing import Optional


class GeneoLabError(ValueError):
    """Base class for every error raised by the toolkits."""


class ConfigError(GeneoLabError):
    """A configuration value or referenced file is missing or invalid."""


class StructuralError(GeneoLabError):
    """A table is malformed (wrong shape, index out of range, ...)."""


class MetricAxiomError(GeneoLabError):
    """An explicit distance table violates a pseudo-metric axiom."""


class HomomorphismError(GeneoLabError):
    """A group map does not preserve composition."""


class SpaceMismatchError(GeneoLabError, TypeError):
    """Two maps or spaces do not line up (e.g. cod(g1) != dom(g2))."""


class UnsupportedSpaceError(GeneoLabError):
    """The operation is only defined on finite carriers."""


class MissingBindingError(GeneoLabError):
    """A sort, generator or complexity has no binding."""


class CategoryValidationError(GeneoLabError):
    """A translation category is not closed, not associative or holds an expansive arrow."""


class DataFormatError(GeneoLabError):
    """An IDX, CSV or model manifest file cannot be decoded."""


class SplitError(GeneoLabError):
    """A dataset cannot be split as requested."""


class TrainingDivergedError(GeneoLabError):
    """The training loss became non-finite."""


class UnknownSuiteError(GeneoLabError):
    """A property suite name is not registered."""


class DslError(GeneoLabError):
    """Error in diagram source, located at a line and column."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.message = message
        self.line = line
        self.column = column
        if line is not None:
            message = f"{line}:{column}: {message}"
        super().__init__(message)


class LexicalError(DslError):
    """Unrecognized character in diagram source."""


class DslSyntaxError(DslError):
    """Token stream does not match the grammar."""


class DuplicateDeclarationError(DslError):
    """A sort, generator or diagram name is declared twice."""


class UnknownIdentifierError(DslError):
    """A name is used before (or without) being declared."""


class DiagramTypeError(DslError):
    """Wire words do not match at a sequential composition."""
