"""
Error types raised by the structure-learning package.

Errors caused by bad input also derive from ValueError so callers that only
guard against ValueError keep working.
"""


class StructureLearningError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(StructureLearningError, ValueError):
    pass


class ParseError(StructureLearningError, ValueError):
    def __init__(self, line, message, source=None):
        self.line = line
        self.source = source
        if line is None:
            where = source or "input"
        else:
            where = f"{source}:{line}" if source else f"line {line}"
        super().__init__(f"{where}: {message}")


class NodeOutOfRange(StructureLearningError, ValueError):
    pass


class LevelOutOfRange(StructureLearningError, ValueError):
    pass


class ShapeMismatch(StructureLearningError, ValueError):
    pass


class NodeCountMismatch(StructureLearningError, ValueError):
    pass


class EmptyInput(StructureLearningError, ValueError):
    pass


class InfeasibleEdgeCount(StructureLearningError, ValueError):
    pass


class CyclicGraph(StructureLearningError, ValueError):
    pass


class NonFiniteUpdate(StructureLearningError, ArithmeticError):
    """A parameter block became inf/nan, usually because gamma is too large."""
