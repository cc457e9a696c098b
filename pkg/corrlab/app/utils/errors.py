"""Exceptions raised by corrlab and the exit codes they map to"""


class CorrlabError(ValueError):
    """Base class for all corrlab errors"""

    exit_code = 1


class ShapeMismatchError(CorrlabError):
    """Operand shapes are incompatible"""


class NumericError(CorrlabError):
    """A tolerance-aware numeric routine met input it cannot accept"""


class InvalidStructureError(CorrlabError):
    """An algebra, module, correspondence or CP map violates its invariants"""


class RefusedError(CorrlabError):
    """A theorem check refuses its input"""

    exit_code = 3


class ScenarioError(CorrlabError):
    """A scenario file cannot be read or does not match its schema"""

    exit_code = 2
