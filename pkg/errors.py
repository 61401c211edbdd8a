"""
Exception hierarchy shared by every tilekit module
"""


class TilekitError(Exception):
    """Base class for all library errors"""


class DimensionError(TilekitError):
    pass


class UnknownTileError(TilekitError):
    pass


class RuleFileError(TilekitError):
    """Malformed rules, machine or fixture file"""

    def __init__(self, source, field, message):
        self.source = source
        self.field = field
        super().__init__(f"{source}: field '{field}': {message}")


class ResourceBudgetError(TilekitError):
    """A configured budget would be exceeded; never replaced by a guess"""

    def __init__(self, budget, limit, message=""):
        self.budget = budget
        self.limit = limit
        detail = f" ({message})" if message else ""
        super().__init__(f"{budget} exceeded: limit {limit}{detail}")


class SymmetryError(TilekitError):
    pass


class TMError(TilekitError):
    pass


class CompileError(TilekitError):
    pass


class ReductionError(TilekitError):
    pass


class ChainError(TilekitError):
    pass


class FixtureError(TilekitError):
    pass
