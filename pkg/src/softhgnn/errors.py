"""Exception types shared across the package."""


class SoftHGError(Exception):
    """Base class for all library errors."""


class ShapeError(SoftHGError, ValueError):
    pass


class ConfigError(SoftHGError, ValueError):
    pass


class EmptyInputError(SoftHGError, ValueError):
    pass


class DegenerateStructureError(SoftHGError, ValueError):
    """A hypergraph has a vertex or hyperedge with zero degree."""


class NumericError(SoftHGError, ArithmeticError):
    """A computation produced a non-finite value."""
