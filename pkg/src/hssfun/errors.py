"""Exception types shared across the package."""


class HssFunError(Exception):
    """Base class for errors raised by this package."""


class ContractError(HssFunError):
    """An input violates a structural precondition (shape, symmetry, flags)."""


class FunctionDomainError(HssFunError):
    """An eigenvalue fell outside the domain of the scalar function."""


class PoleCollisionError(HssFunError):
    """A shifted solve hit a (near-)singular matrix: pole collides with spectrum."""


class ConsistencyError(HssFunError):
    """A stored decomposition violates the invariants its flags promise."""
