"""Exception types shared across the package."""


class PoolwiseError(Exception):
    """Base class for all package errors."""


class ParameterError(PoolwiseError, ValueError):
    """An argument is malformed or out of range."""


class StructuralError(PoolwiseError, ValueError):
    """A plan, pool, or history violates a structural constraint (size, depth, ids)."""


class CapacityError(PoolwiseError):
    """The instance exceeds the size cap of an exact method; use the scalable variant."""


class StateError(PoolwiseError):
    """An operation was invoked in a state that cannot accept it (e.g. budget exhausted)."""


class NothingToTestError(StateError):
    """Every agent is already resolved or counted; no meaningful pool remains."""


class InconsistentHistoryError(PoolwiseError, ValueError):
    """The recorded outcomes are jointly impossible under the deterministic test model."""
