"""Exception hierarchy shared across the package."""

from __future__ import annotations


class DPRTFLError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(DPRTFLError, ValueError):
    """An argument violates an operation's precondition (shape, finiteness, ...)."""


class InvalidConfigError(DPRTFLError, ValueError):
    """A configuration value is out of range or malformed."""


class NoUpdatesError(DPRTFLError):
    """Aggregation was asked to combine zero client updates."""


class OrderingError(DPRTFLError):
    """A checkpoint would move the manifold's round index backwards."""


class CheckpointNotFoundError(DPRTFLError, LookupError):
    """No checkpoint satisfies the requested rollback target."""


class NoActiveClientsError(DPRTFLError):
    """An election was required but no client is eligible to coordinate."""


class BaselineNotEstablishedError(DPRTFLError):
    """Corruption detection was queried before its baseline was set."""


class UndefinedMetricError(DPRTFLError, ValueError):
    """A metric is mathematically undefined for the given labels."""


class PartitionError(DPRTFLError):
    """Client partitioning failed to give every client at least one sample."""


class SimulationError(DPRTFLError):
    """A simulation aborted; ``partial`` holds whatever was produced so far."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial
