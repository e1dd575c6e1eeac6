"""Exception types shared across the simulator."""


class FedSdpError(Exception):
    """Base class for all simulator errors."""


class ConfigurationError(FedSdpError, ValueError):
    """A parameter, config field, or dimension is out of its valid range."""


class EmptyDataError(FedSdpError, ValueError):
    """An operation that needs at least one sample received none."""


class DataFormatError(FedSdpError, ValueError):
    """A data file could not be parsed; the message locates the bad cell."""


class ProtocolError(FedSdpError, RuntimeError):
    """Client uploads violated the aggregation contract."""


class ConstraintError(FedSdpError, ValueError):
    """A theoretical precondition failed; the message names the inequality."""


class DegenerateContributionError(FedSdpError, ZeroDivisionError):
    """Both Shapley values are zero, so the contribution ratio is undefined."""
