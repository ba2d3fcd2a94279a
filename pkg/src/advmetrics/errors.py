"""Exception hierarchy shared by every module."""


class AdvMetricsError(Exception):
    """Base class for all errors raised by advmetrics."""


class ShapeMismatch(AdvMetricsError, ValueError):
    pass


class FormatError(AdvMetricsError, ValueError):
    pass


class DegenerateInput(AdvMetricsError, ValueError):
    pass


class SpecError(AdvMetricsError, ValueError):
    pass


class MissingFeature(AdvMetricsError, KeyError):
    pass


class UnknownLabel(AdvMetricsError, KeyError):
    pass


class ParseError(AdvMetricsError, ValueError):
    pass
