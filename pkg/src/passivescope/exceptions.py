"""Exception hierarchy for the reconnaissance pipeline.

Every failure that aborts the pipeline derives from :class:`ReconError` and
carries a stable ``stage`` name and ``exit_code`` so the CLI can map it to a
distinct process exit status.
"""


class ReconError(Exception):
    stage = "ReconError"
    exit_code = 1


class InvalidArguments(ReconError):
    stage = "InvalidArguments"
    exit_code = 2


class SourceOpenFailure(ReconError):
    """The capture device or trace file could not be opened."""

    stage = "SourceOpenFailure"
    exit_code = 3


class MalformedTraceFile(ReconError):
    stage = "MalformedTraceFile"
    exit_code = 4


class NoRangesDetermined(ReconError):
    """Nothing usable was observed, so no network range can be derived."""

    stage = "NoRangesDetermined"
    exit_code = 5


class NoFreeAddress(ReconError):
    stage = "NoFreeAddress"
    exit_code = 6


class InvalidSpec(ReconError, ValueError):
    """A synthetic scenario description violates its own invariants."""

    stage = "InvalidSpec"
    exit_code = 7


class EmptyInput(ReconError, ValueError):
    stage = "EmptyInput"
    exit_code = 8
