"""Exception types shared across the package."""


class PPCError(Exception):
    """Base class for every error raised by ppcsim."""


class InvalidParameter(PPCError, ValueError):
    """A parameter is out of range, non-finite, or has the wrong shape."""


class DegenerateActivity(PPCError):
    """Population activity carries no spikes and cannot be decoded."""


class DegenerateBelief(PPCError):
    """A grid belief lost all of its probability mass."""
