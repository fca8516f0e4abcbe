"""Typed exceptions shared across the package."""


class BsdelabError(Exception):
    """Base class for all package errors."""


class DepthRangeError(BsdelabError, ValueError):
    """Iteration depth outside the numerically representable range (1..3)."""


class DomainError(BsdelabError, ValueError):
    """An iterated-logarithm argument left its admissible domain."""


class ParameterError(BsdelabError, ValueError):
    """A parameter violates a documented precondition."""


class GridError(BsdelabError, ValueError):
    """An evaluation grid is empty or malformed."""


class OverflowRangeError(BsdelabError, OverflowError):
    """An intermediate quantity exceeds the representable floating range."""


class SearchFailedError(BsdelabError, RuntimeError):
    """A ladder / candidate search exhausted all candidates without success."""


class CounterexampleError(BsdelabError, RuntimeError):
    """A constructed counterexample failed to produce a negative margin."""


class ShapeMismatchError(BsdelabError, ValueError):
    """A lattice process does not match the expected layer shape."""


class UnsupportedDimensionError(BsdelabError, ValueError):
    """The lattice solver only supports one driving Brownian dimension."""


class PicardDivergenceError(BsdelabError, RuntimeError):
    """The inner fixed-point iteration hit max_iter with residual above tol."""


class HypothesisViolationError(BsdelabError, ValueError):
    """An ordering hypothesis of a comparison run fails on the inputs."""


class CertificateMissingError(BsdelabError, ValueError):
    """A required assumption certificate is not attached to the model."""


class UsageError(BsdelabError, ValueError):
    """Bad command-line usage or unreadable configuration."""
