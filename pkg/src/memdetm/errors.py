"""Exception hierarchy shared by all memdetm modules."""


class MemdetmError(Exception):
    """Base class for every error raised by this package."""


class ZeroDenominator(MemdetmError):
    """All blended membership grades vanish at the evaluation point."""


class NegativeWeight(MemdetmError):
    """A graph weight or pinning gain is negative."""


class DimensionMismatch(MemdetmError):
    """Matrix or vector shapes are inconsistent."""


class HeterogeneousDims(DimensionMismatch):
    """Agents disagree on memory depth, state or input dimension."""


class Infeasible(MemdetmError):
    """No LMI certificate exists at the requested margin."""

    def __init__(self, msg, margin=None):
        super().__init__(msg)
        self.margin = margin


class BackendFailure(MemdetmError):
    """The conic solver did not converge or returned garbage."""


class IllConditioned(MemdetmError):
    """A recovered X matrix is too badly conditioned to invert reliably."""


class VerificationFailed(MemdetmError):
    """A certificate check failed on at least one vertex."""

    def __init__(self, msg, vertex=None, value=None):
        super().__init__(msg)
        self.vertex = vertex
        self.value = value


class MissingP(MemdetmError):
    """A Lyapunov trace was requested without a Lyapunov matrix."""


class Divergence(MemdetmError):
    """A simulated state exceeded the divergence guard."""


class ConfigError(MemdetmError):
    """Base class for scenario and gain-file problems."""


class ParseError(ConfigError):
    """The file could not be parsed."""


class ValidationError(ConfigError):
    """The file parsed but its contents are inconsistent."""
