"""Exception hierarchy for cobeam."""


class CobeamError(Exception):
    """Base class for all errors raised by this package."""


class RankError(CobeamError):
    """A matrix does not have the numerical rank an operation requires."""


class StencilInfeasible(CobeamError):
    """A finite-difference stencil point left the PSD cone."""


class SingularPenalty(CobeamError):
    """Zero power price requested while the aggregate penalty is singular."""


class BisectionFailure(CobeamError):
    """A multiplier bracket could not be established."""


class NoDirection(CobeamError):
    """No rank-reducing direction exists for the given factor."""


class DegenerateChannel(CobeamError):
    """A channel quadratic form vanished where it must be positive."""


class InfeasibleInit(CobeamError):
    """An algorithm was started from a point violating the power budgets."""


class ZeroChannel(CobeamError):
    """A direct channel is identically zero."""


class DimensionError(CobeamError):
    """Array shapes are inconsistent with the network configuration."""


class ConfigError(CobeamError):
    """An experiment configuration failed to parse or validate."""
