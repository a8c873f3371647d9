"""Exception hierarchy.

Every failure that carries geometric meaning derives from
:class:`RecoveryError`, so callers (and the CLI's exit-code mapping) can
separate mathematical failures from malformed input.
"""


class DimensionError(ValueError):
    """Operands live in different dimensions, or d is out of range."""


class RecoveryError(Exception):
    """Base class for failures of the reconstruction itself."""


class DegenerateSimplex(RecoveryError):
    """Points that should span R^d are (numerically) affinely dependent."""


class DegenerateAnchors(DegenerateSimplex):
    pass


class DegenerateSupport(RecoveryError):
    """Inlier sample does not span R^d; least-squares fit is not unique."""


class NotDistancePreserving(RecoveryError):
    """A labelling violates pairwise distance preservation beyond tolerance."""


class NumericalFailure(RecoveryError):
    pass


class Infeasible(RecoveryError):
    """No point has the requested distances to the anchors."""


class InsufficientData(RecoveryError):
    """Too few usable samples to select a full simplex."""


class NoConsensus(RecoveryError):
    """No candidate isometry explains a quorum of the correspondences."""

    def __init__(self, message, best_consensus=0):
        super().__init__(message)
        self.best_consensus = best_consensus
