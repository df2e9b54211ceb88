"""Exception hierarchy. Names match the error identifiers surfaced by the CLI."""


class BremermannError(Exception):
    """Base class for all solver and geometry errors."""

    @property
    def name(self):
        return type(self).__name__


class InvalidDomain(BremermannError):
    pass


class EmptyDiscretization(BremermannError):
    pass


class NoRecessionDirection(BremermannError):
    pass


class UnboundedSlab(BremermannError):
    pass


class NestingViolation(BremermannError):
    pass


class ArithmeticOverflow(BremermannError):
    pass


class StencilOutOfDomain(BremermannError):
    pass


class NoConvergence(BremermannError):
    def __init__(self, message, residual=float("nan")):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


class NegativeTrace(BremermannError):
    pass


class InvalidQ(BremermannError):
    pass


class GlueHypothesisFailed(BremermannError):
    def __init__(self, message, worst_node=None):
        super().__init__(message)
        self.worst_node = worst_node


class UnboundedComponent(BremermannError):
    pass


class BarrierNotPsh(BremermannError):
    pass


class PatchCollarViolation(BremermannError):
    def __init__(self, patch, message=""):
        super().__init__(f"patch {patch}: {message}" if message else f"patch {patch}")
        self.patch = patch


class DefiningFunctionFailure(BremermannError):
    pass


class CapEscalationDiverged(BremermannError):
    pass


class SchemeInconsistency(BremermannError):
    pass


class EmptyPrefix(BremermannError):
    pass


class RegionContainmentFailed(BremermannError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class InsufficientTail(BremermannError):
    pass


class ManifestError(BremermannError):
    pass


class ExpressionError(BremermannError):
    pass
