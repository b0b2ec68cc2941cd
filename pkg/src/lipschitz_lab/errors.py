"""Exception types raised across the package."""


class LabError(Exception):
    """Base class for all package errors."""


class SelfIntersecting(LabError):
    pass


class DegenerateEdge(LabError):
    pass


class InvalidEps(LabError):
    pass


class UnknownTag(LabError):
    pass


class MeshFailure(LabError):
    pass


class BadParam(LabError):
    pass


class BadOrder(LabError):
    pass


class QuadratureFailure(LabError):
    pass


class SolverFailure(LabError):
    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


class OutsideMesh(LabError):
    pass


class HessOnP1(LabError):
    pass


class QuadratureBudgetExceeded(LabError):
    pass


class GramAssemblyBudget(LabError):
    pass


class NonzeroTrace(LabError):
    pass


class BadVectorField(LabError):
    pass


class CutoffTooLarge(LabError):
    pass


class OutOfRange(LabError):
    pass


class ConfigError(LabError):
    pass
