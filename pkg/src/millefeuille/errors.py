"""Exception types shared across modules."""


class MillefeuilleError(Exception):
    pass


class GeometryError(MillefeuilleError, ValueError):
    pass


class DegenerateQuadruple(GeometryError):
    pass


class ModelMismatch(GeometryError):
    pass


class CrossingGeodesics(GeometryError):
    pass


class ParameterOutOfRange(MillefeuilleError, ValueError):
    pass


class ConvergenceFailure(MillefeuilleError, RuntimeError):
    pass


class NoSolution(MillefeuilleError, ValueError):
    pass


class MalformedSpec(MillefeuilleError, ValueError):
    pass


class EmptyFamily(MillefeuilleError, ValueError):
    pass


class HypothesisViolated(MillefeuilleError, ValueError):
    pass


class NotHyperbolic(MillefeuilleError, ValueError):
    pass


class RadiusExceedsGeneration(MillefeuilleError, ValueError):
    pass


class DegenerateIncidence(MillefeuilleError, RuntimeError):
    pass


class InconsistentBoundary(MillefeuilleError, RuntimeError):
    pass


class DepthTooSmall(MillefeuilleError, ValueError):
    pass


class KEven(MillefeuilleError, ValueError):
    pass


class BadOffsets(MillefeuilleError, ValueError):
    pass


class NotFound(MillefeuilleError, LookupError):
    pass
