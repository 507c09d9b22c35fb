"""Exception hierarchy shared by every module of the package."""


class GeosurfError(Exception):
    """Base class for all library errors."""


class InputError(GeosurfError, ValueError):
    """A precondition on the arguments failed."""


# metric core
class DisconnectedGraph(InputError):
    pass


class NonPositiveEdge(InputError):
    pass


class InvalidEmbedding(InputError):
    pass


class MissingOrigin(InputError):
    pass


class UnknownVertex(InputError, KeyError):
    pass


class NegativeRadius(InputError):
    pass


class NoEmbedding(InputError):
    pass


class NotInjective(InputError):
    pass


class EmptyDomain(InputError):
    pass


class BadRegion(InputError):
    pass


class NonGeodesicSpace(InputError):
    """Raised by surface-only operations when handed a snowflaked (non-geodesic) space."""


# generators
class BadParameters(InputError):
    pass


class UnboundedFactor(InputError):
    pass


class UnsupportedFamily(InputError):
    pass


# nets / measures / dimension
class BadEpsilon(InputError):
    pass


class BadRadii(InputError):
    pass


class EmptyNormalizer(InputError):
    pass


class SupportOutsideDomain(InputError):
    pass


class ZeroMeasure(InputError):
    pass


class InsufficientScales(InputError):
    pass


class RegionTooSmall(InputError):
    pass


class InsufficientRadii(InputError):
    pass


class ScalesTooLarge(InputError):
    pass


class InsufficientSamples(InputError):
    pass


class InvalidCurve(InputError):
    pass


class EpsilonTooLarge(InputError):
    pass


# surrounding
class NoSurroundingLoop(GeosurfError):
    """No loop in the search region surrounds the requested ball."""


class BallTouchesOuterFace(NoSurroundingLoop, InputError):
    pass


class LoopMeetsTarget(InputError):
    pass


class LayerEscapedRegion(GeosurfError):
    pass


# hyperbolicity
class NotFatEnough(InputError):
    pass


class NoBoundedComponent(GeosurfError):
    pass


# poincare
class SigmaDoesNotSeparate(InputError):
    pass


class ZeroMeasureOnBall(InputError):
    pass


# runner
class ConfigInvalid(InputError):
    pass


class AnalysisFailed(GeosurfError):
    pass


class MissingArtifacts(InputError):
    pass
