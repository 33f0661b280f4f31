"""Exception hierarchy shared by every module.

Each numerical failure names the invariant it violates, so the CLI can
surface it as a structured message.
"""


class CritPersistError(Exception):
    """Base class for all library errors."""

    invariant = "unspecified"

    def __init__(self, message: str = "", **details):
        super().__init__(message or self.__class__.__name__)
        self.details = details

    def as_record(self) -> dict:
        return {"error": type(self).__name__, "invariant": self.invariant,
                "message": str(self), **{k: _plain(v) for k, v in self.details.items()}}


def _plain(value):
    try:
        return float(value)
    except (TypeError, ValueError):
        return str(value)


# spectral_core
class NotSymmetric(CritPersistError):
    invariant = "operator symmetric"


class NoSpectralGap(CritPersistError):
    invariant = "eigenvalue outside ambiguity band (zero_tol, 10*zero_tol)*||op||"


class ContourHitsSpectrum(CritPersistError):
    invariant = "contour disjoint from spectrum"


class SingularResolvent(CritPersistError):
    invariant = "resolvent invertible on contour nodes"


class DimensionMismatch(CritPersistError):
    invariant = "compatible dimensions"


# grassmann
class AmbientMismatch(CritPersistError):
    invariant = "same ambient dimension"


class ProjectionDegenerate(CritPersistError):
    invariant = "pseudodistance < 1 - 1e-6"


class NotOrthogonal(CritPersistError):
    invariant = "summands mutually orthogonal"


# manifold_bundle
class UnsupportedKind(CritPersistError):
    invariant = "supported manifold kind"


class DimensionTooSmall(CritPersistError):
    invariant = "ambient dimension large enough for manifold kind"


class DomainViolation(CritPersistError):
    invariant = "point inside functional domain"


class NotCritical(CritPersistError):
    invariant = "[C] gradient vanishes on manifold samples"


class Degenerate(CritPersistError):
    invariant = "[ND] Hessian kernel equals tangent space"


class KernelDimensionUnrecoverable(CritPersistError):
    invariant = "Riesz projector rank equals kernel dimension"


class KernelCollapse(CritPersistError):
    invariant = "pseudodistance(kernel, X_n) < 1"


class GapLost(CritPersistError):
    invariant = "ker T_nm = F0_nm with spectral gap"


class InconsistentScenario(CritPersistError):
    invariant = "reductions share scenario and increase in level"


# saddle_flow
class TubularRadiusExceeded(CritPersistError):
    invariant = "fiber radii below tubular radius"


class LevelGapViolated(CritPersistError):
    invariant = "sup over lower boundary < inf over B0"


class CriticalOnSublevel(CritPersistError):
    invariant = "gradient nonzero on sublevel set"


class ConeViolated(CritPersistError):
    invariant = "cone condition on upper boundary"


class BoundExceedsSigma(CritPersistError):
    invariant = "pseudogradient within sigma of gradient on upper boundary"


class LeftNeighborhood(CritPersistError):
    invariant = "trajectory stays in closed neighborhood until sublevel"


class StepTooLarge(CritPersistError):
    invariant = "energy nonincreasing along integration step"


class QuadratureDivergence(CritPersistError):
    invariant = "deformation reconstruction error <= 1e-4"


# persistence_lab
class UnknownScenario(CritPersistError):
    invariant = "known scenario name"


class AmplitudeExceedsBudget(CritPersistError):
    invariant = "measured gradient deviation <= 1.01 * amplitude"


class NoConvergence(CritPersistError):
    invariant = "at least one Newton seed converges"


class EpsilonOutOfRange(CritPersistError):
    invariant = "0 < eps < 1/64"


# cli
class ConfigError(CritPersistError):
    invariant = "valid run configuration"
