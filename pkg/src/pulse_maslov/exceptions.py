"""Exception hierarchy shared by every module of the package."""


class PulseMaslovError(Exception):
    """Base class for computational failures raised by this package."""

    #: short machine-readable tag emitted by the CLI error JSON
    code = "error"

    def to_dict(self):
        return {"error": type(self).__name__, "code": self.code, "message": str(self)}


class InvalidParameters(PulseMaslovError, ValueError):
    code = "invalid_parameters"


class DomainError(PulseMaslovError, ValueError):
    code = "domain"


class NoRootNearMinusOne(PulseMaslovError):
    code = "no_root"


class NotHyperbolic(PulseMaslovError):
    code = "not_hyperbolic"


class NewtonDiverged(PulseMaslovError):
    code = "newton_diverged"

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class MeshTooCoarse(PulseMaslovError):
    code = "mesh_too_coarse"


class RankDeficient(PulseMaslovError, ValueError):
    code = "rank_deficient"


class IntegratorBlowup(PulseMaslovError):
    code = "integrator_blowup"


class LagrangianDrift(PulseMaslovError):
    code = "lagrangian_drift"


class CutoffViolation(PulseMaslovError):
    code = "cutoff_violation"


class UnresolvedCrossing(PulseMaslovError):
    code = "unresolved_crossing"


class DegenerateCrossing(PulseMaslovError):
    code = "degenerate_crossing"


class MarginalCase(PulseMaslovError):
    code = "marginal"


class EigensolverFailure(PulseMaslovError):
    code = "eigensolver"


class TranslationNotFound(PulseMaslovError):
    code = "translation_not_found"


class CFLViolation(PulseMaslovError, ValueError):
    code = "cfl"


class Blowup(PulseMaslovError):
    code = "blowup"
