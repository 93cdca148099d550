"""Exception types with machine-readable exit codes for the CLI."""


class Sigma2Error(Exception):
    code = "error"
    exit_status = 1


class ConfigError(Sigma2Error):
    code = "config"
    exit_status = 2


class NonPositiveKError(ConfigError):
    code = "nonpositive_K"


class NonDegeneracyError(Sigma2Error):
    code = "nondegeneracy"
    exit_status = 5


class BoundaryTooSmallError(Sigma2Error):
    code = "boundary_too_small"
    exit_status = 5


class ObstructionError(Sigma2Error):
    code = "obstruction"
    exit_status = 3


class ConvergenceError(Sigma2Error):
    code = "no_convergence"
    exit_status = 4


class NearBlowUpError(ConvergenceError):
    code = "near_blow_up"


class InadmissibleError(Sigma2Error):
    code = "inadmissible"
    exit_status = 4


class SingularLinearizationError(ConvergenceError):
    code = "singular_linearization"

    def __init__(self, message, singular_values=None):
        super().__init__(message)
        self.singular_values = singular_values
