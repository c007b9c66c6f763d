"""Exception hierarchy shared by the solver, diagnostics and runner."""


class VMError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 3
    reason = "numerical abort"


class GridError(VMError, ValueError):
    exit_code = 2
    reason = "grid"


class NeutralityError(VMError, ValueError):
    exit_code = 2
    reason = "neutrality"


class SymmetryError(VMError, ValueError):
    exit_code = 2
    reason = "symmetry precondition"


class ConfigError(VMError, ValueError):
    exit_code = 2
    reason = "config"


class SupportError(VMError):
    """Phase-space support reached the outer layer of the box."""

    exit_code = 4
    reason = "support reached boundary"


class CFLError(VMError):
    exit_code = 3
    reason = "cfl"


class AlignmentError(VMError, ValueError):
    """dt differs from dx, so grid lines are not light cones."""

    exit_code = 2
    reason = "light-cone alignment required"


class NumericalError(VMError):
    exit_code = 3
    reason = "numerical abort"


class EscapeError(VMError):
    exit_code = 3
    reason = "characteristic escaped domain"
