"""Exception and warning types raised by dressed_limit.

Errors split into two families that the CLI maps to distinct exit codes:
:class:`SchemeError` (bad input, open manifolds) and :class:`NumericalError`
(tracking or integration failures).
"""


class DressedLimitError(Exception):
    """Base class for all package errors."""


class SchemeError(DressedLimitError):
    """The scheme is invalid or physically inadmissible."""


class SchemeSyntaxError(SchemeError):
    """The scheme file is not well-formed JSON or has the wrong shape."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class SchemeValidationError(SchemeError):
    """One or more scheme invariants are violated."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        lines = "\n".join(f"  {d}" for d in self.diagnostics)
        super().__init__(f"invalid scheme:\n{lines}")


class OpenManifold(SchemeError):
    """The couplings do not close into manifolds (momentum diffusion).

    ``cycle`` holds the level ids of the first conflicting loop found, starting
    and ending on the same level; ``transitions`` the scheme transition indices
    traversed along it.
    """

    def __init__(self, cycle, transitions, manifold=None):
        self.cycle = tuple(cycle)
        self.transitions = tuple(transitions)
        self.manifold = manifold
        path = "->".join(str(level) for level in self.cycle)
        super().__init__(
            f"open manifold: photon numbers are not conserved around cycle {path}"
        )


class NumericalError(DressedLimitError):
    """A numerical procedure failed to produce a trustworthy answer."""


class DegenerateBareState(NumericalError):
    """The initial level is degenerate with another level at zero coupling."""

    def __init__(self, level, partner, gap, tolerance):
        self.level = level
        self.partner = partner
        self.gap = gap
        self.tolerance = tolerance
        super().__init__(
            f"bare level {level} is degenerate with level {partner} "
            f"(gap {gap:.3e} <= {tolerance:.3e} rad/s); adiabatic connection is "
            "ill-defined. Use the 'min-excited' rule or add a small lift detuning."
        )


class TrackingLost(NumericalError):
    """Overlap continuation could not keep overlap above threshold."""

    def __init__(self, scale, overlap, step):
        self.scale = scale
        self.overlap = overlap
        self.step = step
        super().__init__(
            f"tracking lost at scale {scale:.6g}: best overlap {overlap:.4f} "
            f"with step {step:.3e}"
        )


class IntegrationFailure(NumericalError):
    """The time-domain integrator did not reach the end of the ramp."""


class SingularTerm(NumericalError):
    """A phase-shift term has zero Rabi frequency but nonzero coherence."""


class MissingPower(SchemeError):
    """The power-form SNR needs a laser power that the scheme lacks."""


class MultiTransitionUnsupported(SchemeError):
    """The power-form SNR is only defined for lasers driving one transition."""


class CapExceeded(DressedLimitError):
    """A requested scan exceeds the configured point cap."""


class UnreachableLevelsWarning(UserWarning):
    """Declared levels are not connected to the initial level and are dropped."""


class PowerConsistencyWarning(UserWarning):
    """Laser power disagrees with the intensity-Rabi relation for its transition."""
