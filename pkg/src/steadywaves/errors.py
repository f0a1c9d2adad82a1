"""Exception types shared across the solver and analysis layers."""


class SteadyWavesError(Exception):
    """Base class for all package errors."""


class ConfigError(SteadyWavesError):
    """Invalid run configuration (unknown key, bad value, bad type)."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        prefix = ""
        if path is not None:
            prefix = f"{path}:"
            if line is not None:
                prefix += f"{line}:"
            prefix += " "
        elif line is not None:
            prefix = f"line {line}: "
        super().__init__(prefix + message)


class FluxRangeError(SteadyWavesError):
    """Stream-function value outside the flux interval attained by the flow."""


class StagnationError(SteadyWavesError):
    """The vertical slope of the height field dropped to the stagnation guard.

    The wave-speed bound (flow everywhere slower than the wave) is a strict
    hypothesis of every property we verify, so fields that approach it are
    rejected rather than analyzed.
    """


class NoRealSlopeError(SteadyWavesError):
    """Surface condition admits no real surface slope for the requested head."""


class NonMonotoneProfileError(SteadyWavesError):
    """A column of the height field stopped increasing: internal stagnation."""


class BifurcationBracketError(SteadyWavesError):
    """No sign change of the linearized operator's leading eigenvalue in the
    scanned head interval."""

    def __init__(self, message, head_interval=None):
        self.head_interval = head_interval
        if head_interval is not None:
            message += f" (scanned head interval {head_interval[0]:.6g}..{head_interval[1]:.6g})"
        super().__init__(message)


class NewtonDivergenceError(SteadyWavesError):
    """Damped Newton failed: residual would not decrease or iteration cap hit."""

    def __init__(self, message, field=None, residual_norm=None):
        self.field = field
        self.residual_norm = residual_norm
        super().__init__(message)


class ConvergenceStallError(SteadyWavesError):
    """Newton steps became negligibly small while the residual plateaued above
    tolerance; the iterate is junk and must not feed the property checks."""

    def __init__(self, message, field=None, residual_norm=None):
        self.field = field
        self.residual_norm = residual_norm
        super().__init__(message)


class InvariantViolationError(SteadyWavesError):
    """A solve finished but the returned field violates a structural invariant.

    The offending field is attached for diagnosis; callers must not use it as
    a converged wave.
    """

    def __init__(self, message, field=None, violations=None):
        self.field = field
        self.violations = violations or []
        super().__init__(message)


class DegenerateStreamlineError(SteadyWavesError):
    """Streamline curvature is below the noise band everywhere (flat curve)."""


class ThinDomainError(SteadyWavesError):
    """Fluid region too thin to carve out the required interior margin."""


class SchemaError(SteadyWavesError):
    """Serialized artifact does not match the expected schema."""
