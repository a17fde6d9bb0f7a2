"""Exception hierarchy.

Every error raised on purpose by the package derives from ``PlasmonicError``.
The CLI maps ``ConfigError`` subclasses to exit code 2 and
``NumericalError`` subclasses to exit code 3.
"""


class PlasmonicError(Exception):
    """Base class for all package errors."""

    code = "error"


class ConfigError(PlasmonicError, ValueError):
    """Invalid user input: bad parameters, bad files, bad guards."""

    code = "config_error"


class NumericalError(PlasmonicError, ArithmeticError):
    """A computation could not be carried out to the requested accuracy."""

    code = "numerical_error"


# geometry
class DegenerateChart(NumericalError):
    code = "degenerate_chart"


class PoleSingularity(NumericalError):
    code = "pole_singularity"


class ResolutionTooLow(ConfigError):
    code = "resolution_too_low"


class UnsupportedTopology(ConfigError):
    code = "unsupported_topology"


# layer potentials / spectral
class OffsetTooSmall(ConfigError):
    code = "offset_too_small"


class MeshMismatch(ConfigError):
    code = "mesh_mismatch"


class NotPositiveDefinite(NumericalError):
    code = "not_positive_definite"


class NotAxisymmetric(ConfigError):
    code = "not_axisymmetric"


class MeshTooLarge(ConfigError):
    code = "mesh_too_large"


class DegenerateContrast(ConfigError):
    code = "degenerate_contrast"


class LambdaHalf(ConfigError):
    code = "lambda_half"


class ZeroNorm(NumericalError):
    code = "zero_norm"


class EmptyWindow(NumericalError):
    code = "empty_window"


# symbols and flows
class ZeroCovector(ConfigError):
    code = "zero_covector"


class FlowBlowup(NumericalError):
    code = "flow_blowup"


class AssumptionAViolated(NumericalError):
    code = "assumption_a_violated"


class EmptyFiber(NumericalError):
    code = "empty_fiber"


class BumpUnresolved(ConfigError):
    code = "bump_unresolved"


# helmholtz
class ZeroDistance(ConfigError):
    code = "zero_distance"


class WavenumberTooLarge(ConfigError):
    code = "wavenumber_too_large"


class SingularS(NumericalError):
    code = "singular_s"


class NoResonanceFound(NumericalError):
    code = "no_resonance_found"


# cli / io
class UnknownKind(ConfigError):
    code = "unknown_kind"


class MissingField(ConfigError):
    code = "missing_field"

    def __init__(self, field, path=""):
        self.field = field
        where = f"{path}.{field}" if path else field
        super().__init__(f"missing required field '{where}'")


class InvalidValue(ConfigError):
    code = "invalid_value"
