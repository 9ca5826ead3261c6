"""Exception types shared across the package."""


class GeodexpError(Exception):
    """Base class for all package errors."""


class SignatureViolationError(GeodexpError):
    """Metric evaluated to a non-positive-definite matrix at a chart point."""

    def __init__(self, point, detail=""):
        self.point = tuple(float(c) for c in point)
        msg = f"signature violation: metric not positive-definite at {self.point}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class ChartDomainError(GeodexpError):
    """A point or finite-difference stencil left the chart domain."""


class StiffnessError(GeodexpError):
    """Adaptive step control underflowed before reaching the target parameter."""


class NoUniqueGeodesicError(GeodexpError):
    """Endpoint shooting (Newton) failed to converge; trust radius violated."""


class IrregularImmersionError(GeodexpError):
    """Induced metric degenerate at a grid point."""

    def __init__(self, index, detail=""):
        self.index = tuple(int(i) for i in index)
        msg = f"irregular immersion: induced metric degenerate at grid index {self.index}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class LatticeError(GeodexpError):
    """Field-grid precondition violated (too coarse for the generator scale)."""


class FitError(GeodexpError):
    """Least-squares fit badly conditioned or under-sampled."""


class InsufficientSignalError(GeodexpError):
    """Fewer than three sweep scales survive the noise-floor filter."""


class ConfigError(GeodexpError):
    """Invalid run configuration; message carries the path to the offending key."""

    def __init__(self, path, detail):
        self.path = path
        super().__init__(f"config error at '{path}': {detail}")
