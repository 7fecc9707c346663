"""Exception hierarchy shared by every mixmap module."""


class MixMapError(Exception):
    """Root of all mixmap errors."""


class ParameterError(MixMapError, ValueError):
    """Invalid construction or experiment parameters."""


class DomainError(MixMapError, ValueError):
    """Argument outside the domain of an operation."""


class ConstructionError(MixMapError):
    """A piece of the map could not be built within its slope corridor."""


class ExceptionalPoint(MixMapError):
    """An orbit hit the breakpoint set within tolerance."""

    def __init__(self, x, step: int, message: str = ""):
        self.x = x
        self.step = step
        super().__init__(message or f"orbit of {x} hits a partition endpoint at step {step}")


class AdmissibilityError(MixMapError):
    """A symbol sequence uses a transition that is not an edge of the graph."""


class ConvergenceError(MixMapError):
    """An iterative procedure exceeded its iteration or depth cap."""
