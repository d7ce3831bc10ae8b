"""Exception hierarchy shared by all modules."""


class StefanError(Exception):
    """Base class for errors raised by this package."""


class GraphError(StefanError, ValueError):
    """Invalid monotone graph definition."""


class QuadratureError(StefanError, RuntimeError):
    """A quadrature rule failed to reach its accuracy target."""


class GridError(StefanError, ValueError):
    """Invalid domain or discretization (e.g. step does not divide the box)."""


class StepSizeError(StefanError, ValueError):
    """A step-size condition required by the scheme is violated.

    ``condition`` names the violated inequality: ``"htau"``, ``"monotone"``,
    ``"coefficients"`` or ``"contraction"``.  ``min_ratio`` is set for ``"htau"`` and gives
    the smallest admissible ``h/tau``.
    """

    def __init__(self, condition, message, min_ratio=None, index=None):
        super().__init__(f"[{condition}] {message}")
        self.condition = condition
        self.min_ratio = min_ratio
        self.index = index


class EllipticityError(StefanError, ValueError):
    """A diffusion coefficient average fell below the ellipticity floor."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ConvergenceError(StefanError, RuntimeError):
    """Fixed-point iteration exhausted its budget.

    Carries the failing time step and the measured update ratios.
    """

    def __init__(self, message, step=None, updates=None, ratios=None):
        super().__init__(message)
        self.step = step
        self.updates = list(updates or [])
        self.ratios = list(ratios or [])


class ConfigError(StefanError, ValueError):
    """Run configuration failed validation; ``problems`` lists every violation."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(p["message"] if isinstance(p, dict) else str(p) for p in self.problems))
