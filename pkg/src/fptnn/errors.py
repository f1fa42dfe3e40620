"""Exception types shared across the package."""


class FptnnError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(FptnnError):
    """Invalid or inconsistent configuration (bad keys, shapes, dimensions)."""


class DivergenceError(FptnnError):
    """A simulation or training run produced non-finite state."""


class DegenerateDomainError(FptnnError):
    """An estimated domain has zero volume and cannot be trained on."""


class DegenerateModelError(FptnnError):
    """A model carries no usable probability mass on its domain (Z <= 0)."""


class IntegrationError(FptnnError):
    """Numerical integration failed to converge within the refinement cap."""
