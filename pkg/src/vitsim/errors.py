"""Exception types shared across the package."""


class ValidationError(ValueError):
    """An input violates a documented precondition or schema."""


class DivergenceError(RuntimeError):
    """An iterative update left its stability region (non-finite iterate,
    inverse-approximation gate tripped, ...)."""


class NumericsError(RuntimeError):
    """A numerical safeguard fired: loss of positive definiteness,
    singular factor, asymmetry beyond tolerance."""
