"""Exception types shared across the package."""


class BackendCapError(Exception):
    """State size exceeds what the requested backend supports."""


class NumericalError(Exception):
    """A computation produced non-finite values or failed to converge."""
