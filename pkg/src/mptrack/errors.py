"""Exception and warning types shared across the package."""


class ConfigurationError(ValueError):
    """Geometry or config values that cannot produce a usable setup."""


class InputError(ValueError):
    """Malformed data handed to an operation (wrong shape, too short, empty)."""


class DegenerateInputWarning(UserWarning):
    """Input is valid but carries no information (silent frame, flat template)."""
