class InputError(ValueError):
    """Invalid input data (bad box, malformed record, ragged group, ...)."""


class ConfigError(ValueError):
    """Invalid or unknown configuration."""
