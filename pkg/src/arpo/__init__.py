"""Reward and advantage machinery for group-relative policy optimization over
heterogeneous task domains, plus a view-conditioned prior-injection module and
a small tabular simulation harness."""

__version__ = "0.1.0"

from .errors import ConfigError, InputError

__all__ = ["ConfigError", "InputError", "__version__"]
