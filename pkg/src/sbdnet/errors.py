"""Exception taxonomy shared by the library and the CLI exit-code mapping."""


class ConfigError(ValueError):
    """Invalid configuration, parameters, or model choice (CLI exit 2)."""


class NumericsError(RuntimeError):
    """Quadrature, root-finding, or ODE integration failure (CLI exit 3)."""


class PreconditionError(RuntimeError):
    """Statistical precondition not met, e.g. too few samples (CLI exit 4)."""
