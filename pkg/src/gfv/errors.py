"""Exception hierarchy shared across the package."""


class GfvError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(GfvError):
    """Invalid run configuration (bad file, unknown field, violated invariant)."""


class NumericsError(GfvError):
    """Numerical failure: blow-up, non-finite state, failed convergence check."""


class CflError(NumericsError):
    """Time step exceeds the transport stability bound."""

    def __init__(self, dt, dt_max, feature_index, node_index):
        self.dt = dt
        self.dt_max = dt_max
        self.feature_index = feature_index
        self.node_index = node_index
        super().__init__(
            f"dt={dt:g} exceeds stability bound {dt_max:g} "
            f"(binding at feature {feature_index}, node {node_index})"
        )


class SupportError(NumericsError):
    """A density is nonzero where the reference profile vanishes."""
