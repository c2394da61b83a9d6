"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Raised when a configuration document is malformed or violates a constraint."""


class ResonanceError(ArithmeticError):
    """Raised when a comb tooth pair is (numerically) resonant with a level splitting.

    The light-shift expressions divide by the beatnote detuning; exact
    resonance makes the perturbative model invalid rather than merely
    inaccurate, so it is rejected instead of returning inf.
    """


class FitError(RuntimeError):
    """Raised when a fit cannot converge or the data are degenerate."""
