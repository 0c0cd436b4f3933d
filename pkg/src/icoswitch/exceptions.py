"""Exception types raised by icoswitch."""


class TruncationError(RuntimeError):
    """Fock-space state lost more norm than the truncation budget allows."""

    def __init__(self, norm_loss, budget):
        self.norm_loss = norm_loss
        self.budget = budget
        super().__init__(
            f"truncated state lost {norm_loss:.3e} of its norm (budget {budget:.1e}); "
            "increase the cutoff or shrink the displacements"
        )


class InvalidPriorError(ValueError):
    """Prior interval does not fit inside one half-period of the fringe."""


class InsufficientDataError(ValueError):
    """Too few points (or none) for the requested statistic or fit."""


class FitConvergenceError(RuntimeError):
    """Least-squares fit did not reach the gradient tolerance.

    The best point found so far is kept on ``best`` so callers can still
    report it.
    """

    def __init__(self, message, best):
        self.best = best
        super().__init__(message)


class ConfigError(ValueError):
    """Malformed or unknown entries in an experiment configuration."""
