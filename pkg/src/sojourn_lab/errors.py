"""Exception hierarchy shared by every module."""


class SojournLabError(Exception):
    """Base class for library errors."""


class InvalidArgumentError(SojournLabError, ValueError):
    pass


class SimulationFailure(SojournLabError):
    """Covariance could not be factorized, even after jitter escalation."""


class UnsupportedRegimeError(SojournLabError):
    pass


class MissingConstantError(SojournLabError):
    """A Berman-type constant without closed form was needed but not supplied."""

    def __init__(self, label, regime):
        self.label = label
        self.regime = regime
        super().__init__(
            f"regime {regime}: constant {label} has no closed form; "
            f"estimate it with `berman` and supply it as berman_values (CLI: --constant LABEL=VALUE or --store)"
        )


class MissingScalingError(SojournLabError):
    pass


class BracketError(SojournLabError, ValueError):
    pass


class NoSolutionError(SojournLabError):
    pass


class NumericFailure(SojournLabError):
    pass


class DegenerateConditioningError(SojournLabError):
    pass
