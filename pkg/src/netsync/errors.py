"""Exception types shared across the package.

The CLI maps these onto its exit-code contract: configuration problems
exit 1, violated model assumptions exit 2, integration failures exit 3.
"""


class NetsyncError(Exception):
    """Base class for all package-specific errors."""


class MatrixError(NetsyncError):
    """Malformed matrix input: wrong shape, non-finite entries, or a
    structural precondition (symmetry, definiteness) that does not hold."""


class AssumptionError(NetsyncError):
    """A named model assumption failed.

    ``assumption`` is one of "A1", "A2" (output-coupling problem),
    "B1", "B2" (state-coupling problem), or "C1".."C3" (skew-coupled
    baseline system).
    """

    def __init__(self, assumption: str, message: str):
        super().__init__(f"assumption {assumption} violated: {message}")
        self.assumption = assumption


class TopologyError(NetsyncError):
    """Coupling matrix is not a valid (or not a connected) topology."""


class IllConditionedSplitError(NetsyncError):
    """An eigenvalue sits too close to the imaginary-axis classification
    boundary for the marginal/stable split to be trustworthy."""


class IntegrationError(NetsyncError):
    """Simulation failed: step-size guard violated or the state left the
    set of finite vectors (first bad grid index reported in the message)."""


class ConfigError(NetsyncError):
    """Scenario file is missing, malformed, or inconsistent."""
