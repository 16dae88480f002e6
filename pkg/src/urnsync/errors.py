"""Exception hierarchy.

Every error raised by the package derives from :class:`UrnsyncError`; the
intermediate classes group errors by the module that raises them so the CLI
can map each group to its own exit code.
"""


class UrnsyncError(Exception):
    """Base class for all package errors."""


# -- graph -----------------------------------------------------------------

class GraphError(UrnsyncError):
    pass


class NegativeWeight(GraphError):
    pass


class NotColumnStochastic(GraphError):
    pass


class NotIrreducible(GraphError):
    pass


class InvalidAlpha(GraphError):
    pass


class NotDiagonalizable(GraphError):
    pass


class ResidualTooLarge(GraphError):
    pass


class GammaOutOfRange(GraphError):
    pass


# -- dynamics --------------------------------------------------------------

class DynamicsError(UrnsyncError):
    pass


class ProbabilityOutOfRange(DynamicsError):
    pass


class EmptyCheckpoints(DynamicsError):
    pass


class HorizonOverflow(DynamicsError):
    pass


class WeightVectorNotNormalized(DynamicsError):
    pass


# -- asymptotics -----------------------------------------------------------

class AsymptoticsError(UrnsyncError):
    pass


class WrongRegime(AsymptoticsError):
    pass


class ComplexResidue(AsymptoticsError):
    pass


# -- limit lemmas ----------------------------------------------------------

class LemmaError(UrnsyncError):
    pass


class BadStartIndex(LemmaError):
    pass


class UnderflowRisk(LemmaError):
    pass


class RegimeViolation(LemmaError):
    pass


# -- inference -------------------------------------------------------------

class InferenceError(UrnsyncError):
    pass


class ThetaOutOfRange(InferenceError):
    pass


class DegenerateState(InferenceError):
    pass


class BadWeightVector(InferenceError):
    pass


# -- montecarlo ------------------------------------------------------------

class MonteCarloError(UrnsyncError):
    pass


class ProxyDegenerate(MonteCarloError):
    pass


# -- cli / config ----------------------------------------------------------

class ConfigError(UrnsyncError):
    """Configuration problem; ``key`` is the dotted path of the culprit."""

    def __init__(self, message, key=None, value=None):
        self.key = key
        self.value = value
        if key is not None:
            message = f"{key}: {message} (got {value!r})"
        super().__init__(message)


class ConfigParse(ConfigError):
    pass


class ConfigSemantic(ConfigError):
    pass


class IoFailure(UrnsyncError):
    pass
