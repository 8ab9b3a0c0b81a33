"""Exception hierarchy.

Every error carries the CLI exit code of its class: 2 for I/O, 3 for
validation, 4 for numerical failures.
"""


class PuRiskError(Exception):
    exit_code = 3


class DataIOError(PuRiskError):
    exit_code = 2


class ValidationError(PuRiskError):
    exit_code = 3


class NumericalError(PuRiskError):
    exit_code = 4


# core-data
class MissingColumn(ValidationError):
    pass


class UnknownLabel(ValidationError):
    pass


class NonFiniteValue(ValidationError):
    pass


class InvalidCategoricalValue(ValidationError):
    pass


class DuplicateCaseId(ValidationError):
    pass


# feature selection / cv / forest
class TooFewRows(ValidationError):
    pass


class TooFewSources(ValidationError):
    pass


class FoldWithoutPositives(ValidationError):
    pass


class NotEnoughUnlabeled(ValidationError):
    pass


class DegenerateBag(ValidationError):
    pass


class CatalogMismatch(ValidationError):
    pass


# scores, calibration, confidence
class EmptyScoreList(ValidationError):
    pass


class TooFewScores(ValidationError):
    pass


class NonPositiveBandwidth(ValidationError):
    pass


class FlatCurve(NumericalError):
    """The D curve has no detectable bend; positives and unlabeled look alike."""


# synthetic data and configuration
class InfeasibleConfig(ValidationError):
    pass


class ConfigError(ValidationError):
    pass
