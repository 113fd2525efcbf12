"""Exception hierarchy shared across the package."""


class AccPulseError(Exception):
    """Base class for recoverable data/usage errors (CLI exit code 2)."""


class DegenerateInput(AccPulseError):
    pass


class DegenerateSignal(AccPulseError):
    pass


class EmptyTrainingSet(AccPulseError):
    pass


class SingleClassError(AccPulseError):
    pass


class ShapeError(AccPulseError):
    pass


class FoldError(AccPulseError):
    pass


class SplitError(AccPulseError):
    pass


class EmptyEvaluation(AccPulseError):
    pass


class CaseFormatError(AccPulseError):
    """A case directory is missing files or contains malformed data."""


class ConfigError(AccPulseError):
    """Invalid generator or command configuration."""


class ModelFormatError(AccPulseError):
    """A model file cannot be parsed."""
