"""Exception types raised across the toolkit."""


class IseError(Exception):
    """Base class for toolkit errors."""


class AudioFormatError(IseError):
    """Unsupported WAV layout (codec, width or channel count)."""


class AudioIOError(IseError, OSError):
    """File could not be read completely."""


class ContractError(IseError, ValueError):
    """Inputs violate an operation's preconditions."""


class DegenerateInputError(IseError, ValueError):
    """Signal has zero power or zero variance where a ratio is needed."""


class LabelsIncompleteError(IseError, ValueError):
    """V/UV label file does not cover the utterance."""


class FilterOutOfBandError(IseError, ValueError):
    """Requested gammatone centre frequency reaches Nyquist."""


class PitchUnavailableError(IseError):
    """No voiced frame of an utterance produced a pitch candidate."""


class MetricUndefinedError(IseError, ValueError):
    """Objective metric cannot be computed for the given pair."""


class DegenerateVarianceError(IseError, ValueError):
    """All ANOVA groups have zero within-group variance."""


class CalibrationImpossibleError(IseError):
    """Training set carries no voiced content to calibrate on."""
