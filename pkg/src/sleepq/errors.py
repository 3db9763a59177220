"""Exception taxonomy shared by every sleepq module."""


class SleepQError(Exception):
    """Base class for all sleepq errors."""


class ParseError(SleepQError):
    """Input file violates its declared layout (ragged rows, bad magic, non-numeric cells)."""


class ConfigError(SleepQError):
    """Required configuration is missing or inconsistent."""


class DomainError(SleepQError):
    """Argument outside the mathematical domain of an operation."""


class UnsupportedFormat(SleepQError):
    """File is recognized but uses a feature outside the supported subset."""


class UnsupportedRate(SleepQError):
    """Resampling ratio is not an integer decimation factor."""


class SignalTooShort(SleepQError):
    """Signal has too few samples for the requested operation."""


class InsufficientChannels(SleepQError):
    """Recording has fewer channels than the operation needs."""


class InsufficientData(SleepQError):
    """Not enough ensemble segments or samples to estimate a statistic."""


class InsufficientCoverage(SleepQError):
    """A phase bin received no samples; the phase series is too short or degenerate."""


class EmptyRoi(SleepQError):
    """A region of interest has no channels left."""


class EmptySelection(SleepQError):
    """A feature selection mask selects nothing."""


class AlignmentError(SleepQError):
    """Hypnogram and recording do not line up."""
