"""Exception and warning types shared across the package."""


class RfCancelError(Exception):
    """Base class for all errors raised by this package."""


class InvalidLength(RfCancelError):
    """Sequence length incompatible with the requested operation."""


class AliasedConfig(RfCancelError):
    """Requested signal cannot be represented at the given sample rate."""


class DelayTooLarge(RfCancelError):
    """Path delay equals or exceeds the waveform duration."""


class RateMismatch(RfCancelError):
    """Operands have different sample rates."""


class NoCoherentReference(RfCancelError):
    """Reference and antenna signals show no usable correlation."""


class DegenerateReference(RfCancelError):
    """Reference signal has zero energy, gain estimation impossible."""


class AmbiguousLabeling(RfCancelError):
    """Neither separated output correlates with the labeling reference."""


class InvalidSegment(RfCancelError):
    """PSD segment length exceeds the available samples."""


class OutOfBand(RfCancelError):
    """Requested frequency lies outside the estimate's range."""


class TooShort(RfCancelError):
    """Waveform shorter than the demodulation filter span."""


class ConfigError(RfCancelError):
    """Scenario configuration failed validation.

    ``fields`` lists every offending entry as ``"dotted.path: reason"``.
    """

    def __init__(self, fields):
        self.fields = list(fields)
        super().__init__("invalid config: " + "; ".join(self.fields))


class UnseparableWarning(UserWarning):
    """Both sources look Gaussian; ICA cannot separate them."""


class NotConvergedWarning(UserWarning):
    """ICA hit the iteration cap; the result is returned but flagged."""
