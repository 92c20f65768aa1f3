"""Exception hierarchy shared across the pipeline stages."""


class NspcError(Exception):
    """Base class for all pipeline errors."""


class ConfigError(NspcError):
    """Invalid configuration (CLI exit code 2)."""


class PredictorError(NspcError):
    """Predictor-side failure (CLI exit code 3)."""


class DataError(NspcError):
    """Bad or inconsistent data artifacts (CLI exit code 4)."""


# lexing
class UnlexableInput(DataError):
    pass


class LengthMismatch(DataError):
    pass


# predictor
class PredictorUnavailable(PredictorError):
    pass


class ProtocolError(PredictorError):
    pass


class EmptyCorpus(DataError):
    pass


# attribution
class TooManyTokens(DataError):
    pass


class InvalidSampleCount(ConfigError):
    pass


# tensor store
class ProvenanceMismatch(DataError):
    pass


class MissingLabel(DataError):
    pass


# probing
class InvalidArgs(ConfigError):
    pass


class InsufficientData(DataError):
    pass


class SingleClass(DataError):
    pass


# rules
class MissingAttribution(DataError):
    pass


# synthetic corpus
class InvalidPlantSpec(ConfigError):
    pass
