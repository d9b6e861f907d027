"""Exception hierarchy shared across the toolkit."""


class CoregError(Exception):
    """Base class for all toolkit errors."""


# --- clock / stream errors ---------------------------------------------------

class TooFewMeasurements(CoregError):
    pass


class DegenerateTimes(CoregError):
    pass


class EmptyInput(CoregError):
    pass


# --- container errors --------------------------------------------------------

class InvariantViolation(CoregError):
    pass


class BadMagic(CoregError):
    pass


class TruncatedChunk(CoregError):
    pass


class MalformedHeaderXml(CoregError):
    pass


# --- transport errors --------------------------------------------------------

class ProtocolViolation(CoregError):
    pass


class BindFailure(CoregError):
    pass


class NegativeRoundTrip(CoregError):
    pass


# --- gaze errors -------------------------------------------------------------

class NoLayoutAvailable(CoregError):
    pass


# --- EEG errors --------------------------------------------------------------

class InvalidBand(CoregError):
    pass


class WindowTooShort(CoregError):
    pass


class EmptyCondition(CoregError):
    pass


# --- stats errors ------------------------------------------------------------

class UnknownSentenceId(CoregError):
    pass


class InsufficientData(CoregError):
    pass


class SingleClass(CoregError):
    pass


class NonConvergence(CoregError):
    pass


# --- simulator / pipeline errors ---------------------------------------------

class InvalidConfig(CoregError):
    pass


class MissingStream(CoregError):
    pass
