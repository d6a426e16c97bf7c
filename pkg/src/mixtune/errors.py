"""Exception hierarchy shared by all stages of the optimizer."""


class MixtuneError(Exception):
    pass


class ParseError(MixtuneError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{line}:{column}: {message}"
        super().__init__(message)


class AnalysisError(MixtuneError):
    """Raised when a static range or error bound cannot be established."""


class DivisionByZeroRange(AnalysisError):
    pass


class NegativeSqrtRange(AnalysisError):
    pass


class SpecialValueError(AnalysisError):
    """Overflow, NaN or a denormal-only range was detected."""


class FormatOverflow(AnalysisError):
    pass


class NoValidConfig(MixtuneError):
    pass


class MissingCostEntry(MixtuneError):
    pass
