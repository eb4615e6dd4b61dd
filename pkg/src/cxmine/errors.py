"""Exception hierarchy shared across the toolkit."""


class CxmineError(Exception):
    """Base class for all toolkit errors."""


class FormatError(CxmineError):
    """Malformed input file (CoNLL-U columns, pattern file syntax, ...)."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class TreeStructureError(CxmineError):
    """Sentence head pointers do not form a single-rooted tree."""

    def __init__(self, message, sentence_id=None):
        if sentence_id is not None:
            message = f"sentence {sentence_id!r}: {message}"
        super().__init__(message)
        self.sentence_id = sentence_id


class PatternValidationError(CxmineError):
    """Pattern specification violates its structural invariants."""


class ContractError(CxmineError):
    """Caller violated an operation precondition."""


class NotFoundError(CxmineError):
    """Referenced entity does not exist in the store."""


class YieldError(CxmineError):
    """A prompt or detector finds no true positives; derived quantities undefined."""


class BackendError(CxmineError):
    """Text-generation backend failed after bounded retries."""


class ReplyParseError(CxmineError):
    """No line of a backend reply could be parsed; the batch should be retried."""
