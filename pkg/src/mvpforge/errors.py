"""Exception types shared across the toolkit."""


class ForgeError(Exception):
    """Base class for all toolkit errors."""


class SchemaError(ForgeError):
    """A file or record does not match its declared schema."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(ForgeError):
    """Structurally parseable input that violates an invariant."""


class PayloadMismatchError(ForgeError):
    """A record payload variant does not match its task family."""


class EmptyInputError(ForgeError):
    """An operation received degenerate input it cannot process.

    ``code`` is a stable machine-readable tag such as ``empty-structure``.
    """

    def __init__(self, code: str, detail: str = ""):
        self.code = code
        super().__init__(f"{code}: {detail}" if detail else code)
