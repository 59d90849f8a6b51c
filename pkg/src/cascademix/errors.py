class ParseError(ValueError):
    """Malformed input record; ``where`` is a 1-based line or record number."""

    def __init__(self, message: str, where: int | None = None):
        self.where = where
        if where is not None:
            message = f"line {where}: {message}"
        super().__init__(message)


class DomainError(ValueError):
    """Argument outside the domain an operation is defined on."""
