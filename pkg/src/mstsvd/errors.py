"""Exception types shared across the package."""


class FormatError(Exception):
    """A file or byte stream violates an on-disk format contract."""

    def __init__(self, message: str, *, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)


class InvariantError(RuntimeError):
    """An internal invariant was violated; indicates a bug, not bad input."""
