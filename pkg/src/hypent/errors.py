"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration or incompatible option combination."""


class ParseError(ValueError):
    """Malformed parse-tree text. Carries the byte offset of the defect."""

    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class DataFormatError(ValueError):
    """Malformed dataset file. Carries the 1-based line number."""

    def __init__(self, message, line):
        super().__init__(f"line {line}: {message}")
        self.line = line


class NumericalError(RuntimeError):
    """Non-finite loss or a failed numerical check during training."""
