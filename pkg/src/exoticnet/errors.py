"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operands have incompatible shapes; the message names both."""


class SchemaError(ValueError):
    """An input file does not match the expected column schema."""


class ConfigError(ValueError):
    """A pipeline configuration key is missing, unknown, or mistyped."""
