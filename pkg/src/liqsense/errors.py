"""Exception types shared across the toolkit.

The CLI maps each class to a distinct exit code, so raise the most
specific one available.
"""


class LiqsenseError(Exception):
    """Base class for all toolkit errors."""


class SchemaError(LiqsenseError):
    """A file or request violates the expected schema."""


class DimensionError(LiqsenseError):
    """Grid or array dimensions do not match."""


class MissingLabelError(LiqsenseError):
    """A session lacks the class label required for training."""
