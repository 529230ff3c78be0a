"""Exception types shared across the pipeline stages."""


class SympkitError(Exception):
    """Base class for all anticipated pipeline failures."""


class SchemaError(SympkitError):
    """An input file is malformed or violates a structural invariant."""


class TrainingError(SympkitError):
    """Model training diverged or was handed an unusable dataset."""
