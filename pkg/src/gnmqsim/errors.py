"""Exception types shared across the package."""


class GnmqsimError(Exception):
    """Base class for all package-specific errors."""


class ParseError(GnmqsimError, ValueError):
    """Malformed input text (PDB, circuit files, JSON dumps)."""


class EmptyStructureError(GnmqsimError, ValueError):
    """A structure source contained no usable atoms."""


class EncodingError(GnmqsimError, ValueError):
    """A state could not be encoded or decoded consistently."""


class NumericalError(GnmqsimError, RuntimeError):
    """A numerical routine failed a hard consistency or residual check."""
