"""Exception types shared across the package."""


class MRLWEError(Exception):
    pass


class StructureError(MRLWEError, ValueError):
    """Operands disagree on shape, modulus, ring or component count."""


class ParameterError(MRLWEError, ValueError):
    """A parameter is out of range or violates a ring precondition."""


class ExistenceError(ParameterError):
    """A required root of unity (or of -1) does not exist."""


class DepthError(MRLWEError):
    """Multiplicative depth budget exhausted."""


class SizingError(MRLWEError, ValueError):
    """Signal support does not fit in the ring degrees."""


class WireFormatError(MRLWEError, ValueError):
    """Malformed or unsupported serialized data."""


class ReferenceMismatch(MRLWEError):
    """Decrypted experiment output differs from the plaintext reference."""
