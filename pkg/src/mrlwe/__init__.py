"""Multivariate RLWE somewhat-homomorphic encryption for multidimensional signals."""
from .errors import (DepthError, ExistenceError, MRLWEError, ParameterError, ReferenceMismatch,
                     SizingError, StructureError, WireFormatError)
from .ring import MultiPoly, RingMapping, RingParams, negacyclic_mul
from .she import Ciphertext, NoiseParams, PublicKey, SecretKey, decrypt, encrypt, he_add, he_mul, keygen

__version__ = "0.1.0"
