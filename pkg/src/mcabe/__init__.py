"""Ciphertext-policy ABE with outsourced encryption/decryption and
certificate-based revocation of data requesters."""

from .algebra import GElement, GTElement, hash_to_group, pairing
from .core import (
    Ciphertext,
    MasterKey,
    Message,
    Privilege,
    PublicKey,
    SecretKey,
    decrypt_dr,
    decrypt_dsp,
    encrypt_do,
    encrypt_esp,
    keygen,
    setup,
)
from .errors import MCABEError
from .policy import AccessTree, check_satisfy, parse_policy

__version__ = "0.1.0"
