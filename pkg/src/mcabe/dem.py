"""Symmetric sealing keyed by a target-group element.

Key = HKDF-SHA256(canonical bytes of the GT element, info=label).
Blob = 12-byte nonce || AES-256-GCM ciphertext and tag.
"""

from __future__ import annotations

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from .algebra import GTElement

NONCE_BYTES = 12

PAYLOAD_LABEL = b"mcabe/payload/v1"
CERT_LABEL = b"mcabe/cert-metadata/v1"


def derive_key(key_element: GTElement, label: bytes) -> bytes:
    return HKDF(algorithm=hashes.SHA256(), length=32, salt=None, info=label).derive(
        key_element.to_bytes()
    )


def seal(key_element: GTElement, plaintext: bytes, aad: bytes, rng, label: bytes) -> bytes:
    nonce = rng.randbytes(NONCE_BYTES)
    return nonce + AESGCM(derive_key(key_element, label)).encrypt(nonce, plaintext, aad)


def open_sealed(key_element: GTElement, blob: bytes, aad: bytes, label: bytes) -> bytes:
    """Raises :class:`cryptography.exceptions.InvalidTag` on authentication failure."""
    if len(blob) < NONCE_BYTES + 16:
        raise InvalidTag()
    nonce, body = blob[:NONCE_BYTES], blob[NONCE_BYTES:]
    return AESGCM(derive_key(key_element, label)).decrypt(nonce, body, aad)


__all__ = ["InvalidTag", "seal", "open_sealed", "derive_key", "PAYLOAD_LABEL", "CERT_LABEL"]
