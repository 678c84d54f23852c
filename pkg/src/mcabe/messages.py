"""Protocol messages exchanged between roles on the harness bus."""

from __future__ import annotations

from dataclasses import dataclass

from .algebra import GElement, GTElement
from .certs import MaskedCert
from .core import Ciphertext, MaskedMessage, Privilege, SecretKey
from .policy import AccessTree


@dataclass(frozen=True)
class OutsourceJob:
    """DO -> ESP: the tree-dependent half of encryption."""

    s: int
    tree: AccessTree
    mm: MaskedMessage


@dataclass(frozen=True)
class StoreCiphertext:
    """ESP -> SSP."""

    ct: Ciphertext


@dataclass(frozen=True)
class SignatureRegistration:
    """DO -> TA.  Carries sig_k only; the exponent v_k stays with the DO."""

    file_id: str
    privilege: Privilege
    sig: GTElement
    epoch: int


@dataclass(frozen=True)
class AccessRequest:
    """DR -> TA."""

    dr_id: str
    file_id: str
    privilege: Privilege
    attrs: frozenset[str]


@dataclass(frozen=True)
class KeyDelivery:
    """TA -> DSP."""

    dr_id: str
    file_id: str
    privilege: Privilege
    sk: SecretKey


@dataclass(frozen=True)
class CertDelivery:
    """TA -> DR.  ``mvalue`` is present only on first contact."""

    dr_id: str
    mcert: MaskedCert
    mvalue: GElement | None


@dataclass(frozen=True)
class FetchCiphertext:
    """DSP -> SSP."""

    file_id: str


@dataclass(frozen=True)
class CiphertextDelivery:
    """SSP -> DSP."""

    ct: Ciphertext


@dataclass(frozen=True)
class PartialDecryption:
    """DSP -> DR: m * sig_k plus the sealed payload."""

    dr_id: str
    file_id: str
    privilege: Privilege
    masked: GTElement
    sealed_payload: bytes


@dataclass(frozen=True)
class RotationOrder:
    """TA -> SSP: multiply C~_k by ``delta``."""

    file_id: str
    privilege: Privilege
    delta: GTElement
