"""Private per-role state that survives between CLI invocations."""

from __future__ import annotations

from dataclasses import dataclass, field

from .algebra import GElement
from .certs import MaskedCert, MaskValueTable, SigKey
from .core import MasterKey, Message, PrivilegeSignature, PublicKey


@dataclass
class TAState:
    pk: PublicKey
    mk: MasterKey
    table: MaskValueTable = field(default_factory=MaskValueTable)
    # current signature per (file, privilege); v is only known for rotated ones
    signatures: dict[SigKey, PrivilegeSignature] = field(default_factory=dict)
    # DRs that already received their mask value
    mvalue_sent: set[str] = field(default_factory=set)


@dataclass
class DOState:
    messages: dict[str, Message] = field(default_factory=dict)
    signatures: dict[SigKey, PrivilegeSignature] = field(default_factory=dict)


@dataclass
class DRCredential:
    dr_id: str
    mvalue: GElement | None = None
    mcert: MaskedCert | None = None
