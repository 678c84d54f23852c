"""Trust-authority state: authorization certificates, the mask value table,
certificate masking (CerGen) and revocation bookkeeping.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field, replace
from typing import Mapping

from . import dem
from .algebra import GElement, GTElement, pairing, random_scalar
from .core import Privilege, PrivilegeSignature, PublicKey
from .errors import BadMaskValue, RevokedUser, UnknownDR

SigKey = tuple[str, Privilege]


def pk_fingerprint(pk: PublicKey) -> bytes:
    h = hashlib.sha256()
    for el in (pk.g, pk.h, pk.e_gg_alpha, pk.g_eps, pk.g_theta):
        h.update(el.to_bytes())
    return h.digest()


@dataclass(frozen=True)
class AuthorizationCert:
    """Privilege grant for one DR.

    ``pk_ref`` is a SHA-256 fingerprint of the public key.  The master key is
    never placed in a certificate.
    """

    file_ids: tuple[str, ...]
    valid_from: int
    valid_until: int
    signatures: Mapping[SigKey, GTElement]
    privileges: Mapping[str, frozenset[Privilege]]
    pk_ref: bytes
    epochs: Mapping[SigKey, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.valid_from < self.valid_until:
            raise ValueError("valid period must have start < end")
        if set(self.privileges) != set(self.file_ids):
            raise ValueError("privileges must cover exactly the listed files")
        for fid, privs in self.privileges.items():
            for k in privs:
                if (fid, k) not in self.signatures:
                    raise ValueError(f"missing signature for ({fid!r}, {k})")

    def metadata_bytes(self) -> bytes:
        doc = {
            "file_ids": list(self.file_ids),
            "valid_from": self.valid_from,
            "valid_until": self.valid_until,
            "privileges": {f: sorted(p.value for p in ps) for f, ps in self.privileges.items()},
            "epochs": sorted([f, k.value, e] for (f, k), e in self.epochs.items()),
            "pk_ref": self.pk_ref.hex(),
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()


@dataclass(frozen=True)
class MaskedCert:
    dr_id: str
    masked_signatures: Mapping[SigKey, GTElement]
    sealed_metadata: bytes


@dataclass(frozen=True)
class MaskValueRecord:
    dr_id: str
    t: int
    mvalue: GElement
    revoked: bool = False


@dataclass(frozen=True)
class Grant:
    privileges: frozenset[Privilege]
    valid_from: int
    valid_until: int


def _mask(pk: PublicKey, mvalue: GElement) -> GTElement:
    # e(g^theta, g^t) = e(g, g)^(theta * t)
    return pairing(pk.g_theta, mvalue)


def cergen(record: MaskValueRecord, pk: PublicKey, cert: AuthorizationCert, rng) -> MaskedCert:
    if record.revoked:
        raise RevokedUser(f"{record.dr_id} is revoked")
    mask = _mask(pk, record.mvalue)
    masked = {key: sig * mask for key, sig in cert.signatures.items()}
    sealed = dem.seal(mask, cert.metadata_bytes(), record.dr_id.encode(), rng, dem.CERT_LABEL)
    return MaskedCert(record.dr_id, masked, sealed)


def unmask_cert(mcert: MaskedCert, mvalue: GElement, pk: PublicKey) -> AuthorizationCert:
    mask = _mask(pk, mvalue)
    try:
        raw = dem.open_sealed(mask, mcert.sealed_metadata, mcert.dr_id.encode(), dem.CERT_LABEL)
    except dem.InvalidTag:
        raise BadMaskValue(f"mask value does not open the certificate of {mcert.dr_id}") from None
    doc = json.loads(raw)
    privileges = {f: frozenset(Privilege(p) for p in ps) for f, ps in doc["privileges"].items()}
    wanted = {(f, k) for f, ps in privileges.items() for k in ps}
    if set(mcert.masked_signatures) != wanted:
        raise BadMaskValue("certificate signatures do not match its privilege list")
    unmask = mask.inverse()
    return AuthorizationCert(
        file_ids=tuple(doc["file_ids"]),
        valid_from=doc["valid_from"],
        valid_until=doc["valid_until"],
        signatures={key: sig * unmask for key, sig in mcert.masked_signatures.items()},
        privileges=privileges,
        pk_ref=bytes.fromhex(doc["pk_ref"]),
        epochs={(f, Privilege(k)): e for f, k, e in doc["epochs"]},
    )


class MaskValueTable:
    """Mask value records plus the grant ledger.

    Mutations are serialized by a lock; returned records are immutable.
    """

    def __init__(self):
        self.records: dict[str, MaskValueRecord] = {}
        self.grants: dict[str, dict[str, Grant]] = {}
        # every (file, privilege) ever granted, kept after grants are replaced
        self.granted_history: dict[str, set[SigKey]] = {}
        self._lock = threading.Lock()

    def __eq__(self, other) -> bool:
        if not isinstance(other, MaskValueTable):
            return NotImplemented
        return (self.records, self.grants, self.granted_history) == (
            other.records,
            other.grants,
            other.granted_history,
        )

    def get(self, dr_id: str) -> MaskValueRecord:
        try:
            return self.records[dr_id]
        except KeyError:
            raise UnknownDR(f"unknown data requester {dr_id!r}") from None

    def register(self, dr_id: str, rng) -> tuple[MaskValueRecord, bool]:
        """Return (record, created).  Existing active records are returned unchanged."""
        with self._lock:
            rec = self.records.get(dr_id)
            if rec is not None:
                if rec.revoked:
                    raise RevokedUser(f"{dr_id} is revoked")
                return rec, False
            t = random_scalar(rng)
            rec = MaskValueRecord(dr_id, t, GElement.generator() ** t)
            self.records[dr_id] = rec
            return rec, True

    def grant(self, dr_id: str, file_id: str, privileges, valid_from: int, valid_until: int) -> Grant:
        with self._lock:
            rec = self.records.get(dr_id)
            if rec is not None and rec.revoked:
                raise RevokedUser(f"{dr_id} is revoked")
            g = Grant(frozenset(Privilege(k) for k in privileges), int(valid_from), int(valid_until))
            if not g.privileges:
                raise ValueError("grant needs at least one privilege")
            if not g.valid_from < g.valid_until:
                raise ValueError("grant valid period must have start < end")
            self.grants.setdefault(dr_id, {})[file_id] = g
            self.granted_history.setdefault(dr_id, set()).update((file_id, k) for k in g.privileges)
            return g

    def revoke(self, dr_id: str) -> list[SigKey]:
        with self._lock:
            rec = self.get(dr_id)
            if rec.revoked:
                return []
            self.records[dr_id] = replace(rec, revoked=True)
            self.grants.pop(dr_id, None)
            return sorted(self.granted_history.get(dr_id, ()), key=lambda p: (p[0], p[1].value))


def register_dr(table: MaskValueTable, dr_id: str, rng) -> MaskValueRecord:
    return table.register(dr_id, rng)[0]


def revoke_dr(table: MaskValueTable, dr_id: str) -> list[SigKey]:
    """Mark ``dr_id`` revoked; return the (file, privilege) pairs needing rotation."""
    return table.revoke(dr_id)


def issue_cert(
    table: MaskValueTable,
    dr_id: str,
    pk: PublicKey,
    signatures: Mapping[SigKey, PrivilegeSignature],
    now: float,
) -> AuthorizationCert | None:
    """Certificate over every grant of ``dr_id`` that is live at ``now``.

    The valid period runs from the latest grant start to the earliest grant
    end among included files.  Returns None if nothing is live.
    """
    live = {
        fid: g
        for fid, g in table.grants.get(dr_id, {}).items()
        if g.valid_from <= now < g.valid_until
        and all((fid, k) in signatures for k in g.privileges)
    }
    if not live:
        return None
    fids = tuple(sorted(live))
    sigs = {(f, k): signatures[(f, k)].sig for f in fids for k in live[f].privileges}
    return AuthorizationCert(
        file_ids=fids,
        valid_from=max(g.valid_from for g in live.values()),
        valid_until=min(g.valid_until for g in live.values()),
        signatures=sigs,
        privileges={f: live[f].privileges for f in fids},
        pk_ref=pk_fingerprint(pk),
        epochs={(f, k): signatures[(f, k)].epoch for f in fids for k in live[f].privileges},
    )
