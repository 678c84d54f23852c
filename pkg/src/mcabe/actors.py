"""In-process protocol harness.

Six roles exchange encoded messages over a synchronous bus.  Every delivery
is recorded in a transcript as the exact bytes the receiver decoded, so
audits can scan what each party actually saw.
"""

from __future__ import annotations

import base64
import json
import tempfile
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path as FsPath

from . import core, wire
from . import messages as msg
from .algebra import GTElement, scalar_to_bytes
from .certs import cergen, issue_cert, register_dr, revoke_dr, unmask_cert
from .core import Privilege
from .errors import (
    DuplicateFile,
    Expired,
    PrivilegeDenied,
    RevokedUser,
    UnknownFile,
    UnknownPrivilege,
    WorkspaceError,
)
from .policy import parse_policy
from .state import DOState, DRCredential, TAState

ROLES = ("DO", "ESP", "DSP", "SSP", "TA")


def dr_role(dr_id: str) -> str:
    return f"DR:{dr_id}"


@dataclass(frozen=True)
class TranscriptEntry:
    seq: int
    sender: str
    receiver: str
    type: str
    data: bytes


class Transcript:
    """Append-only log of delivered messages."""

    def __init__(self, entries=()):
        self._entries: list[TranscriptEntry] = list(entries)
        self._lock = threading.Lock()

    def append(self, sender: str, receiver: str, type_name: str, data: bytes) -> TranscriptEntry:
        with self._lock:
            e = TranscriptEntry(len(self._entries), sender, receiver, type_name, bytes(data))
            self._entries.append(e)
            return e

    def __iter__(self):
        return iter(list(self._entries))

    def __len__(self):
        return len(self._entries)

    def to_jsonl(self, start: int = 0) -> str:
        lines = []
        for e in self._entries[start:]:
            lines.append(
                json.dumps(
                    {
                        "seq": e.seq,
                        "sender": e.sender,
                        "receiver": e.receiver,
                        "type": e.type,
                        "data": base64.b64encode(e.data).decode(),
                    },
                    sort_keys=True,
                )
            )
        return "".join(line + "\n" for line in lines)

    @classmethod
    def from_jsonl(cls, text: str) -> "Transcript":
        entries = []
        for line in text.splitlines():
            if line.strip():
                d = json.loads(line)
                entries.append(
                    TranscriptEntry(
                        d["seq"], d["sender"], d["receiver"], d["type"], base64.b64decode(d["data"])
                    )
                )
        return cls(entries)


class Bus:
    def __init__(self, transcript: Transcript | None = None):
        self.transcript = transcript if transcript is not None else Transcript()

    def send(self, sender: str, receiver: str, message):
        data = wire.encode(message)
        self.transcript.append(sender, receiver, type(message).__name__, data)
        # receivers only ever see what came off the wire
        return wire.decode(data, type(message))


@dataclass
class Secret:
    label: str
    data: bytes
    owners: frozenset[str]


@dataclass
class SecretsLedger:
    """Test-only record of values that must never leave their owners."""

    items: list[Secret] = field(default_factory=list)
    messages: dict[str, core.Message] = field(default_factory=dict)
    signatures: dict[tuple[str, Privilege], list[core.PrivilegeSignature]] = field(
        default_factory=dict
    )
    trapdoor: core.SetupTrapdoor | None = None
    s_values: dict[str, int] = field(default_factory=dict)

    def add(self, label: str, data: bytes, *owners: str):
        self.items.append(Secret(label, bytes(data), frozenset(owners)))

    def add_scalar(self, label: str, x: int, *owners: str):
        self.add(label, scalar_to_bytes(x), *owners)


class Harness:
    """All six roles plus the bus.

    ``directory`` holds the SSP store; a temporary one is created if omitted.
    ``clock`` returns the current time in seconds.
    """

    def __init__(self, ta: TAState, do: DOState, store: wire.CiphertextStore, rng,
                 clock=time.time, drs=None, transcript=None, ledger=None):
        self.ta = ta
        self.do = do
        self.store = store
        self.rng = rng
        self.clock = clock
        self.drs: dict[str, DRCredential] = dict(drs or {})
        self.bus = Bus(transcript)
        self.ledger = ledger
        self._ta_lock = threading.Lock()
        self._tmp = None

    @property
    def pk(self) -> core.PublicKey:
        return self.ta.pk

    @property
    def transcript(self) -> Transcript:
        return self.bus.transcript

    @classmethod
    def create(cls, rng, directory=None, clock=time.time, record_secrets: bool = False):
        tmp = None
        if directory is None:
            tmp = tempfile.TemporaryDirectory(prefix="mcabe-ssp-")
            directory = tmp.name
        pk, mk, trap = core.setup_with_trapdoor(rng)
        ledger = None
        if record_secrets:
            ledger = SecretsLedger(trapdoor=trap)
            for name in ("alpha", "beta", "eps", "theta"):
                ledger.add_scalar(name, getattr(trap, name), "TA")
        h = cls(TAState(pk, mk), DOState(), wire.CiphertextStore(directory), rng, clock,
                ledger=ledger)
        h._tmp = tmp
        return h

    # -- registration and grants (TA local operations) ----------------------

    def register(self, dr_id: str):
        with self._ta_lock:
            rec = register_dr(self.ta.table, dr_id, self.rng)
        self.drs.setdefault(dr_id, DRCredential(dr_id))
        if self.ledger is not None:
            self.ledger.add_scalar(f"t[{dr_id}]", rec.t, "TA")
        return rec

    def grant(self, dr_id: str, file_id: str, privileges, valid_until: float, valid_from=None):
        privileges = frozenset(Privilege(k) for k in privileges)
        for k in privileges:
            if (file_id, k) not in self.ta.signatures:
                if not any(f == file_id for f, _ in self.ta.signatures):
                    raise UnknownFile(f"no file {file_id!r} registered with TA")
                raise UnknownPrivilege(f"file {file_id!r} has no {k} component")
        self.ta.table.get(dr_id)
        start = int(self.clock()) if valid_from is None else int(valid_from)
        with self._ta_lock:
            return self.ta.table.grant(dr_id, file_id, privileges, start, int(valid_until))

    # -- flows ---------------------------------------------------------------

    def flow_outsource(self, file_id: str, payload: bytes, policy_text: str, privileges) -> core.Ciphertext:
        privileges = sorted(frozenset(Privilege(k) for k in privileges))
        if file_id in self.store or file_id in self.do.messages:
            raise DuplicateFile(f"file {file_id!r} already outsourced")
        tree = parse_policy(policy_text)

        # DO
        message = core.new_message(payload, self.rng)
        sigs = {k: core.make_signature(self.pk, k, self.rng) for k in privileges}
        mm = core.encrypt_do(self.pk, message, privileges, sigs, self.rng, file_id)
        self.do.messages[file_id] = message
        for k, sig in sigs.items():
            self.do.signatures[(file_id, k)] = sig
        if self.ledger is not None:
            self.ledger.messages[file_id] = message
            self.ledger.add(f"m[{file_id}]", message.m.to_bytes(), "DO")
            self.ledger.add(f"payload[{file_id}]", payload, "DO")
            self.ledger.s_values[file_id] = mm.s
            self.ledger.add_scalar(f"s[{file_id}]", mm.s, "DO", "ESP")
            for k, sig in sigs.items():
                self.ledger.signatures.setdefault((file_id, k), []).append(sig)
                self.ledger.add_scalar(f"v[{file_id},{k}]", sig.v, "DO")
                self.ledger.add(f"sig[{file_id},{k}]", sig.sig.to_bytes(), "DO", "TA")

        job = self.bus.send("DO", "ESP", msg.OutsourceJob(mm.s, tree, mm))

        # ESP
        ct = core.encrypt_esp(self.pk, job.s, job.tree, job.mm, self.rng)
        stored = self.bus.send("ESP", "SSP", msg.StoreCiphertext(ct))

        # SSP
        self.store.store(stored.ct)

        # DO registers signatures (never the exponents) with TA
        for k in privileges:
            reg = self.bus.send(
                "DO", "TA", msg.SignatureRegistration(file_id, k, sigs[k].sig, sigs[k].epoch)
            )
            with self._ta_lock:
                self.ta.signatures[(reg.file_id, reg.privilege)] = core.PrivilegeSignature(
                    reg.privilege, reg.sig, None, reg.epoch
                )
        return ct

    def _ta_authorize(self, req: msg.AccessRequest, now: float):
        rec = self.ta.table.get(req.dr_id)
        if rec.revoked:
            raise RevokedUser(f"{req.dr_id} is revoked; request refused")
        if (req.file_id, req.privilege) not in self.ta.signatures:
            if not any(f == req.file_id for f, _ in self.ta.signatures):
                raise UnknownFile(f"no file {req.file_id!r} registered with TA")
            raise UnknownPrivilege(f"file {req.file_id!r} has no {req.privilege} component")
        grant = self.ta.table.grants.get(req.dr_id, {}).get(req.file_id)
        if grant is None or req.privilege not in grant.privileges:
            raise PrivilegeDenied(f"{req.dr_id} holds no {req.privilege} grant on {req.file_id!r}")
        if not grant.valid_from <= now < grant.valid_until:
            raise Expired(
                f"grant for {req.dr_id} on {req.file_id!r} valid "
                f"[{grant.valid_from}, {grant.valid_until}), now {now:.0f}"
            )
        cert = issue_cert(self.ta.table, req.dr_id, self.pk, self.ta.signatures, now)
        return rec, cert

    def flow_request(self, dr_id: str, file_id: str, k, attrs, now: float | None = None) -> bytes:
        k = Privilege(k)
        now = self.clock() if now is None else now
        req = self.bus.send(dr_role(dr_id), "TA", msg.AccessRequest(dr_id, file_id, k, frozenset(attrs)))

        # TA: refuse revoked or unauthorized requesters before any key material moves
        with self._ta_lock:
            rec, cert = self._ta_authorize(req, now)
            sk = core.keygen(self.pk, self.ta.mk, req.attrs, self.rng)
            mcert = cergen(rec, self.pk, cert, self.rng)
            first = dr_id not in self.ta.mvalue_sent
            self.ta.mvalue_sent.add(dr_id)
        kd = self.bus.send("TA", "DSP", msg.KeyDelivery(dr_id, file_id, k, sk))
        cd = self.bus.send(
            "TA", dr_role(dr_id), msg.CertDelivery(dr_id, mcert, rec.mvalue if first else None)
        )

        # DR stores its credential
        cred = self.drs.setdefault(dr_id, DRCredential(dr_id))
        if cd.mvalue is not None:
            cred.mvalue = cd.mvalue
        cred.mcert = cd.mcert

        # DSP fetches the ciphertext and strips the attribute layer
        fetch = self.bus.send("DSP", "SSP", msg.FetchCiphertext(kd.file_id))
        ct = self.store.fetch(fetch.file_id, check=False)
        delivered = self.bus.send("SSP", "DSP", msg.CiphertextDelivery(ct))
        masked = core.decrypt_dsp(kd.sk, delivered.ct, kd.privilege)
        part = self.bus.send(
            "DSP", dr_role(dr_id),
            msg.PartialDecryption(dr_id, file_id, k, masked, delivered.ct.sealed_payload),
        )

        # DR
        return self._dr_finish(cred, part, now)

    def _dr_finish(self, cred: DRCredential, part: msg.PartialDecryption, now: float) -> bytes:
        if cred.mvalue is None or cred.mcert is None:
            raise WorkspaceError(f"{cred.dr_id} holds no credential")
        cert = unmask_cert(cred.mcert, cred.mvalue, self.pk)
        m = core.decrypt_dr(part.masked, cert, part.privilege, part.file_id, part.sealed_payload, now)
        return m.payload

    def flow_revoke(self, dr_id: str) -> list[tuple[str, Privilege]]:
        with self._ta_lock:
            work = revoke_dr(self.ta.table, dr_id)
            orders = []
            for file_id, k in work:
                old = self.ta.signatures[(file_id, k)]
                new, delta = core.rotate_signature(self.pk, old, self.rng)
                self.ta.signatures[(file_id, k)] = new
                orders.append(msg.RotationOrder(file_id, k, delta))
                if self.ledger is not None:
                    self.ledger.signatures.setdefault((file_id, k), []).append(new)
                    self.ledger.add_scalar(f"v[{file_id},{k}]@{new.epoch}", new.v, "TA")
                    self.ledger.add(f"sig[{file_id},{k}]@{new.epoch}", new.sig.to_bytes(), "TA")
        for order in orders:
            got = self.bus.send("TA", "SSP", order)
            self.store.apply_rotation(got.file_id, got.privilege, got.delta)
        return work

    def replay_stale(self, dr_id: str, file_id: str, k, sk: core.SecretKey, now=None) -> bytes:
        """A DR colluding with DSP: a previously issued SK against the current
        ciphertext, finished with whatever certificate the DR still holds."""
        k = Privilege(k)
        now = self.clock() if now is None else now
        ct = self.store.fetch(file_id, check=False)
        masked = core.decrypt_dsp(sk, ct, k)
        part = msg.PartialDecryption(dr_id, file_id, k, masked, ct.sealed_payload)
        return self._dr_finish(self.drs[dr_id], part, now)

    # -- persistence ---------------------------------------------------------

    def save(self, workspace) -> None:
        ws = FsPath(workspace)
        (ws / "dr").mkdir(parents=True, exist_ok=True)
        wire.save(ws / "pk.bin", self.pk)
        wire.save(ws / "ta_state.bin", self.ta)
        wire.save(ws / "do_state.bin", self.do)
        for dr_id, cred in self.drs.items():
            wire.save(ws / "dr" / (dr_id.encode().hex() + ".cred"), cred)

    @classmethod
    def load(cls, workspace, rng, clock=time.time) -> "Harness":
        ws = FsPath(workspace)
        if not (ws / "ta_state.bin").exists():
            raise WorkspaceError(f"workspace {ws} is not initialized; run setup first")
        ta = wire.load(ws / "ta_state.bin", TAState, check=False)
        do = wire.load(ws / "do_state.bin", DOState, check=False)
        drs = {}
        for p in sorted((ws / "dr").glob("*.cred")):
            cred = wire.load(p, DRCredential, check=False)
            drs[cred.dr_id] = cred
        return cls(ta, do, wire.CiphertextStore(ws / "store"), rng, clock, drs)


# ---------------------------------------------------------------------------
# Audit


@dataclass
class AuditReport:
    colluders: frozenset[str]
    messages_seen: int
    bytes_seen: int
    types_seen: list[str]
    violations: list[str] = field(default_factory=list)
    by_design: list[str] = field(default_factory=list)
    derivable: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "colluders": sorted(self.colluders),
            "messages_seen": self.messages_seen,
            "bytes_seen": self.bytes_seen,
            "types_seen": self.types_seen,
            "violations": self.violations,
            "by_design": self.by_design,
            "derivable": self.derivable,
        }


def _matches(role: str, colluders: frozenset[str]) -> bool:
    return role in colluders or (role.startswith("DR:") and "DR" in colluders)


MIN_SCAN_BYTES = 8


def collusion_audit(transcript: Transcript, colluders, ledger: SecretsLedger, pk=None) -> AuditReport:
    """Pool everything the colluders received and look for leaked secrets.

    A secret counts as a violation when it appears in the pooled view and
    none of its owners is among the colluders.  With ``pk`` given and both
    ESP and DSP colluding, the report also records what they can compute
    from their views: m * sig_k, never m.
    """
    colluders = frozenset(colluders)
    view = [e for e in transcript if _matches(e.receiver, colluders)]
    report = AuditReport(
        colluders,
        len(view),
        sum(len(e.data) for e in view),
        sorted({e.type for e in view}),
    )
    for secret in ledger.items:
        if len(secret.data) < MIN_SCAN_BYTES:
            continue
        hits = [e for e in view if secret.data in e.data]
        if not hits:
            continue
        where = ", ".join(f"#{e.seq} {e.sender}->{e.receiver} {e.type}" for e in hits)
        if any(_matches(o, colluders) for o in secret.owners):
            report.by_design.append(f"{secret.label} seen by its owner ({where})")
        else:
            report.violations.append(f"{secret.label} leaked ({where})")

    if pk is not None:
        _derivation_audit(view, colluders, ledger, pk, report)
    return report


def _derivation_audit(view, colluders, ledger, pk, report):
    keys = {}
    cts = {}
    jobs = {}
    certs = {}
    mvalues = {}
    for e in view:
        if e.type == "KeyDelivery":
            kd = wire.decode(e.data, check=False)
            keys.setdefault(kd.file_id, []).append(kd)
        elif e.type in ("CiphertextDelivery", "StoreCiphertext"):
            ct = wire.decode(e.data, check=False).ct
            cts[ct.file_id] = ct
        elif e.type == "OutsourceJob":
            job = wire.decode(e.data, check=False)
            jobs[job.mm.file_id] = job
        elif e.type == "CertDelivery":
            cd = wire.decode(e.data, check=False)
            certs[cd.dr_id] = cd.mcert
            if cd.mvalue is not None:
                mvalues[cd.dr_id] = cd.mvalue

    for file_id, message in ledger.messages.items():
        ct = cts.get(file_id)
        for k in sorted(ct.components) if ct else ():
            history = ledger.signatures[(file_id, k)]
            targets = [message.m * sig.sig for sig in history]
            values = []
            for kd in keys.get(file_id, ()):
                try:
                    values.append(("DSP", core.decrypt_dsp(kd.sk, ct, k)))
                except Exception:
                    pass
            job = jobs.get(file_id)
            if job is not None:
                values.append(("ESP", ct.components[k] / pk.e_gg_alpha ** job.s))
            for who, val in values:
                if val == message.m:
                    report.violations.append(f"{who} view yields m for {file_id}/{k}")
                elif val in targets:
                    report.derivable.append(f"{who} view yields m*sig for {file_id}/{k}")
                else:
                    report.violations.append(f"{who} view yields an unexpected value for {file_id}/{k}")
            for dr_id, mcert in certs.items():
                if dr_id not in mvalues or not values:
                    continue
                try:
                    cert = unmask_cert(mcert, mvalues[dr_id], pk)
                except Exception:
                    continue
                held = cert.signatures.get((file_id, k))
                if held is not None and any(val / held == message.m for _, val in values):
                    report.by_design.append(
                        f"m for {file_id}/{k} derivable with the valid certificate of {dr_id}"
                    )


def residual_factor(masked: GTElement, held_sig: GTElement, m: GTElement) -> GTElement:
    """What is left on m after dividing by a (possibly stale) signature."""
    return masked / held_sig / m
