"""Canonical byte encodings and the SSP ciphertext store.

Envelope layout::

    offset 0   u8   type tag
    offset 1   u8   format version (currently 1)
    offset 2   u32  body length, big-endian
    offset 6   ...  body

Body primitives, all big-endian:

* u8 / u16 / u32 / u64 unsigned integers
* str:     u16 length + UTF-8
* bytes:   u32 length + raw
* scalar:  32 bytes
* G:       self-delimiting; tag 0x01 + 48-byte G1, or tag 0x03 + 48 + 96 bytes
* GT:      576 bytes
* privilege: u8 (1 read, 2 modify, 3 delete)
* tree:    u8 kind; leaf = str attribute; gate = u8 threshold, u8 count, children
* optional values: u8 presence flag then value
* maps and sets: u32 count, entries sorted by their encoded key bytes

Equal values always produce identical bytes.
"""

from __future__ import annotations

import os
import struct
import tempfile
import threading
from pathlib import Path as FsPath
from typing import Callable

from . import messages as msg
from .algebra import G1_BYTES, G2_BYTES, GT_BYTES, SCALAR_BYTES, GElement, GTElement
from .certs import AuthorizationCert, Grant, MaskedCert, MaskValueRecord, MaskValueTable
from .core import (
    Ciphertext,
    MaskedMessage,
    MasterKey,
    Message,
    Privilege,
    PrivilegeSignature,
    PublicKey,
    SecretKey,
    apply_delta,
)
from .errors import EncodingError, EpochRegression, UnknownFile
from .policy import AccessTree, Leaf, make_gate
from .state import DOState, DRCredential, TAState

VERSION = 1
HEADER = struct.Struct(">BBI")

_PRIV_CODE = {Privilege.READ: 1, Privilege.MODIFY: 2, Privilege.DELETE: 3}
_CODE_PRIV = {v: k for k, v in _PRIV_CODE.items()}


class Writer:
    def __init__(self):
        self.parts: list[bytes] = []

    def raw(self, b: bytes):
        self.parts.append(b)

    def u8(self, x: int):
        self.raw(struct.pack(">B", x))

    def u16(self, x: int):
        self.raw(struct.pack(">H", x))

    def u32(self, x: int):
        self.raw(struct.pack(">I", x))

    def u64(self, x: int):
        self.raw(struct.pack(">Q", x))

    def i64(self, x: int):
        self.raw(struct.pack(">q", x))

    def str(self, s: str):
        b = s.encode()
        if len(b) > 0xFFFF:
            raise EncodingError("string too long")
        self.u16(len(b))
        self.raw(b)

    def bytes(self, b: bytes):
        self.u32(len(b))
        self.raw(bytes(b))

    def scalar(self, x: int):
        self.raw(int(x).to_bytes(SCALAR_BYTES, "big"))

    def g(self, el: GElement):
        self.raw(el.to_bytes())

    def gt(self, el: GTElement):
        self.raw(el.to_bytes())

    def priv(self, k: Privilege):
        self.u8(_PRIV_CODE[Privilege(k)])

    def sorted_map(self, items, enc_key: Callable, enc_val: Callable):
        entries = []
        for key, val in items:
            kw, vw = Writer(), Writer()
            enc_key(kw, key)
            enc_val(vw, val)
            entries.append((kw.getvalue(), vw.getvalue()))
        entries.sort(key=lambda e: e[0])
        self.u32(len(entries))
        for kb, vb in entries:
            self.raw(kb)
            self.raw(vb)

    def sorted_set(self, items, enc: Callable):
        self.sorted_map(((x, None) for x in items), enc, lambda w, v: None)

    def optional(self, value, enc: Callable):
        if value is None:
            self.u8(0)
        else:
            self.u8(1)
            enc(self, value)

    def getvalue(self) -> bytes:
        return b"".join(self.parts)


class Reader:
    def __init__(self, data: bytes, check: bool = True):
        self.data = memoryview(data)
        self.pos = 0
        self.check = check

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise EncodingError("truncated input")
        out = bytes(self.data[self.pos : self.pos + n])
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack(">H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self.take(8))[0]

    def i64(self) -> int:
        return struct.unpack(">q", self.take(8))[0]

    def str(self) -> str:
        try:
            return self.take(self.u16()).decode()
        except UnicodeDecodeError:
            raise EncodingError("invalid UTF-8") from None

    def bytes(self) -> bytes:
        return self.take(self.u32())

    def scalar(self) -> int:
        from .algebra import scalar_from_bytes

        return scalar_from_bytes(self.take(SCALAR_BYTES))

    def g(self) -> GElement:
        if self.pos >= len(self.data):
            raise EncodingError("truncated input")
        n = {0x01: 1 + G1_BYTES, 0x03: 1 + G1_BYTES + G2_BYTES}.get(self.data[self.pos])
        if n is None:
            raise EncodingError(f"unknown group element tag {self.data[self.pos]:#x}")
        return GElement.from_bytes(self.take(n), check=self.check)

    def gt(self) -> GTElement:
        return GTElement.from_bytes(self.take(GT_BYTES), check=self.check)

    def priv(self) -> Privilege:
        code = self.u8()
        if code not in _CODE_PRIV:
            raise EncodingError(f"unknown privilege code {code}")
        return _CODE_PRIV[code]

    def sorted_map(self, dec_key: Callable, dec_val: Callable) -> dict:
        out = {}
        prev = None
        for _ in range(self.u32()):
            start = self.pos
            key = dec_key(self)
            kb = bytes(self.data[start : self.pos])
            if prev is not None and kb <= prev:
                raise EncodingError("map keys not in canonical order")
            prev = kb
            out[key] = dec_val(self)
        return out

    def sorted_set(self, dec: Callable) -> set:
        return set(self.sorted_map(dec, lambda r: None))

    def optional(self, dec: Callable):
        flag = self.u8()
        if flag not in (0, 1):
            raise EncodingError("bad presence flag")
        return dec(self) if flag else None

    def done(self):
        if self.pos != len(self.data):
            raise EncodingError(f"{len(self.data) - self.pos} trailing bytes")


# ---------------------------------------------------------------------------
# Per-type codecs


def _w_tree_node(w: Writer, node):
    if isinstance(node, Leaf):
        w.u8(0)
        w.str(node.attribute)
    else:
        if len(node.children) > 255:
            raise EncodingError("gate has too many children")
        w.u8(1)
        w.u8(node.threshold)
        w.u8(len(node.children))
        for c in node.children:
            _w_tree_node(w, c)


def _r_tree_node(r: Reader, depth: int = 0):
    if depth > 64:
        raise EncodingError("tree too deep")
    kind = r.u8()
    if kind == 0:
        return Leaf(r.str())
    if kind != 1:
        raise EncodingError(f"unknown tree node kind {kind}")
    k, n = r.u8(), r.u8()
    children = [_r_tree_node(r, depth + 1) for _ in range(n)]
    try:
        return make_gate(k, children)
    except ValueError as exc:
        raise EncodingError(str(exc)) from None


def _w_tree(w, t: AccessTree):
    _w_tree_node(w, t.root)


def _r_tree(r) -> AccessTree:
    root = _r_tree_node(r)
    try:
        return AccessTree(root)
    except ValueError as exc:
        raise EncodingError(str(exc)) from None


def _w_path(w, path):
    w.u8(len(path))
    for i in path:
        w.u8(i)


def _r_path(r):
    return tuple(r.u8() for _ in range(r.u8()))


def _w_sigkey(w, key):
    w.str(key[0])
    w.priv(key[1])


def _r_sigkey(r):
    return (r.str(), r.priv())


def _w_pk(w, pk: PublicKey):
    w.str(pk.group)
    for el in (pk.g, pk.h):
        w.g(el)
    w.gt(pk.e_gg_alpha)
    w.g(pk.g_eps)
    w.g(pk.g_theta)


def _r_pk(r) -> PublicKey:
    group = r.str()
    g, h = r.g(), r.g()
    e = r.gt()
    return PublicKey(g, h, e, r.g(), r.g(), group)


def _w_mk(w, mk: MasterKey):
    w.scalar(mk.beta)
    w.g(mk.g_alpha)


def _r_mk(r) -> MasterKey:
    return MasterKey(r.scalar(), r.g())


def _w_comps(w, comps):
    w.sorted_map(comps.items(), Writer.priv, Writer.gt)


def _r_comps(r):
    return r.sorted_map(Reader.priv, Reader.gt)


def _w_ct(w, ct: Ciphertext):
    w.str(ct.file_id)
    w.u64(ct.epoch)
    _w_tree(w, ct.tree)
    _w_comps(w, ct.components)
    w.g(ct.C)

    def pair(w2, v):
        w2.g(v[0])
        w2.g(v[1])

    w.sorted_map(ct.leaf_components.items(), _w_path, pair)
    w.bytes(ct.sealed_payload)


def _r_ct(r) -> Ciphertext:
    fid = r.str()
    epoch = r.u64()
    tree = _r_tree(r)
    comps = _r_comps(r)
    C = r.g()
    leaves = r.sorted_map(_r_path, lambda r2: (r2.g(), r2.g()))
    if set(leaves) != {p for p, _ in tree.leaves()}:
        raise EncodingError("leaf components do not match the tree")
    return Ciphertext(fid, tree, comps, C, leaves, r.bytes(), epoch)


def _w_mm(w, mm: MaskedMessage):
    w.str(mm.file_id)
    _w_comps(w, mm.components)
    w.scalar(mm.s)
    w.bytes(mm.sealed_payload)


def _r_mm(r) -> MaskedMessage:
    return MaskedMessage(r.str(), _r_comps(r), r.scalar(), r.bytes())


def _w_sk(w, sk: SecretKey):
    w.g(sk.D)

    def pair(w2, v):
        w2.g(v[0])
        w2.g(v[1])

    w.sorted_map(sk.components.items(), Writer.str, pair)


def _r_sk(r) -> SecretKey:
    D = r.g()
    comps = r.sorted_map(Reader.str, lambda r2: (r2.g(), r2.g()))
    return SecretKey(frozenset(comps), D, comps)


def _w_sig(w, s: PrivilegeSignature):
    w.priv(s.privilege)
    w.gt(s.sig)
    w.optional(s.v, Writer.scalar)
    w.u64(s.epoch)


def _r_sig(r) -> PrivilegeSignature:
    return PrivilegeSignature(r.priv(), r.gt(), r.optional(Reader.scalar), r.u64())


def _w_message(w, m: Message):
    w.gt(m.m)
    w.bytes(m.payload)


def _r_message(r) -> Message:
    m = r.gt()
    try:
        return Message(m, r.bytes())
    except ValueError as exc:
        raise EncodingError(str(exc)) from None


def _w_cert(w, c: AuthorizationCert):
    w.u32(len(c.file_ids))
    for f in c.file_ids:
        w.str(f)
    w.i64(c.valid_from)
    w.i64(c.valid_until)
    w.sorted_map(c.signatures.items(), _w_sigkey, Writer.gt)
    w.sorted_map(c.privileges.items(), Writer.str, lambda w2, ps: w2.sorted_set(ps, Writer.priv))
    w.bytes(c.pk_ref)
    w.sorted_map(c.epochs.items(), _w_sigkey, Writer.u64)


def _r_cert(r) -> AuthorizationCert:
    fids = tuple(r.str() for _ in range(r.u32()))
    vf, vu = r.i64(), r.i64()
    sigs = r.sorted_map(_r_sigkey, Reader.gt)
    privs = r.sorted_map(Reader.str, lambda r2: frozenset(r2.sorted_set(Reader.priv)))
    pk_ref = r.bytes()
    epochs = r.sorted_map(_r_sigkey, Reader.u64)
    try:
        return AuthorizationCert(fids, vf, vu, sigs, privs, pk_ref, epochs)
    except ValueError as exc:
        raise EncodingError(str(exc)) from None


def _w_mcert(w, c: MaskedCert):
    w.str(c.dr_id)
    w.sorted_map(c.masked_signatures.items(), _w_sigkey, Writer.gt)
    w.bytes(c.sealed_metadata)


def _r_mcert(r) -> MaskedCert:
    return MaskedCert(r.str(), r.sorted_map(_r_sigkey, Reader.gt), r.bytes())


def _w_record(w, rec: MaskValueRecord):
    w.str(rec.dr_id)
    w.scalar(rec.t)
    w.g(rec.mvalue)
    w.u8(int(rec.revoked))


def _r_record(r) -> MaskValueRecord:
    dr, t, mv, rev = r.str(), r.scalar(), r.g(), r.u8()
    if rev not in (0, 1):
        raise EncodingError("bad revoked flag")
    return MaskValueRecord(dr, t, mv, bool(rev))


def _w_grant(w, g: Grant):
    w.sorted_set(g.privileges, Writer.priv)
    w.i64(g.valid_from)
    w.i64(g.valid_until)


def _r_grant(r) -> Grant:
    return Grant(frozenset(r.sorted_set(Reader.priv)), r.i64(), r.i64())


def _w_table(w, t: MaskValueTable):
    w.sorted_map(t.records.items(), Writer.str, _w_record)
    w.sorted_map(
        t.grants.items(), Writer.str, lambda w2, gs: w2.sorted_map(gs.items(), Writer.str, _w_grant)
    )
    w.sorted_map(
        t.granted_history.items(), Writer.str, lambda w2, h: w2.sorted_set(h, _w_sigkey)
    )


def _r_table(r) -> MaskValueTable:
    t = MaskValueTable()
    t.records = r.sorted_map(Reader.str, _r_record)
    t.grants = r.sorted_map(Reader.str, lambda r2: r2.sorted_map(Reader.str, _r_grant))
    t.granted_history = r.sorted_map(Reader.str, lambda r2: r2.sorted_set(_r_sigkey))
    return t


def _w_ta(w, s: TAState):
    _w_pk(w, s.pk)
    _w_mk(w, s.mk)
    _w_table(w, s.table)
    w.sorted_map(s.signatures.items(), _w_sigkey, _w_sig)
    w.sorted_set(s.mvalue_sent, Writer.str)


def _r_ta(r) -> TAState:
    return TAState(
        _r_pk(r), _r_mk(r), _r_table(r), r.sorted_map(_r_sigkey, _r_sig), r.sorted_set(Reader.str)
    )


def _w_do(w, s: DOState):
    w.sorted_map(s.messages.items(), Writer.str, _w_message)
    w.sorted_map(s.signatures.items(), _w_sigkey, _w_sig)


def _r_do(r) -> DOState:
    return DOState(r.sorted_map(Reader.str, _r_message), r.sorted_map(_r_sigkey, _r_sig))


def _w_dr(w, c: DRCredential):
    w.str(c.dr_id)
    w.optional(c.mvalue, Writer.g)
    w.optional(c.mcert, _w_mcert)


def _r_dr(r) -> DRCredential:
    return DRCredential(r.str(), r.optional(Reader.g), r.optional(_r_mcert))


def _w_attrs(w, attrs):
    w.sorted_set(attrs, Writer.str)


def _r_attrs(r):
    return frozenset(r.sorted_set(Reader.str))


_CODECS: list[tuple[int, type, Callable, Callable]] = [
    (0x01, int, Writer.scalar, Reader.scalar),
    (0x02, GElement, Writer.g, Reader.g),
    (0x03, GTElement, Writer.gt, Reader.gt),
    (0x04, PublicKey, _w_pk, _r_pk),
    (0x05, MasterKey, _w_mk, _r_mk),
    (0x06, AccessTree, _w_tree, _r_tree),
    (0x07, Ciphertext, _w_ct, _r_ct),
    (0x08, MaskedMessage, _w_mm, _r_mm),
    (0x09, SecretKey, _w_sk, _r_sk),
    (0x0A, PrivilegeSignature, _w_sig, _r_sig),
    (0x0B, Message, _w_message, _r_message),
    (0x10, AuthorizationCert, _w_cert, _r_cert),
    (0x11, MaskedCert, _w_mcert, _r_mcert),
    (0x12, MaskValueRecord, _w_record, _r_record),
    (0x13, MaskValueTable, _w_table, _r_table),
    (0x20, TAState, _w_ta, _r_ta),
    (0x21, DOState, _w_do, _r_do),
    (0x22, DRCredential, _w_dr, _r_dr),
    (
        0x30,
        msg.OutsourceJob,
        lambda w, m: (w.scalar(m.s), _w_tree(w, m.tree), _w_mm(w, m.mm)),
        lambda r: msg.OutsourceJob(r.scalar(), _r_tree(r), _r_mm(r)),
    ),
    (0x31, msg.StoreCiphertext, lambda w, m: _w_ct(w, m.ct), lambda r: msg.StoreCiphertext(_r_ct(r))),
    (
        0x32,
        msg.SignatureRegistration,
        lambda w, m: (w.str(m.file_id), w.priv(m.privilege), w.gt(m.sig), w.u64(m.epoch)),
        lambda r: msg.SignatureRegistration(r.str(), r.priv(), r.gt(), r.u64()),
    ),
    (
        0x33,
        msg.AccessRequest,
        lambda w, m: (w.str(m.dr_id), w.str(m.file_id), w.priv(m.privilege), _w_attrs(w, m.attrs)),
        lambda r: msg.AccessRequest(r.str(), r.str(), r.priv(), _r_attrs(r)),
    ),
    (
        0x34,
        msg.KeyDelivery,
        lambda w, m: (w.str(m.dr_id), w.str(m.file_id), w.priv(m.privilege), _w_sk(w, m.sk)),
        lambda r: msg.KeyDelivery(r.str(), r.str(), r.priv(), _r_sk(r)),
    ),
    (
        0x35,
        msg.CertDelivery,
        lambda w, m: (w.str(m.dr_id), _w_mcert(w, m.mcert), w.optional(m.mvalue, Writer.g)),
        lambda r: msg.CertDelivery(r.str(), _r_mcert(r), r.optional(Reader.g)),
    ),
    (
        0x36,
        msg.FetchCiphertext,
        lambda w, m: w.str(m.file_id),
        lambda r: msg.FetchCiphertext(r.str()),
    ),
    (
        0x37,
        msg.CiphertextDelivery,
        lambda w, m: _w_ct(w, m.ct),
        lambda r: msg.CiphertextDelivery(_r_ct(r)),
    ),
    (
        0x38,
        msg.PartialDecryption,
        lambda w, m: (
            w.str(m.dr_id),
            w.str(m.file_id),
            w.priv(m.privilege),
            w.gt(m.masked),
            w.bytes(m.sealed_payload),
        ),
        lambda r: msg.PartialDecryption(r.str(), r.str(), r.priv(), r.gt(), r.bytes()),
    ),
    (
        0x39,
        msg.RotationOrder,
        lambda w, m: (w.str(m.file_id), w.priv(m.privilege), w.gt(m.delta)),
        lambda r: msg.RotationOrder(r.str(), r.priv(), r.gt()),
    ),
]

_BY_TYPE = {cls: (tag, enc) for tag, cls, enc, _ in _CODECS}
_BY_TAG = {tag: (cls, dec) for tag, cls, _, dec in _CODECS}


def type_tag(cls: type) -> int:
    return _BY_TYPE[cls][0]


def encode(value) -> bytes:
    """Envelope-wrapped canonical encoding of any supported value."""
    try:
        tag, enc = _BY_TYPE[type(value)]
    except KeyError:
        raise EncodingError(f"no encoding for {type(value).__name__}") from None
    w = Writer()
    enc(w, value)
    body = w.getvalue()
    return HEADER.pack(tag, VERSION, len(body)) + body


def decode(data: bytes, expected: type | None = None, check: bool = True):
    if len(data) < HEADER.size:
        raise EncodingError("truncated envelope")
    tag, version, length = HEADER.unpack_from(data)
    if version != VERSION:
        raise EncodingError(f"unsupported format version {version}")
    if tag not in _BY_TAG:
        raise EncodingError(f"unknown type tag {tag:#x}")
    cls, dec = _BY_TAG[tag]
    if expected is not None and cls is not expected:
        raise EncodingError(f"expected {expected.__name__}, found {cls.__name__}")
    if len(data) != HEADER.size + length:
        raise EncodingError("envelope length mismatch")
    r = Reader(bytes(data[HEADER.size :]), check=check)
    value = dec(r)
    r.done()
    return value


# ---------------------------------------------------------------------------
# Files


def atomic_write(path, data: bytes) -> None:
    """Write to a temp file in the same directory, fsync, then rename over ``path``."""
    path = FsPath(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix="." + path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def save(path, value) -> None:
    atomic_write(path, encode(value))


def load(path, expected: type | None = None, check: bool = True):
    return decode(FsPath(path).read_bytes(), expected, check)


class CiphertextStore:
    """One envelope file per file id under ``directory``; writes are atomic renames."""

    SUFFIX = ".ct"

    def __init__(self, directory):
        self.directory = FsPath(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, file_id: str) -> FsPath:
        # hex keeps arbitrary ids filesystem-safe
        return self.directory / (file_id.encode().hex() + self.SUFFIX)

    def file_ids(self) -> list[str]:
        return sorted(
            bytes.fromhex(p.name[: -len(self.SUFFIX)]).decode()
            for p in self.directory.glob("*" + self.SUFFIX)
        )

    def __contains__(self, file_id: str) -> bool:
        return self._path(file_id).exists()

    def store(self, ct: Ciphertext) -> None:
        with self._lock:
            path = self._path(ct.file_id)
            if path.exists():
                current = decode(path.read_bytes(), Ciphertext, check=False)
                if ct.epoch < current.epoch:
                    raise EpochRegression(
                        f"{ct.file_id!r}: epoch {ct.epoch} is older than stored {current.epoch}"
                    )
            atomic_write(path, encode(ct))

    def fetch(self, file_id: str, check: bool = True) -> Ciphertext:
        try:
            data = self._path(file_id).read_bytes()
        except FileNotFoundError:
            raise UnknownFile(f"no ciphertext for {file_id!r}") from None
        return decode(data, Ciphertext, check=check)

    def fetch_bytes(self, file_id: str) -> bytes:
        try:
            return self._path(file_id).read_bytes()
        except FileNotFoundError:
            raise UnknownFile(f"no ciphertext for {file_id!r}") from None

    def apply_rotation(self, file_id: str, k: Privilege, delta: GTElement) -> Ciphertext:
        with self._lock:
            ct = apply_delta(self.fetch(file_id, check=False), k, delta)
            atomic_write(self._path(file_id), encode(ct))
            return ct
