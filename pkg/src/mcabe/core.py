"""The scheme's algorithms: Setup, Encrypt (DO and ESP halves), KeyGen,
Decrypt (DSP and DR halves) and signature rotation for revocation.

A privilege *signature* here is the blinding value e(g,g)^(eps*v_k) that the
data owner multiplies into the plaintext; it is not a digital signature.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field, replace
from typing import Mapping

from . import dem
from .algebra import (
    GElement,
    GTElement,
    gt_generator,
    hash_to_group,
    lagrange_coeff,
    pairing,
    pairing_product,
    random_gt,
    random_scalar,
    scalar_inverse,
)
from .errors import (
    Expired,
    MissingSignature,
    NotSatisfied,
    PrivilegeDenied,
    StaleSignature,
    UnknownPrivilege,
)
from .policy import AccessTree, Leaf, Path, check_satisfy, share_secret

GROUP_NAME = "BLS12-381/mirrored"


class Privilege(str, enum.Enum):
    READ = "read"
    MODIFY = "modify"
    DELETE = "delete"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse_list(cls, text: str) -> frozenset["Privilege"]:
        out = set()
        for part in text.split(","):
            part = part.strip().lower()
            if part:
                try:
                    out.add(cls(part))
                except ValueError:
                    raise UnknownPrivilege(f"unknown privilege {part!r}") from None
        return frozenset(out)


@dataclass(frozen=True)
class PublicKey:
    g: GElement
    h: GElement
    e_gg_alpha: GTElement
    g_eps: GElement
    g_theta: GElement
    group: str = GROUP_NAME


@dataclass(frozen=True)
class MasterKey:
    beta: int
    g_alpha: GElement


@dataclass(frozen=True)
class SetupTrapdoor:
    """Every Setup exponent. Only tests and audits should ever hold this."""

    alpha: int
    beta: int
    eps: int
    theta: int


def setup_with_trapdoor(rng) -> tuple[PublicKey, MasterKey, SetupTrapdoor]:
    alpha, beta, eps, theta = (random_scalar(rng) for _ in range(4))
    g = GElement.generator()
    pk = PublicKey(
        g=g,
        h=g**beta,
        e_gg_alpha=gt_generator() ** alpha,
        g_eps=g**eps,
        g_theta=g**theta,
    )
    mk = MasterKey(beta=beta, g_alpha=g**alpha)
    return pk, mk, SetupTrapdoor(alpha, beta, eps, theta)


def setup(rng) -> tuple[PublicKey, MasterKey]:
    pk, mk, _ = setup_with_trapdoor(rng)
    return pk, mk


@dataclass(frozen=True)
class PrivilegeSignature:
    """sig = e(g^eps, g^v). ``v`` is None when the holder only knows ``sig``."""

    privilege: Privilege
    sig: GTElement
    v: int | None = None
    epoch: int = 0


def signature_from_exponent(pk: PublicKey, k: Privilege, v: int, epoch: int = 0) -> PrivilegeSignature:
    return PrivilegeSignature(Privilege(k), pairing(pk.g_eps, pk.g**v), v, epoch)


def make_signature(pk: PublicKey, k: Privilege, rng, epoch: int = 0) -> PrivilegeSignature:
    return signature_from_exponent(pk, k, random_scalar(rng), epoch)


def rotate_signature(pk: PublicKey, old: PrivilegeSignature, rng) -> tuple[PrivilegeSignature, GTElement]:
    """Fresh signature for the same privilege plus the re-masking factor sig'/sig."""
    new = make_signature(pk, old.privilege, rng, epoch=old.epoch + 1)
    return new, new.sig / old.sig


@dataclass(frozen=True)
class Message:
    """KEM value ``m`` plus the byte payload it protects."""

    m: GTElement
    payload: bytes = b""

    def __post_init__(self):
        if self.m.is_identity():
            raise ValueError("message element must not be the identity")


def new_message(payload: bytes, rng) -> Message:
    return Message(random_gt(rng), bytes(payload))


@dataclass(frozen=True)
class MaskedMessage:
    file_id: str
    components: Mapping[Privilege, GTElement]
    s: int
    sealed_payload: bytes


@dataclass(frozen=True)
class Ciphertext:
    file_id: str
    tree: AccessTree
    components: Mapping[Privilege, GTElement]
    C: GElement
    leaf_components: Mapping[Path, tuple[GElement, GElement]]
    sealed_payload: bytes
    epoch: int = 0


@dataclass(frozen=True)
class SecretKey:
    attrs: frozenset[str]
    D: GElement
    components: Mapping[str, tuple[GElement, GElement]] = field(repr=False)


def encrypt_do(
    pk: PublicKey,
    message: Message,
    privileges,
    signatures: Mapping[Privilege, PrivilegeSignature],
    rng,
    file_id: str,
) -> MaskedMessage:
    privileges = sorted(Privilege(k) for k in privileges)
    if not privileges:
        raise ValueError("privilege set K must be non-empty")
    for k in privileges:
        if k not in signatures:
            raise MissingSignature(f"no signature for privilege {k}")
    s = random_scalar(rng)
    blind = message.m * pk.e_gg_alpha**s
    components = {k: blind * signatures[k].sig for k in privileges}
    sealed = dem.seal(message.m, message.payload, file_id.encode(), rng, dem.PAYLOAD_LABEL)
    return MaskedMessage(file_id, components, s, sealed)


def encrypt_esp(pk: PublicKey, s: int, tree: AccessTree, mm: MaskedMessage, rng, epoch: int = 0) -> Ciphertext:
    shares = share_secret(tree, s, rng).shares
    leaves = {}
    for path, leaf in tree.leaves():
        q = shares[path]
        leaves[path] = (pk.g**q, hash_to_group(leaf.attribute) ** q)
    return Ciphertext(
        file_id=mm.file_id,
        tree=tree,
        components=dict(mm.components),
        C=pk.h**s,
        leaf_components=leaves,
        sealed_payload=mm.sealed_payload,
        epoch=epoch,
    )


def keygen(pk: PublicKey, mk: MasterKey, attrs, rng) -> SecretKey:
    attrs = frozenset(attrs)
    if not attrs:
        raise ValueError("attribute set must be non-empty")
    r = random_scalar(rng)
    g_r = pk.g**r
    D = (mk.g_alpha * g_r) ** scalar_inverse(mk.beta)
    comps = {}
    for j in sorted(attrs):
        r_j = random_scalar(rng)
        comps[j] = (g_r * hash_to_group(j) ** r_j, pk.g**r_j)
    return SecretKey(attrs, D, comps)


def _decrypt_node(sk: SecretKey, ct: Ciphertext, node, path: Path, selection) -> GTElement:
    if isinstance(node, Leaf):
        D_i, D2_i = sk.components[node.attribute]
        C_x, C2_x = ct.leaf_components[path]
        # e(D_i, C_x) / e(D'_i, C'_x)
        return pairing_product([(D_i, C_x), (D2_i.inverse(), C2_x)])
    chosen = selection.gates[path]
    acc = GTElement.identity()
    for i in chosen:
        F_z = _decrypt_node(sk, ct, node.children[i - 1], path + (i,), selection)
        acc = acc * F_z ** lagrange_coeff(i, chosen)
    return acc


def decrypt_dsp(sk: SecretKey, ct: Ciphertext, k: Privilege) -> GTElement:
    """Strip the attribute layer; returns m * sig_k."""
    k = Privilege(k)
    if k not in ct.components:
        raise UnknownPrivilege(f"ciphertext {ct.file_id!r} has no component for {k}")
    selection = check_satisfy(ct.tree, sk.attrs)
    if selection is None:
        raise NotSatisfied(f"attributes do not satisfy the policy of {ct.file_id!r}")
    A = _decrypt_node(sk, ct, ct.tree.root, (), selection)
    return ct.components[k] / (pairing(ct.C, sk.D) / A)


def decrypt_dr(
    masked: GTElement,
    cert,
    k: Privilege,
    file_id: str,
    sealed_payload: bytes,
    now: float | None = None,
) -> Message:
    """Remove the privilege signature and open the payload."""
    k = Privilege(k)
    now = time.time() if now is None else now
    if not cert.valid_from <= now < cert.valid_until:
        raise Expired(f"certificate valid for [{cert.valid_from}, {cert.valid_until}), now {now:.0f}")
    sig = cert.signatures.get((file_id, k))
    if sig is None:
        raise PrivilegeDenied(f"certificate grants no {k} privilege on {file_id!r}")
    m = masked / sig
    try:
        payload = dem.open_sealed(m, sealed_payload, file_id.encode(), dem.PAYLOAD_LABEL)
    except dem.InvalidTag:
        raise StaleSignature(
            f"payload of {file_id!r} failed authentication; signature for {k} is out of date"
        ) from None
    return Message(m, payload)


def apply_delta(ct: Ciphertext, k: Privilege, delta: GTElement) -> Ciphertext:
    """Re-mask one privilege component and bump the epoch."""
    k = Privilege(k)
    if k not in ct.components:
        raise UnknownPrivilege(f"ciphertext {ct.file_id!r} has no component for {k}")
    comps = dict(ct.components)
    comps[k] = comps[k] * delta
    return replace(ct, components=comps, epoch=ct.epoch + 1)
