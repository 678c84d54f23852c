"""Cheap random instances of every encodable type.

Group elements are random but the objects need not be algebraically
consistent; the serialization layer does not care.
"""

from __future__ import annotations

import random

from mcabe import messages as msg
from mcabe.algebra import ORDER, GElement, GTElement, gt_generator, hash_to_group
from mcabe.certs import AuthorizationCert, MaskedCert, MaskValueRecord, MaskValueTable
from mcabe.core import (
    Ciphertext,
    MaskedMessage,
    MasterKey,
    Message,
    Privilege,
    PrivilegeSignature,
    PublicKey,
    SecretKey,
)
from mcabe.policy import AccessTree
from mcabe.state import DOState, DRCredential, TAState
from treegen import random_tree

FILE_IDS = ["f1", "f2", "report.pdf", "ñ/unicode"]


def scalar(rng):
    return rng.randrange(ORDER)


def g_el(rng):
    if rng.random() < 0.2:
        return hash_to_group(rng.choice(["a0", "a1", "a2", "doctor"]))
    return GElement.from_exponent(rng.randrange(ORDER))


def gt_el(rng):
    return gt_generator() ** rng.randrange(1, 2**40)


def privs(rng):
    return frozenset(rng.sample(list(Privilege), rng.randint(1, 3)))


def tree(rng) -> AccessTree:
    return random_tree(rng, max_depth=3, max_leaves=5)


def pk(rng):
    return PublicKey(g_el(rng), g_el(rng), gt_el(rng), g_el(rng), g_el(rng))


def mk(rng):
    return MasterKey(rng.randrange(1, ORDER), g_el(rng))


def ciphertext(rng):
    t = tree(rng)
    return Ciphertext(
        file_id=rng.choice(FILE_IDS),
        tree=t,
        components={k: gt_el(rng) for k in sorted(privs(rng))},
        C=g_el(rng),
        leaf_components={p: (g_el(rng), g_el(rng)) for p, _ in t.leaves()},
        sealed_payload=rng.randbytes(rng.randint(28, 80)),
        epoch=rng.randrange(4),
    )


def masked_message(rng):
    return MaskedMessage(rng.choice(FILE_IDS), {k: gt_el(rng) for k in sorted(privs(rng))}, scalar(rng),
                         rng.randbytes(40))


def secret_key(rng):
    attrs = frozenset(rng.sample(["a0", "a1", "a2", "a3"], rng.randint(1, 3)))
    return SecretKey(attrs, g_el(rng), {a: (g_el(rng), g_el(rng)) for a in sorted(attrs)})


def signature(rng):
    v = scalar(rng) if rng.random() < 0.5 else None
    return PrivilegeSignature(rng.choice(list(Privilege)), gt_el(rng), v, rng.randrange(3))


def message(rng):
    return Message(gt_el(rng), rng.randbytes(rng.randint(0, 50)))


def cert(rng):
    fids = tuple(sorted(set(rng.sample(FILE_IDS, rng.randint(1, 3)))))
    p = {f: privs(rng) for f in fids}
    sigs = {(f, k): gt_el(rng) for f in fids for k in sorted(p[f])}
    start = rng.randrange(2**40)
    return AuthorizationCert(fids, start, start + rng.randint(1, 2**20), sigs, p, rng.randbytes(32),
                             {key: rng.randrange(3) for key in sigs})


def mcert(rng):
    c = cert(rng)
    return MaskedCert(f"dr{rng.randrange(5)}", dict(c.signatures), rng.randbytes(60))


def record(rng):
    return MaskValueRecord(f"dr{rng.randrange(5)}", scalar(rng), g_el(rng), rng.random() < 0.3)


def table(rng):
    t = MaskValueTable()
    for i in range(rng.randint(0, 3)):
        dr = f"dr{i}"
        t.records[dr] = MaskValueRecord(dr, scalar(rng), g_el(rng))
        for f in rng.sample(FILE_IDS, rng.randint(0, 2)):
            t.grant(dr, f, privs(rng), 0, rng.randint(1, 100))
        if rng.random() < 0.3:
            t.revoke(dr)
    return t


def ta_state(rng):
    sigs = {(f, k): signature(rng) for f in rng.sample(FILE_IDS, 2) for k in sorted(privs(rng))}
    return TAState(pk(rng), mk(rng), table(rng), sigs, {f"dr{i}" for i in range(rng.randint(0, 3))})


def do_state(rng):
    files = rng.sample(FILE_IDS, rng.randint(0, 2))
    return DOState({f: message(rng) for f in files},
                   {(f, k): signature(rng) for f in files for k in sorted(privs(rng))})


def dr_credential(rng):
    return DRCredential(f"dr{rng.randrange(5)}",
                        g_el(rng) if rng.random() < 0.7 else None,
                        mcert(rng) if rng.random() < 0.7 else None)


SAMPLERS = {
    int: scalar,
    GElement: g_el,
    GTElement: gt_el,
    PublicKey: pk,
    MasterKey: mk,
    AccessTree: tree,
    Ciphertext: ciphertext,
    MaskedMessage: masked_message,
    SecretKey: secret_key,
    PrivilegeSignature: signature,
    Message: message,
    AuthorizationCert: cert,
    MaskedCert: mcert,
    MaskValueRecord: record,
    MaskValueTable: table,
    TAState: ta_state,
    DOState: do_state,
    DRCredential: dr_credential,
    msg.OutsourceJob: lambda r: msg.OutsourceJob(scalar(r), tree(r), masked_message(r)),
    msg.StoreCiphertext: lambda r: msg.StoreCiphertext(ciphertext(r)),
    msg.SignatureRegistration: lambda r: msg.SignatureRegistration(
        r.choice(FILE_IDS), r.choice(list(Privilege)), gt_el(r), r.randrange(3)),
    msg.AccessRequest: lambda r: msg.AccessRequest(
        "dr", r.choice(FILE_IDS), r.choice(list(Privilege)), frozenset(r.sample(["a", "b", "c"], 2))),
    msg.KeyDelivery: lambda r: msg.KeyDelivery("dr", "f", r.choice(list(Privilege)), secret_key(r)),
    msg.CertDelivery: lambda r: msg.CertDelivery(
        "dr", mcert(r), g_el(r) if r.random() < 0.5 else None),
    msg.FetchCiphertext: lambda r: msg.FetchCiphertext(r.choice(FILE_IDS)),
    msg.CiphertextDelivery: lambda r: msg.CiphertextDelivery(ciphertext(r)),
    msg.PartialDecryption: lambda r: msg.PartialDecryption(
        "dr", "f", r.choice(list(Privilege)), gt_el(r), r.randbytes(30)),
    msg.RotationOrder: lambda r: msg.RotationOrder("f", r.choice(list(Privilege)), gt_el(r)),
}


def sample(cls, rng: random.Random):
    return SAMPLERS[cls](rng)
