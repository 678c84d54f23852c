import random
import threading

import pytest

from mcabe import core, wire
from mcabe.actors import Harness, Transcript, collusion_audit, dr_role, residual_factor
from mcabe.algebra import gt_generator, scalar_to_bytes
from mcabe.core import Privilege
from mcabe.errors import (
    DuplicateFile,
    Expired,
    NotSatisfied,
    PrivilegeDenied,
    RevokedUser,
    StaleSignature,
    UnknownDR,
    UnknownFile,
    UnknownPrivilege,
    WorkspaceError,
)
from mcabe.policy import check_satisfy
from treegen import random_attrs, random_tree

READ, MODIFY = Privilege.READ, Privilege.MODIFY
UNTIL = 2_000_000


def _setup_two_drs(h, policy="doctor AND cardiology", privileges=("read", "modify")):
    h.flow_outsource("rec1", b"patient record", policy, privileges)
    for dr in ("alice", "bob"):
        h.register(dr)
        h.grant(dr, "rec1", privileges, UNTIL)


def _types(transcript, start=0):
    return [(e.sender, e.receiver, e.type) for e in list(transcript)[start:]]


def test_outsource_then_request(harness):
    _setup_two_drs(harness)
    got = harness.flow_request("alice", "rec1", "read", {"doctor", "cardiology"})
    assert got == b"patient record"
    assert _types(harness.transcript)[:5] == [
        ("DO", "ESP", "OutsourceJob"),
        ("ESP", "SSP", "StoreCiphertext"),
        ("DO", "TA", "SignatureRegistration"),
        ("DO", "TA", "SignatureRegistration"),
        ("DR:alice", "TA", "AccessRequest"),
    ]
    assert _types(harness.transcript)[5:] == [
        ("TA", "DSP", "KeyDelivery"),
        ("TA", "DR:alice", "CertDelivery"),
        ("DSP", "SSP", "FetchCiphertext"),
        ("SSP", "DSP", "CiphertextDelivery"),
        ("DSP", "DR:alice", "PartialDecryption"),
    ]


def test_session_scalar_only_on_do_to_esp(harness):
    _setup_two_drs(harness)
    harness.flow_request("alice", "rec1", "read", {"doctor", "cardiology"})
    s_bytes = scalar_to_bytes(harness.ledger.s_values["rec1"])
    legs = [(e.sender, e.receiver) for e in harness.transcript if s_bytes in e.data]
    assert legs == [("DO", "ESP")]


def test_mvalue_sent_once(harness):
    _setup_two_drs(harness)
    for _ in range(2):
        harness.flow_request("alice", "rec1", "read", {"doctor", "cardiology"})
    deliveries = [wire.decode(e.data) for e in harness.transcript if e.type == "CertDelivery"]
    assert [d.mvalue is not None for d in deliveries] == [True, False]


def test_no_secret_in_any_transcript_leg(harness):
    _setup_two_drs(harness)
    harness.flow_request("alice", "rec1", "read", {"doctor", "cardiology"})
    harness.flow_request("bob", "rec1", "modify", {"doctor", "cardiology"})
    harness.flow_revoke("alice")
    harness.flow_request("bob", "rec1", "read", {"doctor", "cardiology"})
    trap = harness.ledger.trapdoor
    secrets = [trap.alpha, trap.beta, trap.eps, trap.theta]
    secrets += [rec.t for rec in harness.ta.table.records.values()]
    secrets += [s.v for hist in harness.ledger.signatures.values() for s in hist]
    blobs = [scalar_to_bytes(x) for x in secrets]
    for e in harness.transcript:
        for b in blobs:
            assert b not in e.data, (e.sender, e.receiver, e.type)
    m = harness.ledger.messages["rec1"]
    for e in harness.transcript:
        assert m.m.to_bytes() not in e.data
        assert m.payload not in e.data
    # raw signatures only on the DO->TA registration leg
    for hist in harness.ledger.signatures.values():
        for s in hist:
            legs = {(e.sender, e.receiver) for e in harness.transcript if s.sig.to_bytes() in e.data}
            assert legs <= {("DO", "TA")}


def test_revoked_dr_refused_before_key_material(harness):
    _setup_two_drs(harness)
    harness.flow_revoke("alice")
    start = len(harness.transcript)
    with pytest.raises(RevokedUser):
        harness.flow_request("alice", "rec1", "read", {"doctor", "cardiology"})
    assert _types(harness.transcript, start) == [("DR:alice", "TA", "AccessRequest")]


def test_not_satisfied_reaches_dr_with_nothing(harness):
    _setup_two_drs(harness)
    start = len(harness.transcript)
    with pytest.raises(NotSatisfied):
        harness.flow_request("alice", "rec1", "read", {"doctor"})
    kinds = [t for _, _, t in _types(harness.transcript, start)]
    assert "PartialDecryption" not in kinds


def test_refusals(harness):
    _setup_two_drs(harness, privileges=("read",))
    harness.register("carol")
    with pytest.raises(PrivilegeDenied):
        harness.flow_request("carol", "rec1", "read", {"doctor", "cardiology"})
    with pytest.raises(UnknownPrivilege):
        harness.flow_request("alice", "rec1", "modify", {"doctor", "cardiology"})
    with pytest.raises(UnknownFile):
        harness.flow_request("alice", "nope", "read", {"doctor"})
    with pytest.raises(UnknownDR):
        harness.flow_request("mallory", "rec1", "read", {"doctor"})
    with pytest.raises(UnknownFile):
        harness.grant("alice", "nope", ["read"], UNTIL)
    with pytest.raises(UnknownPrivilege):
        harness.grant("alice", "rec1", ["delete"], UNTIL)
    with pytest.raises(UnknownDR):
        harness.grant("mallory", "rec1", ["read"], UNTIL)
    with pytest.raises(DuplicateFile):
        harness.flow_outsource("rec1", b"x", "a", ["read"])


def test_expired_grant(harness):
    _setup_two_drs(harness)
    harness.test_clock["now"] = UNTIL
    with pytest.raises(Expired):
        harness.flow_request("alice", "rec1", "read", {"doctor", "cardiology"})


def test_revocation_flow(harness):
    _setup_two_drs(harness)
    cond = {"doctor", "cardiology"}
    assert harness.flow_request("alice", "rec1", "read", cond) == b"patient record"
    assert harness.flow_request("bob", "rec1", "read", cond) == b"patient record"
    old_sk = wire.decode(
        [e for e in harness.transcript if e.type == "KeyDelivery"][0].data).sk
    old_sig = harness.ta.signatures[("rec1", READ)].sig

    work = harness.flow_revoke("alice")
    assert work == [("rec1", MODIFY), ("rec1", READ)]
    assert harness.store.fetch("rec1").epoch == 2

    with pytest.raises(RevokedUser):
        harness.flow_request("alice", "rec1", "read", cond)
    with pytest.raises(StaleSignature):
        harness.replay_stale("alice", "rec1", "read", old_sk)
    # refreshed certificate for the remaining DR
    assert harness.flow_request("bob", "rec1", "read", cond) == b"patient record"
    assert harness.flow_request("bob", "rec1", "modify", cond) == b"patient record"

    ct = harness.store.fetch("rec1")
    masked = core.decrypt_dsp(old_sk, ct, READ)
    m = harness.ledger.messages["rec1"].m
    hist = harness.ledger.signatures[("rec1", READ)]
    eps = harness.ledger.trapdoor.eps
    assert residual_factor(masked, old_sig, m) == gt_generator() ** (eps * (hist[-1].v - hist[0].v))
    assert harness.flow_revoke("alice") == []


def test_transcript_deterministic_under_seed(tmp_path):
    def run(d):
        h = Harness.create(random.Random(99), d, clock=lambda: 1_000_000)
        _setup_two_drs(h)
        h.flow_request("alice", "rec1", "read", {"doctor", "cardiology"})
        h.flow_revoke("bob")
        return h.transcript.to_jsonl()

    assert run(tmp_path / "a") == run(tmp_path / "b")


def test_transcript_jsonl_roundtrip(harness):
    _setup_two_drs(harness)
    harness.flow_request("alice", "rec1", "read", {"doctor", "cardiology"})
    text = harness.transcript.to_jsonl()
    back = Transcript.from_jsonl(text)
    assert list(back) == list(harness.transcript)
    assert back.to_jsonl() == text
    assert harness.transcript.to_jsonl(3) == "".join(text.splitlines(True)[3:])


def test_transcript_append_only(harness):
    _setup_two_drs(harness)
    before = list(harness.transcript)
    harness.flow_request("alice", "rec1", "read", {"doctor", "cardiology"})
    after = list(harness.transcript)
    assert after[: len(before)] == before
    assert [e.seq for e in after] == list(range(len(after)))


def test_audit_esp_dsp(harness):
    _setup_two_drs(harness)
    harness.flow_request("alice", "rec1", "read", {"doctor", "cardiology"})
    report = collusion_audit(harness.transcript, {"ESP", "DSP"}, harness.ledger, harness.pk)
    assert report.ok, report.violations
    assert report.derivable and all("m*sig" in d for d in report.derivable)
    assert any(d.startswith("ESP") for d in report.derivable)
    assert any(d.startswith("DSP") for d in report.derivable)


def test_audit_with_authorized_dr_is_by_design(harness):
    _setup_two_drs(harness)
    harness.flow_request("alice", "rec1", "read", {"doctor", "cardiology"})
    report = collusion_audit(harness.transcript, {"ESP", "DSP", dr_role("alice")}, harness.ledger,
                             harness.pk)
    assert report.ok
    assert any("alice" in b for b in report.by_design)


def test_audit_ssp_sees_only_ciphertext_traffic(harness):
    _setup_two_drs(harness)
    harness.flow_request("alice", "rec1", "read", {"doctor", "cardiology"})
    harness.flow_revoke("alice")
    report = collusion_audit(harness.transcript, {"SSP"}, harness.ledger, harness.pk)
    assert report.ok
    assert set(report.types_seen) <= {"StoreCiphertext", "FetchCiphertext", "RotationOrder"}


def test_audit_flags_a_planted_leak(harness):
    _setup_two_drs(harness)
    m = harness.ledger.messages["rec1"].m
    harness.transcript.append("DO", "DSP", "Oops", m.to_bytes())
    report = collusion_audit(harness.transcript, {"DSP"}, harness.ledger)
    assert not report.ok
    assert any("m[rec1]" in v for v in report.violations)


def test_random_pairs_succeed_iff_satisfied(harness):
    rng = random.Random(123)
    harness.register("dr")
    outcomes = []
    for i in range(12):
        tree = random_tree(rng, max_leaves=5)
        payload = rng.randbytes(rng.randint(0, 512))
        fid = f"f{i}"
        harness.flow_outsource(fid, payload, str(tree), ["read"])
        harness.grant("dr", fid, ["read"], UNTIL)
        attrs = random_attrs(rng) or {"a0"}
        ok = check_satisfy(tree, attrs) is not None
        try:
            got = harness.flow_request("dr", fid, "read", attrs)
            assert ok and got == payload
        except NotSatisfied:
            assert not ok
        outcomes.append(ok)
    assert any(outcomes) and not all(outcomes)


def test_concurrent_requests_on_distinct_files(harness):
    for i in range(3):
        harness.flow_outsource(f"f{i}", f"payload {i}".encode(), "a", ["read"])
    for i in range(3):
        harness.register(f"d{i}")
        harness.grant(f"d{i}", f"f{i}", ["read"], UNTIL)
    results, errors = {}, []

    def go(i):
        try:
            results[i] = harness.flow_request(f"d{i}", f"f{i}", "read", {"a"})
        except Exception as exc:  # pragma: no cover - surfaced below
            errors.append(exc)

    threads = [threading.Thread(target=go, args=(i,)) for i in range(3)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    assert results == {i: f"payload {i}".encode() for i in range(3)}


def test_save_and_load(harness, tmp_path):
    _setup_two_drs(harness)
    harness.flow_request("alice", "rec1", "read", {"doctor", "cardiology"})
    ws = tmp_path / "ws"
    harness.save(ws)
    loaded = Harness.load(ws, random.Random(1), clock=lambda: 1_000_000)
    assert loaded.ta.table == harness.ta.table
    assert loaded.ta.signatures == harness.ta.signatures
    assert loaded.ta.mvalue_sent == {"alice"}
    assert loaded.do.messages == harness.do.messages
    assert loaded.drs["alice"] == harness.drs["alice"]
    with pytest.raises(WorkspaceError):
        Harness.load(tmp_path / "empty", random.Random(1))
