import csv
import io
import json
import subprocess
import sys

import pytest

from mcabe import cli, wire
from mcabe.actors import Transcript
from mcabe.errors import (
    DuplicateFile,
    Expired,
    NotSatisfied,
    PolicySyntaxError,
    PrivilegeDenied,
    RevokedUser,
    UnknownDR,
    WorkspaceError,
)
from mcabe.state import DOState

NOW = "2030-01-01T00:00:00"
LATER = "2031-01-01"


class Runner:
    def __init__(self, ws, capsys):
        self.ws = ws
        self.capsys = capsys

    def __call__(self, *args, seed=None, now=NOW):
        argv = ["--workspace", str(self.ws)]
        if seed is not None:
            argv += ["--seed", str(seed)]
        if now is not None:
            argv += ["--now", now]
        rc = cli.main(argv + [str(a) for a in args])
        out, err = self.capsys.readouterr()
        return rc, out, err


@pytest.fixture
def run(tmp_path, capsys):
    return Runner(tmp_path / "ws", capsys)


@pytest.fixture
def populated(run, tmp_path):
    payload = tmp_path / "scan.bin"
    payload.write_bytes(bytes(range(256)) * 40)
    assert run("setup", seed=1)[0] == 0
    for dr in ("alice", "bob"):
        assert run("register-dr", "--dr", dr, seed=2)[0] == 0
    rc, out, _ = run("encrypt", "--file", payload, "--policy", "doctor AND (cardio OR radio)",
                     "--privileges", "read,modify", "--id", "scan", seed=3)
    assert rc == 0, out
    for dr in ("alice", "bob"):
        assert run("grant", "--dr", dr, "--file", "scan", "--privileges", "read",
                   "--valid-until", LATER)[0] == 0
    return payload


def _error(err):
    return json.loads(err.strip().splitlines()[-1])


def test_setup_and_guard(run):
    rc, out, _ = run("setup")
    assert rc == 0
    assert (run.ws / "pk.bin").exists() and (run.ws / "ta_state.bin").exists()
    assert json.loads(out)["pk"].endswith("pk.bin")
    rc, _, err = run("setup")
    assert rc == WorkspaceError.exit_code
    assert _error(err)["error"] == "WorkspaceError"
    assert run("setup", "--force")[0] == 0


def test_uninitialized_workspace(run):
    rc, _, err = run("register-dr", "--dr", "x")
    assert rc == WorkspaceError.exit_code
    assert _error(err)["exit_code"] == WorkspaceError.exit_code


def test_request_roundtrip(run, populated, tmp_path):
    out_file = tmp_path / "out.bin"
    rc, out, err = run("request", "--dr", "alice", "--file", "scan", "--privilege", "read",
                       "--attrs", "doctor,radio", "--out", out_file)
    assert rc == 0, err
    assert out_file.read_bytes() == populated.read_bytes()
    assert json.loads(out)["bytes"] == len(populated.read_bytes())


def test_request_errors(run, populated, tmp_path):
    out_file = tmp_path / "o"
    base = ["request", "--file", "scan", "--out", out_file]
    rc, _, err = run(*base, "--dr", "alice", "--privilege", "read", "--attrs", "doctor")
    assert rc == NotSatisfied.exit_code and _error(err)["error"] == "NotSatisfied"
    rc, _, _ = run(*base, "--dr", "alice", "--privilege", "modify", "--attrs", "doctor,cardio")
    assert rc == PrivilegeDenied.exit_code
    rc, _, _ = run(*base, "--dr", "alice", "--privilege", "read", "--attrs", "doctor,cardio",
                   now="2032-01-01")
    assert rc == Expired.exit_code
    rc, _, _ = run(*base, "--dr", "ghost", "--privilege", "read", "--attrs", "doctor,cardio")
    assert rc == UnknownDR.exit_code
    assert not out_file.exists()


def test_revoke_then_request(run, populated, tmp_path):
    rc, out, _ = run("revoke", "--dr", "alice", seed=4)
    assert rc == 0
    assert json.loads(out)["rotated"] == [["scan", "read"]]
    rc, _, err = run("request", "--dr", "alice", "--file", "scan", "--privilege", "read",
                     "--attrs", "doctor,cardio", "--out", tmp_path / "o")
    assert rc == RevokedUser.exit_code and _error(err)["error"] == "RevokedUser"
    rc, _, _ = run("request", "--dr", "bob", "--file", "scan", "--privilege", "read",
                   "--attrs", "doctor,cardio", "--out", tmp_path / "b")
    assert rc == 0
    assert (tmp_path / "b").read_bytes() == populated.read_bytes()
    assert run("register-dr", "--dr", "alice")[0] == RevokedUser.exit_code


def test_policy_file_and_errors(run, tmp_path):
    run("setup")
    payload = tmp_path / "p.txt"
    payload.write_text("hi")
    pol = tmp_path / "policy.txt"
    pol.write_text("THRESH(2; a, b, c)\n")
    rc, out, _ = run("encrypt", "--file", payload, "--policy-file", pol, "--privileges", "delete")
    assert rc == 0
    assert json.loads(out) == {"file_id": "p.txt", "policy": "THRESH(2; a, b, c)",
                               "privileges": ["delete"]}
    rc, _, _ = run("encrypt", "--file", payload, "--policy", "a", "--privileges", "read")
    assert rc == DuplicateFile.exit_code
    rc, _, err = run("encrypt", "--file", payload, "--policy", "a AND", "--privileges", "read",
                     "--id", "x")
    assert rc == PolicySyntaxError.exit_code
    assert "position" in _error(err)["message"]
    rc, _, _ = run("encrypt", "--file", payload, "--privileges", "read", "--id", "y")
    assert rc == 2
    rc, _, _ = run("encrypt", "--file", tmp_path / "missing", "--policy", "a",
                   "--privileges", "read", "--id", "z")
    assert rc == 2


def test_grant_bad_date(run):
    run("setup")
    with pytest.raises(SystemExit):
        run("grant", "--dr", "a", "--file", "f", "--privileges", "read", "--valid-until", "tomorrow")


def test_audit_clean_and_violation(run, populated, tmp_path):
    run("request", "--dr", "alice", "--file", "scan", "--privilege", "read",
        "--attrs", "doctor,cardio", "--out", tmp_path / "o")
    for colluders in ("ESP,DSP", "SSP", "DR:bob"):
        rc, out, _ = run("audit", "--colluders", colluders)
        assert rc == 0, out
        assert json.loads(out)["violations"] == []
    rc, out, _ = run("audit", "--colluders", "ESP,DSP")
    assert json.loads(out)["derivable"]
    # plant m on a DSP-bound leg
    do = wire.load(run.ws / "do_state.bin", DOState)
    leak = Transcript()
    leak.append("DO", "DSP", "Leak", do.messages["scan"].m.to_bytes())
    with open(run.ws / "transcript.jsonl", "a") as fh:
        fh.write(leak.to_jsonl())
    rc, out, _ = run("audit", "--colluders", "DSP")
    assert rc == cli.AUDIT_VIOLATION_EXIT
    assert json.loads(out)["violations"]


def test_transcript_persisted_across_commands(run, populated, tmp_path):
    run("request", "--dr", "alice", "--file", "scan", "--privilege", "read",
        "--attrs", "doctor,cardio", "--out", tmp_path / "o")
    t = Transcript.from_jsonl((run.ws / "transcript.jsonl").read_text())
    types = [e.type for e in t]
    assert types.count("SignatureRegistration") == 2
    assert types[-1] == "PartialDecryption"
    assert [e.seq for e in t] == list(range(len(t)))


def test_seed_makes_commands_deterministic(tmp_path, capsys):
    def build(name):
        r = Runner(tmp_path / name, capsys)
        payload = tmp_path / "same.bin"
        payload.write_bytes(b"deterministic")
        r("setup", seed=7)
        r("register-dr", "--dr", "d", seed=8)
        r("encrypt", "--file", payload, "--policy", "a OR b", "--privileges", "read", seed=9)
        r("grant", "--dr", "d", "--file", "same.bin", "--privileges", "read", "--valid-until", LATER)
        r("request", "--dr", "d", "--file", "same.bin", "--privilege", "read", "--attrs", "a",
          "--out", tmp_path / f"{name}.out", seed=10)
        r("revoke", "--dr", "d", seed=11)
        return r.ws

    a, b = build("one"), build("two")
    names = sorted(p.relative_to(a).as_posix() for p in a.rglob("*") if p.is_file())
    assert names == sorted(p.relative_to(b).as_posix() for p in b.rglob("*") if p.is_file())
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes(), n


def test_bench_command(run, tmp_path):
    csv_path, gp = tmp_path / "b.csv", tmp_path / "b.dat"
    rc, _, _ = run("bench", "--only", "keygen", "--counts", "1,2", "--samples", "30",
                   "--csv", csv_path, "--gnuplot", gp, now=None)
    assert rc == 0
    rows = list(csv.DictReader(io.StringIO(csv_path.read_text())))
    assert [r["attr_count"] for r in rows] == ["1", "2"]
    assert set(rows[0]) == {"operation", "attr_count", "mean_ms", "ci_low_ms", "ci_high_ms", "samples"}
    assert gp.read_text().startswith("# keygen")
    rc, out, _ = run("bench", "--ops", "decrypt_dr", "--counts", "1", "--samples", "30", now=None)
    assert rc == 0 and out.startswith("operation,")


def test_binary_entry_point(tmp_path):
    ws = tmp_path / "ws"
    payload = tmp_path / "x"
    payload.write_bytes(b"via subprocess")

    def sh(*args):
        return subprocess.run([sys.executable, "-m", "mcabe", "--workspace", str(ws), "--seed", "1",
                               "--now", NOW, *map(str, args)], capture_output=True, text=True)

    assert sh("setup").returncode == 0
    assert sh("register-dr", "--dr", "d").returncode == 0
    assert sh("encrypt", "--file", payload, "--policy", "a", "--privileges", "read").returncode == 0
    assert sh("grant", "--dr", "d", "--file", "x", "--privileges", "read",
              "--valid-until", LATER).returncode == 0
    r = sh("request", "--dr", "d", "--file", "x", "--privilege", "read", "--attrs", "b",
           "--out", tmp_path / "o")
    assert r.returncode == NotSatisfied.exit_code
    assert json.loads(r.stderr)["error"] == "NotSatisfied"
    r = sh("request", "--dr", "d", "--file", "x", "--privilege", "read", "--attrs", "a",
           "--out", tmp_path / "o")
    assert r.returncode == 0
    assert (tmp_path / "o").read_bytes() == b"via subprocess"
