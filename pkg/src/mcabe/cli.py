"""Command-line front end.

Workspace layout::

    pk.bin            public key
    ta_state.bin      TA: PK, MK, mask value table, grant ledger, signatures
    do_state.bin      DO: messages and signatures
    store/            SSP ciphertexts, one file per file id
    dr/<hex id>.cred  DR: mask value and latest masked certificate
    transcript.jsonl  every protocol message delivered so far

Errors go to stderr as one JSON line; the exit code identifies the class.
"""

from __future__ import annotations

import argparse
import json
import random
import shutil
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

from . import bench
from .actors import Harness, SecretsLedger, Transcript, collusion_audit
from .core import Privilege
from .errors import MCABEError, WorkspaceError

AUDIT_VIOLATION_EXIT = 18


def _rng(seed):
    return random.SystemRandom() if seed is None else random.Random(seed)


def _timestamp(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        pass
    try:
        dt = datetime.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a unix time or ISO-8601 date: {text!r}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def _csv_list(text: str) -> list[str]:
    return [p.strip() for p in text.split(",") if p.strip()]


class _Session:
    """Load the workspace, run a command, persist state and new transcript lines."""

    def __init__(self, args):
        self.ws = Path(args.workspace)
        self.clock = (lambda: args.now) if args.now is not None else time.time
        tpath = self.ws / "transcript.jsonl"
        transcript = Transcript.from_jsonl(tpath.read_text()) if tpath.exists() else Transcript()
        self.h = Harness.load(self.ws, _rng(args.seed), self.clock)
        self.h.bus.transcript = transcript
        self.start = len(transcript)

    def close(self):
        self.h.save(self.ws)
        new = self.h.transcript.to_jsonl(self.start)
        if new:
            with open(self.ws / "transcript.jsonl", "a") as fh:
                fh.write(new)


def _emit(obj):
    print(json.dumps(obj, sort_keys=True))


def cmd_setup(args):
    ws = Path(args.workspace)
    if (ws / "ta_state.bin").exists() and not args.force:
        raise WorkspaceError(f"workspace {ws} already initialized; use --force to replace it")
    if args.force:
        for name in ("store", "dr"):
            shutil.rmtree(ws / name, ignore_errors=True)
        for name in ("pk.bin", "ta_state.bin", "do_state.bin", "transcript.jsonl"):
            (ws / name).unlink(missing_ok=True)
    ws.mkdir(parents=True, exist_ok=True)
    h = Harness.create(_rng(args.seed), ws / "store")
    h.save(ws)
    (ws / "transcript.jsonl").touch()
    _emit({"workspace": str(ws), "pk": str(ws / "pk.bin")})


def cmd_register(args):
    s = _Session(args)
    created = args.dr not in s.h.ta.table.records
    s.h.register(args.dr)
    s.close()
    _emit({"dr": args.dr, "created": created})


def cmd_encrypt(args):
    if args.policy_file:
        policy = Path(args.policy_file).read_text()
    elif args.policy:
        policy = args.policy
    else:
        raise argparse.ArgumentTypeError("one of --policy or --policy-file is required")
    src = Path(args.file)
    file_id = args.id or src.name
    s = _Session(args)
    ct = s.h.flow_outsource(file_id, src.read_bytes(), policy, Privilege.parse_list(args.privileges))
    s.close()
    _emit({"file_id": file_id, "policy": str(ct.tree), "privileges": sorted(ct.components)})


def cmd_grant(args):
    s = _Session(args)
    g = s.h.grant(args.dr, args.file, Privilege.parse_list(args.privileges), args.valid_until,
                  args.valid_from)
    s.close()
    _emit({"dr": args.dr, "file_id": args.file, "privileges": sorted(g.privileges),
           "valid_from": g.valid_from, "valid_until": g.valid_until})


def cmd_request(args):
    s = _Session(args)
    try:
        (k,) = Privilege.parse_list(args.privilege) or (None,)
        payload = s.h.flow_request(args.dr, args.file, k, _csv_list(args.attrs))
    finally:
        # messages that did move before a refusal stay on record
        s.close()
    Path(args.out).write_bytes(payload)
    _emit({"dr": args.dr, "file_id": args.file, "out": args.out, "bytes": len(payload)})


def cmd_revoke(args):
    s = _Session(args)
    work = s.h.flow_revoke(args.dr)
    s.close()
    _emit({"dr": args.dr, "rotated": [[f, str(k)] for f, k in work]})


def workspace_ledger(h: Harness) -> SecretsLedger:
    """Rebuild the audit's secret list from what TA and DO hold on disk."""
    led = SecretsLedger()
    led.add_scalar("beta", h.ta.mk.beta, "TA")
    for dr_id, rec in h.ta.table.records.items():
        led.add_scalar(f"t[{dr_id}]", rec.t, "TA")
    for (fid, k), sig in h.do.signatures.items():
        led.signatures.setdefault((fid, k), []).append(sig)
        led.add_scalar(f"v[{fid},{k}]", sig.v, "DO")
        led.add(f"sig[{fid},{k}]", sig.sig.to_bytes(), "DO", "TA")
    for (fid, k), sig in h.ta.signatures.items():
        if sig.v is not None:
            led.signatures.setdefault((fid, k), []).append(sig)
            led.add_scalar(f"v[{fid},{k}]@{sig.epoch}", sig.v, "TA")
            led.add(f"sig[{fid},{k}]@{sig.epoch}", sig.sig.to_bytes(), "TA")
    for fid, m in h.do.messages.items():
        led.messages[fid] = m
        led.add(f"m[{fid}]", m.m.to_bytes(), "DO")
        led.add(f"payload[{fid}]", m.payload, "DO")
    return led


def cmd_audit(args):
    s = _Session(args)
    colluders = _csv_list(args.colluders)
    report = collusion_audit(s.h.transcript, colluders, workspace_ledger(s.h), s.h.pk)
    _emit(report.to_dict())
    if not report.ok:
        return AUDIT_VIOLATION_EXIT
    return 0


def cmd_bench(args):
    ops = [args.only] if args.only else _csv_list(args.ops)
    counts = [int(c) for c in _csv_list(args.counts)]
    seed = 0 if args.seed is None else args.seed
    results = bench.bench_suite(ops, counts, args.samples, seed=seed)
    text = bench.to_csv(results)
    if args.csv:
        Path(args.csv).write_text(text)
    else:
        sys.stdout.write(text)
    if args.gnuplot:
        Path(args.gnuplot).write_text(bench.to_gnuplot(results))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mcabe", description="Outsourced CP-ABE with revocable privileges")
    p.add_argument("--workspace", default="mcabe-workspace", help="workspace directory")
    p.add_argument("--seed", type=int, default=None, help="deterministic randomness")
    p.add_argument("--now", type=_timestamp, default=None, help="override the clock (unix time or ISO-8601)")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("setup", help="create keys and TA state")
    c.add_argument("--force", action="store_true", help="replace an existing workspace")
    c.set_defaults(func=cmd_setup)

    c = sub.add_parser("register-dr", help="add a data requester to the mask value table")
    c.add_argument("--dr", required=True)
    c.set_defaults(func=cmd_register)

    c = sub.add_parser("encrypt", help="outsource a file under a policy")
    c.add_argument("--file", required=True, help="payload file")
    c.add_argument("--policy", help="policy text, e.g. 'a AND (b OR c)'")
    c.add_argument("--policy-file")
    c.add_argument("--privileges", required=True, help="comma list from read,modify,delete")
    c.add_argument("--id", help="file id (default: file name)")
    c.set_defaults(func=cmd_encrypt)

    c = sub.add_parser("grant", help="grant privileges on a file to a DR")
    c.add_argument("--dr", required=True)
    c.add_argument("--file", required=True, help="file id")
    c.add_argument("--privileges", required=True)
    c.add_argument("--valid-until", required=True, type=_timestamp)
    c.add_argument("--valid-from", type=_timestamp, default=None)
    c.set_defaults(func=cmd_grant)

    c = sub.add_parser("request", help="run the data request flow")
    c.add_argument("--dr", required=True)
    c.add_argument("--file", required=True, help="file id")
    c.add_argument("--privilege", required=True)
    c.add_argument("--attrs", required=True, help="comma list of attributes")
    c.add_argument("--out", required=True, help="where to write the payload")
    c.set_defaults(func=cmd_request)

    c = sub.add_parser("revoke", help="revoke a DR and rotate affected signatures")
    c.add_argument("--dr", required=True)
    c.set_defaults(func=cmd_revoke)

    c = sub.add_parser("audit", help="collusion audit over the recorded transcript")
    c.add_argument("--colluders", required=True, help="comma list, e.g. ESP,DSP or DR:alice")
    c.set_defaults(func=cmd_audit)

    c = sub.add_parser("bench", help="timing table as CSV")
    c.add_argument("--ops", default="keygen")
    c.add_argument("--only", choices=bench.OPERATIONS, help="a single operation")
    c.add_argument("--counts", default="10,15,20,25,30,35,40,45,50")
    c.add_argument("--samples", type=int, default=bench.MIN_SAMPLES)
    c.add_argument("--csv")
    c.add_argument("--gnuplot")
    c.set_defaults(func=cmd_bench)
    return p


def _diagnostic(exc: BaseException, code: int) -> str:
    return json.dumps({"error": type(exc).__name__, "exit_code": code, "message": str(exc)})


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        rc = args.func(args)
    except MCABEError as exc:
        print(_diagnostic(exc, exc.exit_code), file=sys.stderr)
        return exc.exit_code
    except (argparse.ArgumentTypeError, ValueError, OSError) as exc:
        print(_diagnostic(exc, 2), file=sys.stderr)
        return 2
    return rc or 0


if __name__ == "__main__":
    sys.exit(main())
