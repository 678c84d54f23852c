"""Timing harness for the scheme's operations versus attribute count."""

from __future__ import annotations

import contextlib
import csv
import gc
import io
import math
import random
import statistics
import tempfile
import time
from dataclasses import dataclass, field

from . import core
from .actors import Harness
from .certs import AuthorizationCert, pk_fingerprint
from .policy import AccessTree, Leaf, make_gate

OPERATIONS = ("encrypt_do", "encrypt_esp", "keygen", "decrypt_dsp", "decrypt_dr", "revoke")
CSV_COLUMNS = ["operation", "attr_count", "mean_ms", "ci_low_ms", "ci_high_ms", "samples"]
MIN_SAMPLES = 30
Z95 = statistics.NormalDist().inv_cdf(0.975)


@dataclass
class BenchResult:
    operation: str
    attr_count: int
    samples: list[float] = field(repr=False)

    def __post_init__(self):
        if len(self.samples) < MIN_SAMPLES:
            raise ValueError(f"need at least {MIN_SAMPLES} samples, got {len(self.samples)}")

    @property
    def mean(self) -> float:
        return statistics.fmean(self.samples)

    @property
    def half_width(self) -> float:
        return Z95 * statistics.stdev(self.samples) / math.sqrt(len(self.samples))

    @property
    def ci_low(self) -> float:
        return self.mean - self.half_width

    @property
    def ci_high(self) -> float:
        return self.mean + self.half_width

    def row(self) -> dict:
        return {
            "operation": self.operation,
            "attr_count": self.attr_count,
            "mean_ms": f"{self.mean:.3f}",
            "ci_low_ms": f"{self.ci_low:.3f}",
            "ci_high_ms": f"{self.ci_high:.3f}",
            "samples": len(self.samples),
        }


@dataclass
class LinearFit:
    slope: float
    intercept: float
    r2: float
    slope_ci: tuple[float, float]

    def predict(self, x: float) -> float:
        return self.intercept + self.slope * x


def linear_fit(xs, ys) -> LinearFit:
    """Least squares with a normal-approximation 95% interval on the slope."""
    xs, ys = list(map(float, xs)), list(map(float, ys))
    n = len(xs)
    if n < 3:
        raise ValueError("need at least three points")
    slope, intercept = statistics.linear_regression(xs, ys)
    mx, my = statistics.fmean(xs), statistics.fmean(ys)
    sxx = sum((x - mx) ** 2 for x in xs)
    ss_res = sum((y - (intercept + slope * x)) ** 2 for x, y in zip(xs, ys))
    ss_tot = sum((y - my) ** 2 for y in ys)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    se = math.sqrt(ss_res / (n - 2) / sxx)
    return LinearFit(slope, intercept, r2, (slope - Z95 * se, slope + Z95 * se))


def fit_samples(results: list[BenchResult]) -> LinearFit:
    """Fit over every raw sample rather than the per-count means."""
    xs, ys = [], []
    for r in results:
        xs += [r.attr_count] * len(r.samples)
        ys += r.samples
    return linear_fit(xs, ys)


def _timed(fn, prepare=None) -> float:
    """Wall time of one call in ms; like timeit, the collector is paused meanwhile."""
    if prepare is not None:
        prepare()
    enabled = gc.isenabled()
    gc.disable()
    try:
        t0 = time.perf_counter()
        fn()
        return (time.perf_counter() - t0) * 1000.0
    finally:
        if enabled:
            gc.enable()


def _run_interleaved(name, counts, samples, warmup, make_job, rng) -> list[BenchResult]:
    """Round-robin over counts in shuffled order so drift hits every count alike.

    ``make_job(n)`` returns a callable, or a (prepare, callable) pair whose
    prepare step runs untimed before every call.
    """
    jobs = {}
    for n in counts:
        job = make_job(n)
        jobs[n] = job if isinstance(job, tuple) else (None, job)
    for n in counts:
        for _ in range(warmup):
            _timed(jobs[n][1], jobs[n][0])
    times = {n: [] for n in counts}
    order = list(counts)
    for _ in range(samples):
        rng.shuffle(order)
        for n in order:
            prepare, fn = jobs[n]
            times[n].append(_timed(fn, prepare))
    return [BenchResult(name, n, times[n]) for n in counts]


def attribute_names(n: int) -> list[str]:
    return [f"attr{i:03d}" for i in range(n)]


def bench_keygen(attr_counts, samples: int = MIN_SAMPLES, seed: int = 0, warmup: int = 2):
    if not attr_counts:
        raise ValueError("attr_counts must be non-empty")
    rng = random.Random(seed)
    pk, mk = core.setup(rng)

    def make(n):
        attrs = attribute_names(n)
        return lambda: core.keygen(pk, mk, attrs, rng)

    return _run_interleaved("keygen", list(attr_counts), samples, warmup, make, rng)


def _and_tree(attrs) -> AccessTree:
    if len(attrs) == 1:
        return AccessTree(Leaf(attrs[0]))
    return AccessTree(make_gate(len(attrs), [Leaf(a) for a in attrs]))


def bench_suite(operations, attr_counts, samples: int = MIN_SAMPLES, seed: int = 0,
                warmup: int = 2, payload_size: int = 1024) -> list[BenchResult]:
    """Time each operation at each count.

    For ``revoke`` the count is the number of registered DRs, not attributes.
    """
    unknown = set(operations) - set(OPERATIONS)
    if unknown:
        raise ValueError(f"unknown operations: {sorted(unknown)}")
    rng = random.Random(seed)
    pk, mk = core.setup(rng)
    payload = rng.randbytes(payload_size)
    privileges = list(core.Privilege)
    sigs = {k: core.make_signature(pk, k, rng) for k in privileges}
    message = core.new_message(payload, rng)
    mm = core.encrypt_do(pk, message, privileges, sigs, rng, "bench")
    out = []

    for op in operations:
        if op == "keygen":
            out += bench_keygen(attr_counts, samples, seed, warmup)
            continue
        if op == "revoke":
            out += _bench_revoke(attr_counts, samples, seed, warmup)
            continue

        def make(n, op=op):
            attrs = attribute_names(n)
            tree = _and_tree(attrs)
            if op == "encrypt_do":
                return lambda: core.encrypt_do(pk, message, privileges, sigs, rng, "bench")
            if op == "encrypt_esp":
                return lambda: core.encrypt_esp(pk, mm.s, tree, mm, rng)
            ct = core.encrypt_esp(pk, mm.s, tree, mm, rng)
            sk = core.keygen(pk, mk, attrs, rng)
            if op == "decrypt_dsp":
                return lambda: core.decrypt_dsp(sk, ct, core.Privilege.READ)
            masked = core.decrypt_dsp(sk, ct, core.Privilege.READ)
            cert = AuthorizationCert(
                ("bench",), 0, 2**62, {("bench", k): sigs[k].sig for k in privileges},
                {"bench": frozenset(privileges)}, pk_fingerprint(pk),
            )
            return lambda: core.decrypt_dr(masked, cert, core.Privilege.READ, "bench",
                                           ct.sealed_payload, now=1)

        out += _run_interleaved(op, list(attr_counts), samples, warmup, make, rng)
    return out


def _bench_revoke(populations, samples, seed, warmup) -> list[BenchResult]:
    """Revocation cost against DR population size.

    Each population gets its own harness with one outsourced file granted to
    every DR.  Before each timed revocation a fresh victim holding the same
    grant is registered (untimed), so every sample rotates the same two
    signatures.
    """
    rng = random.Random(seed)
    stack = contextlib.ExitStack()
    with stack:

        def make(n):
            tmp = stack.enter_context(tempfile.TemporaryDirectory(prefix="mcabe-bench-"))
            h = Harness.create(rng, tmp, clock=lambda: 1000)
            h.flow_outsource("f", b"x" * 64, "a OR b", ["read", "modify"])
            for i in range(n):
                h.register(f"dr{i}")
                h.grant(f"dr{i}", "f", ["read"], 10**9)
            victims = iter(range(10**9))
            current = []

            def prepare():
                victim = f"victim{next(victims)}"
                h.register(victim)
                h.grant(victim, "f", ["read", "modify"], 10**9)
                current[:] = [victim]

            return prepare, lambda: h.flow_revoke(current[0])

        return _run_interleaved("revoke", list(populations), samples, warmup, make, rng)


def to_csv(results) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in results:
        w.writerow(r.row())
    return buf.getvalue()


def to_gnuplot(results) -> str:
    """One indexed block per operation: attr_count mean ci_low ci_high."""
    blocks = []
    for op in dict.fromkeys(r.operation for r in results):
        lines = [f"# {op}", "# attr_count mean_ms ci_low_ms ci_high_ms"]
        for r in results:
            if r.operation == op:
                lines.append(f"{r.attr_count} {r.mean:.3f} {r.ci_low:.3f} {r.ci_high:.3f}")
        blocks.append("\n".join(lines))
    return "\n\n\n".join(blocks) + "\n"


def cert_size_report(max_files: int = 8, seed: int = 0) -> list[tuple[int, int]]:
    """Encoded masked-certificate size against the number of granted files."""
    from . import wire

    rng = random.Random(seed)
    out = []
    with tempfile.TemporaryDirectory(prefix="mcabe-bench-") as tmp:
        h = Harness.create(rng, tmp, clock=lambda: 1000)
        h.register("dr")
        for i in range(1, max_files + 1):
            h.flow_outsource(f"f{i}", b"x", "a", ["read"])
            h.grant("dr", f"f{i}", ["read"], 10**9)
            h.flow_request("dr", f"f{i}", "read", {"a"})
            out.append((i, len(wire.encode(h.drs["dr"].mcert))))
    return out
