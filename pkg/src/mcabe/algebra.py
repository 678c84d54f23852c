"""Pairing-group arithmetic with a symmetric-pairing interface.

The scheme is written for a symmetric pairing e: G x G -> GT.  BLS12-381 is
asymmetric, so a :class:`GElement` keeps the same exponent applied to both
source-group generators (a *mirrored* pair ``(g1^a, g2^a)``).  Products and
powers keep the mirror in step.

Hashed elements have no known discrete log, so they can only live in G1;
such elements carry no G2 mirror.  :func:`pairing` needs the G2 side of at
least one argument, which every pairing the scheme evaluates provides.

Scalars are plain ``int`` values reduced modulo :data:`ORDER`.  The
interpolation helpers take an explicit ``order`` so they also run over
small prime fields.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Iterable, Sequence

from . import _bls
from .errors import EncodingError

ORDER = _bls.R
SCALAR_BYTES = 32
G1_BYTES = 48
G2_BYTES = 96
GT_BYTES = 576

_TAG_HALF = 0x01
_TAG_MIRRORED = 0x03


def random_scalar(rng, nonzero: bool = True) -> int:
    """Uniform element of Z_p (of Z_p* when ``nonzero``)."""
    return rng.randrange(1 if nonzero else 0, ORDER)


def scalar_inverse(x: int, order: int = ORDER) -> int:
    x %= order
    if x == 0:
        raise ZeroDivisionError("scalar 0 has no inverse")
    return pow(x, -1, order)


def scalar_to_bytes(x: int) -> bytes:
    if not 0 <= x < ORDER:
        raise ValueError("scalar out of range")
    return x.to_bytes(SCALAR_BYTES, "big")


def scalar_from_bytes(data: bytes) -> int:
    if len(data) != SCALAR_BYTES:
        raise EncodingError(f"scalar must be {SCALAR_BYTES} bytes, got {len(data)}")
    x = int.from_bytes(data, "big")
    if x >= ORDER:
        raise EncodingError("scalar not reduced modulo the group order")
    return x


def lagrange_coeff(i: int, indices: Iterable[int], order: int = ORDER) -> int:
    """Lagrange basis polynomial for ``i`` over ``indices``, evaluated at 0."""
    points = list(indices)
    if len(set(points)) != len(points):
        raise ValueError("duplicate interpolation indices")
    if i not in points:
        raise ValueError(f"index {i} not in interpolation set")
    if any(j % order == 0 for j in points):
        raise ValueError("interpolation indices must be nonzero")
    num, den = 1, 1
    for j in points:
        if j != i:
            num = num * (-j) % order
            den = den * (i - j) % order
    return num * scalar_inverse(den, order) % order


def interpolate_at_zero(shares: Sequence[tuple[int, int]], order: int = ORDER) -> int:
    """Recover q(0) from points (index, q(index))."""
    if not shares:
        raise ValueError("need at least one share")
    indices = [i for i, _ in shares]
    return sum(v * lagrange_coeff(i, indices, order) for i, v in shares) % order


class GElement:
    """Element of the source group, stored as (G1 point, G2 mirror or None)."""

    __slots__ = ("p1", "p2", "_enc")

    def __init__(self, p1, p2=None):
        self.p1 = p1
        self.p2 = p2
        self._enc = None

    @classmethod
    def generator(cls) -> "GElement":
        return _GENERATOR

    @classmethod
    def identity(cls) -> "GElement":
        return _IDENTITY

    @classmethod
    def from_exponent(cls, k: int) -> "GElement":
        """g^k using precomputed generator tables."""
        return cls(_bls.g1_gen_mul(k), _bls.g2_gen_mul(k))

    @property
    def mirrored(self) -> bool:
        return self.p2 is not None

    def is_identity(self) -> bool:
        return _bls.is_inf(self.p1)

    def __mul__(self, other: "GElement") -> "GElement":
        if not isinstance(other, GElement):
            return NotImplemented
        p2 = None
        if self.p2 is not None and other.p2 is not None:
            p2 = _bls.point_add(self.p2, other.p2)
        return GElement(_bls.point_add(self.p1, other.p1), p2)

    def inverse(self) -> "GElement":
        p2 = None if self.p2 is None else _bls.point_neg(self.p2)
        return GElement(_bls.point_neg(self.p1), p2)

    def __truediv__(self, other: "GElement") -> "GElement":
        return self * other.inverse()

    def __pow__(self, k: int) -> "GElement":
        k %= ORDER
        if self is _GENERATOR or (self._enc is not None and self._enc == _GENERATOR.to_bytes()):
            return GElement.from_exponent(k)
        p2 = None if self.p2 is None else _bls.g2_mul(self.p2, k)
        return GElement(_bls.g1_mul(self.p1, k), p2)

    def __eq__(self, other) -> bool:
        if not isinstance(other, GElement):
            return NotImplemented
        if (self.p2 is None) != (other.p2 is None):
            return False
        if not _bls.point_eq(self.p1, other.p1):
            return False
        return self.p2 is None or _bls.point_eq(self.p2, other.p2)

    def __hash__(self) -> int:
        return hash(self.to_bytes())

    def __repr__(self) -> str:
        kind = "mirrored" if self.mirrored else "G1"
        return f"GElement<{kind} {self.to_bytes()[1:9].hex()}>"

    def to_bytes(self) -> bytes:
        """Tag byte, compressed G1 (48 bytes), then compressed G2 (96 bytes) if mirrored."""
        if self._enc is None:
            if self.p2 is None:
                self._enc = bytes([_TAG_HALF]) + _bls.g1_to_bytes(self.p1)
            else:
                self._enc = (
                    bytes([_TAG_MIRRORED]) + _bls.g1_to_bytes(self.p1) + _bls.g2_to_bytes(self.p2)
                )
        return self._enc

    @classmethod
    def from_bytes(cls, data: bytes, check: bool = True) -> "GElement":
        if not data:
            raise EncodingError("empty group element encoding")
        tag = data[0]
        if tag == _TAG_HALF:
            expected = 1 + G1_BYTES
        elif tag == _TAG_MIRRORED:
            expected = 1 + G1_BYTES + G2_BYTES
        else:
            raise EncodingError(f"unknown group element tag {tag:#x}")
        if len(data) != expected:
            raise EncodingError(f"group element must be {expected} bytes, got {len(data)}")
        try:
            p1 = _bls.g1_from_bytes(data[1 : 1 + G1_BYTES])
            p2 = _bls.g2_from_bytes(data[1 + G1_BYTES :]) if tag == _TAG_MIRRORED else None
        except ValueError as exc:
            raise EncodingError(f"invalid point encoding: {exc}") from None
        if check:
            if not _bls.g1_in_subgroup(p1) or (p2 is not None and not _bls.g2_in_subgroup(p2)):
                raise EncodingError("point outside the prime-order subgroup")
        el = cls(p1, p2)
        el._enc = bytes(data)
        return el


class GTElement:
    """Element of the pairing target group (12 Fp coefficients)."""

    __slots__ = ("c", "_enc")

    def __init__(self, coeffs):
        self.c = tuple(coeffs)
        self._enc = None

    @classmethod
    def identity(cls) -> "GTElement":
        return _GT_ONE

    def is_identity(self) -> bool:
        return self.c == _bls.FP12_ONE

    def __mul__(self, other: "GTElement") -> "GTElement":
        if not isinstance(other, GTElement):
            return NotImplemented
        return GTElement(_bls.fp12_mul(self.c, other.c))

    def inverse(self) -> "GTElement":
        # GT sits inside the cyclotomic subgroup, where inversion is conjugation.
        return GTElement(_bls.fp12_conj(self.c))

    def __truediv__(self, other: "GTElement") -> "GTElement":
        return self * other.inverse()

    def __pow__(self, k: int) -> "GTElement":
        k %= ORDER
        return GTElement(_bls.fp12_pow(self.c, k))

    def __eq__(self, other) -> bool:
        if not isinstance(other, GTElement):
            return NotImplemented
        return self.c == other.c

    def __hash__(self) -> int:
        return hash(self.c)

    def __repr__(self) -> str:
        return f"GTElement<{self.to_bytes()[:8].hex()}>"

    def to_bytes(self) -> bytes:
        if self._enc is None:
            self._enc = _bls.fp12_to_bytes(self.c)
        return self._enc

    @classmethod
    def from_bytes(cls, data: bytes, check: bool = True) -> "GTElement":
        if len(data) != GT_BYTES:
            raise EncodingError(f"GT element must be {GT_BYTES} bytes, got {len(data)}")
        try:
            coeffs = _bls.fp12_from_bytes(data)
        except ValueError as exc:
            raise EncodingError(str(exc)) from None
        if check and not _bls.gt_in_subgroup(coeffs):
            raise EncodingError("value outside the pairing target group")
        el = cls(coeffs)
        el._enc = bytes(data)
        return el


_GENERATOR = GElement(_bls.G1, _bls.G2)
_IDENTITY = GElement(_bls.Z1, _bls.Z2)
_GT_ONE = GTElement(_bls.FP12_ONE)


def _orient(u: GElement, v: GElement):
    if v.p2 is not None:
        return u.p1, v.p2
    if u.p2 is not None:
        return v.p1, u.p2
    raise ValueError("pairing needs at least one mirrored argument")


def pairing(u: GElement, v: GElement) -> GTElement:
    return GTElement(_bls.multi_pairing([_orient(u, v)]))


def pairing_product(pairs: Iterable[tuple[GElement, GElement]]) -> GTElement:
    """prod e(u_i, v_i), sharing one final exponentiation."""
    return GTElement(_bls.multi_pairing([_orient(u, v) for u, v in pairs]))


@lru_cache(maxsize=None)
def _gt_generator() -> GTElement:
    return pairing(_GENERATOR, _GENERATOR)


def gt_generator() -> GTElement:
    """e(g, g)."""
    return _gt_generator()


def random_gt(rng) -> GTElement:
    """Uniform non-identity element of GT."""
    return gt_generator() ** random_scalar(rng)


@lru_cache(maxsize=4096)
def _hash_cached(label: bytes) -> GElement:
    return GElement(_bls.hash_g1(label))


def hash_to_group(label: bytes | str) -> GElement:
    """Deterministic hash onto G1 (RFC 9380 SSWU, SHA-256)."""
    if isinstance(label, str):
        label = label.encode("utf-8")
    if not label:
        raise ValueError("hash_to_group label must be non-empty")
    return _hash_cached(bytes(label))
