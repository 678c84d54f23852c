"""Low-level BLS12-381 arithmetic used by :mod:`mcabe.algebra`.

Curve constants, hashing to G1 and point compression come from py_ecc.
The pairing itself is evaluated here on plain integers because py_ecc's
reference ``pairing`` is roughly fifteen times slower: the Miller loop
works on affine twist coordinates with sparse line multiplication, and the
final exponentiation uses the x-based chain for BLS12 curves.

Target-group elements are 12-tuples of ints in py_ecc's FQ12 basis
(``w**12 = 2*w**6 - 2``), so values can be cross-checked against py_ecc.
The chain used for the hard part of the final exponentiation yields the
cube of the reduced ate pairing. Cubing is an automorphism of the order-r
group, so the result is still bilinear and non-degenerate.
"""

from __future__ import annotations

import hashlib

from py_ecc.bls.hash_to_curve import hash_to_G1
from py_ecc.optimized_bls12_381 import G1 as _PY_G1
from py_ecc.optimized_bls12_381 import G2 as _PY_G2
from py_ecc.optimized_bls12_381 import curve_order, field_modulus
from py_ecc.optimized_bls12_381.optimized_pairing import exptable

from . import _ec

P = field_modulus
R = curve_order

# |x| for the BLS12-381 parameter x = -0xd201000000010000.
X_ABS = 0xD201000000010000
_X_BITS = bin(X_ABS)[3:]

HASH_DST = b"MCABE-V01-CS01-with-BLS12381G1_XMD:SHA-256_SSWU_RO_"

# ---------------------------------------------------------------------------
# Fp12 on raw ints, basis 1, w, ..., w^11 with w^12 = 2 w^6 - 2.

FP12_ONE = (1,) + (0,) * 11
_FROB = tuple(tuple(int(c) for c in e.coeffs) for e in exptable)


def _reduce(c: list) -> tuple:
    for k in range(len(c) - 1, 11, -1):
        t = c[k]
        if t:
            c[k - 6] += 2 * t
            c[k - 12] -= 2 * t
    return tuple(v % P for v in c[:12])


def fp12_mul(a, b) -> tuple:
    c = [0] * 23
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                c[i + j] += ai * bj
    return _reduce(c)


def fp12_sqr(a) -> tuple:
    c = [0] * 23
    for i in range(12):
        ai = a[i]
        if not ai:
            continue
        c[2 * i] += ai * ai
        ai2 = 2 * ai
        for j in range(i + 1, 12):
            c[i + j] += ai2 * a[j]
    return _reduce(c)


def _mul_line(f, l0, l2, l3, l6, l8) -> tuple:
    # f * (l0 + l2 w^2 + l3 w^3 + l6 w^6 + l8 w^8)
    c = [0] * 21
    for i, fi in enumerate(f):
        if fi:
            c[i] += fi * l0
            c[i + 2] += fi * l2
            c[i + 3] += fi * l3
            c[i + 6] += fi * l6
            c[i + 8] += fi * l8
    return _reduce(c)


def fp12_conj(f) -> tuple:
    """Frobenius to the p^6; the inverse for unitary elements."""
    return tuple((-v) % P if i & 1 else v for i, v in enumerate(f))


def fp12_frob(f) -> tuple:
    out = [0] * 12
    for c, row in zip(f, _FROB):
        if c:
            for k in range(12):
                out[k] += c * row[k]
    return tuple(v % P for v in out)


def _fp2_to_basis(a0: int, a1: int) -> tuple:
    # a0 + a1*i with i = w^6 - 1
    return ((a0 - a1) % P,) + (0,) * 5 + (a1 % P,) + (0,) * 5


def fp12_inv(f) -> tuple:
    if not any(f):
        raise ZeroDivisionError("inverse of zero in Fp12")
    # f * conj(f) lies in Fp6; its norm down to Fp2 is n6 * n6^(p^2) * n6^(p^4).
    fc = fp12_conj(f)
    n6 = fp12_mul(f, fc)
    n6p2 = fp12_frob(fp12_frob(n6))
    n6p4 = fp12_frob(fp12_frob(n6p2))
    rest = fp12_mul(n6p2, n6p4)
    n2 = fp12_mul(n6, rest)
    # n2 = u + v w^6 = (u + v) + v i
    u, v = n2[0], n2[6]
    a0, a1 = (u + v) % P, v
    d = pow(a0 * a0 + a1 * a1, -1, P)
    inv_n2 = _fp2_to_basis(a0 * d, -a1 * d)
    return fp12_mul(fp12_mul(fc, rest), inv_n2)


def fp12_pow(f, e: int) -> tuple:
    """Left-to-right 4-bit fixed window exponentiation (e >= 0)."""
    if e == 0:
        return FP12_ONE
    table = [FP12_ONE, f]
    for _ in range(14):
        table.append(fp12_mul(table[-1], f))
    acc = None
    for nib in _nibbles(e):
        if acc is not None:
            acc = fp12_sqr(fp12_sqr(fp12_sqr(fp12_sqr(acc))))
            if nib:
                acc = fp12_mul(acc, table[nib])
        else:
            acc = table[nib]
    return acc


def _nibbles(e: int) -> list:
    out = []
    while e:
        out.append(e & 15)
        e >>= 4
    return out[::-1]


def _pow_x(m) -> tuple:
    # m^x for negative x, valid for unitary m
    a = m
    for bit in _X_BITS:
        a = fp12_sqr(a)
        if bit == "1":
            a = fp12_mul(a, m)
    return fp12_conj(a)


def gt_in_subgroup(f) -> bool:
    """Membership in the order-r subgroup of Fp12*.

    f must lie in the cyclotomic subgroup (f^(p^4) * f == f^(p^2)) and
    satisfy f^p == f^x (Scott's test for BLS12 curves).
    """
    if not any(f):
        return False
    f2 = fp12_frob(fp12_frob(f))
    f4 = fp12_frob(fp12_frob(f2))
    if fp12_mul(f4, f) != f2:
        return False
    return fp12_frob(f) == _pow_x(f)


def final_exponentiation(f) -> tuple:
    t = fp12_mul(fp12_conj(f), fp12_inv(f))
    m = fp12_mul(fp12_frob(fp12_frob(t)), t)
    # 3 (p^4 - p^2 + 1) / r = (x - 1)^2 (x + p) (x^2 + p^2 - 1) + 3
    a = fp12_mul(_pow_x(m), fp12_conj(m))
    a = fp12_mul(_pow_x(a), fp12_conj(a))
    b = fp12_mul(_pow_x(a), fp12_frob(a))
    c = fp12_mul(_pow_x(_pow_x(b)), fp12_frob(fp12_frob(b)))
    c = fp12_mul(c, fp12_conj(b))
    return fp12_mul(c, fp12_mul(m, fp12_sqr(m)))


def miller_loop(pairs) -> tuple:
    """Product of Miller functions f_{|x|,Q}(P) over (P in G1, Q in G2) pairs.

    Pairs with a point at infinity contribute 1.
    """
    work = []
    for p1, q2 in pairs:
        if is_inf(p1) or is_inf(q2):
            continue
        xp, yp = _ec.E1.to_affine(p1)
        (qx0, qx1), (qy0, qy1) = _ec.E2.to_affine(q2)
        q = (qx0, qx1, qy0, qy1)
        work.append([xp, yp, q, list(q)])
    f = FP12_ONE
    for bit in _X_BITS:
        f = fp12_sqr(f)
        for item in work:
            xp, yp, q, r = item
            x0, x1, y0, y1 = r
            # tangent slope 3x^2 / 2y in Fp2
            n0 = 3 * (x0 * x0 - x1 * x1)
            n1 = 6 * x0 * x1
            d0, d1 = 2 * y0, 2 * y1
            inv = pow(d0 * d0 + d1 * d1, -1, P)
            i0, i1 = d0 * inv, -d1 * inv
            l0 = (n0 * i0 - n1 * i1) % P
            l1 = (n0 * i1 + n1 * i0) % P
            f = _line(f, l0, l1, x0, x1, y0, y1, xp, yp)
            nx0 = (l0 * l0 - l1 * l1 - 2 * x0) % P
            nx1 = (2 * l0 * l1 - 2 * x1) % P
            dx0, dx1 = x0 - nx0, x1 - nx1
            y0, y1 = (l0 * dx0 - l1 * dx1 - y0) % P, (l0 * dx1 + l1 * dx0 - y1) % P
            x0, x1 = nx0, nx1
            if bit == "1":
                qx0, qx1, qy0, qy1 = q
                n0, n1 = qy0 - y0, qy1 - y1
                d0, d1 = qx0 - x0, qx1 - x1
                inv = pow(d0 * d0 + d1 * d1, -1, P)
                i0, i1 = d0 * inv, -d1 * inv
                l0 = (n0 * i0 - n1 * i1) % P
                l1 = (n0 * i1 + n1 * i0) % P
                f = _line(f, l0, l1, x0, x1, y0, y1, xp, yp)
                nx0 = (l0 * l0 - l1 * l1 - x0 - qx0) % P
                nx1 = (2 * l0 * l1 - x1 - qx1) % P
                dx0, dx1 = x0 - nx0, x1 - nx1
                y0, y1 = (l0 * dx0 - l1 * dx1 - y0) % P, (l0 * dx1 + l1 * dx0 - y1) % P
                x0, x1 = nx0, nx1
            item[3] = [x0, x1, y0, y1]
    return f


def _line(f, l0, l1, x0, x1, y0, y1, xp, yp):
    # Line through twisted R with slope lam, evaluated at P and scaled by w^3:
    #   lam*xP*w^2 + (yR - lam*xR) - yP*w^3
    c0 = (y0 - (l0 * x0 - l1 * x1)) % P
    c1 = (y1 - (l0 * x1 + l1 * x0)) % P
    return _mul_line(f, c0 - c1, xp * (l0 - l1), -yp, c1, xp * l1)


def multi_pairing(pairs) -> tuple:
    return final_exponentiation(miller_loop(pairs))


# ---------------------------------------------------------------------------
# Points: Jacobian int tuples from :mod:`mcabe._ec`.  G1 coordinates are
# ints, G2 coordinates are Fp2 pairs, so the curve is known from the type.


def _from_py_ecc(pt, curve):
    # py_ecc uses homogeneous (X, Y, Z) with x = X/Z; Jacobian wants x = X/Z^2
    if curve is _ec.E1:
        X, Y, Z = (int(c) for c in pt)
        return (X * Z % P, Y * Z * Z % P, Z)
    X, Y, Z = (tuple(int(c) for c in v.coeffs) for v in pt)
    return (_ec.f2_mul(X, Z), _ec.f2_mul(Y, _ec.f2_sqr(Z)), Z)


G1 = _from_py_ecc(_PY_G1, _ec.E1)
G2 = _from_py_ecc(_PY_G2, _ec.E2)
Z1 = _ec.E1.inf
Z2 = _ec.E2.inf


def _curve(pt):
    return _ec.E1 if isinstance(pt[2], int) else _ec.E2


def is_inf(pt) -> bool:
    return _curve(pt).is_inf(pt)


def point_neg(pt):
    return _curve(pt).neg(pt)


def point_add(a, b):
    return _curve(a).add(a, b)


def point_eq(a, b) -> bool:
    return _curve(a).eq(a, b)


def g1_mul(pt, e: int):
    return _ec.E1.mul(pt, e % R)


def g2_mul(pt, e: int):
    return _ec.E2.mul(pt, e % R)


_fixed: dict[str, _ec.Comb] = {}


def g1_gen_mul(e: int):
    if "g1" not in _fixed:
        _fixed["g1"] = _ec.Comb(_ec.E1, G1)
    return _fixed["g1"].mul(e)


def g2_gen_mul(e: int):
    if "g2" not in _fixed:
        _fixed["g2"] = _ec.Comb(_ec.E2, G2)
    return _fixed["g2"].mul(e)


g1_in_subgroup = _ec.g1_in_subgroup
g2_in_subgroup = _ec.g2_in_subgroup


def hash_g1(label: bytes):
    return _from_py_ecc(hash_to_G1(label, HASH_DST, hashlib.sha256), _ec.E1)


# Zcash serialization: bit 383 compressed, bit 382 infinity, bit 381 sign of y.
_C_FLAG = 1 << 383
_B_FLAG = 1 << 382
_A_FLAG = 1 << 381


def g1_to_bytes(pt) -> bytes:
    aff = _ec.E1.to_affine(pt)
    if aff is None:
        return (_C_FLAG | _B_FLAG).to_bytes(48, "big")
    x, y = aff
    z = _C_FLAG | x | (_A_FLAG if (y * 2) // P else 0)
    return z.to_bytes(48, "big")


def g1_from_bytes(data: bytes):
    z = int.from_bytes(data, "big")
    if not z & _C_FLAG:
        raise ValueError("c_flag should be 1")
    a_flag = bool(z & _A_FLAG)
    x = z % _A_FLAG
    if z & _B_FLAG:
        if a_flag or x:
            raise ValueError("malformed point at infinity")
        return Z1
    if x >= P:
        raise ValueError("x not below the field modulus")
    y = _ec._fp_sqrt((x * x * x + 4) % P)
    if y is None:
        raise ValueError("x is not on the curve")
    if bool((y * 2) // P) != a_flag:
        y = P - y
    return (x, y, 1)


def g2_to_bytes(pt) -> bytes:
    aff = _ec.E2.to_affine(pt)
    if aff is None:
        return (_C_FLAG | _B_FLAG).to_bytes(48, "big") + bytes(48)
    (x0, x1), (y0, y1) = aff
    sign = (y1 * 2) // P if y1 else (y0 * 2) // P
    z1 = _C_FLAG | x1 | (_A_FLAG if sign else 0)
    return z1.to_bytes(48, "big") + x0.to_bytes(48, "big")


def g2_from_bytes(data: bytes):
    pt = _ec.g2_decompress(int.from_bytes(data[:48], "big"), int.from_bytes(data[48:], "big"))
    return Z2 if pt is None else pt


def fp12_to_bytes(f) -> bytes:
    return b"".join(c.to_bytes(48, "big") for c in f)


def fp12_from_bytes(data: bytes) -> tuple:
    coeffs = tuple(int.from_bytes(data[i : i + 48], "big") for i in range(0, 576, 48))
    if any(c >= P for c in coeffs):
        raise ValueError("Fp12 coefficient out of range")
    return coeffs
