"""Jacobian-coordinate point arithmetic for BLS12-381 on plain ints.

G1 points are (X, Y, Z) over Fp; G2 points are (X, Y, Z) with each
coordinate an Fp2 pair (re, im), i**2 = -1.  Z == 0 marks infinity.
Affine table entries are (x, y) pairs and are added with mixed formulas.
"""

from __future__ import annotations

from py_ecc.optimized_bls12_381 import curve_order, field_modulus

P = field_modulus
R = curve_order
X_ABS = 0xD201000000010000
B2 = (4, 4)

# ---------------------------------------------------------------------------
# Fp2


def f2_add(a, b):
    return ((a[0] + b[0]) % P, (a[1] + b[1]) % P)


def f2_sub(a, b):
    return ((a[0] - b[0]) % P, (a[1] - b[1]) % P)


def f2_mul(a, b):
    a0, a1 = a
    b0, b1 = b
    t0 = a0 * b0
    t1 = a1 * b1
    return ((t0 - t1) % P, ((a0 + a1) * (b0 + b1) - t0 - t1) % P)


def f2_sqr(a):
    a0, a1 = a
    return ((a0 + a1) * (a0 - a1) % P, 2 * a0 * a1 % P)


def f2_inv(a):
    a0, a1 = a
    t = pow(a0 * a0 + a1 * a1, -1, P)
    return (a0 * t % P, -a1 * t % P)


def f2_neg(a):
    return (-a[0] % P, -a[1] % P)


def f2_conj(a):
    return (a[0], -a[1] % P)


def _fp_sqrt(a: int):
    # p = 3 mod 4
    r = pow(a, (P + 1) // 4, P)
    return r if r * r % P == a % P else None


def f2_sqrt(a):
    """A square root of ``a`` in Fp2, or None."""
    a0, a1 = a
    if a1 == 0:
        r = _fp_sqrt(a0)
        if r is not None:
            return (r, 0)
        r = _fp_sqrt(-a0 % P)
        return None if r is None else (0, r)
    alpha = _fp_sqrt((a0 * a0 + a1 * a1) % P)
    if alpha is None:
        return None
    inv2 = (P + 1) // 2
    delta = (a0 + alpha) * inv2 % P
    x0 = _fp_sqrt(delta)
    if x0 is None:
        delta = (a0 - alpha) * inv2 % P
        x0 = _fp_sqrt(delta)
        if x0 is None:
            return None
    x1 = a1 * pow(2 * x0, -1, P) % P
    root = (x0, x1)
    return root if f2_sqr(root) == (a0 % P, a1 % P) else None


# ---------------------------------------------------------------------------
# Generic Jacobian formulas (a = 0), parameterized by field ops


class _Curve:
    def __init__(self, add, sub, mul, sqr, inv, zero, one):
        self.fadd, self.fsub, self.fmul, self.fsqr, self.finv = add, sub, mul, sqr, inv
        self.zero, self.one = zero, one
        self.inf = (one, one, zero)

    def is_inf(self, p) -> bool:
        return p[2] == self.zero

    def double(self, p):
        X, Y, Z = p
        if Z == self.zero:
            return p
        add, sub, mul, sqr = self.fadd, self.fsub, self.fmul, self.fsqr
        A = sqr(X)
        B = sqr(Y)
        C = sqr(B)
        t = sub(sub(sqr(add(X, B)), A), C)
        D = add(t, t)
        E = add(add(A, A), A)
        F = sqr(E)
        X3 = sub(F, add(D, D))
        C8 = add(C, C)
        C8 = add(C8, C8)
        C8 = add(C8, C8)
        Y3 = sub(mul(E, sub(D, X3)), C8)
        YZ = mul(Y, Z)
        return (X3, Y3, add(YZ, YZ))

    def add_mixed(self, p, q):
        """Jacobian ``p`` plus affine ``q`` (q is never infinity)."""
        X1, Y1, Z1 = p
        x2, y2 = q
        if Z1 == self.zero:
            return (x2, y2, self.one)
        add, sub, mul, sqr = self.fadd, self.fsub, self.fmul, self.fsqr
        Z1Z1 = sqr(Z1)
        U2 = mul(x2, Z1Z1)
        S2 = mul(mul(y2, Z1), Z1Z1)
        H = sub(U2, X1)
        r = sub(S2, Y1)
        if H == self.zero:
            if r == self.zero:
                return self.double(p)
            return self.inf
        HH = sqr(H)
        I = add(HH, HH)
        I = add(I, I)
        J = mul(H, I)
        r = add(r, r)
        V = mul(X1, I)
        X3 = sub(sub(sqr(r), J), add(V, V))
        YJ = mul(Y1, J)
        Y3 = sub(mul(r, sub(V, X3)), add(YJ, YJ))
        Z3 = sub(sub(sqr(add(Z1, H)), Z1Z1), HH)
        return (X3, Y3, Z3)

    def add(self, p, q):
        if p[2] == self.zero:
            return q
        if q[2] == self.zero:
            return p
        add, sub, mul, sqr = self.fadd, self.fsub, self.fmul, self.fsqr
        X1, Y1, Z1 = p
        X2, Y2, Z2 = q
        Z1Z1 = sqr(Z1)
        Z2Z2 = sqr(Z2)
        U1 = mul(X1, Z2Z2)
        U2 = mul(X2, Z1Z1)
        S1 = mul(mul(Y1, Z2), Z2Z2)
        S2 = mul(mul(Y2, Z1), Z1Z1)
        H = sub(U2, U1)
        r = sub(S2, S1)
        if H == self.zero:
            if r == self.zero:
                return self.double(p)
            return self.inf
        I = sqr(add(H, H))
        J = mul(H, I)
        r = add(r, r)
        V = mul(U1, I)
        X3 = sub(sub(sqr(r), J), add(V, V))
        SJ = mul(S1, J)
        Y3 = sub(mul(r, sub(V, X3)), add(SJ, SJ))
        Z3 = mul(sub(sub(sqr(add(Z1, Z2)), Z1Z1), Z2Z2), H)
        return (X3, Y3, Z3)

    def neg(self, p):
        X, Y, Z = p
        return (X, self.fsub(self.zero, Y), Z)

    def to_affine(self, p):
        if p[2] == self.zero:
            return None
        zi = self.finv(p[2])
        zi2 = self.fsqr(zi)
        return (self.fmul(p[0], zi2), self.fmul(self.fmul(p[1], zi2), zi))

    def eq(self, p, q) -> bool:
        pz, qz = p[2] == self.zero, q[2] == self.zero
        if pz or qz:
            return pz and qz
        mul, sqr = self.fmul, self.fsqr
        Z1Z1, Z2Z2 = sqr(p[2]), sqr(q[2])
        if mul(p[0], Z2Z2) != mul(q[0], Z1Z1):
            return False
        return mul(mul(p[1], q[2]), Z2Z2) == mul(mul(q[1], p[2]), Z1Z1)

    def affine_multiples(self, pt, n: int):
        """[pt, 2pt, ..., n*pt] as affine pairs (pt finite, in the prime-order group)."""
        out = []
        acc = self.inf
        base = self.to_affine(pt)
        for _ in range(n):
            acc = self.add_mixed(acc, base)
            out.append(self.to_affine(acc))
        return out

    def mul(self, pt, e: int):
        """Left-to-right 4-bit window."""
        if e == 0 or pt[2] == self.zero:
            return self.inf
        table = self.affine_multiples(pt, 15)
        if any(t is None for t in table):
            return self._mul_plain(pt, e)
        acc = self.inf
        dbl, madd = self.double, self.add_mixed
        nibs = []
        while e:
            nibs.append(e & 15)
            e >>= 4
        for nib in reversed(nibs):
            acc = dbl(dbl(dbl(dbl(acc))))
            if nib:
                acc = madd(acc, table[nib - 1])
        return acc

    def _mul_plain(self, pt, e: int):
        # small-order inputs; only reached for points outside the subgroup
        acc = self.inf
        for bit in bin(e)[2:]:
            acc = self.double(acc)
            if bit == "1":
                acc = self.add(acc, pt)
        return acc

    def mul_sparse(self, pt, e: int):
        """Double-and-add; fast for low-weight scalars like |x|."""
        acc = self.inf
        base = self.to_affine(pt)
        if base is None or e == 0:
            return self.inf
        for bit in bin(e)[2:]:
            acc = self.double(acc)
            if bit == "1":
                acc = self.add_mixed(acc, base)
        return acc


def _fp_add(a, b):
    return (a + b) % P


def _fp_sub(a, b):
    return (a - b) % P


def _fp_mul(a, b):
    return a * b % P


def _fp_sqr(a):
    return a * a % P


def _fp_inv(a):
    return pow(a, -1, P)


E1 = _Curve(_fp_add, _fp_sub, _fp_mul, _fp_sqr, _fp_inv, 0, 1)
E2 = _Curve(f2_add, f2_sub, f2_mul, f2_sqr, f2_inv, (0, 0), (1, 0))


class Comb:
    """Fixed-base table of j * 16^i * base, affine."""

    def __init__(self, curve: _Curve, base, windows: int = 64):
        self.curve = curve
        self.rows = []
        b = base
        for _ in range(windows):
            row = curve.affine_multiples(b, 16)
            self.rows.append(row[:15])
            x, y = row[15]
            b = (x, y, curve.one)

    def mul(self, e: int):
        e %= R
        acc = self.curve.inf
        madd = self.curve.add_mixed
        i = 0
        while e:
            nib = e & 15
            if nib:
                acc = madd(acc, self.rows[i][nib - 1])
            e >>= 4
            i += 1
        return acc


# ---------------------------------------------------------------------------
# Subgroup membership

# psi on the twist: (conj(x) * PSI_X, conj(y) * PSI_Y)
_XI = (1, 1)


def _f2_pow(a, e):
    out = (1, 0)
    while e:
        if e & 1:
            out = f2_mul(out, a)
        a = f2_sqr(a)
        e >>= 1
    return out


PSI_X = f2_inv(_f2_pow(_XI, (P - 1) // 3))
PSI_Y = f2_inv(_f2_pow(_XI, (P - 1) // 2))


def psi(pt):
    X, Y, Z = pt
    return (f2_mul(f2_conj(X), PSI_X), f2_mul(f2_conj(Y), PSI_Y), f2_conj(Z))


def g2_in_subgroup(pt) -> bool:
    # Q in G2 iff psi(Q) == [x]Q, with x = -X_ABS
    if E2.is_inf(pt):
        return True
    return E2.eq(psi(pt), E2.neg(E2.mul_sparse(pt, X_ABS)))


# sigma(x, y) = (BETA * x, y) with BETA a primitive cube root of unity;
# P in G1 iff sigma(P) == -[x^2]P.  BETA is picked to match the generator.
def _g1_beta():
    from py_ecc.optimized_bls12_381 import G1, normalize

    gx, gy = (int(c) for c in normalize(G1))
    g = (gx, gy, 1)
    lhs = E1.neg(E1.mul_sparse(E1.mul_sparse(g, X_ABS), X_ABS))
    w = pow(2, (P - 1) // 3, P)
    if w == 1:
        raise AssertionError("2 is a cube in Fp")
    for beta in (w, w * w % P):
        if E1.eq((gx * beta % P, gy, 1), lhs):
            return beta
    raise AssertionError("no cube root of unity matches the generator")


BETA = _g1_beta()


def g1_in_subgroup(pt) -> bool:
    if E1.is_inf(pt):
        return True
    X, Y, Z = pt
    x2p = E1.mul_sparse(E1.mul_sparse(pt, X_ABS), X_ABS)
    return E1.eq((X * BETA % P, Y, Z), E1.neg(x2p))


def g1_on_curve(pt) -> bool:
    X, Y, Z = pt
    if Z == 0:
        return True
    z2 = Z * Z % P
    return (Y * Y - X * X * X - 4 * z2 * z2 * z2) % P == 0


def g2_on_curve(pt) -> bool:
    X, Y, Z = pt
    if Z == (0, 0):
        return True
    z6 = f2_mul(f2_sqr(Z), f2_mul(f2_sqr(Z), f2_sqr(Z)))
    rhs = f2_add(f2_mul(f2_sqr(X), X), f2_mul(B2, z6))
    return f2_sqr(Y) == rhs


def g2_decompress(z1: int, z2: int):
    """Zcash-format G2 decompression to affine Jacobian (Z = 1), or None for infinity."""
    c_flag = (z1 >> 383) & 1
    b_flag = (z1 >> 382) & 1
    a_flag = (z1 >> 381) & 1
    if not c_flag:
        raise ValueError("c_flag should be 1")
    if z2 >> 381:
        raise ValueError("flags set on the second half")
    x1 = z1 % (1 << 381)
    if b_flag:
        if a_flag or x1 or z2:
            raise ValueError("malformed point at infinity")
        return None
    if x1 >= P or z2 >= P:
        raise ValueError("coordinate not below the field modulus")
    x = (z2, x1)
    y = f2_sqrt(f2_add(f2_mul(f2_sqr(x), x), B2))
    if y is None:
        raise ValueError("x is not on the twisted curve")
    y_re, y_im = y
    sign = (y_im * 2) // P if y_im else (y_re * 2) // P
    if sign != a_flag:
        y = f2_neg(y)
    return (x, y, (1, 0))
