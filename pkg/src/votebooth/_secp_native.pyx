# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled secp256k1 kernel.

Fixed 4x64-bit limb field arithmetic with the fast secp256k1 reduction
(2^256 = 2^32 + 977 mod p) and Jacobian point formulas. Exposes the same
module interface as _secp_pure: scalar_mul, point_add, point_neg,
is_on_curve plus the curve constants.
"""

cdef extern from *:
    ctypedef unsigned long long u128 "unsigned __int128"

ctypedef unsigned long long u64

NAME = "native"

P = 2**256 - 2**32 - 977
N = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141
GX = 0x79BE667EF9DCBBAC55A06295CE870B07029BFCDB2DCE28D959F2815B16F81798
GY = 0x483ADA7726A3C4655DA4FBFC0E1108A8FD17B448A68554199C47D08FFB10D4B8

cdef object P_INT = P
cdef object N_INT = N

cdef u64 PL0 = 0xFFFFFFFEFFFFFC2F
cdef u64 PL1 = 0xFFFFFFFFFFFFFFFF
cdef u64 PL2 = 0xFFFFFFFFFFFFFFFF
cdef u64 PL3 = 0xFFFFFFFFFFFFFFFF
cdef u64 RED = 0x1000003D1  # 2^32 + 977


cdef inline bint fe_is_zero(const u64* a):
    return (a[0] | a[1] | a[2] | a[3]) == 0


cdef inline bint fe_eq(const u64* a, const u64* b):
    return a[0] == b[0] and a[1] == b[1] and a[2] == b[2] and a[3] == b[3]


cdef inline void fe_set(u64* r, const u64* a):
    r[0] = a[0]
    r[1] = a[1]
    r[2] = a[2]
    r[3] = a[3]


cdef inline bint fe_gte_p(const u64* a):
    if a[3] < PL3:
        return False
    if a[2] < PL2:
        return False
    if a[1] < PL1:
        return False
    return a[0] >= PL0


cdef inline void fe_sub_p(u64* a):
    # in-place a -= p, caller guarantees a >= p (mod 2^256 view is exact
    # here because a < 2^256 and p <= a)
    cdef u128 t
    cdef u64 borrow = 0
    t = <u128> a[0] - PL0
    a[0] = <u64> t
    borrow = 1 if (t >> 64) else 0
    t = <u128> a[1] - PL1 - borrow
    a[1] = <u64> t
    borrow = 1 if (t >> 64) else 0
    t = <u128> a[2] - PL2 - borrow
    a[2] = <u64> t
    borrow = 1 if (t >> 64) else 0
    a[3] = a[3] - PL3 - borrow


cdef void fe_add(u64* r, const u64* a, const u64* b):
    cdef u128 t
    cdef u64 carry = 0
    cdef int i
    for i in range(4):
        t = <u128> a[i] + b[i] + carry
        r[i] = <u64> t
        carry = <u64> (t >> 64)
    if carry:
        # wrapped past 2^256: fold the extra bit back in as RED
        t = <u128> r[0] + RED
        r[0] = <u64> t
        carry = <u64> (t >> 64)
        for i in range(1, 4):
            if carry == 0:
                break
            t = <u128> r[i] + carry
            r[i] = <u64> t
            carry = <u64> (t >> 64)
    if fe_gte_p(r):
        fe_sub_p(r)


cdef void fe_sub(u64* r, const u64* a, const u64* b):
    cdef u128 t
    cdef u64 borrow = 0
    cdef u64 carry
    cdef int i
    for i in range(4):
        t = <u128> a[i] - b[i] - borrow
        r[i] = <u64> t
        borrow = 1 if (t >> 64) else 0
    if borrow:
        # wrapped below zero: add p back
        t = <u128> r[0] + PL0
        r[0] = <u64> t
        carry = <u64> (t >> 64)
        t = <u128> r[1] + PL1 + carry
        r[1] = <u64> t
        carry = <u64> (t >> 64)
        t = <u128> r[2] + PL2 + carry
        r[2] = <u64> t
        carry = <u64> (t >> 64)
        r[3] = r[3] + PL3 + carry


cdef void fe_reduce_wide(u64* r, const u64* t):
    # fold t[4..7] * 2^256 into the low half twice, then normalize
    cdef u64 m[5]
    cdef u128 acc
    cdef u64 carry = 0
    cdef int i
    for i in range(4):
        acc = <u128> t[4 + i] * RED + t[i] + carry
        m[i] = <u64> acc
        carry = <u64> (acc >> 64)
    m[4] = carry
    acc = <u128> m[4] * RED + m[0]
    r[0] = <u64> acc
    carry = <u64> (acc >> 64)
    for i in range(1, 4):
        acc = <u128> m[i] + carry
        r[i] = <u64> acc
        carry = <u64> (acc >> 64)
    if carry:
        acc = <u128> r[0] + RED
        r[0] = <u64> acc
        carry = <u64> (acc >> 64)
        for i in range(1, 4):
            if carry == 0:
                break
            acc = <u128> r[i] + carry
            r[i] = <u64> acc
            carry = <u64> (acc >> 64)
    while fe_gte_p(r):
        fe_sub_p(r)


cdef void fe_mul(u64* r, const u64* a, const u64* b):
    cdef u64 t[8]
    cdef u128 acc
    cdef u64 carry
    cdef int i, j
    for i in range(8):
        t[i] = 0
    for i in range(4):
        carry = 0
        for j in range(4):
            acc = <u128> a[i] * b[j] + t[i + j] + carry
            t[i + j] = <u64> acc
            carry = <u64> (acc >> 64)
        t[i + 4] = carry
    fe_reduce_wide(r, t)


cdef inline void fe_sqr(u64* r, const u64* a):
    fe_mul(r, a, a)


cdef object limbs_to_int(const u64* a):
    cdef object v = 0
    cdef int i
    for i in range(3, -1, -1):
        v = (v << 64) | a[i]
    return v


cdef void int_to_limbs(u64* r, object v):
    cdef int i
    for i in range(4):
        r[i] = <u64> (v & 0xFFFFFFFFFFFFFFFF)
        v >>= 64


cdef void fe_inv(u64* r, const u64* a):
    # single inversion per affine conversion; the Python pow boundary is
    # not on the hot path
    int_to_limbs(r, pow(limbs_to_int(a), P_INT - 2, P_INT))


cdef struct JPoint:
    u64 x[4]
    u64 y[4]
    u64 z[4]


cdef inline void jp_set_infinity(JPoint* r):
    cdef int i
    for i in range(4):
        r.x[i] = 0
        r.y[i] = 0
        r.z[i] = 0
    r.x[0] = 1
    r.y[0] = 1


cdef inline bint jp_is_infinity(const JPoint* a):
    return fe_is_zero(a.z)


cdef void jp_double(JPoint* r, const JPoint* a):
    cdef u64 ax2[4], by2[4], cc[4], d[4], e[4], f[4], t[4]
    if jp_is_infinity(a) or fe_is_zero(a.y):
        jp_set_infinity(r)
        return
    fe_sqr(ax2, a.x)                 # A = X^2
    fe_sqr(by2, a.y)                 # B = Y^2
    fe_sqr(cc, by2)                  # C = B^2
    fe_add(t, a.x, by2)              # D = 2((X+B)^2 - A - C)
    fe_sqr(t, t)
    fe_sub(t, t, ax2)
    fe_sub(t, t, cc)
    fe_add(d, t, t)
    fe_add(e, ax2, ax2)              # E = 3A
    fe_add(e, e, ax2)
    fe_sqr(f, e)                     # F = E^2
    fe_mul(t, a.y, a.z)              # Z3 = 2YZ (before r aliases a)
    fe_add(r.z, t, t)
    fe_sub(r.x, f, d)                # X3 = F - 2D
    fe_sub(r.x, r.x, d)
    fe_sub(t, d, r.x)                # Y3 = E(D - X3) - 8C
    fe_mul(t, e, t)
    fe_add(cc, cc, cc)
    fe_add(cc, cc, cc)
    fe_add(cc, cc, cc)
    fe_sub(r.y, t, cc)


cdef void jp_add(JPoint* r, const JPoint* a, const JPoint* b):
    cdef u64 z1z1[4], z2z2[4], u1[4], u2[4], s1[4], s2[4]
    cdef u64 h[4], i2h[4], j[4], rr[4], v[4], t[4], t2[4]
    if jp_is_infinity(a):
        r[0] = b[0]
        return
    if jp_is_infinity(b):
        r[0] = a[0]
        return
    fe_sqr(z1z1, a.z)
    fe_sqr(z2z2, b.z)
    fe_mul(u1, a.x, z2z2)
    fe_mul(u2, b.x, z1z1)
    fe_mul(s1, a.y, b.z)
    fe_mul(s1, s1, z2z2)
    fe_mul(s2, b.y, a.z)
    fe_mul(s2, s2, z1z1)
    if fe_eq(u1, u2):
        if not fe_eq(s1, s2):
            jp_set_infinity(r)
        else:
            jp_double(r, a)
        return
    fe_sub(h, u2, u1)
    fe_add(i2h, h, h)
    fe_sqr(i2h, i2h)                 # I = (2H)^2
    fe_mul(j, h, i2h)                # J = H*I
    fe_sub(rr, s2, s1)               # rr = 2(S2 - S1)
    fe_add(rr, rr, rr)
    fe_mul(v, u1, i2h)               # V = U1*I
    fe_add(t, a.z, b.z)              # Z3 = ((Z1+Z2)^2 - Z1Z1 - Z2Z2)*H
    fe_sqr(t, t)
    fe_sub(t, t, z1z1)
    fe_sub(t, t, z2z2)
    fe_mul(r.z, t, h)
    fe_sqr(t, rr)                    # X3 = rr^2 - J - 2V
    fe_sub(t, t, j)
    fe_sub(t, t, v)
    fe_sub(r.x, t, v)
    fe_sub(t, v, r.x)                # Y3 = rr(V - X3) - 2*S1*J
    fe_mul(t, rr, t)
    fe_mul(t2, s1, j)
    fe_add(t2, t2, t2)
    fe_sub(r.y, t, t2)


cdef void jp_from_affine(JPoint* r, object point):
    int_to_limbs(r.x, point[0])
    int_to_limbs(r.y, point[1])
    r.z[0] = 1
    r.z[1] = 0
    r.z[2] = 0
    r.z[3] = 0


cdef object jp_to_affine(const JPoint* a):
    cdef u64 zi[4], zi2[4], x[4], y[4]
    if jp_is_infinity(a):
        return None
    fe_inv(zi, a.z)
    fe_sqr(zi2, zi)
    fe_mul(x, a.x, zi2)
    fe_mul(y, a.y, zi2)
    fe_mul(y, y, zi)
    return (limbs_to_int(x), limbs_to_int(y))


def is_on_curve(point):
    if point is None:
        return True
    x, y = point
    return 0 <= x < P_INT and 0 <= y < P_INT and (y * y - x * x * x - 7) % P_INT == 0


def point_neg(point):
    if point is None:
        return None
    x, y = point
    return (x, (P_INT - y) % P_INT)


def point_add(p, q):
    cdef JPoint jp, jq, jr
    if p is None:
        return q
    if q is None:
        return p
    jp_from_affine(&jp, p)
    jp_from_affine(&jq, q)
    jp_add(&jr, &jp, &jq)
    return jp_to_affine(&jr)


def scalar_mul(point, k):
    cdef JPoint acc
    cdef JPoint tbl[16]
    cdef int i, nib
    cdef bytes kb
    cdef unsigned char byte
    k = k % N_INT
    if point is None or k == 0:
        return None
    jp_set_infinity(&tbl[0])
    jp_from_affine(&tbl[1], point)
    for i in range(2, 16):
        jp_add(&tbl[i], &tbl[i - 1], &tbl[1])
    kb = k.to_bytes(32, "big")
    jp_set_infinity(&acc)
    for i in range(32):
        byte = kb[i]
        jp_double(&acc, &acc)
        jp_double(&acc, &acc)
        jp_double(&acc, &acc)
        jp_double(&acc, &acc)
        nib = byte >> 4
        if nib:
            jp_add(&acc, &acc, &tbl[nib])
        jp_double(&acc, &acc)
        jp_double(&acc, &acc)
        jp_double(&acc, &acc)
        jp_double(&acc, &acc)
        nib = byte & 15
        if nib:
            jp_add(&acc, &acc, &tbl[nib])
    return jp_to_affine(&acc)
