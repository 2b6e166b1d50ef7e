"""Pure-Python secp256k1 kernel.

Fallback backend when the compiled module is unavailable, and the
reference the native kernel is cross-checked against in tests. Points are
affine (x, y) tuples with None as the point at infinity; arithmetic runs
in Jacobian coordinates internally so a scalar multiplication costs a
single field inversion.
"""

NAME = "pure-python"

P = 2**256 - 2**32 - 977
N = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141
GX = 0x79BE667EF9DCBBAC55A06295CE870B07029BFCDB2DCE28D959F2815B16F81798
GY = 0x483ADA7726A3C4655DA4FBFC0E1108A8FD17B448A68554199C47D08FFB10D4B8

_JINF = (1, 1, 0)


def is_on_curve(point):
    if point is None:
        return True
    x, y = point
    return 0 <= x < P and 0 <= y < P and (y * y - x * x * x - 7) % P == 0


def point_neg(point):
    if point is None:
        return None
    x, y = point
    return (x, (P - y) % P)


def _to_jacobian(point):
    if point is None:
        return _JINF
    return (point[0], point[1], 1)


def _from_jacobian(jp):
    x, y, z = jp
    if z == 0:
        return None
    zinv = pow(z, P - 2, P)
    zinv2 = zinv * zinv % P
    return (x * zinv2 % P, y * zinv2 * zinv % P)


def _jdouble(jp):
    x, y, z = jp
    if z == 0 or y == 0:
        return _JINF
    a = x * x % P
    b = y * y % P
    c = b * b % P
    d = 2 * ((x + b) * (x + b) - a - c) % P
    e = 3 * a % P
    f = e * e % P
    x3 = (f - 2 * d) % P
    y3 = (e * (d - x3) - 8 * c) % P
    z3 = 2 * y * z % P
    return (x3, y3, z3)


def _jadd(jp, jq):
    x1, y1, z1 = jp
    x2, y2, z2 = jq
    if z1 == 0:
        return jq
    if z2 == 0:
        return jp
    z1z1 = z1 * z1 % P
    z2z2 = z2 * z2 % P
    u1 = x1 * z2z2 % P
    u2 = x2 * z1z1 % P
    s1 = y1 * z2 * z2z2 % P
    s2 = y2 * z1 * z1z1 % P
    if u1 == u2:
        if s1 != s2:
            return _JINF
        return _jdouble(jp)
    h = (u2 - u1) % P
    i = 4 * h * h % P
    j = h * i % P
    rr = 2 * (s2 - s1) % P
    v = u1 * i % P
    x3 = (rr * rr - j - 2 * v) % P
    y3 = (rr * (v - x3) - 2 * s1 * j) % P
    z3 = ((z1 + z2) * (z1 + z2) - z1z1 - z2z2) % P * h % P
    return (x3, y3, z3)


def point_add(p, q):
    return _from_jacobian(_jadd(_to_jacobian(p), _to_jacobian(q)))


def scalar_mul(point, k):
    k %= N
    if point is None or k == 0:
        return None
    acc = _JINF
    base = _to_jacobian(point)
    for bit in reversed(range(k.bit_length())):
        acc = _jdouble(acc)
        if (k >> bit) & 1:
            acc = _jadd(acc, base)
    return _from_jacobian(acc)
