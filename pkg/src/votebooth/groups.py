"""Prime-order group profiles behind one interface.

Two profiles exist: ``test-mod-p`` (the order-11 subgroup of Z_23*, tiny
enough to enumerate in tests) and ``production-curve`` (secp256k1). Group
elements are opaque to callers: ints for the mod-p profile, affine
(x, y) tuples or None for the curve. All protocol code goes through the
methods here, never through the representation.

The curve profile picks its arithmetic kernel at import: the compiled
extension if it built, else the pure-Python fallback. Set
VOTEBOOTH_BACKEND=pure or =native to force one.
"""

from __future__ import annotations

import hashlib
import os
import random

_SYSRAND = random.SystemRandom()


class GroupError(ValueError):
    """Malformed or non-canonical group data."""


def _load_kernel():
    forced = os.environ.get("VOTEBOOTH_BACKEND", "").strip()
    if forced == "pure":
        from votebooth import _secp_pure
        return _secp_pure
    if forced == "native":
        from votebooth import _secp_native  # type: ignore[attr-defined]
        return _secp_native
    if forced:
        raise GroupError("unknown backend %r" % forced)
    try:
        from votebooth import _secp_native  # type: ignore[attr-defined]
        return _secp_native
    except ImportError:
        from votebooth import _secp_pure
        return _secp_pure


class ModPGroup:
    """Order-11 subgroup of Z_23*, for tests and fixtures.

    Small enough that discrete logs are enumerable, which is exactly what
    the test suite wants: every security property can be checked
    exhaustively instead of statistically.
    """

    name = "test-mod-p"
    p = 23
    q = 11
    g1 = 2
    g2 = 3
    identity = 1
    element_bytes = 1
    scalar_bytes = 1
    challenge_bytes = 8  # 64-bit envelope challenges

    def mul(self, a, b):
        return a * b % self.p

    def exp(self, base, k):
        return pow(base, k % self.q, self.p)

    def inv(self, a):
        return pow(a, self.p - 2, self.p)

    def div(self, a, b):
        return a * self.inv(b) % self.p

    def is_member(self, a):
        return isinstance(a, int) and 0 < a < self.p and pow(a, self.q, self.p) == 1

    def encode_element(self, a):
        if not self.is_member(a):
            raise GroupError("not a group member: %r" % (a,))
        return a.to_bytes(1, "big")

    def decode_element(self, data):
        if len(data) != self.element_bytes:
            raise GroupError("element must be %d bytes" % self.element_bytes)
        a = data[0]
        if not self.is_member(a):
            raise GroupError("%d is not in the order-%d subgroup" % (a, self.q))
        return a

    def encode_scalar(self, k):
        if not 0 <= k < self.q:
            raise GroupError("scalar out of range")
        return k.to_bytes(self.scalar_bytes, "big")

    def decode_scalar(self, data):
        if len(data) != self.scalar_bytes:
            raise GroupError("scalar must be %d bytes" % self.scalar_bytes)
        k = int.from_bytes(data, "big")
        if k >= self.q:
            raise GroupError("non-canonical scalar")
        return k

    def random_scalar(self, rng=None, nonzero=False):
        rng = rng or _SYSRAND
        lo = 1 if nonzero else 0
        return rng.randrange(lo, self.q)

    def elements(self):
        """Every member, sorted. Only the test profile can afford this."""
        return sorted(pow(self.g1, k, self.p) for k in range(self.q))


class CurveGroup:
    """secp256k1. Cofactor 1, so the whole curve is the prime-order group.

    The second generator is derived by try-and-increment hashing so its
    discrete log relative to the base point is unknown to everyone.
    """

    name = "production-curve"
    identity = None
    element_bytes = 33
    scalar_bytes = 32
    challenge_bytes = 16  # 128-bit envelope challenges

    _IDENTITY_BYTES = b"\x00" * 33

    def __init__(self, kernel):
        self._k = kernel
        self.backend = kernel.NAME
        self.p = kernel.P
        self.q = kernel.N
        self.g1 = (kernel.GX, kernel.GY)
        self.g2 = self._derive_g2()

    def _derive_g2(self):
        p = self.p
        counter = 0
        while True:
            seed = hashlib.sha256(
                b"votebooth/second-generator" + counter.to_bytes(4, "big")
            ).digest()
            x = int.from_bytes(seed, "big")
            if x < p:
                y_sq = (pow(x, 3, p) + 7) % p
                y = pow(y_sq, (p + 1) // 4, p)
                if y * y % p == y_sq:
                    return (x, y if y % 2 == 0 else p - y)
            counter += 1

    def mul(self, a, b):
        return self._k.point_add(a, b)

    def exp(self, base, k):
        return self._k.scalar_mul(base, k)

    def inv(self, a):
        return self._k.point_neg(a)

    def div(self, a, b):
        return self._k.point_add(a, self._k.point_neg(b))

    def is_member(self, a):
        if a is None:
            return True
        return (
            isinstance(a, tuple)
            and len(a) == 2
            and self._k.is_on_curve(a)
        )

    def encode_element(self, a):
        if a is None:
            return self._IDENTITY_BYTES
        if not self.is_member(a):
            raise GroupError("not on curve: %r" % (a,))
        x, y = a
        prefix = b"\x02" if y % 2 == 0 else b"\x03"
        return prefix + x.to_bytes(32, "big")

    def decode_element(self, data):
        if len(data) != self.element_bytes:
            raise GroupError("element must be %d bytes" % self.element_bytes)
        if data == self._IDENTITY_BYTES:
            return None
        prefix = data[0]
        if prefix not in (2, 3):
            raise GroupError("bad point prefix 0x%02x" % prefix)
        x = int.from_bytes(data[1:], "big")
        if x >= self.p:
            raise GroupError("x coordinate out of field")
        y_sq = (pow(x, 3, self.p) + 7) % self.p
        y = pow(y_sq, (self.p + 1) // 4, self.p)
        if y * y % self.p != y_sq:
            raise GroupError("x is not on the curve")
        if y % 2 != prefix - 2:
            y = self.p - y
        return (x, y)

    def encode_scalar(self, k):
        if not 0 <= k < self.q:
            raise GroupError("scalar out of range")
        return k.to_bytes(self.scalar_bytes, "big")

    def decode_scalar(self, data):
        if len(data) != self.scalar_bytes:
            raise GroupError("scalar must be %d bytes" % self.scalar_bytes)
        k = int.from_bytes(data, "big")
        if k >= self.q:
            raise GroupError("non-canonical scalar")
        return k

    def random_scalar(self, rng=None, nonzero=False):
        rng = rng or _SYSRAND
        lo = 1 if nonzero else 0
        return rng.randrange(lo, self.q)


PROFILES = ("test-mod-p", "production-curve")

_cache: dict[str, object] = {}


def group_setup(profile="test-mod-p"):
    """Return the (cached) group for a profile name."""
    if profile not in PROFILES:
        raise GroupError("unknown group profile %r" % profile)
    if profile not in _cache:
        if profile == "test-mod-p":
            _cache[profile] = ModPGroup()
        else:
            _cache[profile] = CurveGroup(_load_kernel())
    return _cache[profile]
