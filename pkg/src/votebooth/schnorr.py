"""Schnorr signatures over the active group.

Keys live on the first generator. The message is pre-hashed under a
per-purpose domain tag, so a signature made for one role can never be
replayed as another role's signature even when the covered bytes
coincide. Signatures are enc(R) || enc(s), fixed width per group.
"""

from __future__ import annotations

import random

from votebooth.encoding import pack_fields, tagged_digest
from votebooth.groups import GroupError

_SYSRAND = random.SystemRandom()


def keygen(group, rng=None):
    """Return (secret, public) with secret non-zero."""
    sk = group.random_scalar(rng, nonzero=True)
    return sk, group.exp(group.g1, sk)


def pubkey(group, sk):
    return group.exp(group.g1, sk)


def signature_bytes(group):
    return group.element_bytes + group.scalar_bytes


def _challenge(group, tag, nonce_pk, pk, msg):
    pre = tagged_digest("votebooth/msg/" + tag, msg)
    data = pack_fields(
        group.encode_element(nonce_pk), group.encode_element(pk), pre
    )
    return int.from_bytes(tagged_digest("votebooth/sig", data), "big") % group.q


def sign(group, sk, tag, msg, rng=None):
    rng = rng or _SYSRAND
    k = group.random_scalar(rng, nonzero=True)
    nonce_pk = group.exp(group.g1, k)
    e = _challenge(group, tag, nonce_pk, pubkey(group, sk), msg)
    s = (k + e * sk) % group.q
    return group.encode_element(nonce_pk) + group.encode_scalar(s)


def verify(group, pk, tag, msg, sig):
    """True iff sig is a valid, canonically encoded signature on msg.

    Malformed bytes verify as False rather than raising; protocol checks
    treat a garbled signature and a forged one the same way.
    """
    if not isinstance(sig, (bytes, bytearray)) or len(sig) != signature_bytes(group):
        return False
    try:
        nonce_pk = group.decode_element(bytes(sig[:group.element_bytes]))
        s = group.decode_scalar(bytes(sig[group.element_bytes:]))
    except GroupError:
        return False
    e = _challenge(group, tag, nonce_pk, pk, msg)
    return group.exp(group.g1, s) == group.mul(nonce_pk, group.exp(pk, e))
