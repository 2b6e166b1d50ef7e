"""Two-generator ElGamal with distributed keys.

The joint public key is A = g1^sk1 * g2^sk2 where neither secret exists
in one place: each tallier deals a random pair of Shamir polynomials
(Feldman-committed so receivers can verify their shares) and the column
sums become the share vector. Encryption is (g1^r, g2^r, A^r * m);
raising the first two components to the two secrets reproduces A^r, so
any t talliers can decrypt by Lagrange recombination in the exponent.

Decryption shares optionally carry representation proofs against the
published share verification keys, and the plaintext equivalence test
chains per-tallier blinding exponents so two ciphertexts can be compared
without decrypting either.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from votebooth import sigma
from votebooth.encoding import pack_fields
from votebooth.groups import GroupError

_SYSRAND = random.SystemRandom()


class ThresholdError(ValueError):
    """Share bookkeeping problems: too few, duplicated, or mismatched."""


@dataclass(frozen=True)
class TallierShare:
    index: int
    s1: int
    s2: int


@dataclass
class TallierKeyMaterial:
    """Everything the tallier quorum holds after key generation.

    share_vks[i] = g1^s1_i * g2^s2_i, publishable; the share secrets
    themselves stay with their tallier (here: in this object, because
    the package plays all roles in one process).
    """

    group: object
    n: int
    t: int
    joint_pk: object
    shares: list = field(default_factory=list)
    share_vks: dict = field(default_factory=dict)

    def subset(self, indices):
        by_index = {s.index: s for s in self.shares}
        try:
            return [by_index[i] for i in indices]
        except KeyError as exc:
            raise ThresholdError("no share with index %s" % exc) from None


def _poly_eval(q, coeffs, x):
    acc = 0
    for c in reversed(coeffs):
        acc = (acc * x + c) % q
    return acc


def _lagrange_weights(q, indices):
    weights = {}
    for j in indices:
        num, den = 1, 1
        for i in indices:
            if i == j:
                continue
            num = num * i % q
            den = den * (i - j) % q
        weights[j] = num * pow(den, -1, q) % q
    return weights


def dkg_keygen(group, n, t, rng=None):
    """Joint Feldman-style generation of TallierKeyMaterial.

    Retries from scratch in the (q^-1 probability) event that the
    contributions cancel to the identity, which would leave no usable
    public key.
    """
    if not 1 <= t <= n:
        raise ThresholdError("need 1 <= t <= n, got t=%d n=%d" % (t, n))
    rng = rng or _SYSRAND
    while True:
        commitments = []  # per dealer: [g1^a_k * g2^b_k for k < t]
        dealt = []        # per dealer: {j: (f1(j), f2(j))}
        for _dealer in range(n):
            poly1 = [group.random_scalar(rng) for _ in range(t)]
            poly2 = [group.random_scalar(rng) for _ in range(t)]
            commitments.append([
                group.mul(group.exp(group.g1, a), group.exp(group.g2, b))
                for a, b in zip(poly1, poly2)
            ])
            dealt.append({
                j: (_poly_eval(group.q, poly1, j), _poly_eval(group.q, poly2, j))
                for j in range(1, n + 1)
            })

        def expected_vk(dealer, j):
            acc = group.identity
            jk = 1
            for k in range(t):
                acc = group.mul(acc, group.exp(commitments[dealer][k], jk))
                jk = jk * j % group.q
            return acc

        shares = []
        share_vks = {}
        for j in range(1, n + 1):
            s1 = s2 = 0
            vk = group.identity
            for dealer in range(n):
                f1, f2 = dealt[dealer][j]
                piece = group.mul(group.exp(group.g1, f1), group.exp(group.g2, f2))
                if piece != expected_vk(dealer, j):
                    raise ThresholdError(
                        "dealer %d sent tallier %d a bad share" % (dealer, j)
                    )
                s1 = (s1 + f1) % group.q
                s2 = (s2 + f2) % group.q
                vk = group.mul(vk, piece)
            shares.append(TallierShare(j, s1, s2))
            share_vks[j] = vk

        joint_pk = group.identity
        for dealer in range(n):
            joint_pk = group.mul(joint_pk, commitments[dealer][0])
        if joint_pk == group.identity:
            continue
        return TallierKeyMaterial(group, n, t, joint_pk, shares, share_vks)


def share_secrets(group, sk1, sk2, n, t, rng=None):
    """Shamir-split two known secrets. For fixtures and worked examples;
    real deployments use dkg_keygen so the secrets never exist whole."""
    if not 1 <= t <= n:
        raise ThresholdError("need 1 <= t <= n, got t=%d n=%d" % (t, n))
    rng = rng or _SYSRAND
    poly1 = [sk1 % group.q] + [group.random_scalar(rng) for _ in range(t - 1)]
    poly2 = [sk2 % group.q] + [group.random_scalar(rng) for _ in range(t - 1)]
    shares = []
    share_vks = {}
    for j in range(1, n + 1):
        s1 = _poly_eval(group.q, poly1, j)
        s2 = _poly_eval(group.q, poly2, j)
        shares.append(TallierShare(j, s1, s2))
        share_vks[j] = group.mul(group.exp(group.g1, s1), group.exp(group.g2, s2))
    joint_pk = group.mul(group.exp(group.g1, sk1), group.exp(group.g2, sk2))
    if joint_pk == group.identity:
        raise ThresholdError("secrets cancel to the identity")
    return TallierKeyMaterial(group, n, t, joint_pk, shares, share_vks)


def encrypt(group, joint_pk, message, rng=None, r=None):
    if not group.is_member(message):
        raise GroupError("message is not a group element")
    if r is None:
        r = group.random_scalar(rng, nonzero=True)
    r %= group.q
    if r == 0:
        raise GroupError("zero encryption randomness is degenerate")
    return (
        group.exp(group.g1, r),
        group.exp(group.g2, r),
        group.mul(group.exp(joint_pk, r), message),
    )


def reencrypt(group, joint_pk, ct, rng=None, r=None):
    """Multiply in a fresh encryption of the identity."""
    mask = encrypt(group, joint_pk, group.identity, rng=rng, r=r)
    return tuple(group.mul(a, b) for a, b in zip(ct, mask))


@dataclass(frozen=True)
class PartialDecryption:
    index: int
    value: object
    proof: object = None


def _share_proof_context(group, ct):
    return pack_fields(*[group.encode_element(e) for e in ct])


def partial_decrypt(group, share, ct, attach_proof=False, rng=None):
    c1, c2, _ = ct
    value = group.mul(group.exp(c1, share.s1), group.exp(c2, share.s2))
    proof = None
    if attach_proof:
        vk = group.mul(
            group.exp(group.g1, share.s1), group.exp(group.g2, share.s2)
        )
        proof = sigma.rep_prove(
            group,
            "share",
            (group.g1, group.g2),
            (c1, c2),
            (vk, value),
            (share.s1, share.s2),
            context=_share_proof_context(group, ct),
            rng=rng,
        )
    return PartialDecryption(share.index, value, proof)


def verify_partial(group, ct, partial, vk):
    if partial.proof is None:
        return False
    c1, c2, _ = ct
    return sigma.rep_verify(
        group,
        "share",
        (group.g1, group.g2),
        (c1, c2),
        (vk, partial.value),
        partial.proof,
        context=_share_proof_context(group, ct),
    )


def combine_partials(group, t, ct, partials, share_vks=None):
    indices = [p.index for p in partials]
    if len(set(indices)) != len(indices):
        raise ThresholdError("duplicate share index")
    if len(indices) < t:
        raise ThresholdError("need %d shares, got %d" % (t, len(indices)))
    if share_vks is not None:
        for p in partials:
            if not verify_partial(group, ct, p, share_vks[p.index]):
                raise sigma.ProofError(
                    "decryption share %d failed verification" % p.index
                )
    weights = _lagrange_weights(group.q, indices)
    blind = group.identity
    for p in partials:
        blind = group.mul(blind, group.exp(p.value, weights[p.index]))
    return group.div(ct[2], blind)


def threshold_decrypt(group, t, ct, shares, attach_proofs=False,
                      share_vks=None, rng=None):
    """Decrypt with an explicit share subset (any >= t of the n)."""
    partials = [
        partial_decrypt(group, s, ct, attach_proof=attach_proofs, rng=rng)
        for s in shares
    ]
    vks = share_vks if attach_proofs else None
    return combine_partials(group, t, ct, partials, share_vks=vks)


# ---------------------------------------------------------------------------
# Plaintext equivalence test


@dataclass(frozen=True)
class PetResult:
    equal: bool
    blind_steps: list
    partials: list

    def __bool__(self):
        return self.equal


def pet_test(group, t, ct_a, ct_b, shares, rng=None, attach_proofs=False,
             share_vks=None):
    """Do two ciphertexts hide the same plaintext?

    The quotient ciphertext is raised to each participating tallier's
    fresh non-zero exponent in turn (a product of non-zero scalars mod a
    prime stays non-zero, so the result is the identity exactly when the
    plaintexts match: no false positives even in the tiny test group),
    then threshold-decrypted by the same subset. With attach_proofs each
    blinding step carries an equal-exponent proof over the previous
    triple and each decryption share carries its representation proof.
    """
    rng = rng or _SYSRAND
    if len(shares) < t:
        raise ThresholdError("need %d shares, got %d" % (t, len(shares)))
    current = tuple(group.div(a, b) for a, b in zip(ct_a, ct_b))
    steps = []
    for share in shares:
        z = group.random_scalar(rng, nonzero=True)
        blinded = tuple(group.exp(c, z) for c in current)
        proof = None
        if attach_proofs:
            proof = sigma.nizk_prove(
                group, "pet-blind", current, blinded, z, rng=rng
            )
        steps.append((share.index, current, blinded, proof))
        current = blinded
    partials = [
        partial_decrypt(group, s, current, attach_proof=attach_proofs, rng=rng)
        for s in shares
    ]
    vks = share_vks if attach_proofs else None
    plain = combine_partials(group, t, current, partials, share_vks=vks)
    return PetResult(plain == group.identity, steps, partials)


def verify_pet_steps(group, result):
    """Audit the blinding chain of a proved PET run."""
    for _index, before, after, proof in result.blind_steps:
        if proof is None:
            return False
        if not sigma.nizk_verify(group, "pet-blind", before, after, proof):
            return False
    return True
