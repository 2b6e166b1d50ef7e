"""Sigma protocols for equal discrete logs, honest and challenge-first.

The workhorse statement has one witness x and three bases (b1, b2, b3)
with publics (u1, u2, u3), claiming u_i = b_i^x for all three. The booth
runs it interactively, in both directions:

* honest: commit first (b1^y, b2^y, b3^y), answer a later challenge c
  with r = y - c*x
* simulated: with c already known, publish (b1^y * u1^c, b2^y * u2^c,
  b3^y * u3^c) as the commit and r = y as the response

Both transcripts satisfy the same verification equations, which is the
entire point: a transcript proves nothing about when the challenge was
learned, only the physical print order does.

A transcript is ((Y1, Y2, Y3), c, r). There is also a two-witness
variant for decryption-share correctness, and a Fiat-Shamir reduction
for the non-interactive uses (ballots, tally audit). The Fiat-Shamir
form never appears in booth ceremonies.
"""

from __future__ import annotations

import random

from votebooth.encoding import pack_fields, tagged_digest

_SYSRAND = random.SystemRandom()


class ProofError(ValueError):
    pass


def fiat_shamir_challenge(group, tag, data):
    """Deterministic challenge scalar from a transcript prefix."""
    h = tagged_digest("votebooth/fs/" + tag, data)
    return int.from_bytes(h, "big") % group.q


class ProverState:
    """One pending interactive proof. Single use: the commit nonce must
    never answer two different challenges, or the witness leaks (that
    leak is exactly what the extraction test exercises)."""

    __slots__ = ("_q", "_x", "_y", "_used")

    def __init__(self, q, x, y):
        self._q = q
        self._x = x
        self._y = y
        self._used = False

    def respond(self, challenge):
        if self._used:
            raise ProofError("prover state already consumed")
        self._used = True
        return (self._y - challenge * self._x) % self._q


def dleq_commit(group, bases, witness, rng=None):
    rng = rng or _SYSRAND
    y = group.random_scalar(rng)
    commit = tuple(group.exp(b, y) for b in bases)
    return ProverState(group.q, witness, y), commit


def dleq_verify(group, bases, publics, transcript):
    commit, challenge, response = transcript
    if len(commit) != 3:
        return False
    for got, base, public in zip(commit, bases, publics):
        if got != group.mul(group.exp(base, response), group.exp(public, challenge)):
            return False
    return True


def dleq_simulate(group, bases, publics, challenge, rng=None):
    rng = rng or _SYSRAND
    y = group.random_scalar(rng)
    commit = tuple(
        group.mul(group.exp(b, y), group.exp(u, challenge))
        for b, u in zip(bases, publics)
    )
    return (commit, challenge, y)


# The booth statement: the encrypted credential's first two components
# and the quotient share one exponent under (g1, g2, A).

def zkp_bases(group, joint_pk):
    return (group.g1, group.g2, joint_pk)


def zkp_commit(group, joint_pk, x, rng=None):
    return dleq_commit(group, zkp_bases(group, joint_pk), x, rng)


def zkp_verify(group, joint_pk, c1, c2, x_pub, transcript):
    return dleq_verify(group, zkp_bases(group, joint_pk), (c1, c2, x_pub), transcript)


def zkp_simulate(group, joint_pk, c1, c2, x_pub, challenge, rng=None):
    return dleq_simulate(
        group, zkp_bases(group, joint_pk), (c1, c2, x_pub), challenge, rng
    )


def extract_witness(group, transcript_a, transcript_b):
    """Recover x from two accepting transcripts that reuse a commit.

    Special soundness, run in anger: r1 - r2 = (c2 - c1) * x.
    """
    commit_a, c_a, r_a = transcript_a
    commit_b, c_b, r_b = transcript_b
    if commit_a != commit_b:
        raise ProofError("transcripts do not share a commit")
    if c_a == c_b:
        raise ProofError("challenges are equal, nothing to extract")
    inv = pow(c_b - c_a, -1, group.q)
    return (r_a - r_b) * inv % group.q


# ---------------------------------------------------------------------------
# Non-interactive wrappers


def _fs_context(group, bases, publics, commit, context):
    parts = [group.encode_element(e) for e in bases]
    parts += [group.encode_element(e) for e in publics]
    parts += [group.encode_element(e) for e in commit]
    parts.append(context)
    return pack_fields(*parts)


def nizk_prove(group, tag, bases, publics, witness, context=b"", rng=None):
    state, commit = dleq_commit(group, bases, witness, rng)
    challenge = fiat_shamir_challenge(
        group, tag, _fs_context(group, bases, publics, commit, context)
    )
    return (commit, challenge, state.respond(challenge))


def nizk_verify(group, tag, bases, publics, transcript, context=b""):
    commit, challenge, _ = transcript
    expected = fiat_shamir_challenge(
        group, tag, _fs_context(group, bases, publics, commit, context)
    )
    if challenge != expected:
        return False
    return dleq_verify(group, bases, publics, transcript)


# ---------------------------------------------------------------------------
# Two-witness representation proof.
#
# Statement: publics (U, D) satisfy U = p1^a * p2^b and D = q1^a * q2^b
# for the same (a, b). Used by talliers to show a decryption share D was
# built from the committed key share U without revealing (a, b).


def rep_prove(group, tag, base_pair_u, base_pair_d, publics, witnesses,
              context=b"", rng=None):
    rng = rng or _SYSRAND
    a, b = witnesses
    wa = group.random_scalar(rng)
    wb = group.random_scalar(rng)
    p1, p2 = base_pair_u
    q1, q2 = base_pair_d
    t1 = group.mul(group.exp(p1, wa), group.exp(p2, wb))
    t2 = group.mul(group.exp(q1, wa), group.exp(q2, wb))
    data = _fs_context(
        group, base_pair_u + base_pair_d, publics, (t1, t2), context
    )
    c = fiat_shamir_challenge(group, tag, data)
    return ((t1, t2), c, ((wa - c * a) % group.q, (wb - c * b) % group.q))


def rep_verify(group, tag, base_pair_u, base_pair_d, publics, transcript,
               context=b""):
    (t1, t2), c, (ra, rb) = transcript
    data = _fs_context(
        group, base_pair_u + base_pair_d, publics, (t1, t2), context
    )
    if c != fiat_shamir_challenge(group, tag, data):
        return False
    u, d = publics
    p1, p2 = base_pair_u
    q1, q2 = base_pair_d
    lhs1 = group.mul(group.mul(group.exp(p1, ra), group.exp(p2, rb)), group.exp(u, c))
    lhs2 = group.mul(group.mul(group.exp(q1, ra), group.exp(q2, rb)), group.exp(d, c))
    return t1 == lhs1 and t2 == lhs2
