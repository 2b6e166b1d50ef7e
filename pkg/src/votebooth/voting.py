"""Casting, acceptance, and the tally pipeline.

A ballot carries two ciphertexts under the joint key: the chosen option
and the credential's public key. Nothing about the ballot says whether
the credential is real. The tally sorts that out blindly: re-encrypt
and shuffle the accepted ballots, then compare each shuffled credential
ciphertext against the roll's registered ones with plaintext equality
tests. No match means a fake, one match is an ordinary voter, several
matches is a standing entity voting with its delegations' weight. Only
the surviving ballots' option ciphertexts are ever decrypted, so the
link between a decrypted choice and a ledger entry is cut by the
shuffle.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from votebooth import elgamal, encoding, schnorr, sigma
from votebooth.encoding import Ballot, digest, pack_fields
from votebooth.ledger import (
    KIND_BALLOT,
    KIND_EVENT,
    KIND_TALLY,
    REVOTE_FORBID,
    REVOTE_LAST,
    VotingEvent,
)

_SYSRAND = random.SystemRandom()

ACCEPT_REASONS = (
    "event-unknown",
    "event-not-open",
    "bad-signature",
    "bad-proof",
    "credential-not-registered",
    "duplicate-credential",
)


class VotingError(ValueError):
    pass


def standard_options(group, count):
    """Option i is encoded as g1^(i+1); the offset keeps the identity
    element out of the menu."""
    if not 1 <= count < group.q:
        raise VotingError("option count must fit the group")
    return tuple(group.exp(group.g1, i + 1) for i in range(count))


def open_event(ledger, official_sk, event_id, options, opens_at, closes_at,
               revote=REVOTE_FORBID, vote_limiting=False, rng=None):
    event = VotingEvent(event_id, tuple(options), opens_at, closes_at,
                        revote, vote_limiting)
    entry = ledger.append(KIND_EVENT, event.body(ledger.group),
                          author_sk=official_sk)
    return entry, event


def close_event(ledger, official_sk, event_id, now, rng=None):
    event = ledger.event(event_id)
    if event is None:
        raise VotingError("no event %r to close" % event_id)
    if now >= event.closes_at:
        return None  # already closed
    amended = VotingEvent(event.event_id, event.options, event.opens_at,
                          now, event.revote, event.vote_limiting)
    return ledger.append(KIND_EVENT, amended.body(ledger.group),
                         author_sk=official_sk)


def _proof_context(group, event_id, enc_vote, credential_pk):
    return pack_fields(
        event_id.encode("utf-8"),
        encoding.encode_ciphertext(group, enc_vote),
        group.encode_element(credential_pk),
    )


def cast_ballot(group, joint_pk, event, secret, option, rng=None):
    """Build a ballot with the credential secret. option is an index
    into the event's menu."""
    try:
        element = event.options[option]
    except IndexError:
        raise VotingError("no option %d in this event" % option) from None
    return cast_raw(group, joint_pk, event.event_id, secret, element, rng)


def cast_raw(group, joint_pk, event_id, secret, option_element, rng=None):
    """Ballot construction below the menu: encrypts whatever element it
    is handed. The tally rejects anything outside the menu, but nothing
    earlier can, since the choice stays encrypted until then."""
    rng = rng or _SYSRAND
    credential_pk = group.exp(group.g1, secret)
    enc_vote = elgamal.encrypt(group, joint_pk, option_element, rng)
    nonce = group.random_scalar(rng, nonzero=True)
    enc_credential = elgamal.encrypt(group, joint_pk, credential_pk, r=nonce)
    proof = sigma.nizk_prove(
        group, "ballot-link", sigma.zkp_bases(group, joint_pk),
        (enc_credential[0], enc_credential[1],
         group.div(enc_credential[2], credential_pk)),
        nonce,
        context=_proof_context(group, event_id, enc_vote, credential_pk),
        rng=rng,
    )
    sig = schnorr.sign(
        group, secret, "ballot",
        encoding.ballot_msg(group, enc_vote, enc_credential, proof,
                            event_id),
        rng,
    )
    return Ballot(enc_vote, enc_credential, proof, event_id,
                  credential_pk, sig)


def ballot_accept(group, joint_pk, event, ballot, now, ledger=None):
    """The acceptance rule, shared verbatim by submission and tally.

    Returns (True, "") or (False, reason). The ledger-dependent parts
    are skipped without one; the ledger's own append rules then enforce
    them at submission regardless.
    """
    if event is None or ballot.event_id != event.event_id:
        return False, "event-unknown"
    if not event.opens_at <= now < event.closes_at:
        return False, "event-not-open"
    if not schnorr.verify(
        group, ballot.credential_pk, "ballot",
        encoding.ballot_msg(group, ballot.enc_vote, ballot.enc_credential,
                            ballot.proof, ballot.event_id),
        ballot.sig,
    ):
        return False, "bad-signature"
    if not sigma.nizk_verify(
        group, "ballot-link", sigma.zkp_bases(group, joint_pk),
        (ballot.enc_credential[0], ballot.enc_credential[1],
         group.div(ballot.enc_credential[2], ballot.credential_pk)),
        ballot.proof,
        context=_proof_context(group, ballot.event_id, ballot.enc_vote,
                               ballot.credential_pk),
    ):
        return False, "bad-proof"
    if ledger is not None:
        encoded = group.encode_element(ballot.credential_pk)
        if event.vote_limiting and encoded not in ledger.registered_credentials():
            return False, "credential-not-registered"
        if event.revote == REVOTE_FORBID:
            for _idx, prior in ledger.ballots(event.event_id):
                if prior.credential_pk == ballot.credential_pk:
                    return False, "duplicate-credential"
    return True, ""


def submit_ballot(ledger, joint_pk, ballot, secret, now):
    """Accept and append. The ledger entry is signed by the credential
    itself, so only the secret's holder can submit."""
    event = ledger.event(ballot.event_id)
    ok, reason = ballot_accept(ledger.group, joint_pk, event, ballot, now,
                               ledger)
    if not ok:
        raise VotingError("ballot rejected: %s" % reason)
    body = encoding.encode_ballot(ledger.group, ballot)
    return ledger.append(KIND_BALLOT, body, author_sk=secret)


# ---------------------------------------------------------------------------
# Tally


@dataclass(frozen=True)
class TallyResult:
    event_id: str
    counts: dict       # option index -> accumulated weight
    cast: int          # ballots found on the ledger
    tallied: int       # ballots that survived every filter
    discarded: tuple   # (entry index, reason) from the pre-shuffle re-check
    unmatched: int     # shuffled ballots matching no registration (fakes)
    invalid: int       # decrypted to something off the menu
    standing: int      # ballots that carried weight two or more
    artifact: dict
    entry_index: int


def tally(ledger, params, shares, tallier_sk, event_id, now, rng=None):
    """Run the full pipeline for one closed event and post the artifact.

    shares must hold at least the threshold of tallier key shares; the
    partial decryptions carry proofs checked against the published
    share verification keys, so a corrupted share cannot skew the count
    quietly.
    """
    rng = rng or _SYSRAND
    group = ledger.group
    n, t = params.threshold
    event = ledger.event(event_id)
    if event is None:
        raise VotingError("no event %r" % event_id)
    if now < event.closes_at:
        raise VotingError("event %r is still open" % event_id)
    if len(shares) < t:
        raise VotingError("need %d shares, have %d" % (t, len(shares)))

    entries = ledger.ballots(event_id)
    cast = len(entries)

    # re-check every ballot against the acceptance rule as of closing
    discarded = []
    accepted = []
    for idx, ballot in entries:
        ok, reason = ballot_accept(group, params.joint_pk, event, ballot,
                                   min(now, event.closes_at - 1))
        if not ok:
            discarded.append((idx, reason))
            continue
        if event.vote_limiting:
            encoded = group.encode_element(ballot.credential_pk)
            if encoded not in ledger.registered_credentials():
                discarded.append((idx, "credential-not-registered"))
                continue
        accepted.append((idx, ballot))

    # revote policy: under last-counts only the newest ballot per
    # credential stands; forbid was enforced at append, re-checked here
    by_credential = {}
    for idx, ballot in accepted:
        key = group.encode_element(ballot.credential_pk)
        if key in by_credential:
            prev_idx, _ = by_credential[key]
            if event.revote == REVOTE_FORBID:
                discarded.append((idx, "duplicate-credential"))
                continue
            by_credential[key] = (idx, ballot)
            discarded.append((prev_idx, "superseded"))
        else:
            by_credential[key] = (idx, ballot)
    standing_pool = sorted(by_credential.values(), key=lambda pair: pair[0])

    ballots_digest = digest(b"".join(
        encoding.encode_ballot(group, b) for _, b in standing_pool
    ))

    # blind the pool: fresh encryption factors, then a secret permutation
    shuffled = []
    for _idx, ballot in standing_pool:
        shuffled.append((
            elgamal.reencrypt(group, params.joint_pk, ballot.enc_vote, rng),
            elgamal.reencrypt(group, params.joint_pk, ballot.enc_credential, rng),
        ))
    rng.shuffle(shuffled)
    shuffle_digest = digest(b"".join(
        encoding.encode_ciphertext(group, ev) + encoding.encode_ciphertext(group, ec)
        for ev, ec in shuffled
    ))

    registered = [
        rec.enc_credential
        for _voter, (_idx, rec) in sorted(ledger.registrations().items())
    ]

    vks = params.share_vks or None
    counts = {}
    unmatched = invalid = standing = tallied = 0
    option_index = {opt: i for i, opt in enumerate(event.options)}
    for enc_vote, enc_credential in shuffled:
        weight = 0
        for reg_ct in registered:
            result = elgamal.pet_test(group, t, enc_credential, reg_ct,
                                      shares, rng, attach_proofs=True,
                                      share_vks=vks)
            if result.equal:
                weight += 1
        if weight == 0:
            unmatched += 1
            continue
        if weight >= 2:
            standing += 1
        option = elgamal.threshold_decrypt(group, t, enc_vote, shares,
                                           attach_proofs=True, share_vks=vks,
                                           rng=rng)
        idx = option_index.get(option)
        if idx is None:
            invalid += 1
            continue
        counts[idx] = counts.get(idx, 0) + weight
        tallied += 1

    reasons = {}
    for _idx, reason in discarded:
        reasons[reason] = reasons.get(reason, 0) + 1
    artifact = {
        "event_id": event_id,
        "counts": {str(i): counts[i] for i in sorted(counts)},
        "cast": cast,
        "tallied": tallied,
        "discarded": {k: reasons[k] for k in sorted(reasons)},
        "unmatched": unmatched,
        "invalid": invalid,
        "standing": standing,
        "registrations": len(registered),
        "ballots_digest": encoding.to_base64(ballots_digest),
        "shuffle_digest": encoding.to_base64(shuffle_digest),
    }
    entry = ledger.append(KIND_TALLY, encoding.canonical_json(artifact),
                          author_sk=tallier_sk)
    return TallyResult(
        event_id, counts, cast, tallied, tuple(sorted(discarded)),
        unmatched, invalid, standing, artifact, entry.index,
    )
