"""Canonical byte codecs for every wire payload.

Layout rules, applied uniformly:

* group elements and scalars are fixed-length big-endian (the group
  decides the width; compressed points for the curve profile)
* composite payloads are a version/type tag byte followed by
  length-prefixed fields (2-byte big-endian lengths), in the same order
  the ceremony figures print them
* ciphertexts and proof commits are three elements glued into one field
* decoding is strict: unknown tags, trailing bytes, wrong field counts,
  non-canonical elements or scalars all raise CodecError

Payloads cross a printer and a phone camera as QR codes, so there is a
base64 text form, but correctness is defined on the bytes.
"""

from __future__ import annotations

import base64
import hashlib
import json
from dataclasses import dataclass

from votebooth.groups import GroupError


class CodecError(ValueError):
    """Payload bytes that do not parse or are not canonical."""


def digest(data):
    """SHA-256. The one hash used everywhere."""
    return hashlib.sha256(data).digest()


def tagged_digest(tag, data):
    """Domain-separated hash: sha256(sha256(tag) || sha256(tag) || data)."""
    tag_hash = hashlib.sha256(tag.encode()).digest()
    return hashlib.sha256(tag_hash + tag_hash + data).digest()


def pack_fields(*fields):
    out = bytearray()
    for f in fields:
        if len(f) > 0xFFFF:
            raise CodecError("field too long")
        out += len(f).to_bytes(2, "big")
        out += f
    return bytes(out)


def unpack_fields(data, count):
    fields = []
    pos = 0
    for _ in range(count):
        if pos + 2 > len(data):
            raise CodecError("truncated field header")
        n = int.from_bytes(data[pos:pos + 2], "big")
        pos += 2
        if pos + n > len(data):
            raise CodecError("truncated field body")
        fields.append(data[pos:pos + n])
        pos += n
    if pos != len(data):
        raise CodecError("trailing bytes after last field")
    return fields


# Payload tags. High nibble is the format version.
TAG_TICKET = 0x11
TAG_ENVELOPE = 0x12
TAG_COMMIT_RECEIPT = 0x13
TAG_TRANSPORT_RECEIPT = 0x14
TAG_CREDENTIAL_RECEIPT = 0x15
TAG_BALLOT = 0x16
TAG_REGISTRATION = 0x17
TAG_CONSUMPTION = 0x18
TAG_CREDENTIAL_REG = 0x19
TAG_ENVELOPE_ISSUED = 0x1A


def _frame(tag, *fields):
    return bytes([tag]) + pack_fields(*fields)


def _unframe(tag, data, count):
    if not data:
        raise CodecError("empty payload")
    if data[0] != tag:
        raise CodecError("expected tag 0x%02x, got 0x%02x" % (tag, data[0]))
    return unpack_fields(data[1:], count)


def to_base64(data):
    return base64.b64encode(data).decode("ascii")


def from_base64(text):
    try:
        return base64.b64decode(text, validate=True)
    except Exception as exc:
        raise CodecError("bad base64: %s" % exc) from None


def canonical_json(obj):
    """Stable JSON bytes: sorted keys, no whitespace."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


# ---------------------------------------------------------------------------
# Leaf encodings


def encode_timestamp(d):
    if not 0 <= d < 2**64:
        raise CodecError("timestamp out of range")
    return int(d).to_bytes(8, "big")


def decode_timestamp(data):
    if len(data) != 8:
        raise CodecError("timestamp must be 8 bytes")
    return int.from_bytes(data, "big")


def encode_voter_id(voter_id):
    if not voter_id:
        raise CodecError("empty voter id")
    return voter_id.encode("utf-8")


def decode_voter_id(data):
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CodecError("voter id is not utf-8: %s" % exc) from None
    if not text:
        raise CodecError("empty voter id")
    return text


def encode_ciphertext(group, ct):
    c1, c2, c3 = ct
    return (
        group.encode_element(c1)
        + group.encode_element(c2)
        + group.encode_element(c3)
    )


def decode_ciphertext(group, data):
    n = group.element_bytes
    if len(data) != 3 * n:
        raise CodecError("ciphertext must be %d bytes" % (3 * n))
    try:
        return tuple(group.decode_element(data[i * n:(i + 1) * n]) for i in range(3))
    except GroupError as exc:
        raise CodecError(str(exc)) from None


# proof commits share the 3-element shape with ciphertexts
encode_commit = encode_ciphertext
decode_commit = decode_ciphertext


def _element(group, data):
    try:
        return group.decode_element(data)
    except GroupError as exc:
        raise CodecError(str(exc)) from None


def _scalar(group, data):
    try:
        return group.decode_scalar(data)
    except GroupError as exc:
        raise CodecError(str(exc)) from None


def absent_scalar(group):
    """Filler for an omitted private key: scalar-width, never canonical."""
    return b"\xff" * group.scalar_bytes


def challenge_scalar(group, challenge):
    """Reduce an envelope challenge nonce to a proof challenge."""
    if len(challenge) != group.challenge_bytes:
        raise CodecError("challenge must be %d bytes" % group.challenge_bytes)
    return int.from_bytes(challenge, "big") % group.q


def encode_transcript(group, transcript):
    commit, challenge, response = transcript
    return pack_fields(
        encode_commit(group, commit),
        group.encode_scalar(challenge),
        group.encode_scalar(response),
    )


def decode_transcript(group, data):
    commit_b, c_b, r_b = unpack_fields(data, 3)
    return (decode_commit(group, commit_b), _scalar(group, c_b), _scalar(group, r_b))


# ---------------------------------------------------------------------------
# Wire payloads, field order exactly as printed


@dataclass(frozen=True)
class CheckinTicket:
    voter_id: str
    issued_at: int
    official_pk: object
    sig: bytes


def encode_ticket(group, ticket):
    return _frame(
        TAG_TICKET,
        encode_voter_id(ticket.voter_id),
        encode_timestamp(ticket.issued_at),
        group.encode_element(ticket.official_pk),
        ticket.sig,
    )


def decode_ticket(group, data):
    vid, d, pk, sig = _unframe(TAG_TICKET, data, 4)
    return CheckinTicket(
        decode_voter_id(vid), decode_timestamp(d), _element(group, pk), bytes(sig)
    )


@dataclass(frozen=True)
class Envelope:
    printer_pk: object
    challenge: bytes
    sig: bytes


def encode_envelope(group, env):
    if len(env.challenge) != group.challenge_bytes:
        raise CodecError("challenge must be %d bytes" % group.challenge_bytes)
    return _frame(
        TAG_ENVELOPE,
        group.encode_element(env.printer_pk),
        env.challenge,
        env.sig,
    )


def decode_envelope(group, data):
    pk, c, sig = _unframe(TAG_ENVELOPE, data, 3)
    if len(c) != group.challenge_bytes:
        raise CodecError("challenge must be %d bytes" % group.challenge_bytes)
    return Envelope(_element(group, pk), bytes(c), bytes(sig))


@dataclass(frozen=True)
class IssuedEnvelope:
    """Public face of an envelope: the challenge appears only hashed."""

    printer_pk: object
    challenge_hash: bytes
    sig: bytes


def encode_issued_envelope(group, rec):
    if len(rec.challenge_hash) != 32:
        raise CodecError("challenge hash must be 32 bytes")
    return _frame(
        TAG_ENVELOPE_ISSUED,
        group.encode_element(rec.printer_pk),
        rec.challenge_hash,
        rec.sig,
    )


def decode_issued_envelope(group, data):
    pk, h, sig = _unframe(TAG_ENVELOPE_ISSUED, data, 3)
    if len(h) != 32:
        raise CodecError("challenge hash must be 32 bytes")
    return IssuedEnvelope(_element(group, pk), bytes(h), bytes(sig))


@dataclass(frozen=True)
class CommitReceipt:
    """First printed QR: encrypted credential and proof commit."""

    enc_credential: tuple
    commit: tuple
    sig: bytes


def encode_commit_receipt(group, rec):
    return _frame(
        TAG_COMMIT_RECEIPT,
        encode_ciphertext(group, rec.enc_credential),
        encode_commit(group, rec.commit),
        rec.sig,
    )


def decode_commit_receipt(group, data):
    ve, yc, sig = _unframe(TAG_COMMIT_RECEIPT, data, 3)
    return CommitReceipt(
        decode_ciphertext(group, ve), decode_commit(group, yc), bytes(sig)
    )


@dataclass(frozen=True)
class TransportReceipt:
    """Middle QR, shown at check-out; identical for real and fake bundles."""

    voter_id: str
    issued_at: int
    enc_credential: tuple
    kiosk_pk: object
    sig: bytes


def encode_transport_receipt(group, rec):
    return _frame(
        TAG_TRANSPORT_RECEIPT,
        encode_voter_id(rec.voter_id),
        encode_timestamp(rec.issued_at),
        encode_ciphertext(group, rec.enc_credential),
        group.encode_element(rec.kiosk_pk),
        rec.sig,
    )


def decode_transport_receipt(group, data):
    vid, d, ve, k, sig = _unframe(TAG_TRANSPORT_RECEIPT, data, 5)
    return TransportReceipt(
        decode_voter_id(vid),
        decode_timestamp(d),
        decode_ciphertext(group, ve),
        _element(group, k),
        bytes(sig),
    )


@dataclass(frozen=True)
class CredentialReceipt:
    """Last printed QR. secret is None for standing delegations."""

    voter_id: str
    issued_at: int
    secret: object
    response: int
    kiosk_pk: object
    sig: bytes


def encode_credential_receipt(group, rec):
    if rec.secret is None:
        secret_b = absent_scalar(group)
    else:
        secret_b = group.encode_scalar(rec.secret)
    return _frame(
        TAG_CREDENTIAL_RECEIPT,
        encode_voter_id(rec.voter_id),
        encode_timestamp(rec.issued_at),
        secret_b,
        group.encode_scalar(rec.response),
        group.encode_element(rec.kiosk_pk),
        rec.sig,
    )


def decode_credential_receipt(group, data):
    vid, d, v_b, r_b, k, sig = _unframe(TAG_CREDENTIAL_RECEIPT, data, 6)
    if v_b == absent_scalar(group):
        secret = None
    else:
        secret = _scalar(group, v_b)
    return CredentialReceipt(
        decode_voter_id(vid),
        decode_timestamp(d),
        secret,
        _scalar(group, r_b),
        _element(group, k),
        bytes(sig),
    )


@dataclass(frozen=True)
class Ballot:
    enc_vote: tuple
    enc_credential: tuple
    proof: tuple
    event_id: str
    credential_pk: object
    sig: bytes


def encode_ballot(group, ballot):
    return _frame(
        TAG_BALLOT,
        encode_ciphertext(group, ballot.enc_vote),
        encode_ciphertext(group, ballot.enc_credential),
        encode_transcript(group, ballot.proof),
        ballot.event_id.encode("utf-8"),
        group.encode_element(ballot.credential_pk),
        ballot.sig,
    )


def decode_ballot(group, data):
    e1, e2, pf, ev, v, sig = _unframe(TAG_BALLOT, data, 6)
    return Ballot(
        decode_ciphertext(group, e1),
        decode_ciphertext(group, e2),
        decode_transcript(group, pf),
        decode_voter_id(ev),
        _element(group, v),
        bytes(sig),
    )


@dataclass(frozen=True)
class RegistrationRecord:
    """Check-out ledger body: the session a voter can later be held to."""

    voter_id: str
    issued_at: int
    enc_credential: tuple
    kiosk_pk: object
    kiosk_sig: bytes
    official_pk: object
    official_sig: bytes


def encode_registration(group, rec):
    return _frame(
        TAG_REGISTRATION,
        encode_voter_id(rec.voter_id),
        encode_timestamp(rec.issued_at),
        encode_ciphertext(group, rec.enc_credential),
        group.encode_element(rec.kiosk_pk),
        rec.kiosk_sig,
        group.encode_element(rec.official_pk),
        rec.official_sig,
    )


def decode_registration(group, data):
    vid, d, ve, k, ks, r, rs = _unframe(TAG_REGISTRATION, data, 7)
    return RegistrationRecord(
        decode_voter_id(vid),
        decode_timestamp(d),
        decode_ciphertext(group, ve),
        _element(group, k),
        bytes(ks),
        _element(group, r),
        bytes(rs),
    )


@dataclass(frozen=True)
class ConsumptionRecord:
    """Reveals a spent envelope challenge so a second use is visible."""

    challenge: bytes


def encode_consumption(group, rec):
    if len(rec.challenge) != group.challenge_bytes:
        raise CodecError("challenge must be %d bytes" % group.challenge_bytes)
    return _frame(TAG_CONSUMPTION, rec.challenge)


def decode_consumption(group, data):
    (c,) = _unframe(TAG_CONSUMPTION, data, 1)
    if len(c) != group.challenge_bytes:
        raise CodecError("challenge must be %d bytes" % group.challenge_bytes)
    return ConsumptionRecord(bytes(c))


@dataclass(frozen=True)
class CredentialRegistration:
    """Vote-limiting entry: kiosk-endorsed credential key plus binding hash."""

    kiosk_pk: object
    credential_pk: object
    kiosk_sig: bytes
    bind_hash: bytes


def encode_credential_registration(group, rec):
    if len(rec.bind_hash) != 32:
        raise CodecError("bind hash must be 32 bytes")
    return _frame(
        TAG_CREDENTIAL_REG,
        group.encode_element(rec.kiosk_pk),
        group.encode_element(rec.credential_pk),
        rec.kiosk_sig,
        rec.bind_hash,
    )


def decode_credential_registration(group, data):
    k, v, sig, h = _unframe(TAG_CREDENTIAL_REG, data, 4)
    if len(h) != 32:
        raise CodecError("bind hash must be 32 bytes")
    return CredentialRegistration(
        _element(group, k), _element(group, v), bytes(sig), bytes(h)
    )


# ---------------------------------------------------------------------------
# Signature messages. Every signature in the scheme signs one of these,
# so the exact covered bytes live in one place.


def ticket_msg(group, voter_id, issued_at):
    return pack_fields(encode_voter_id(voter_id), encode_timestamp(issued_at))


def envelope_msg(challenge_hash):
    return pack_fields(challenge_hash)


def commit_msg(group, voter_id, issued_at, enc_credential, commit):
    return pack_fields(
        encode_voter_id(voter_id),
        encode_timestamp(issued_at),
        encode_ciphertext(group, enc_credential),
        encode_commit(group, commit),
    )


def transport_msg(group, voter_id, issued_at, enc_credential):
    return pack_fields(
        encode_voter_id(voter_id),
        encode_timestamp(issued_at),
        encode_ciphertext(group, enc_credential),
    )


def credential_bind_hash(group, voter_id, issued_at, enc_credential, secret_bytes,
                         commit, challenge, response):
    """The hash inside the kiosk's last signature, binding the whole run."""
    return digest(pack_fields(
        encode_voter_id(voter_id),
        encode_timestamp(issued_at),
        encode_ciphertext(group, enc_credential),
        secret_bytes,
        encode_commit(group, commit),
        challenge,
        group.encode_scalar(response),
    ))


def credential_msg(group, credential_pk, bind_hash):
    return pack_fields(group.encode_element(credential_pk), bind_hash)


def checkout_msg(group, voter_id, issued_at, enc_credential, kiosk_sig):
    return pack_fields(
        encode_voter_id(voter_id),
        encode_timestamp(issued_at),
        encode_ciphertext(group, enc_credential),
        kiosk_sig,
    )


def ballot_msg(group, enc_vote, enc_credential, proof, event_id):
    return pack_fields(
        encode_ciphertext(group, enc_vote),
        encode_ciphertext(group, enc_credential),
        encode_transcript(group, proof),
        event_id.encode("utf-8"),
    )
