"""Ledger admission rules, persistence, and audit localization."""

import pytest

from votebooth import encoding, protocol, schnorr
from votebooth.encoding import ConsumptionRecord, digest
from votebooth.ledger import (
    KIND_BALLOT,
    KIND_CONSUMPTION,
    KIND_ENVELOPE,
    KIND_EVENT,
    KIND_KEY_BINDING,
    KIND_REGISTRATION,
    KIND_TALLY,
    Ledger,
    LedgerError,
    VotingEvent,
)

from conftest import build_world, fresh_key


def test_genesis_round_trip(tmp_path):
    path = tmp_path / "ledger.bin"
    w = build_world(path=str(path))
    reopened = Ledger.open(w.group, str(path))
    assert reopened.entries == w.ledger.entries
    assert reopened.role_keys("officials") == w.ledger.role_keys("officials")


def test_genesis_must_be_signed_by_its_operator(world):
    rogue_sk, _ = fresh_key(world, "operator")
    with pytest.raises(LedgerError, match="operator"):
        Ledger.create(world.group, world.genesis, rogue_sk)


def test_create_refuses_existing_file(tmp_path):
    path = tmp_path / "ledger.bin"
    build_world(path=str(path))
    with pytest.raises(LedgerError, match="existing"):
        build_world(path=str(path))


def test_unknown_kind_rejected(world):
    with pytest.raises(LedgerError, match="unknown entry kind"):
        world.ledger.append("gossip", b"{}", author_sk=world.operator[0])


def test_role_matrix_rejects_wrong_authors(world):
    printer_sk = world.printers[0][0]
    env = protocol.print_envelope(world.group, printer_sk, world.rng)
    body = encoding.encode_issued_envelope(
        world.group,
        encoding.IssuedEnvelope(env.printer_pk, digest(env.challenge), env.sig),
    )
    with pytest.raises(LedgerError, match="not bound as printers"):
        world.ledger.append(KIND_ENVELOPE, body,
                            author_sk=fresh_key(world, "printers")[0])
    with pytest.raises(LedgerError, match="not bound as officials"):
        world.ledger.append(KIND_REGISTRATION, b"junk",
                            author_sk=fresh_key(world, "officials")[0])
    with pytest.raises(LedgerError, match="not bound as operator"):
        world.ledger.append(KIND_KEY_BINDING, b"{}",
                            author_sk=fresh_key(world, "operator")[0])
    with pytest.raises(LedgerError, match="not bound as talliers"):
        world.ledger.append(KIND_TALLY, b"{}",
                            author_sk=fresh_key(world, "talliers")[0])


def test_entry_signature_must_match_author(world):
    printer_sk, printer_pk = world.printers[0]
    env = protocol.print_envelope(world.group, printer_sk, world.rng)
    body = encoding.encode_issued_envelope(
        world.group,
        encoding.IssuedEnvelope(env.printer_pk, digest(env.challenge), env.sig),
    )
    sig = schnorr.sign(world.group, printer_sk, "entry",
                       b"not the entry message", world.rng)
    with pytest.raises(LedgerError, match="bad signature"):
        world.ledger.append(KIND_ENVELOPE, body, sig=sig, author_pk=printer_pk)


def test_envelope_body_rules(world):
    printer_sk, _ = world.printers[0]
    other_sk, other_pk = world.printers[1]
    env = protocol.print_envelope(world.group, printer_sk, world.rng)
    # body printer and entry author must agree
    body = encoding.encode_issued_envelope(
        world.group,
        encoding.IssuedEnvelope(other_pk, digest(env.challenge), env.sig),
    )
    with pytest.raises(LedgerError, match="different printer"):
        world.ledger.append(KIND_ENVELOPE, body, author_sk=printer_sk)
    # the hash endorsement is checked, not taken on faith
    body = encoding.encode_issued_envelope(
        world.group,
        encoding.IssuedEnvelope(env.printer_pk, digest(b"something else"), env.sig),
    )
    with pytest.raises(LedgerError, match="endorsement"):
        world.ledger.append(KIND_ENVELOPE, body, author_sk=printer_sk)
    # double issuance of one challenge is refused
    protocol.post_envelope(world.ledger, printer_sk, env)
    with pytest.raises(LedgerError, match="already issued"):
        protocol.post_envelope(world.ledger, printer_sk, env)


def test_consumption_requires_issued_envelope_and_credential_author(world):
    group = world.group
    body = encoding.encode_consumption(group, ConsumptionRecord(b"\x01" * group.challenge_bytes))
    cred_sk = group.random_scalar(world.rng, nonzero=True)
    with pytest.raises(LedgerError, match="not a registered credential"):
        world.ledger.append(KIND_CONSUMPTION, body, author_sk=cred_sk)


def test_registration_notifies_exactly_once(world):
    result, _ = world.ceremony("v-001", 1000)
    notes = world.ledger.notifications("v-001")
    assert len(notes) == 1
    assert notes[0].voter_id == "v-001"
    assert notes[0].issued_at == 1000
    assert world.ledger.notifications("v-002") == []
    # a second session means a second notification, not a replacement
    world.ceremony("v-001", 2000)
    assert len(world.ledger.notifications("v-001")) == 2


def test_latest_registration_prefers_newest_then_highest_index(world):
    world.ceremony("v-001", 1000)
    world.ceremony("v-001", 5000)
    _, rec = world.ledger.latest_registration("v-001")
    assert rec.issued_at == 5000
    # same timestamp: the later entry wins
    world.ceremony("v-002", 7000)
    idx_a = world.ledger.latest_registration("v-002")[0]
    world.ceremony("v-002", 7000)
    idx_b = world.ledger.latest_registration("v-002")[0]
    assert idx_b > idx_a


def test_key_binding_extension(world):
    new_sk, new_pk = fresh_key(world, "officials")
    body = encoding.canonical_json({
        "operator": world.genesis["operator"],
        "officials": [encoding.to_base64(world.group.encode_element(new_pk))],
    })
    world.ledger.append(KIND_KEY_BINDING, body, author_sk=world.operator[0])
    assert world.group.encode_element(new_pk) in world.ledger.role_keys("officials")
    # and the freshly bound official can act
    result, _ = world.ceremony("v-003", 100, checkout=False)
    protocol.checkout_process(world.params, world.ledger, new_sk,
                              result.transport_receipt, 130, world.rng)


def test_event_body_validation(world):
    group = world.group
    options = (group.exp(group.g1, 1), group.exp(group.g1, 2))
    event = VotingEvent("e-1", options, 0, 10**9)
    world.ledger.append(KIND_EVENT, event.body(group),
                        author_sk=world.officials[0][0])
    with pytest.raises(LedgerError, match="close earlier"):
        world.ledger.append(KIND_EVENT, event.body(group),
                            author_sk=world.officials[0][0])
    retermed = VotingEvent("e-1", options, 5, 100)
    with pytest.raises(LedgerError, match="different terms"):
        world.ledger.append(KIND_EVENT, retermed.body(group),
                            author_sk=world.officials[0][0])
    closed = VotingEvent("e-1", options, 0, 500)
    world.ledger.append(KIND_EVENT, closed.body(group),
                        author_sk=world.officials[0][0])
    assert world.ledger.event("e-1").closes_at == 500
    dup = VotingEvent("e-2", (options[0], options[0]), 0, 10**9)
    with pytest.raises(LedgerError, match="distinct"):
        world.ledger.append(KIND_EVENT, dup.body(group),
                            author_sk=world.officials[0][0])
    bad = encoding.canonical_json({
        "event_id": "e-3",
        "options": [encoding.to_base64(group.encode_element(options[0]))],
        "opens_at": 0, "closes_at": 10**9,
        "revote": "sometimes", "vote_limiting": False,
    })
    with pytest.raises(LedgerError, match="revote"):
        world.ledger.append(KIND_EVENT, bad, author_sk=world.officials[0][0])


def test_persistence_survives_reopen(tmp_path):
    path = tmp_path / "ledger.bin"
    w = build_world(path=str(path))
    w.ceremony("v-001", 1000, fakes=1)
    result, _ = w.ceremony("v-002", 2000)
    protocol.activate(w.params, result.real, w.ledger, rng=w.rng)
    reopened = Ledger.open(w.group, str(path))
    assert len(reopened.entries) == len(w.ledger.entries)
    assert reopened.entries == w.ledger.entries
    assert reopened.registered_credentials() == w.ledger.registered_credentials()
    assert reopened.notifications("v-001") == w.ledger.notifications("v-001")
    assert reopened.audit().ok


def _record_spans(path):
    """Byte ranges of each persisted record body, in entry order."""
    raw = path.read_bytes()
    spans = []
    pos = 0
    while pos < len(raw):
        n = int.from_bytes(raw[pos:pos + 4], "big")
        spans.append((pos + 4, pos + 4 + n))
        pos += 4 + n
    return spans


def test_audit_localizes_a_flipped_bit(tmp_path):
    path = tmp_path / "ledger.bin"
    w = build_world(path=str(path))
    for i, voter in enumerate(("v-001", "v-002", "v-003")):
        w.ceremony(voter, 1000 * (i + 1))
    assert w.ledger.audit().ok
    spans = _record_spans(path)
    target = len(spans) // 2
    start, end = spans[target]
    raw = bytearray(path.read_bytes())
    raw[end - 3] ^= 0x10  # inside the entry signature
    path.write_bytes(bytes(raw))
    report = w.ledger.audit()
    assert not report.ok
    assert report.bad_index == target


def test_audit_flags_truncation_and_length_corruption(tmp_path):
    path = tmp_path / "ledger.bin"
    w = build_world(path=str(path))
    w.ceremony("v-001", 1000)
    spans = _record_spans(path)
    last = len(spans) - 1
    raw = path.read_bytes()

    path.write_bytes(raw[:spans[last][1] - 5])
    report = w.ledger.audit()
    assert not report.ok and report.bad_index == last

    corrupted = bytearray(raw)
    corrupted[spans[2][0] - 4] ^= 0x40  # length prefix of entry 2
    path.write_bytes(bytes(corrupted))
    report = w.ledger.audit()
    assert not report.ok and report.bad_index == 2


def test_in_memory_audit(world):
    world.ceremony("v-001", 1000)
    assert world.ledger.audit().ok
    good = world.ledger.entries[2]
    world.ledger.entries[2] = type(good)(
        good.index, good.kind, good.body + b"x", good.author, good.sig
    )
    report = world.ledger.audit()
    assert not report.ok
    assert report.bad_index == 2


def test_ballot_requires_known_event(world):
    # structural ballot gate; full voting rules live in the voting tests
    group = world.group
    cred_sk = group.random_scalar(world.rng, nonzero=True)
    cred_pk = group.exp(group.g1, cred_sk)
    ct = (group.g1, group.g2, group.exp(group.g1, 2))
    proof = ((group.g1, group.g2, group.g1), 1, 1)
    ballot = encoding.Ballot(ct, ct, proof, "nope", cred_pk, b"\x00")
    body = encoding.encode_ballot(group, ballot)
    with pytest.raises(LedgerError, match="unknown event"):
        world.ledger.append(KIND_BALLOT, body, author_sk=cred_sk)
