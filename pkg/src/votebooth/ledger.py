"""Append-only authenticated event log.

Single node, deliberately boring: every entry is (index, kind, body,
author, sig) where the signature covers kind and body, authorship is
checked against the role bindings established by the genesis entry, and
a handful of kinds get structural body validation because their meaning
is the ledger's business (an envelope consumption must reveal a
challenge that was actually issued; a ballot must be authored by the
credential it embeds and respect the event's revote policy).

Entries live in memory and, when a path is given, in an append-only
file of length-prefixed records. audit() re-verifies the whole log and
localizes the first failing entry, which is what turns "someone flipped
a bit" into an index.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass

from votebooth import encoding, schnorr
from votebooth.encoding import CodecError, canonical_json, digest, pack_fields, unpack_fields
from votebooth.groups import GroupError

KIND_KEY_BINDING = "key-binding"
KIND_ENVELOPE = "envelope-issued"
KIND_REGISTRATION = "registration-session"
KIND_CREDENTIAL = "credential-registered"
KIND_CONSUMPTION = "envelope-consumed"
KIND_BALLOT = "ballot"
KIND_EVENT = "voting-event"
KIND_TALLY = "tally-artifact"

KINDS = (
    KIND_KEY_BINDING,
    KIND_ENVELOPE,
    KIND_REGISTRATION,
    KIND_CREDENTIAL,
    KIND_CONSUMPTION,
    KIND_BALLOT,
    KIND_EVENT,
    KIND_TALLY,
)

REVOTE_FORBID = "forbid"
REVOTE_LAST = "last-counts"


class LedgerError(ValueError):
    pass


@dataclass(frozen=True)
class LedgerEntry:
    index: int
    kind: str
    body: bytes
    author: bytes  # encoded group element
    sig: bytes


@dataclass(frozen=True)
class Notification:
    """Delivered to a voter's mailbox when a session is checked out in
    their name. A voter who never stood in the booth sees one anyway."""

    voter_id: str
    entry_index: int
    issued_at: int


@dataclass(frozen=True)
class AuditReport:
    ok: bool
    entries: int
    bad_index: int = -1
    reason: str = ""


@dataclass(frozen=True)
class VotingEvent:
    event_id: str
    options: tuple
    opens_at: int
    closes_at: int
    revote: str = REVOTE_FORBID
    vote_limiting: bool = False

    def body(self, group):
        return canonical_json({
            "event_id": self.event_id,
            "options": [encoding.to_base64(group.encode_element(o))
                        for o in self.options],
            "opens_at": self.opens_at,
            "closes_at": self.closes_at,
            "revote": self.revote,
            "vote_limiting": self.vote_limiting,
        })

    @classmethod
    def from_body(cls, group, data):
        try:
            obj = json.loads(data.decode("utf-8"))
            options = tuple(
                group.decode_element(encoding.from_base64(o))
                for o in obj["options"]
            )
            event = cls(
                obj["event_id"], options, int(obj["opens_at"]),
                int(obj["closes_at"]), obj["revote"], bool(obj["vote_limiting"]),
            )
        except (KeyError, ValueError, TypeError, GroupError) as exc:
            raise LedgerError("malformed voting-event body: %s" % exc) from None
        if event.revote not in (REVOTE_FORBID, REVOTE_LAST):
            raise LedgerError("unknown revote policy %r" % event.revote)
        if len(set(event.options)) != len(event.options) or not event.options:
            raise LedgerError("options must be distinct and non-empty")
        return event


def entry_msg(kind, body):
    return pack_fields(kind.encode("utf-8"), body)


def _encode_entry(entry):
    return pack_fields(
        entry.index.to_bytes(8, "big"),
        entry.kind.encode("utf-8"),
        entry.body,
        entry.author,
        entry.sig,
    )


def _decode_entry(data):
    idx, kind, body, author, sig = unpack_fields(data, 5)
    return LedgerEntry(
        int.from_bytes(idx, "big"),
        kind.decode("utf-8"),
        bytes(body),
        bytes(author),
        bytes(sig),
    )


def peek_profile(path):
    """The group profile named by a ledger file's genesis entry.

    Opening a ledger requires its group, but the group's name lives
    inside the genesis body; this reads just the first record to break
    the circle, with no validation beyond what parsing needs. A file
    too damaged to sniff raises LedgerError and the caller falls back
    to whatever it trusts instead.
    """
    with open(path, "rb") as fh:
        header = fh.read(4)
        if len(header) < 4:
            raise LedgerError("no genesis record")
        record = fh.read(int.from_bytes(header, "big"))
    try:
        entry = _decode_entry(record)
        profile = json.loads(entry.body.decode("utf-8"))["profile"]
    except (CodecError, ValueError, KeyError, UnicodeDecodeError) as exc:
        raise LedgerError("genesis names no profile: %s" % exc) from None
    if not isinstance(profile, str):
        raise LedgerError("genesis profile is not a string")
    return profile


def audit_file(group, path):
    """Audit a ledger file in place. open() refuses a corrupt file
    outright; the audit instead wants to report where it breaks."""
    return Ledger(group, path).audit()


class Ledger:
    def __init__(self, group, path=None):
        self.group = group
        self.path = path
        self.entries = []
        self.mailbox = {}
        self._lock = threading.Lock()
        self._bindings = {
            "operator": set(), "officials": set(), "kiosks": set(),
            "printers": set(), "talliers": set(),
        }
        self.genesis = None
        self._env_issued = set()      # challenge hashes
        self._env_consumed = set()    # challenge hashes
        self._cred_registered = set() # encoded credential keys
        self._reg_by_voter = {}       # voter_id -> list of entry indices
        self._ballots = {}            # event_id -> list of (index, Ballot)
        self._events = {}             # event_id -> VotingEvent

    # -- construction -------------------------------------------------

    @classmethod
    def create(cls, group, genesis_body, operator_sk, path=None):
        """Start a ledger with a key-binding genesis entry.

        genesis_body is the dict of role bindings (see Setup in the CLI);
        it must contain the operator's own public key, making the root
        self-certifying.
        """
        if path is not None and os.path.exists(path) and os.path.getsize(path):
            raise LedgerError("refusing to create over existing ledger file")
        ledger = cls(group, path)
        body = canonical_json(genesis_body)
        sig = schnorr.sign(group, operator_sk, "entry", entry_msg(KIND_KEY_BINDING, body))
        author = group.encode_element(schnorr.pubkey(group, operator_sk))
        entry = LedgerEntry(0, KIND_KEY_BINDING, body, author, sig)
        ledger._admit(entry)
        ledger._persist(entry)
        return ledger

    @classmethod
    def open(cls, group, path):
        ledger = cls(group, path)
        with open(path, "rb") as fh:
            raw = fh.read()
        pos = 0
        count = 0
        while pos < len(raw):
            if pos + 4 > len(raw):
                raise LedgerError("truncated record header at entry %d" % count)
            n = int.from_bytes(raw[pos:pos + 4], "big")
            pos += 4
            if pos + n > len(raw):
                raise LedgerError("truncated record at entry %d" % count)
            try:
                entry = _decode_entry(raw[pos:pos + n])
            except CodecError as exc:
                raise LedgerError("unreadable entry %d: %s" % (count, exc)) from None
            ledger._admit(entry)
            pos += n
            count += 1
        return ledger

    # -- the append path ----------------------------------------------

    def append(self, kind, body, author_sk=None, sig=None, author_pk=None):
        """Validate and admit one entry, then persist it.

        Sign here (author_sk) or bring a signature (sig + author_pk).
        """
        if author_sk is not None:
            author_pk = schnorr.pubkey(self.group, author_sk)
            sig = schnorr.sign(self.group, author_sk, "entry", entry_msg(kind, body))
        if sig is None or author_pk is None:
            raise LedgerError("append needs a signer or a signature")
        author = self.group.encode_element(author_pk)
        with self._lock:
            entry = LedgerEntry(len(self.entries), kind, bytes(body), author, sig)
            self._admit(entry)
            self._persist(entry)
            return entry

    def _admit(self, entry):
        """Shared by append and load: verify, authorize, index."""
        if entry.index != len(self.entries):
            raise LedgerError(
                "entry %d breaks the index chain (expected %d)"
                % (entry.index, len(self.entries))
            )
        if entry.kind not in KINDS:
            raise LedgerError("unknown entry kind %r" % entry.kind)
        try:
            author_pk = self.group.decode_element(entry.author)
        except GroupError as exc:
            raise LedgerError("entry %d author: %s" % (entry.index, exc)) from None
        if not schnorr.verify(self.group, author_pk, "entry",
                              entry_msg(entry.kind, entry.body), entry.sig):
            raise LedgerError("entry %d has a bad signature" % entry.index)
        self._authorize(entry)
        self._validate_body(entry)
        self.entries.append(entry)
        self._index(entry)

    def _authorize(self, entry):
        kind, author = entry.kind, entry.author
        if entry.index == 0:
            if kind != KIND_KEY_BINDING:
                raise LedgerError("genesis must be a key-binding entry")
            # self-certifying root: the signer must be the operator named
            # in the body itself
            bindings = self._parse_binding(entry.body)
            if author not in bindings["operator"]:
                raise LedgerError("genesis not signed by its own operator key")
            return
        allowed = {
            KIND_KEY_BINDING: "operator",
            KIND_ENVELOPE: "printers",
            KIND_REGISTRATION: "officials",
            KIND_EVENT: "officials",
            KIND_TALLY: "talliers",
        }.get(kind)
        if allowed is not None:
            if author not in self._bindings[allowed]:
                raise LedgerError(
                    "entry %d: author not bound as %s for %s"
                    % (entry.index, allowed, kind)
                )
            return
        if kind == KIND_BALLOT:
            ballot = self._parse_ballot(entry)
            if self.group.encode_element(ballot.credential_pk) != author:
                raise LedgerError(
                    "entry %d: ballot author differs from its credential"
                    % entry.index
                )
            return
        if kind == KIND_CREDENTIAL:
            reg = self._parse_credential_reg(entry)
            if self.group.encode_element(reg.credential_pk) != author:
                raise LedgerError(
                    "entry %d: registration author differs from its credential"
                    % entry.index
                )
            return
        if kind == KIND_CONSUMPTION:
            if author not in self._cred_registered:
                raise LedgerError(
                    "entry %d: consumption author is not a registered credential"
                    % entry.index
                )
            return
        raise LedgerError("no authorization rule for kind %r" % kind)

    def _validate_body(self, entry):
        kind = entry.kind
        try:
            if kind == KIND_KEY_BINDING:
                self._parse_binding(entry.body)
            elif kind == KIND_ENVELOPE:
                rec = encoding.decode_issued_envelope(self.group, entry.body)
                if self.group.encode_element(rec.printer_pk) != entry.author:
                    raise LedgerError("envelope body names a different printer")
                if not schnorr.verify(
                    self.group, rec.printer_pk, "envelope",
                    encoding.envelope_msg(rec.challenge_hash), rec.sig,
                ):
                    raise LedgerError("envelope endorsement is invalid")
                if rec.challenge_hash in self._env_issued:
                    raise LedgerError("envelope challenge already issued")
            elif kind == KIND_REGISTRATION:
                encoding.decode_registration(self.group, entry.body)
            elif kind == KIND_CREDENTIAL:
                reg = self._parse_credential_reg(entry)
                if self.group.encode_element(reg.kiosk_pk) not in self._bindings["kiosks"]:
                    raise LedgerError("registration endorsed by an unbound kiosk")
                if not schnorr.verify(
                    self.group, reg.kiosk_pk, "kiosk-credential",
                    encoding.credential_msg(self.group, reg.credential_pk, reg.bind_hash),
                    reg.kiosk_sig,
                ):
                    raise LedgerError("registration kiosk endorsement is invalid")
            elif kind == KIND_CONSUMPTION:
                rec = encoding.decode_consumption(self.group, entry.body)
                c_hash = digest(rec.challenge)
                if c_hash not in self._env_issued:
                    raise LedgerError("consumption of a never-issued envelope")
                if c_hash in self._env_consumed:
                    raise LedgerError("envelope challenge already consumed")
            elif kind == KIND_BALLOT:
                ballot = self._parse_ballot(entry)
                event = self._events.get(ballot.event_id)
                if event is None:
                    raise LedgerError("ballot for unknown event %r" % ballot.event_id)
                if event.vote_limiting:
                    v = self.group.encode_element(ballot.credential_pk)
                    if v not in self._cred_registered:
                        raise LedgerError("ballot credential is not registered")
                if event.revote == REVOTE_FORBID:
                    for _idx, prior in self._ballots.get(ballot.event_id, ()):
                        if prior.credential_pk == ballot.credential_pk:
                            raise LedgerError(
                                "duplicate ballot for this credential under "
                                "a forbid policy"
                            )
            elif kind == KIND_EVENT:
                event = VotingEvent.from_body(self.group, entry.body)
                prior = self._events.get(event.event_id)
                if prior is not None:
                    # the only permitted amendment is closing early
                    same = (prior.options == event.options
                            and prior.opens_at == event.opens_at
                            and prior.revote == event.revote
                            and prior.vote_limiting == event.vote_limiting)
                    if not same:
                        raise LedgerError(
                            "event %r already exists with different terms"
                            % event.event_id
                        )
                    if event.closes_at >= prior.closes_at:
                        raise LedgerError(
                            "event %r can only be amended to close earlier"
                            % event.event_id
                        )
            elif kind == KIND_TALLY:
                json.loads(entry.body.decode("utf-8"))
        except CodecError as exc:
            raise LedgerError(
                "entry %d body is malformed: %s" % (entry.index, exc)
            ) from None

    def _index(self, entry):
        kind = entry.kind
        if kind == KIND_KEY_BINDING:
            merged = self._parse_binding(entry.body)
            for role, keys in merged.items():
                self._bindings[role] |= keys
            if entry.index == 0:
                self.genesis = json.loads(entry.body.decode("utf-8"))
        elif kind == KIND_ENVELOPE:
            rec = encoding.decode_issued_envelope(self.group, entry.body)
            self._env_issued.add(rec.challenge_hash)
        elif kind == KIND_REGISTRATION:
            rec = encoding.decode_registration(self.group, entry.body)
            self._reg_by_voter.setdefault(rec.voter_id, []).append(entry.index)
            self.mailbox.setdefault(rec.voter_id, []).append(
                Notification(rec.voter_id, entry.index, rec.issued_at)
            )
        elif kind == KIND_CREDENTIAL:
            reg = self._parse_credential_reg(entry)
            self._cred_registered.add(self.group.encode_element(reg.credential_pk))
        elif kind == KIND_CONSUMPTION:
            rec = encoding.decode_consumption(self.group, entry.body)
            self._env_consumed.add(digest(rec.challenge))
        elif kind == KIND_BALLOT:
            ballot = self._parse_ballot(entry)
            self._ballots.setdefault(ballot.event_id, []).append((entry.index, ballot))
        elif kind == KIND_EVENT:
            event = VotingEvent.from_body(self.group, entry.body)
            self._events[event.event_id] = event

    def _persist(self, entry):
        if self.path is None:
            return
        record = _encode_entry(entry)
        with open(self.path, "ab") as fh:
            fh.write(len(record).to_bytes(4, "big"))
            fh.write(record)
            fh.flush()
            os.fsync(fh.fileno())

    # -- body parsers -------------------------------------------------

    def _parse_binding(self, body):
        try:
            obj = json.loads(body.decode("utf-8"))
            out = {}
            for role in ("operator", "officials", "kiosks", "printers", "talliers"):
                raw = obj.get(role, [])
                if role == "operator":
                    raw = [raw] if isinstance(raw, str) else raw
                keys = set()
                for item in raw:
                    data = encoding.from_base64(item)
                    self.group.decode_element(data)  # canonical check
                    keys.add(data)
                out[role] = keys
        except (ValueError, TypeError, AttributeError, GroupError) as exc:
            raise LedgerError("malformed key-binding body: %s" % exc) from None
        if not out["operator"]:
            raise LedgerError("key-binding body lacks an operator key")
        return out

    def _parse_ballot(self, entry):
        return encoding.decode_ballot(self.group, entry.body)

    def _parse_credential_reg(self, entry):
        return encoding.decode_credential_registration(self.group, entry.body)

    # -- queries -------------------------------------------------------

    def by_kind(self, kind):
        return [e for e in self.entries if e.kind == kind]

    def role_keys(self, role):
        return set(self._bindings[role])

    def latest_registration(self, voter_id):
        """The registration that counts: newest issue time, ties to the
        later entry."""
        indices = self._reg_by_voter.get(voter_id)
        if not indices:
            return None
        best = None
        for idx in indices:
            rec = encoding.decode_registration(self.group, self.entries[idx].body)
            key = (rec.issued_at, idx)
            if best is None or key > best[0]:
                best = (key, idx, rec)
        return best[1], best[2]

    def registrations(self):
        """(entry index, record) of the current registration per voter."""
        return {
            voter_id: self.latest_registration(voter_id)
            for voter_id in self._reg_by_voter
        }

    def envelope_issued(self, challenge_hash):
        return challenge_hash in self._env_issued

    def envelope_consumed(self, challenge_hash):
        return challenge_hash in self._env_consumed

    def registered_credentials(self):
        return set(self._cred_registered)

    def ballots(self, event_id):
        return list(self._ballots.get(event_id, ()))

    def event(self, event_id):
        return self._events.get(event_id)

    def events(self):
        return dict(self._events)

    def notifications(self, voter_id):
        return list(self.mailbox.get(voter_id, ()))

    # -- audit -----------------------------------------------------------

    def audit(self):
        """Re-verify the whole log from its persisted bytes (or memory
        when unbacked). Any single corrupt bit lands on an entry index:
        the replay position where admission first fails."""
        if self.path is not None:
            try:
                with open(self.path, "rb") as fh:
                    raw = fh.read()
            except OSError as exc:
                return AuditReport(False, 0, -1, str(exc))
            replay = Ledger(self.group, None)
            pos = 0
            while pos < len(raw):
                at = len(replay.entries)
                if pos + 4 > len(raw):
                    return AuditReport(False, at, at, "truncated record header")
                n = int.from_bytes(raw[pos:pos + 4], "big")
                pos += 4
                if pos + n > len(raw):
                    return AuditReport(False, at, at, "truncated record")
                try:
                    replay._admit(_decode_entry(raw[pos:pos + n]))
                except (CodecError, LedgerError) as exc:
                    return AuditReport(False, at, at, str(exc))
                pos += n
            return AuditReport(True, len(replay.entries))
        replay = Ledger(self.group, None)
        for entry in self.entries:
            at = len(replay.entries)
            try:
                replay._admit(entry)
            except LedgerError as exc:
                return AuditReport(False, at, at, str(exc))
        return AuditReport(True, len(self.entries))
