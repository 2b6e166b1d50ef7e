"""Registration ceremonies and credential activation.

The booth flow is a small state machine. What separates a real
credential from a fake one is nothing in the bytes: it is the order the
kiosk produced them in. A real run commits to the encrypted credential
before the envelope's challenge is in the room, so the proof transcript
must be honest. A fake run sees the challenge first and fabricates the
whole bundle in one go, simulating the transcript for a credential the
ciphertext does not contain. Both verify. Only the voter, who watched
the order, knows which is which.

Everything a device must trust offline lives in SystemParams, the
provisioned snapshot of the genesis key bindings. Activation runs a
fixed list of named checks, each reporting pass, fail, or unavailable
(the online ones degrade gracefully without a ledger), and the verdict
is clean only when nothing failed.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from votebooth import elgamal, encoding, schnorr, sigma
from votebooth.encoding import (
    CheckinTicket,
    CommitReceipt,
    ConsumptionRecord,
    CredentialReceipt,
    CredentialRegistration,
    Envelope,
    IssuedEnvelope,
    RegistrationRecord,
    TransportReceipt,
    absent_scalar,
    challenge_scalar,
    digest,
)
from votebooth.groups import group_setup
from votebooth.ledger import KIND_CONSUMPTION, KIND_CREDENTIAL, KIND_ENVELOPE, KIND_REGISTRATION

_SYSRAND = random.SystemRandom()

DEFAULT_TICKET_LIFETIME = 600  # seconds a check-in ticket stays usable

PHASE_AWAITING_TICKET = "awaiting-ticket"
PHASE_CHECKED_IN = "checked-in"
PHASE_COMMITTED = "committed"
PHASE_AWAITING_ENVELOPE = "awaiting-envelope"
PHASE_FAKE_LOOP = "fake-loop"
PHASE_DONE = "done"

BUNDLE_REAL = "real"
BUNDLE_FAKE = "fake"
BUNDLE_STANDING = "standing"

CHECKS_OFFLINE = (
    "receipt-integrity-1",
    "receipt-integrity-2",
    "envelope-integrity",
    "voter-identity",
    "zkp",
)
CHECKS_ONLINE = (
    "fresh-receipt",
    "eligible-official",
    "eligible-kiosk",
    "kiosk-signature",
    "official-signature",
    "challenge-exists",
    "challenge-unused",
)


class ProtocolError(ValueError):
    """A ceremony step attempted out of order or with material that
    does not verify. code is a stable slug for API clients."""

    def __init__(self, message, code="protocol-error"):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# Provisioned parameters


@dataclass(frozen=True)
class SystemParams:
    """What every device gets at provisioning time: the joint key plus
    the accepted role keys, stored encoded for cheap membership tests."""

    group: object
    joint_pk: object
    threshold: tuple
    officials: frozenset
    kiosks: frozenset
    printers: frozenset
    talliers: frozenset
    entities: tuple  # (name, element) pairs for standing delegations
    roll: tuple      # voter ids
    ticket_lifetime: int = DEFAULT_TICKET_LIFETIME
    share_vks: dict = field(default_factory=dict)

    def is_official(self, pk):
        return self.group.encode_element(pk) in self.officials

    def is_kiosk(self, pk):
        return self.group.encode_element(pk) in self.kiosks

    def is_printer(self, pk):
        return self.group.encode_element(pk) in self.printers

    def on_roll(self, voter_id):
        return voter_id in self.roll

    @classmethod
    def from_genesis(cls, genesis):
        group = group_setup(genesis["profile"])

        def keyset(role):
            return frozenset(
                encoding.from_base64(k) for k in genesis.get(role, [])
            )

        entities = tuple(
            (e["name"], group.decode_element(encoding.from_base64(e["pk"])))
            for e in genesis.get("entities", [])
        )
        share_vks = {
            int(i): group.decode_element(encoding.from_base64(v))
            for i, v in genesis.get("share_vks", {}).items()
        }
        return cls(
            group=group,
            joint_pk=group.decode_element(encoding.from_base64(genesis["joint_pk"])),
            threshold=(genesis["threshold"]["n"], genesis["threshold"]["t"]),
            officials=keyset("officials"),
            kiosks=keyset("kiosks"),
            printers=keyset("printers"),
            talliers=keyset("talliers"),
            entities=entities,
            roll=tuple(v["voter_id"] for v in genesis.get("roll", [])),
            ticket_lifetime=genesis.get("ticket_lifetime", DEFAULT_TICKET_LIFETIME),
            share_vks=share_vks,
        )


def make_genesis_body(group, joint_pk, operator_pk, officials, kiosks, printers,
                      talliers, entities, roll, n, t, share_vks=None,
                      ticket_lifetime=DEFAULT_TICKET_LIFETIME):
    """The key-binding dict that seeds a ledger. entities is a list of
    (name, element); roll is a list of (voter_id, display name)."""

    def enc(pk):
        return encoding.to_base64(group.encode_element(pk))

    return {
        "profile": group.name,
        "joint_pk": enc(joint_pk),
        "threshold": {"n": n, "t": t},
        "operator": enc(operator_pk),
        "officials": sorted(enc(pk) for pk in officials),
        "kiosks": sorted(enc(pk) for pk in kiosks),
        "printers": sorted(enc(pk) for pk in printers),
        "talliers": sorted(enc(pk) for pk in talliers),
        "entities": [{"name": name, "pk": enc(pk)} for name, pk in entities],
        "roll": [{"voter_id": vid, "name": name} for vid, name in roll],
        "share_vks": {str(i): enc(vk) for i, vk in (share_vks or {}).items()},
        "ticket_lifetime": ticket_lifetime,
    }


# ---------------------------------------------------------------------------
# Check-in tickets and envelopes


def issue_ticket(group, official_sk, voter_id, now, rng=None):
    sig = schnorr.sign(
        group, official_sk, "ticket",
        encoding.ticket_msg(group, voter_id, now), rng,
    )
    return CheckinTicket(voter_id, now, schnorr.pubkey(group, official_sk), sig)


def verify_ticket(params, ticket, now):
    group = params.group
    if not params.on_roll(ticket.voter_id):
        raise ProtocolError("voter %r is not on the roll" % ticket.voter_id)
    if not params.is_official(ticket.official_pk):
        raise ProtocolError("ticket issuer is not an accepted official")
    if not schnorr.verify(
        group, ticket.official_pk, "ticket",
        encoding.ticket_msg(group, ticket.voter_id, ticket.issued_at),
        ticket.sig,
    ):
        raise ProtocolError("ticket signature does not verify")
    age = now - ticket.issued_at
    if age < 0:
        raise ProtocolError("ticket is dated in the future", code="stale-ticket")
    if age > params.ticket_lifetime:
        raise ProtocolError("ticket expired %d seconds ago"
                            % (age - params.ticket_lifetime), code="stale-ticket")


def print_envelope(group, printer_sk, rng=None):
    """One sealed envelope: a fresh challenge, endorsed via its hash so
    the public record never learns the challenge itself."""
    rng = rng or _SYSRAND
    challenge = rng.getrandbits(8 * group.challenge_bytes).to_bytes(
        group.challenge_bytes, "big"
    )
    sig = schnorr.sign(
        group, printer_sk, "envelope",
        encoding.envelope_msg(digest(challenge)), rng,
    )
    return Envelope(schnorr.pubkey(group, printer_sk), challenge, sig)


def post_envelope(ledger, printer_sk, envelope):
    """Publish the issued-envelope record (hash only) to the ledger."""
    rec = IssuedEnvelope(envelope.printer_pk, digest(envelope.challenge), envelope.sig)
    body = encoding.encode_issued_envelope(ledger.group, rec)
    return ledger.append(KIND_ENVELOPE, body, author_sk=printer_sk)


def verify_envelope(params, envelope):
    group = params.group
    if not params.is_printer(envelope.printer_pk):
        raise ProtocolError("envelope printer is not accepted")
    if not schnorr.verify(
        group, envelope.printer_pk, "envelope",
        encoding.envelope_msg(digest(envelope.challenge)), envelope.sig,
    ):
        raise ProtocolError("envelope endorsement does not verify")


def provision_entity_credential(ledger, kiosk_sk, secret, rng=None):
    """Register a standing entity's credential key directly.

    Entities never sit in the booth; the registrar endorses their key
    with a kiosk signature when they enroll, so that vote limiting
    treats their ballots like anyone else's. The bind hash covers the
    key alone since there is no ceremony material to tie it to.
    """
    group = ledger.group
    pk = group.exp(group.g1, secret)
    bind = digest(group.encode_element(pk))
    sig = schnorr.sign(
        group, kiosk_sk, "kiosk-credential",
        encoding.credential_msg(group, pk, bind), rng,
    )
    registration = CredentialRegistration(
        schnorr.pubkey(group, kiosk_sk), pk, sig, bind,
    )
    return ledger.append(
        KIND_CREDENTIAL,
        encoding.encode_credential_registration(group, registration),
        author_sk=secret,
    )


# ---------------------------------------------------------------------------
# The booth


@dataclass(frozen=True)
class ReceiptBundle:
    """Everything one credential's holder can show a verifier. kind is
    the voter's private knowledge; the paper trail never carries it."""

    kind: str
    ticket: CheckinTicket
    commit_receipt: CommitReceipt
    envelope: Envelope
    credential_receipt: CredentialReceipt
    transport_receipt: TransportReceipt


@dataclass(frozen=True)
class SessionResult:
    transport_receipt: TransportReceipt
    bundles: tuple

    @property
    def real(self):
        for b in self.bundles:
            if b.kind == BUNDLE_REAL:
                return b
        raise ProtocolError("session produced no real bundle")


class _Candidate:
    __slots__ = ("secret", "pk", "nonce", "ciphertext", "prover", "commit", "receipt")

    def __init__(self, secret, pk, nonce, ciphertext, prover, commit, receipt):
        self.secret = secret
        self.pk = pk
        self.nonce = nonce
        self.ciphertext = ciphertext
        self.prover = prover
        self.commit = commit
        self.receipt = receipt


class KioskSession:
    """One voter's time in the booth.

    Phases move strictly forward: awaiting-ticket, checked-in,
    committed, awaiting-envelope, fake-loop, done. The log records every
    print and scan in order; the ceremony's security argument is
    literally about that order, so tests and the UI both read it.
    """

    def __init__(self, params, kiosk_sk, rng=None, session_id=None):
        self.params = params
        self.group = params.group
        self.kiosk_sk = kiosk_sk
        self.kiosk_pk = schnorr.pubkey(params.group, kiosk_sk)
        self.rng = rng or _SYSRAND
        self.session_id = session_id
        self.phase = PHASE_AWAITING_TICKET
        self.log = []
        self.ticket = None
        self.candidates = []
        self.chosen = None
        self.bundles = []
        self.transport_receipt = None
        self._seen_challenges = set()

    def _expect(self, *phases):
        if self.phase not in phases:
            raise ProtocolError(
                "step not allowed in phase %r (expected %s)"
                % (self.phase, " or ".join(phases)),
                code="wrong-phase",
            )

    def _note(self, action, what):
        self.log.append("%s:%s" % (action, what))

    # -- check-in ------------------------------------------------------

    def checkin(self, ticket, now):
        self._expect(PHASE_AWAITING_TICKET)
        verify_ticket(self.params, ticket, now)
        self.ticket = ticket
        self.phase = PHASE_CHECKED_IN
        self._note("scan", "ticket")
        return ticket.voter_id

    # -- real ceremony ---------------------------------------------------

    def print_commit(self, count=1, delegate_pk=None):
        """Generate and print the commit receipt(s). With count > 1 the
        voter privately picks one; the rest are decoys.

        delegate_pk registers a standing entity's key instead of a fresh
        one: the ciphertext and proof are honest, but no secret is ever
        printed, because the entity keeps it. The voter gives up the
        ability to vote directly; the entity votes with the accumulated
        weight of everyone who delegated to it.
        """
        self._expect(PHASE_CHECKED_IN)
        if count < 1:
            raise ProtocolError("need at least one commit candidate")
        group = self.group
        if delegate_pk is not None:
            known = {group.encode_element(pk) for _, pk in self.params.entities}
            if group.encode_element(delegate_pk) not in known:
                raise ProtocolError("unknown standing entity")
        for _ in range(count):
            if delegate_pk is not None:
                v, pk = None, delegate_pk
            else:
                v = group.random_scalar(self.rng, nonzero=True)
                pk = group.exp(group.g1, v)
            nonce = group.random_scalar(self.rng, nonzero=True)
            ct = elgamal.encrypt(group, self.params.joint_pk, pk, r=nonce)
            prover, commit = sigma.zkp_commit(group, self.params.joint_pk, nonce, self.rng)
            sig = schnorr.sign(
                group, self.kiosk_sk, "commit",
                encoding.commit_msg(group, self.ticket.voter_id,
                                    self.ticket.issued_at, ct, commit),
                self.rng,
            )
            receipt = CommitReceipt(ct, commit, sig)
            self.candidates.append(_Candidate(v, pk, nonce, ct, prover, commit, receipt))
            self._note("print", "commit-receipt")
        self.phase = PHASE_COMMITTED
        if count == 1:
            return [self.select_commit(0)]
        return [c.receipt for c in self.candidates]

    def select_commit(self, index):
        self._expect(PHASE_COMMITTED)
        try:
            self.chosen = self.candidates[index]
        except IndexError:
            raise ProtocolError("no commit candidate %d" % index) from None
        self._note("select", "candidate")
        self.phase = PHASE_AWAITING_ENVELOPE
        return self.chosen.receipt

    def scan_envelope(self, envelope):
        """Complete the real ceremony: answer the envelope's challenge
        honestly and print the credential receipt."""
        self._expect(PHASE_AWAITING_ENVELOPE)
        self._take_envelope(envelope)
        group = self.group
        cand = self.chosen
        ticket = self.ticket
        challenge = challenge_scalar(group, envelope.challenge)
        response = cand.prover.respond(challenge)
        if cand.secret is None:
            secret_bytes = absent_scalar(group)
        else:
            secret_bytes = group.encode_scalar(cand.secret)
        receipt = self._print_credential_receipt(
            cand.ciphertext, secret_bytes, cand.pk,
            cand.commit, envelope.challenge, response, secret=cand.secret,
        )
        # the transport receipt exists from this moment and never changes,
        # however many fakes follow
        sig = schnorr.sign(
            group, self.kiosk_sk, "transport",
            encoding.transport_msg(group, ticket.voter_id, ticket.issued_at,
                                   cand.ciphertext),
            self.rng,
        )
        self.transport_receipt = TransportReceipt(
            ticket.voter_id, ticket.issued_at, cand.ciphertext,
            self.kiosk_pk, sig,
        )
        self.bundles.append(ReceiptBundle(
            BUNDLE_REAL, ticket, cand.receipt, envelope, receipt,
            self.transport_receipt,
        ))
        self.phase = PHASE_FAKE_LOOP
        return receipt

    # -- fakes ---------------------------------------------------------

    def run_fake(self, envelope):
        """Fabricate a deniable bundle after the challenge is known: a
        fresh key pair, the same ciphertext, a simulated transcript."""
        self._expect(PHASE_FAKE_LOOP)
        group = self.group
        v = group.random_scalar(self.rng, nonzero=True)
        pk = group.exp(group.g1, v)
        return self._run_simulated(
            envelope, pk, v, group.encode_scalar(v), BUNDLE_FAKE
        )

    def run_standing(self, envelope, entity_pk):
        """A fake bound to a standing entity's key. The receipt carries
        no secret; whoever it is surrendered to can verify but not vote."""
        self._expect(PHASE_FAKE_LOOP)
        group = self.group
        known = {group.encode_element(pk) for _, pk in self.params.entities}
        if group.encode_element(entity_pk) not in known:
            raise ProtocolError("unknown standing entity")
        return self._run_simulated(
            envelope, entity_pk, None, absent_scalar(group), BUNDLE_STANDING
        )

    def _run_simulated(self, envelope, pk, secret, secret_bytes, kind):
        self._take_envelope(envelope)
        group = self.group
        ticket = self.ticket
        ct = self.chosen.ciphertext
        challenge = challenge_scalar(group, envelope.challenge)
        commit, _, response = sigma.zkp_simulate(
            group, self.params.joint_pk, ct[0], ct[1],
            group.div(ct[2], pk), challenge, self.rng,
        )
        commit_sig = schnorr.sign(
            group, self.kiosk_sk, "commit",
            encoding.commit_msg(group, ticket.voter_id, ticket.issued_at, ct, commit),
            self.rng,
        )
        commit_receipt = CommitReceipt(ct, commit, commit_sig)
        self._note("print", "commit-receipt")
        receipt = self._print_credential_receipt(
            ct, secret_bytes, pk, commit, envelope.challenge, response,
            secret=secret,
        )
        bundle = ReceiptBundle(
            kind, ticket, commit_receipt, envelope, receipt,
            self.transport_receipt,
        )
        self.bundles.append(bundle)
        return bundle

    def _take_envelope(self, envelope):
        verify_envelope(self.params, envelope)
        c_hash = digest(envelope.challenge)
        if c_hash in self._seen_challenges:
            raise ProtocolError("envelope already used in this session",
                                code="envelope-reused")
        self._seen_challenges.add(c_hash)
        self._note("scan", "envelope")

    def _print_credential_receipt(self, ct, secret_bytes, pk, commit,
                                  challenge, response, secret):
        group = self.group
        ticket = self.ticket
        bind = encoding.credential_bind_hash(
            group, ticket.voter_id, ticket.issued_at, ct, secret_bytes,
            commit, challenge, response,
        )
        sig = schnorr.sign(
            group, self.kiosk_sk, "kiosk-credential",
            encoding.credential_msg(group, pk, bind), self.rng,
        )
        receipt = CredentialReceipt(
            ticket.voter_id, ticket.issued_at, secret, response,
            self.kiosk_pk, sig,
        )
        self._note("print", "credential-receipt")
        return receipt

    # -- wrap up -----------------------------------------------------------

    def finish(self):
        self._expect(PHASE_FAKE_LOOP)
        self.phase = PHASE_DONE
        self._note("print", "transport-receipt")
        return SessionResult(self.transport_receipt, tuple(self.bundles))


# ---------------------------------------------------------------------------
# Check-out


def checkout_process(params, ledger, official_sk, transport_receipt, now, rng=None):
    """The official's desk: verify the transport receipt, countersign,
    post the registration session. The ledger notifies the voter's
    mailbox as a side effect of the append."""
    group = params.group
    rec = transport_receipt
    if not params.on_roll(rec.voter_id):
        raise ProtocolError("voter %r is not on the roll" % rec.voter_id)
    if not params.is_kiosk(rec.kiosk_pk):
        raise ProtocolError("receipt names an unaccepted kiosk")
    if not schnorr.verify(
        group, rec.kiosk_pk, "transport",
        encoding.transport_msg(group, rec.voter_id, rec.issued_at, rec.enc_credential),
        rec.sig,
    ):
        raise ProtocolError("kiosk endorsement does not verify")
    age = now - rec.issued_at
    if age < 0 or age > params.ticket_lifetime:
        raise ProtocolError("session fell outside the ticket lifetime",
                            code="stale-ticket")
    official_sig = schnorr.sign(
        group, official_sk, "checkout",
        encoding.checkout_msg(group, rec.voter_id, rec.issued_at,
                              rec.enc_credential, rec.sig),
        rng,
    )
    record = RegistrationRecord(
        rec.voter_id, rec.issued_at, rec.enc_credential, rec.kiosk_pk,
        rec.sig, schnorr.pubkey(group, official_sk), official_sig,
    )
    body = encoding.encode_registration(group, record)
    entry = ledger.append(KIND_REGISTRATION, body, author_sk=official_sk)
    return entry, record


# ---------------------------------------------------------------------------
# Activation


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str  # "pass" | "fail" | "unavailable"
    detail: str = ""


@dataclass(frozen=True)
class ActivationReport:
    checks: tuple
    verdict: str  # "pass" | "fail"
    credential_pk: object = None
    entity_name: str = None
    entries: tuple = ()

    def check(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failed(self):
        return [c for c in self.checks if c.status == "fail"]


def _recover_credential_key(params, bundle):
    """The credential key the receipt vouches for, plus how we know.

    With a printed secret the key is derived and the kiosk signature
    checked against it. Standing receipts omit the secret, so the
    signature itself picks the entity out of the provisioned registry.
    """
    group = params.group
    cr = bundle.credential_receipt
    ct = bundle.commit_receipt.enc_credential
    if cr.secret is not None:
        secret_bytes = group.encode_scalar(cr.secret)
    else:
        secret_bytes = absent_scalar(group)
    bind = encoding.credential_bind_hash(
        group, cr.voter_id, cr.issued_at, ct, secret_bytes,
        bundle.commit_receipt.commit, bundle.envelope.challenge, cr.response,
    )

    def endorsed(pk):
        return schnorr.verify(
            group, cr.kiosk_pk, "kiosk-credential",
            encoding.credential_msg(group, pk, bind), cr.sig,
        )

    if cr.secret is not None:
        pk = group.exp(group.g1, cr.secret)
        if endorsed(pk):
            return pk, None, ""
        return None, None, "kiosk signature does not cover the printed secret's key"
    candidates = [(name, pk) for name, pk in params.entities if endorsed(pk)]
    if not candidates:
        return None, None, "kiosk signature matches no standing entity"
    # in a tiny group a signature can coincidentally verify for a second
    # entity's key; the transcript separates them, since it was built
    # around exactly one
    for name, pk in candidates:
        if sigma.zkp_verify(
            group, params.joint_pk, ct[0], ct[1], group.div(ct[2], pk),
            (bundle.commit_receipt.commit,
             challenge_scalar(group, bundle.envelope.challenge),
             cr.response),
        ):
            return pk, name, ""
    name, pk = candidates[0]
    return pk, name, ""


def activate(params, bundle, ledger=None, expected_voter_id=None,
             register=True, rng=None):
    """Run the activation checklist against one receipt bundle.

    Offline checks always run; online ones report unavailable without a
    ledger. On a clean verdict (and register=True) the credential is
    posted to the ledger, followed by the envelope consumption, in that
    order; standing receipts verify but post nothing since the secret
    is not theirs to use.
    """
    group = params.group
    cr = bundle.credential_receipt
    co = bundle.commit_receipt
    env = bundle.envelope
    ct = co.enc_credential
    c_hash = digest(env.challenge)
    checks = []

    def offline(name, ok, detail=""):
        checks.append(CheckResult(name, "pass" if ok else "fail",
                                  "" if ok else detail))
        return ok

    # receipt-integrity-1: the commit receipt is the kiosk's own work
    offline(
        "receipt-integrity-1",
        schnorr.verify(
            group, cr.kiosk_pk, "commit",
            encoding.commit_msg(group, cr.voter_id, cr.issued_at, ct, co.commit),
            co.sig,
        ),
        "commit receipt signature does not verify",
    )

    # receipt-integrity-2: the credential receipt binds the full run
    credential_pk, entity_name, why = _recover_credential_key(params, bundle)
    offline("receipt-integrity-2", credential_pk is not None, why)

    offline_env = True
    if not params.is_printer(env.printer_pk):
        offline_env, env_why = False, "envelope printer is not accepted"
    elif not schnorr.verify(group, env.printer_pk, "envelope",
                            encoding.envelope_msg(c_hash), env.sig):
        offline_env, env_why = False, "envelope endorsement does not verify"
    else:
        env_why = ""
    offline("envelope-integrity", offline_env, env_why)

    identity_ok = params.on_roll(cr.voter_id)
    identity_why = "" if identity_ok else "voter is not on the roll"
    if identity_ok and expected_voter_id is not None and cr.voter_id != expected_voter_id:
        identity_ok, identity_why = False, "receipt names a different voter"
    if identity_ok and bundle.ticket is not None and bundle.ticket.voter_id != cr.voter_id:
        identity_ok, identity_why = False, "ticket and receipt disagree on the voter"
    offline("voter-identity", identity_ok, identity_why)

    if credential_pk is None:
        offline("zkp", False, "no credential key to verify against")
    else:
        transcript = (
            co.commit,
            challenge_scalar(group, env.challenge),
            cr.response,
        )
        offline(
            "zkp",
            sigma.zkp_verify(group, params.joint_pk, ct[0], ct[1],
                             group.div(ct[2], credential_pk), transcript),
            "proof transcript does not verify",
        )

    # online half
    if ledger is None:
        for name in CHECKS_ONLINE:
            checks.append(CheckResult(name, "unavailable", "no ledger connection"))
    else:
        def online(name, ok, detail=""):
            checks.append(CheckResult(name, "pass" if ok else "fail",
                                      "" if ok else detail))

        reg = ledger.latest_registration(cr.voter_id)
        record = reg[1] if reg is not None else None
        if record is None:
            online("fresh-receipt", False, "no registration session on record")
        else:
            online(
                "fresh-receipt",
                record.issued_at == cr.issued_at and record.enc_credential == ct,
                "a newer registration supersedes this receipt",
            )
        online(
            "eligible-official",
            record is not None
            and group.encode_element(record.official_pk) in ledger.role_keys("officials"),
            "registration official is not bound",
        )
        online(
            "eligible-kiosk",
            group.encode_element(cr.kiosk_pk) in ledger.role_keys("kiosks"),
            "kiosk is not bound",
        )
        online(
            "kiosk-signature",
            record is not None
            and record.kiosk_pk == cr.kiosk_pk
            and schnorr.verify(
                group, record.kiosk_pk, "transport",
                encoding.transport_msg(group, record.voter_id, record.issued_at,
                                       record.enc_credential),
                record.kiosk_sig,
            ),
            "registered kiosk endorsement does not verify",
        )
        online(
            "official-signature",
            record is not None
            and schnorr.verify(
                group, record.official_pk, "checkout",
                encoding.checkout_msg(group, record.voter_id, record.issued_at,
                                      record.enc_credential, record.kiosk_sig),
                record.official_sig,
            ),
            "check-out countersignature does not verify",
        )
        online("challenge-exists", ledger.envelope_issued(c_hash),
               "no such envelope was ever issued")
        online("challenge-unused", not ledger.envelope_consumed(c_hash),
               "envelope already consumed")

    verdict = "fail" if any(c.status == "fail" for c in checks) else "pass"
    entries = ()
    if (verdict == "pass" and register and ledger is not None
            and cr.secret is not None):
        registration = CredentialRegistration(
            cr.kiosk_pk, credential_pk, cr.sig,
            encoding.credential_bind_hash(
                group, cr.voter_id, cr.issued_at, ct,
                group.encode_scalar(cr.secret), co.commit,
                env.challenge, cr.response,
            ),
        )
        e1 = ledger.append(
            KIND_CREDENTIAL,
            encoding.encode_credential_registration(group, registration),
            author_sk=cr.secret,
        )
        e2 = ledger.append(
            KIND_CONSUMPTION,
            encoding.encode_consumption(group, ConsumptionRecord(env.challenge)),
            author_sk=cr.secret,
        )
        entries = (e1.index, e2.index)

    return ActivationReport(
        tuple(checks), verdict, credential_pk, entity_name, entries,
    )
