"""Scripted adversaries run against the real machinery.

Every scenario replays one attack from the threat analysis with the
genuine protocol code on both sides. Honest parties run the unmodified
state machines; the adversary gets exactly the powers its role grants,
so a compromised kiosk signs forged receipts with a real kiosk key and
a corrupt registrar runs sessions for voters who never showed up. Each
trial ends in a named outcome and the detection rate falls out of
counting them, which keeps the claims honest: nothing here knows how
the defences work, it only watches whether they fire.

Trials draw independent rng streams derived from (seed, trial index),
so a report is a pure function of its config. Scenarios that share a
ledger replay trials in order; the streams themselves would permit
running them in parallel.
"""

import hashlib
import math
import random
from collections import Counter
from dataclasses import dataclass

from . import elgamal, encoding, protocol, schnorr, sigma, voting
from .encoding import challenge_scalar, digest
from .groups import group_setup
from .ledger import Ledger, REVOTE_LAST
from .protocol import BUNDLE_FAKE, BUNDLE_REAL, SystemParams

ADVERSARIES = (
    "none",
    "impersonation",
    "kiosk-guess",
    "envelope-replacement",
    "credential-theft",
    "coercer-distinguisher",
    "side-channel",
)

# what each scenario's trials are allowed to end in; anything else is
# a harness bug and lands in the violations list
OUTCOMES = {
    "none": ("clean", "violation"),
    "impersonation": ("detected:notification", "adversary-success"),
    "kiosk-guess": ("detected:zkp", "adversary-success"),
    "envelope-replacement": ("detected:challenge-unused", "adversary-success"),
    "credential-theft": ("detected:foreign-ballot", "adversary-success"),
    "coercer-distinguisher": ("classifier-correct", "classifier-wrong"),
    "side-channel": (),
}

BASE_NOW = 1_000_000
TRIAL_SPACING = 100


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    adversary: str = "none"
    trials: int = 100
    seed: int = 0
    profile: str = "test-mod-p"
    voters: int = 0  # 0 sizes the roll to one entry per trial
    officials: int = 2
    kiosks: int = 2
    printers: int = 2
    talliers: int = 3
    threshold: int = 2
    envelopes: int = 10  # stack size in the booth
    fake_fraction: float = 0.5

    def check(self):
        if self.adversary not in ADVERSARIES:
            raise ScenarioError("unknown adversary %r" % self.adversary)
        if self.trials < 1:
            raise ScenarioError("at least one trial")
        if self.adversary == "kiosk-guess" and self.envelopes < 2:
            raise ScenarioError("kiosk-guess needs a stack of at least 2")
        if not 0.0 <= self.fake_fraction <= 1.0:
            raise ScenarioError("fake_fraction must be within [0, 1]")
        if not 1 <= self.threshold <= self.talliers:
            raise ScenarioError("threshold must be within [1, talliers]")
        for name in ("voters", "officials", "kiosks", "printers"):
            if getattr(self, name) < (0 if name == "voters" else 1):
                raise ScenarioError("%s count out of range" % name)


@dataclass(frozen=True)
class ScenarioReport:
    adversary: str
    profile: str
    trials: int
    seed: int
    outcomes: tuple  # (trial, outcome name) pairs
    counts: tuple  # (outcome name, count) sorted by name
    hits: int
    rate: float
    ci: tuple  # 95% interval, clamped to [0, 1]
    violations: tuple
    note: str = ""

    @property
    def rate_label(self):
        if self.adversary == "coercer-distinguisher":
            return "classifier accuracy"
        return "detection rate"

    def render(self):
        lines = [
            "adversary: %s" % self.adversary,
            "profile: %s" % self.profile,
            "trials: %d" % self.trials,
            "seed: %d" % self.seed,
        ]
        if self.note:
            lines.append("status: %s" % self.note)
        if self.counts:
            lines.append("outcomes:")
            lines.extend("  %s: %d" % pair for pair in self.counts)
        if self.trials:
            lines.append("%s: %.4f (95%% CI %.4f-%.4f)"
                         % (self.rate_label, self.rate, self.ci[0], self.ci[1]))
        if self.violations:
            lines.append("invariant violations:")
            lines.extend("  %s" % v for v in self.violations)
        else:
            lines.append("invariant violations: none")
        return "\n".join(lines) + "\n"

    def artifact(self):
        return {
            "adversary": self.adversary,
            "profile": self.profile,
            "trials": self.trials,
            "seed": self.seed,
            "outcomes": [[t, name] for t, name in self.outcomes],
            "counts": {name: n for name, n in self.counts},
            "hits": self.hits,
            "rate": self.rate,
            "ci": list(self.ci),
            "violations": list(self.violations),
            "note": self.note,
        }


def _stream(seed, label):
    material = b"votebooth/sim:%d:%s" % (seed, label.encode("utf-8"))
    return random.Random(int.from_bytes(hashlib.sha256(material).digest(),
                                        "big"))


def _interval(rate, trials):
    half = 1.96 * math.sqrt(rate * (1.0 - rate) / trials)
    return (max(0.0, rate - half), min(1.0, rate + half))


# ---------------------------------------------------------------------------
# A provisioned registrar for the trials to run against


class Stage:
    def __init__(self, config, rng):
        group = group_setup(config.profile)
        self.group = group
        self.material = elgamal.dkg_keygen(group, config.talliers,
                                           config.threshold, rng)
        self.operator = schnorr.keygen(group, rng)
        self.officials = [schnorr.keygen(group, rng)
                          for _ in range(config.officials)]
        self.kiosks = [schnorr.keygen(group, rng)
                       for _ in range(config.kiosks)]
        self.printers = [schnorr.keygen(group, rng)
                         for _ in range(config.printers)]
        self.talliers = [schnorr.keygen(group, rng)
                         for _ in range(config.talliers)]
        self.roll = [("v-%05d" % i, "Voter %d" % i)
                     for i in range(config.voters or config.trials)]
        genesis = protocol.make_genesis_body(
            group, self.material.joint_pk, self.operator[1],
            [pk for _, pk in self.officials],
            [pk for _, pk in self.kiosks],
            [pk for _, pk in self.printers],
            [pk for _, pk in self.talliers],
            [], self.roll, config.talliers, config.threshold,
            share_vks=self.material.share_vks,
        )
        self.ledger = Ledger.create(group, genesis, self.operator[0])
        self.params = SystemParams.from_genesis(self.ledger.genesis)
        self.event = None

    def voter_for(self, trial):
        return self.roll[trial % len(self.roll)][0]

    def envelope(self, rng):
        sk = self.printers[0][0]
        env = protocol.print_envelope(self.group, sk, rng)
        protocol.post_envelope(self.ledger, sk, env)
        return env

    def ceremony(self, voter_id, now, fakes, rng):
        """Honest check-in through check-out, entirely by the book."""
        ticket = protocol.issue_ticket(self.group, self.officials[0][0],
                                       voter_id, now, rng)
        session = protocol.KioskSession(self.params, self.kiosks[0][0],
                                        rng=rng)
        session.checkin(ticket, now)
        session.print_commit()
        session.scan_envelope(self.envelope(rng))
        for _ in range(fakes):
            session.run_fake(self.envelope(rng))
        result = session.finish()
        protocol.checkout_process(self.params, self.ledger,
                                  self.officials[0][0],
                                  result.transport_receipt, now + 60, rng)
        return result


def _forged_bundle(stage, envelope, voter_id, now, guessed_challenge, rng):
    """What a compromised kiosk prints when it fakes the real order.

    The transcript is simulated against the challenge the kiosk expects
    the voter to scan, exactly as the fake path would do it, but the
    commit receipt goes to paper before the scan. The printed secret is
    a decoy; the ciphertext hides a credential only the adversary knows.
    """
    group, params = stage.group, stage.params
    kiosk_sk, kiosk_pk = stage.kiosks[0]
    hidden = group.random_scalar(rng, nonzero=True)
    ct = elgamal.encrypt(group, params.joint_pk, group.exp(group.g1, hidden),
                         rng)
    decoy = group.random_scalar(rng, nonzero=True)
    decoy_pk = group.exp(group.g1, decoy)
    commit, _, response = sigma.zkp_simulate(
        group, params.joint_pk, ct[0], ct[1], group.div(ct[2], decoy_pk),
        challenge_scalar(group, guessed_challenge), rng,
    )
    commit_sig = schnorr.sign(
        group, kiosk_sk, "commit",
        encoding.commit_msg(group, voter_id, now, ct, commit), rng,
    )
    bind = encoding.credential_bind_hash(
        group, voter_id, now, ct, group.encode_scalar(decoy), commit,
        envelope.challenge, response,
    )
    cred_sig = schnorr.sign(
        group, kiosk_sk, "kiosk-credential",
        encoding.credential_msg(group, decoy_pk, bind), rng,
    )
    transport_sig = schnorr.sign(
        group, kiosk_sk, "transport",
        encoding.transport_msg(group, voter_id, now, ct), rng,
    )
    ticket = protocol.issue_ticket(group, stage.officials[0][0], voter_id,
                                   now, rng)
    return protocol.ReceiptBundle(
        BUNDLE_REAL, ticket,
        protocol.CommitReceipt(ct, commit, commit_sig),
        envelope,
        protocol.CredentialReceipt(voter_id, now, decoy, response, kiosk_pk,
                                   cred_sig),
        protocol.TransportReceipt(voter_id, now, ct, kiosk_pk, transport_sig),
    )


def _bundle_bytes(group, bundle):
    return encoding.pack_fields(
        encoding.encode_ticket(group, bundle.ticket),
        encoding.encode_commit_receipt(group, bundle.commit_receipt),
        encoding.encode_envelope(group, bundle.envelope),
        encoding.encode_credential_receipt(group, bundle.credential_receipt),
        encoding.encode_transport_receipt(group, bundle.transport_receipt),
    )


def baseline_classifier(params, bundle, ledger):
    """Everything a coercer can compute from a surrendered bundle plus
    the public ledger. A structural difference between real and fake
    would show up here as better-than-chance accuracy; with none, the
    fallback is a deterministic coin keyed on the bundle bytes."""
    report = protocol.activate(params, bundle, ledger, register=False)
    if report.failed():
        return BUNDLE_FAKE
    blob = _bundle_bytes(params.group, bundle)
    return BUNDLE_REAL if digest(blob)[0] & 1 else BUNDLE_FAKE


# ---------------------------------------------------------------------------
# Trials, one function per adversary


def _trial_none(stage, config, voter_id, now, rng, trial, violations):
    result = stage.ceremony(voter_id, now, rng.randrange(4), rng)
    clean = True
    for bundle in result.bundles:
        report = protocol.activate(stage.params, bundle, stage.ledger,
                                   rng=rng)
        for c in report.failed():
            violations.append("trial %d: %s bundle failed %s (%s)"
                              % (trial, bundle.kind, c.name, c.detail))
            clean = False
    return ("clean" if clean else "violation"), False


def _trial_impersonation(stage, config, voter_id, now, rng, trial,
                         violations):
    # a corrupt official and kiosk register the voter in absentia; the
    # machinery is the honest one because nothing about it can tell
    stage.ceremony(voter_id, now, 0, rng)
    mine = [n for n in stage.ledger.notifications(voter_id)
            if n.issued_at == now]
    if len(mine) != 1:
        violations.append("trial %d: %d notifications for one session"
                          % (trial, len(mine)))
    if mine:
        # the voter attended no session, so any notification is a flag
        return "detected:notification", True
    return "adversary-success", False


def _trial_kiosk_guess(stage, config, voter_id, now, rng, trial, violations):
    group = stage.group
    # a colluding printer lets the kiosk read the whole stack, but not
    # which envelope the voter's hand will land on
    stack = [rng.getrandbits(8 * group.challenge_bytes).to_bytes(
        group.challenge_bytes, "big") for _ in range(config.envelopes)]
    guess = rng.randrange(config.envelopes)
    pick = rng.randrange(config.envelopes)
    printer_sk, printer_pk = stage.printers[0]
    picked = protocol.Envelope(
        printer_pk, stack[pick],
        schnorr.sign(group, printer_sk, "envelope",
                     encoding.envelope_msg(digest(stack[pick])), rng),
    )
    bundle = _forged_bundle(stage, picked, voter_id, now, stack[guess], rng)
    report = protocol.activate(stage.params, bundle, ledger=None,
                               register=False)
    for c in report.failed():
        if c.name != "zkp":
            violations.append("trial %d: unexpected %s failure (%s)"
                              % (trial, c.name, c.detail))
    if report.check("zkp").status == "fail":
        return "detected:zkp", True
    return "adversary-success", False


def _trial_envelope_replacement(stage, config, voter_id, now, rng, trial,
                                violations):
    group, params, ledger = stage.group, stage.params, stage.ledger
    # one unclaimed genuine envelope, copied over the whole stack; the
    # kiosk now knows the challenge in advance with certainty
    master = protocol.print_envelope(group, stage.printers[0][0], rng)
    protocol.post_envelope(ledger, stage.printers[0][0], master)
    bundle = _forged_bundle(stage, master, voter_id, now, master.challenge,
                            rng)
    protocol.checkout_process(params, ledger, stage.officials[0][0],
                              bundle.transport_receipt, now + 60, rng)
    makes_fake = rng.random() < config.fake_fraction
    first = protocol.activate(params, bundle, ledger, rng=rng)
    if first.verdict != "pass":
        violations.append("trial %d: primed credential failed %s"
                          % (trial, [c.name for c in first.failed()]))
    if not makes_fake:
        return "adversary-success", False
    # the voter also made a fake, scanning another copy of the same
    # envelope; its activation trips over the consumed challenge
    fake_secret = group.random_scalar(rng, nonzero=True)
    fake_pk = group.exp(group.g1, fake_secret)
    ct = bundle.commit_receipt.enc_credential
    commit, _, response = sigma.zkp_simulate(
        group, params.joint_pk, ct[0], ct[1], group.div(ct[2], fake_pk),
        challenge_scalar(group, master.challenge), rng,
    )
    kiosk_sk, kiosk_pk = stage.kiosks[0]
    commit_sig = schnorr.sign(
        group, kiosk_sk, "commit",
        encoding.commit_msg(group, voter_id, now, ct, commit), rng,
    )
    bind = encoding.credential_bind_hash(
        group, voter_id, now, ct, group.encode_scalar(fake_secret), commit,
        master.challenge, response,
    )
    cred_sig = schnorr.sign(
        group, kiosk_sk, "kiosk-credential",
        encoding.credential_msg(group, fake_pk, bind), rng,
    )
    fake = protocol.ReceiptBundle(
        BUNDLE_FAKE, bundle.ticket,
        protocol.CommitReceipt(ct, commit, commit_sig), master,
        protocol.CredentialReceipt(voter_id, now, fake_secret, response,
                                   kiosk_pk, cred_sig),
        bundle.transport_receipt,
    )
    second = protocol.activate(params, fake, ledger, rng=rng)
    if second.check("challenge-unused").status == "fail":
        return "detected:challenge-unused", True
    violations.append("trial %d: duplicate envelope escaped detection"
                      % trial)
    return "adversary-success", False


def _trial_credential_theft(stage, config, voter_id, now, rng, trial,
                            violations):
    group, params, ledger = stage.group, stage.params, stage.ledger
    result = stage.ceremony(voter_id, now, 0, rng)
    report = protocol.activate(params, result.real, ledger, rng=rng)
    if report.verdict != "pass":
        violations.append("trial %d: honest activation failed %s"
                          % (trial, [c.name for c in report.failed()]))
    # the kiosk kept a copy of the secret it printed
    stolen = result.real.credential_receipt.secret
    event = stage.event
    ballot = voting.cast_ballot(group, params.joint_pk, event, stolen,
                                rng.randrange(len(event.options)), rng)
    voting.submit_ballot(ledger, params.joint_pk, ballot, stolen, now + 70)
    # the voter's device watches for ballots under its credential key
    mine = group.exp(group.g1, stolen)
    foreign = [b for _, b in ledger.ballots(event.event_id)
               if b.credential_pk == mine]
    if foreign:
        return "detected:foreign-ballot", True
    violations.append("trial %d: stolen-credential ballot left no trace"
                      % trial)
    return "adversary-success", False


def _trial_coercer(stage, config, voter_id, now, rng, trial, violations,
                   classifier):
    result = stage.ceremony(voter_id, now, 1, rng)
    comply = rng.random() < 0.5
    surrendered = result.bundles[0] if comply else result.bundles[1]
    truth = BUNDLE_REAL if comply else BUNDLE_FAKE
    # the coercer gets the paper, not the kiosk's memory of the order
    shown = protocol.ReceiptBundle(
        "surrendered", surrendered.ticket, surrendered.commit_receipt,
        surrendered.envelope, surrendered.credential_receipt,
        surrendered.transport_receipt,
    )
    guess = classifier(stage.params, shown, stage.ledger)
    if guess not in (BUNDLE_REAL, BUNDLE_FAKE):
        violations.append("trial %d: classifier returned %r" % (trial, guess))
        return "classifier-wrong", False
    if guess == truth:
        return "classifier-correct", True
    return "classifier-wrong", False


def run_scenario(config, classifier=None):
    config.check()
    if config.adversary == "side-channel":
        return ScenarioReport(
            config.adversary, config.profile, 0, config.seed, (), (), 0,
            0.0, (0.0, 0.0), (), note="out of scope",
        )
    stage = Stage(config, _stream(config.seed, "stage"))
    if config.adversary == "credential-theft":
        closes = BASE_NOW + (config.trials + 10) * TRIAL_SPACING
        # last-counts, because the tiny test group has so few possible
        # credential keys that trials would trip the forbid-policy dedup
        _, stage.event = voting.open_event(
            stage.ledger, stage.officials[0][0], "ev-sim",
            voting.standard_options(stage.group, 3), BASE_NOW, closes,
            revote=REVOTE_LAST, rng=_stream(config.seed, "event"),
        )
    classifier = classifier or baseline_classifier
    violations = []
    outcomes = []
    hits = 0
    for trial in range(config.trials):
        rng = _stream(config.seed, "trial:%d" % trial)
        voter_id = stage.voter_for(trial)
        now = BASE_NOW + trial * TRIAL_SPACING
        args = (stage, config, voter_id, now, rng, trial, violations)
        if config.adversary == "none":
            outcome, hit = _trial_none(*args)
        elif config.adversary == "impersonation":
            outcome, hit = _trial_impersonation(*args)
        elif config.adversary == "kiosk-guess":
            outcome, hit = _trial_kiosk_guess(*args)
        elif config.adversary == "envelope-replacement":
            outcome, hit = _trial_envelope_replacement(*args)
        elif config.adversary == "credential-theft":
            outcome, hit = _trial_credential_theft(*args)
        else:
            outcome, hit = _trial_coercer(*args, classifier)
        outcomes.append((trial, outcome))
        hits += hit
    audit = stage.ledger.audit()
    if not audit.ok:
        violations.append("ledger audit failed at entry %d (%s)"
                          % (audit.bad_index, audit.reason))
    rate = hits / config.trials
    counts = tuple(sorted(Counter(name for _, name in outcomes).items()))
    return ScenarioReport(
        config.adversary, config.profile, config.trials, config.seed,
        tuple(outcomes), counts, hits, rate,
        _interval(rate, config.trials), tuple(violations),
    )
