"""Self-contained election fixtures: one JSON document, replayed whole.

A fixture describes a small election from roll to tally: who walks into
the booth when, how many fakes they print, who delegates a standing
vote to which entity, and which credential casts which ballot.
replay() drives the real machinery end to end from that text and
returns everything it produced, including every secret the booth ever
printed, so a test can hold the outcome against independent plaintext
arithmetic. The schema is documented in docs/fixtures.md;
random_fixture() draws arbitrary valid instances for the equivalence
suite.
"""

import json
import random
from dataclasses import dataclass

from . import elgamal, protocol, schnorr, voting
from .groups import group_setup
from .ledger import REVOTE_FORBID, REVOTE_LAST, Ledger

REVOTE_POLICIES = (REVOTE_FORBID, REVOTE_LAST)


class FixtureError(ValueError):
    """The fixture text is malformed or internally inconsistent."""


def _need(cond, msg, *args):
    if not cond:
        raise FixtureError(msg % args if args else msg)


def load_fixture(source):
    """Parse and validate; returns a normalized dict with defaults
    filled in, safe to hand to replay()."""
    if isinstance(source, str):
        try:
            source = json.loads(source)
        except json.JSONDecodeError as exc:
            raise FixtureError("not JSON: %s" % exc) from None
    _need(isinstance(source, dict), "fixture must be a JSON object")

    fx = {
        "profile": source.get("profile", "test-mod-p"),
        "seed": source.get("seed", 0),
        "threshold": dict(source.get("threshold", {"n": 3, "t": 2})),
        "entities": list(source.get("entities", [])),
        "roll": [list(row) for row in source.get("roll", [])],
        "sessions": [],
        "events": [],
    }
    _need(fx["profile"] in ("test-mod-p", "production-curve"),
          "unknown profile %r", fx["profile"])
    n, t = fx["threshold"].get("n"), fx["threshold"].get("t")
    _need(isinstance(n, int) and isinstance(t, int) and 1 <= t <= n,
          "threshold must satisfy 1 <= t <= n")
    _need(fx["roll"], "roll must not be empty")
    voters = []
    for row in fx["roll"]:
        _need(len(row) == 2, "roll rows are [voter_id, display name]")
        voters.append(row[0])
    _need(len(set(voters)) == len(voters), "duplicate voter ids on the roll")
    _need(len(set(fx["entities"])) == len(fx["entities"]),
          "duplicate entity names")

    sessions_of = {}
    last_at = None
    for i, raw in enumerate(source.get("sessions", [])):
        sess = {
            "voter": raw.get("voter"),
            "at": raw.get("at"),
            "fakes": raw.get("fakes", 0),
            "delegate": raw.get("delegate"),
            "standing": list(raw.get("standing", [])),
            "activate": raw.get("activate", True),
        }
        _need(sess["voter"] in voters, "session %d: %r is not on the roll",
              i, sess["voter"])
        _need(isinstance(sess["at"], int), "session %d: at must be an int", i)
        _need(last_at is None or sess["at"] > last_at,
              "session times must be strictly increasing")
        last_at = sess["at"]
        _need(isinstance(sess["fakes"], int) and sess["fakes"] >= 0,
              "session %d: bad fake count", i)
        _need(sess["delegate"] is None or sess["delegate"] in fx["entities"],
              "session %d: unknown entity %r", i, sess["delegate"])
        for name in sess["standing"]:
            _need(name in fx["entities"],
                  "session %d: unknown standing entity %r", i, name)
        fx["sessions"].append(sess)
        sessions_of.setdefault(sess["voter"], []).append(sess)

    seen_events = set()
    for raw in source.get("events", []):
        event = {
            "event_id": raw.get("event_id"),
            "options": raw.get("options"),
            "opens_at": raw.get("opens_at"),
            "closes_at": raw.get("closes_at"),
            "revote": raw.get("revote", REVOTE_FORBID),
            "vote_limiting": raw.get("vote_limiting", False),
            "ballots": [],
        }
        eid = event["event_id"]
        _need(isinstance(eid, str) and eid, "events need a string event_id")
        _need(eid not in seen_events, "duplicate event %r", eid)
        seen_events.add(eid)
        _need(isinstance(event["options"], int) and event["options"] >= 1,
              "event %r: options is a menu size", eid)
        _need(isinstance(event["opens_at"], int)
              and isinstance(event["closes_at"], int)
              and event["opens_at"] < event["closes_at"],
              "event %r: window must open before it closes", eid)
        _need(last_at is None or event["opens_at"] > last_at + 60,
              "event %r opens before registration settles", eid)
        _need(event["revote"] in REVOTE_POLICIES,
              "event %r: unknown revote policy %r", eid, event["revote"])

        prev_at = None
        for pos, b in enumerate(raw.get("ballots", [])):
            ballot = {
                "by": b.get("by"),
                "credential": b.get("credential", "real"),
                "session": b.get("session"),
                "option": b.get("option"),
                "at": b.get("at"),
            }
            where = "event %r ballot %d" % (eid, pos)
            _need(isinstance(ballot["at"], int)
                  and event["opens_at"] <= ballot["at"] < event["closes_at"],
                  "%s: cast time outside the window", where)
            _need(prev_at is None or ballot["at"] >= prev_at,
                  "%s: cast times must not decrease", where)
            prev_at = ballot["at"]
            _need(isinstance(ballot["option"], int)
                  and 0 <= ballot["option"] < event["options"],
                  "%s: option off the menu", where)
            cred = ballot["credential"]
            if cred.startswith("entity:"):
                _need(cred.split(":", 1)[1] in fx["entities"],
                      "%s: unknown entity credential", where)
                _need(ballot["by"] is None and ballot["session"] is None,
                      "%s: entity ballots name no voter", where)
            else:
                recs = sessions_of.get(ballot["by"], [])
                _need(recs, "%s: %r has no session", where, ballot["by"])
                s = ballot["session"]
                _need(s is None or 0 <= s < len(recs),
                      "%s: no session ordinal %r", where, s)
                rec = recs[-1 if s is None else s]
                if cred == "real":
                    _need(rec["delegate"] is None,
                          "%s: delegated session printed no secret", where)
                elif cred.startswith("fake:"):
                    try:
                        k = int(cred.split(":", 1)[1])
                    except ValueError:
                        k = -1
                    _need(0 <= k < rec["fakes"],
                          "%s: session printed no fake %s", where, cred)
                else:
                    _need(False, "%s: unknown credential %r", where, cred)
            event["ballots"].append(ballot)
        fx["events"].append(event)
    return fx


# ---------------------------------------------------------------------------
# Replay


@dataclass
class SessionRecord:
    """One booth visit as replayed, secrets included."""

    voter: str
    at: int
    delegate: str
    secret: int          # None when the commit named an entity key
    fake_secrets: tuple
    activated: bool
    checkout_entry: int


@dataclass
class ReplayResult:
    fixture: dict
    group: object
    ledger: Ledger
    material: object
    params: object
    sessions: list        # SessionRecord, in fixture order
    entity_secrets: dict  # name -> credential scalar
    rejected: dict        # event_id -> tuple of (ballot position, reason)
    results: dict         # event_id -> TallyResult
    transcript: str
    violations: tuple

    @property
    def ok(self):
        return not self.violations


def _fmt_counts(counts):
    return "{%s}" % ", ".join(
        "%s: %d" % (k, counts[k]) for k in sorted(counts)
    )


def replay(fixture, path=None):
    """Run the whole fixture against the real machinery.

    Builds keys and a fresh ledger from the fixture's seed, walks every
    session through the booth, opens the events, casts the ballots
    (recording rejections instead of raising), tallies, and audits.
    Anything that should never happen with honest material, an
    activation failing or the audit breaking, lands in violations.
    """
    fx = load_fixture(fixture)
    group = group_setup(fx["profile"])
    rng = random.Random(fx["seed"])
    n, t = fx["threshold"]["n"], fx["threshold"]["t"]

    material = elgamal.dkg_keygen(group, n, t, rng)
    operator = schnorr.keygen(group, rng)
    official = schnorr.keygen(group, rng)
    kiosk = schnorr.keygen(group, rng)
    printer = schnorr.keygen(group, rng)
    tallier = schnorr.keygen(group, rng)
    entity_secrets = {}
    entity_pks = {}
    for name in fx["entities"]:
        sk = group.random_scalar(rng, nonzero=True)
        entity_secrets[name] = sk
        entity_pks[name] = group.exp(group.g1, sk)

    genesis = protocol.make_genesis_body(
        group, material.joint_pk, operator[1], [official[1]], [kiosk[1]],
        [printer[1]], [tallier[1]],
        [(name, entity_pks[name]) for name in fx["entities"]],
        [(vid, display) for vid, display in fx["roll"]],
        n=n, t=t, share_vks=material.share_vks,
    )
    ledger = Ledger.create(group, genesis, operator[0], path=path)
    params = protocol.SystemParams.from_genesis(genesis)
    for name in fx["entities"]:
        protocol.provision_entity_credential(ledger, kiosk[0],
                                             entity_secrets[name], rng)

    lines = [
        "election: %d voters, %d entities, %d events (%s, seed %d, %d of %d)"
        % (len(fx["roll"]), len(fx["entities"]), len(fx["events"]),
           fx["profile"], fx["seed"], t, n)
    ]
    violations = []

    def envelope():
        env = protocol.print_envelope(group, printer[0], rng)
        protocol.post_envelope(ledger, printer[0], env)
        return env

    records = []
    for i, sess in enumerate(fx["sessions"]):
        ticket = protocol.issue_ticket(group, official[0], sess["voter"],
                                       sess["at"], rng)
        booth = protocol.KioskSession(params, kiosk[0], rng)
        booth.checkin(ticket, sess["at"])
        delegate_pk = entity_pks.get(sess["delegate"])
        booth.print_commit(delegate_pk=delegate_pk)
        booth.scan_envelope(envelope())
        for _ in range(sess["fakes"]):
            booth.run_fake(envelope())
        for name in sess["standing"]:
            booth.run_standing(envelope(), entity_pks[name])
        result = booth.finish()
        entry, _record = protocol.checkout_process(
            params, ledger, official[0], result.transport_receipt,
            sess["at"] + 30, rng,
        )
        posted = 0
        if sess["activate"]:
            for bundle in result.bundles:
                report = protocol.activate(params, bundle, ledger,
                                           register=True, rng=rng)
                if report.verdict != "pass":
                    violations.append(
                        "session %d: %s bundle failed activation: %s"
                        % (i, bundle.kind,
                           [c.name for c in report.failed()]))
                posted += len(report.entries)
        real = result.bundles[0].credential_receipt.secret
        fakes = tuple(
            b.credential_receipt.secret
            for b in result.bundles if b.kind == protocol.BUNDLE_FAKE
        )
        records.append(SessionRecord(
            sess["voter"], sess["at"], sess["delegate"], real, fakes,
            sess["activate"], entry.index,
        ))
        lines.append(
            "session %d: %s at %d, fakes %d, standing %d, delegate %s"
            % (i, sess["voter"], sess["at"], sess["fakes"],
               len(sess["standing"]), sess["delegate"] or "none"))
        lines.append(
            "  checkout entry %d; %s"
            % (entry.index,
               "activated, %d entries posted" % posted
               if sess["activate"] else "not activated"))

    by_voter = {}
    for rec in records:
        by_voter.setdefault(rec.voter, []).append(rec)

    for event in fx["events"]:
        options = voting.standard_options(group, event["options"])
        voting.open_event(ledger, official[0], event["event_id"], options,
                          event["opens_at"], event["closes_at"],
                          revote=event["revote"],
                          vote_limiting=event["vote_limiting"], rng=rng)
        lines.append(
            "event %s: %d options, open [%d, %d), revote %s, vote limiting %s"
            % (event["event_id"], event["options"], event["opens_at"],
               event["closes_at"], event["revote"],
               "on" if event["vote_limiting"] else "off"))

    def ballot_secret(b):
        cred = b["credential"]
        if cred.startswith("entity:"):
            return entity_secrets[cred.split(":", 1)[1]]
        recs = by_voter[b["by"]]
        rec = recs[-1 if b["session"] is None else b["session"]]
        if cred == "real":
            return rec.secret
        return rec.fake_secrets[int(cred.split(":", 1)[1])]

    rejected = {event["event_id"]: [] for event in fx["events"]}
    queue = []
    for event in fx["events"]:
        for pos, b in enumerate(event["ballots"]):
            queue.append((b["at"], event["event_id"], pos, b))
    queue.sort(key=lambda row: row[0])

    for at, eid, pos, b in queue:
        secret = ballot_secret(b)
        event = ledger.event(eid)
        ballot = voting.cast_ballot(group, material.joint_pk, event, secret,
                                    b["option"], rng)
        ok, reason = voting.ballot_accept(group, material.joint_pk, event,
                                          ballot, at, ledger)
        who = b["credential"] if b["by"] is None \
            else "%s %s" % (b["by"], b["credential"])
        if ok:
            entry = voting.submit_ballot(ledger, material.joint_pk, ballot,
                                         secret, at)
            lines.append("  ballot %d (%s): %s option %d at %d, entry %d"
                         % (pos, eid, who, b["option"], at, entry.index))
        else:
            rejected[eid].append((pos, reason))
            lines.append("  ballot %d (%s): %s option %d at %d, rejected (%s)"
                         % (pos, eid, who, b["option"], at, reason))

    results = {}
    for event in fx["events"]:
        eid = event["event_id"]
        res = voting.tally(ledger, params, material.shares[:t], tallier[0],
                           eid, event["closes_at"] + 60, rng)
        results[eid] = res
        lines.append(
            "tally %s: counts %s, cast %d, tallied %d, unmatched %d, "
            "invalid %d, standing %d, discarded %s"
            % (eid, _fmt_counts(res.counts), res.cast, res.tallied,
               res.unmatched, res.invalid, res.standing,
               _fmt_counts(res.artifact["discarded"])))

    audit = ledger.audit()
    if audit.ok:
        lines.append("ledger audit: ok, %d entries" % audit.entries)
    else:
        violations.append("ledger audit failed at entry %s: %s"
                          % (audit.bad_index, audit.reason))
    for text in violations:
        lines.append("VIOLATION: %s" % text)

    return ReplayResult(
        fx, group, ledger, material, params, records, entity_secrets,
        {eid: tuple(v) for eid, v in rejected.items()}, results,
        "\n".join(lines) + "\n", tuple(violations),
    )


# ---------------------------------------------------------------------------
# Random instances


def random_fixture(seed, max_voters=20, max_fakes=5, max_delegations=2):
    """Draw a valid fixture: up to max_voters on the roll, up to
    max_fakes fake credentials across all sessions, up to
    max_delegations standing-vote delegations. Exercises
    re-registration, unactivated sessions, revote rejections, and
    ballots from superseded credentials."""
    rng = random.Random(seed)
    n_voters = rng.randint(1, max_voters)
    roll = [["v-%03d" % (i + 1), "Voter %d" % (i + 1)]
            for i in range(n_voters)]
    voters = [vid for vid, _ in roll]
    entities = ["civic-league", "harbor-union"][:rng.randint(1, 2)]
    delegators = rng.sample(voters,
                            min(rng.randint(0, max_delegations), n_voters))
    twice = rng.sample(voters, min(rng.randint(0, 2), n_voters))

    sessions = []
    at = 1000
    for vid in voters + sorted(twice):
        sessions.append({
            "voter": vid, "at": at, "fakes": 0, "delegate": None,
            "standing": [], "activate": rng.random() > 0.15,
        })
        at += 50
    for _ in range(rng.randint(0, max_fakes)):
        rng.choice(sessions)["fakes"] += 1
    for sess in sessions:
        if rng.random() < 0.2:
            sess["standing"] = [rng.choice(entities)]
    last_of = {}
    for i, sess in enumerate(sessions):
        last_of[sess["voter"]] = i
    for vid in delegators:
        sessions[last_of[vid]]["delegate"] = rng.choice(entities)

    by_voter = {}
    for sess in sessions:
        by_voter.setdefault(sess["voter"], []).append(sess)

    def pick_credential(vid):
        recs = by_voter[vid]
        s = len(recs) - 1
        if len(recs) > 1 and rng.random() < 0.25:
            s = rng.randrange(len(recs))
        rec = recs[s]
        choices = []
        if rec["delegate"] is None:
            choices.append("real")
        choices += ["fake:%d" % k for k in range(rec["fakes"])]
        if not choices:
            return None
        return {"by": vid, "credential": rng.choice(choices), "session": s}

    events = []
    t0 = at + 100
    for e in range(rng.randint(1, 2)):
        opens, closes = t0, t0 + 1000
        t0 = closes + 200
        options = rng.randint(2, 5)
        revote = rng.choice(list(REVOTE_POLICIES))
        ballots = []
        bt = opens + 10

        def cast(row, option=None):
            nonlocal bt
            ballots.append(dict(
                row, option=rng.randrange(options) if option is None
                else option, at=bt))
            bt += 5

        for vid in voters:
            if rng.random() < 0.75:
                row = pick_credential(vid)
                if row is None:
                    continue
                cast(row)
                if revote == REVOTE_FORBID and rng.random() < 0.1:
                    cast(dict(row))  # a second try, rejected on arrival
                elif revote == REVOTE_LAST and rng.random() < 0.15:
                    cast(dict(row))  # a revote, superseding the first
        for name in entities:
            delegated = any(s["delegate"] == name for s in sessions)
            if rng.random() < (0.9 if delegated else 0.3):
                cast({"by": None, "credential": "entity:%s" % name,
                      "session": None})
        events.append({
            "event_id": "e-%d" % (e + 1), "options": options,
            "opens_at": opens, "closes_at": closes, "revote": revote,
            "vote_limiting": rng.random() < 0.5, "ballots": ballots,
        })

    return load_fixture({
        "profile": "test-mod-p",
        "seed": rng.randrange(2 ** 32),
        "threshold": {"n": 3, "t": 2},
        "entities": entities,
        "roll": roll,
        "sessions": sessions,
        "events": events,
    })
