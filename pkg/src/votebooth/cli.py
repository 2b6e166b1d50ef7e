"""Operator command line: one subcommand per desk task.

Thin shells only. Every command parses arguments, opens files, calls
one module operation, prints, and exits; nothing here re-implements
protocol logic. Exit codes follow one convention throughout: 0 is
success, 1 is a failed verification or a rejected operation, 2 is a
usage error (argparse's own code).

A ledger file names its own group profile in the genesis entry, so
commands that start from a ledger need no profile flag; --profile
matters for setup, for scenarios, and for auditing a file too damaged
to sniff. Output is deterministic under --seed plus --no-timestamps,
provided the command's own time arguments (--at, --opens-at) are given
explicitly instead of defaulting to the clock.
"""

import argparse
import json
import os
import random
import sys
import time
from dataclasses import dataclass, replace

from votebooth import bench, elgamal, encoding, fixtures, protocol, schnorr, simulation, voting
from votebooth.encoding import CodecError, from_base64, to_base64
from votebooth.groups import PROFILES, group_setup
from votebooth.ledger import Ledger, LedgerError, audit_file, peek_profile
from votebooth.protocol import ProtocolError, SystemParams
from votebooth.service import KeyBox, load_config, serve
from votebooth.voting import VotingError


@dataclass(frozen=True)
class CliConfig:
    ledger_path: str = "ledger.bin"
    keybox_path: str = "registrar.json"
    profile: str = "test-mod-p"
    threshold: tuple = (2, 3)  # t of n
    seed: int = None           # None draws from system entropy
    no_timestamps: bool = False
    as_json: bool = False


def _config(args):
    return CliConfig(
        ledger_path=args.ledger,
        keybox_path=args.keybox,
        profile=args.profile,
        threshold=getattr(args, "threshold", CliConfig.threshold),
        seed=args.seed,
        no_timestamps=args.no_timestamps,
        as_json=args.as_json,
    )


def _rng(cfg):
    if cfg.seed is not None:
        return random.Random(cfg.seed)
    return random.SystemRandom()


def _fail(exc, code="", status=1):
    tag = " [%s]" % code if code else ""
    print("error%s: %s" % (tag, exc), file=sys.stderr)
    return status


def _now(given):
    return int(time.time()) if given is None else given


def _pick(items, index, what):
    try:
        return items[index]
    except IndexError:
        raise ValueError("no %s %d in the keybox" % (what, index)) from None


def _open_ledger(cfg):
    group = group_setup(peek_profile(cfg.ledger_path))
    return group, Ledger.open(group, cfg.ledger_path)


# ---------------------------------------------------------------------------
# setup


def _read_roll(path):
    """One voter per line: the id, then the display name. Blank lines
    and #-comments are skipped; a missing name falls back to the id."""
    roll = []
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(None, 1)
            voter_id = parts[0]
            if voter_id in seen:
                raise ValueError("%s line %d: duplicate voter id %r"
                                 % (path, lineno, voter_id))
            seen.add(voter_id)
            roll.append((voter_id, parts[1] if len(parts) > 1 else voter_id))
    if not roll:
        raise ValueError("roll file %s has no voters" % path)
    return roll


def cmd_setup(cfg, args):
    for path in (cfg.ledger_path, cfg.keybox_path):
        if os.path.exists(path) and os.path.getsize(path):
            return _fail("%s already exists; refusing to overwrite" % path,
                         status=2)
    roll = _read_roll(args.roll)
    group = group_setup(cfg.profile)
    rng = _rng(cfg)
    t, n = cfg.threshold
    material = elgamal.dkg_keygen(group, n, t, rng)
    operator = schnorr.keygen(group, rng)
    officials = [schnorr.keygen(group, rng) for _ in range(args.officials)]
    kiosks = [schnorr.keygen(group, rng) for _ in range(args.kiosks)]
    printers = [schnorr.keygen(group, rng) for _ in range(args.printers)]
    talliers = [schnorr.keygen(group, rng) for _ in range(n)]
    entities = [(name, group.random_scalar(rng, nonzero=True))
                for name in args.entity]
    genesis = protocol.make_genesis_body(
        group, material.joint_pk, operator[1],
        [pk for _, pk in officials],
        [pk for _, pk in kiosks],
        [pk for _, pk in printers],
        [pk for _, pk in talliers],
        [(name, group.exp(group.g1, sk)) for name, sk in entities],
        roll, n, t, share_vks=material.share_vks,
        ticket_lifetime=args.ticket_lifetime,
    )
    ledger = Ledger.create(group, genesis, operator[0], path=cfg.ledger_path)
    for _name, secret in entities:
        protocol.provision_entity_credential(ledger, kiosks[0][0], secret, rng)
    KeyBox(
        cfg.profile, operator[0],
        [sk for sk, _ in officials],
        [sk for sk, _ in kiosks],
        [sk for sk, _ in printers],
        [sk for sk, _ in talliers],
        list(material.shares), entities,
    ).save(cfg.keybox_path)
    print("ledger: %s (%d entries)" % (cfg.ledger_path, len(ledger.entries)))
    print("keybox: %s" % cfg.keybox_path)
    print("profile: %s, threshold %d of %d" % (group.name, t, n))
    print("roll: %d voters" % len(roll))
    if entities:
        print("entities: %s" % ", ".join(name for name, _ in entities))
    print("joint key: %s" % to_base64(group.encode_element(material.joint_pk)))
    return 0


# ---------------------------------------------------------------------------
# envelopes and the service


def cmd_envelope_batch(cfg, args):
    group, ledger = _open_ledger(cfg)
    keybox = KeyBox.load(cfg.keybox_path)
    printer_sk = _pick(keybox.printers, args.printer, "printer")
    rng = _rng(cfg)
    first = len(ledger.entries)
    payloads = []
    for _ in range(args.count):
        envelope = protocol.print_envelope(group, printer_sk, rng)
        protocol.post_envelope(ledger, printer_sk, envelope)
        payloads.append(to_base64(encoding.encode_envelope(group, envelope)))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump({"profile": group.name, "envelopes": payloads}, fh,
                      indent=2)
            fh.write("\n")
        print("%d envelopes -> %s (ledger entries %d..%d)"
              % (args.count, args.out, first, len(ledger.entries) - 1))
    else:
        for payload in payloads:
            print(payload)
    return 0


def cmd_serve(cfg, args):
    svc = load_config(args.config)
    # explicit flags beat the config file; the shared flags count as
    # explicit only away from their defaults, since argparse cannot tell
    if args.ledger != CliConfig.ledger_path:
        svc = replace(svc, ledger_path=args.ledger)
    if args.keybox != CliConfig.keybox_path:
        svc = replace(svc, keybox_path=args.keybox)
    if args.host is not None:
        svc = replace(svc, host=args.host)
    if args.port is not None:
        svc = replace(svc, port=args.port)
    print("serving on http://%s:%d (ledger %s)"
          % (svc.host, svc.port, svc.ledger_path), flush=True)
    serve(svc)
    return 0


# ---------------------------------------------------------------------------
# replay and verification


def cmd_ceremony_replay(cfg, args):
    if args.fixture == "-":
        text = sys.stdin.read()
    else:
        with open(args.fixture, "r", encoding="utf-8") as fh:
            text = fh.read()
    start = time.perf_counter()
    result = fixtures.replay(text, path=args.ledger_out)
    sys.stdout.write(result.transcript)
    if not cfg.no_timestamps:
        print("elapsed: %.2fs" % (time.perf_counter() - start))
    return 0 if result.ok else 1


def _decode_bundle(group, blob):
    """A receipt bundle from its JSON file form: base64 payloads under
    the same keys the service hands out. Ticket and transport receipt
    are optional, since a verifier may only hold the booth's prints."""
    def field(name, decoder, required=True):
        raw = blob.get(name)
        if raw is None:
            if required:
                raise CodecError("bundle file is missing %r" % name)
            return None
        return decoder(group, from_base64(raw))

    return protocol.ReceiptBundle(
        blob.get("kind", "surrendered"),
        field("ticket", encoding.decode_ticket, required=False),
        field("commit_receipt", encoding.decode_commit_receipt),
        field("envelope", encoding.decode_envelope),
        field("credential_receipt", encoding.decode_credential_receipt),
        field("transport_receipt", encoding.decode_transport_receipt,
              required=False),
    )


def cmd_verify_credential(cfg, args):
    group, ledger = _open_ledger(cfg)
    params = SystemParams.from_genesis(ledger.genesis)
    with open(args.bundle, "r", encoding="utf-8") as fh:
        blob = json.load(fh)
    bundle = _decode_bundle(group, blob)
    report = protocol.activate(
        params, bundle,
        ledger=None if args.offline else ledger,
        expected_voter_id=args.voter,
        register=args.enroll,
        rng=_rng(cfg),
    )
    for check in report.checks:
        line = "%s: %s" % (check.name, check.status)
        if check.detail:
            line += " (%s)" % check.detail
        print(line)
    if report.entity_name:
        print("standing entity: %s" % report.entity_name)
    if report.entries:
        print("posted entries: %s" % ", ".join(str(i) for i in report.entries))
    print("verdict: %s" % report.verdict)
    return 0 if report.verdict == "pass" else 1


# ---------------------------------------------------------------------------
# events, ballots, tallies


def cmd_event_open(cfg, args):
    group, ledger = _open_ledger(cfg)
    keybox = KeyBox.load(cfg.keybox_path)
    official_sk = _pick(keybox.officials, args.official, "official")
    opens_at = _now(args.opens_at)
    entry, event = voting.open_event(
        ledger, official_sk, args.event_id,
        voting.standard_options(group, args.options),
        opens_at, args.closes_at,
        revote=args.revote, vote_limiting=args.vote_limiting, rng=_rng(cfg),
    )
    print("event %s opened: %d options, window [%d, %d), revote %s, "
          "vote limiting %s, entry %d"
          % (event.event_id, len(event.options), event.opens_at,
             event.closes_at, event.revote,
             "on" if event.vote_limiting else "off", entry.index))
    return 0


def cmd_event_close(cfg, args):
    _group, ledger = _open_ledger(cfg)
    keybox = KeyBox.load(cfg.keybox_path)
    official_sk = _pick(keybox.officials, args.official, "official")
    entry = voting.close_event(ledger, official_sk, args.event_id,
                               _now(args.at), _rng(cfg))
    if entry is None:
        print("event %s already closed" % args.event_id)
    else:
        print("event %s closed, entry %d" % (args.event_id, entry.index))
    return 0


def _credential_secret(group, args):
    if args.secret is not None:
        return group.decode_scalar(from_base64(args.secret))
    with open(args.receipt, "r", encoding="utf-8") as fh:
        text = fh.read().strip()
    if text.startswith("{"):
        raw = json.loads(text).get("credential_receipt")
        if raw is None:
            raise CodecError("receipt file has no credential_receipt field")
    else:
        raw = text
    receipt = encoding.decode_credential_receipt(group, from_base64(raw))
    if receipt.secret is None:
        raise VotingError("receipt carries no secret (standing delegation)")
    return receipt.secret


def cmd_cast(cfg, args):
    group, ledger = _open_ledger(cfg)
    params = SystemParams.from_genesis(ledger.genesis)
    secret = _credential_secret(group, args)
    event = ledger.event(args.event_id)
    if event is None:
        raise VotingError("no event %r" % args.event_id)
    ballot = voting.cast_ballot(group, params.joint_pk, event, secret,
                                args.option, _rng(cfg))
    entry = voting.submit_ballot(ledger, params.joint_pk, ballot, secret,
                                 _now(args.at))
    print("ballot accepted: event %s option %d, entry %d"
          % (args.event_id, args.option, entry.index))
    return 0


def cmd_tally(cfg, args):
    _group, ledger = _open_ledger(cfg)
    keybox = KeyBox.load(cfg.keybox_path)
    params = SystemParams.from_genesis(ledger.genesis)
    _n, t = params.threshold
    shares = list(keybox.shares)
    if args.shares:
        want = {int(x) for x in args.shares.split(",")}
        shares = [s for s in shares if s.index in want]
        missing = want - {s.index for s in shares}
        if missing:
            raise ValueError("no tallier share %s in the keybox"
                             % ", ".join(str(i) for i in sorted(missing)))
    else:
        shares = shares[:t]
    tallier_sk = _pick(keybox.talliers, args.tallier, "tallier")
    result = voting.tally(ledger, params, shares, tallier_sk, args.event_id,
                          _now(args.at), _rng(cfg))
    if cfg.as_json:
        print(json.dumps(result.artifact, indent=2, sort_keys=True))
        return 0
    print("event %s: cast %d, tallied %d, unmatched %d, invalid %d, standing %d"
          % (result.event_id, result.cast, result.tallied, result.unmatched,
             result.invalid, result.standing))
    if result.counts:
        print("counts:")
        for index in sorted(result.counts):
            print("  option %d: %d" % (index, result.counts[index]))
    else:
        print("counts: none")
    if result.artifact["discarded"]:
        print("discarded:")
        for reason, count in result.artifact["discarded"].items():
            print("  %s: %d" % (reason, count))
    print("artifact entry: %d" % result.entry_index)
    return 0


# ---------------------------------------------------------------------------
# adversaries, audits, benchmarks


def cmd_scenario(cfg, args):
    config = simulation.ScenarioConfig(
        adversary=args.adversary,
        trials=args.trials,
        seed=0 if cfg.seed is None else cfg.seed,
        profile=cfg.profile,
        envelopes=args.envelopes,
    )
    start = time.perf_counter()
    report = simulation.run_scenario(config)
    if cfg.as_json:
        print(json.dumps(report.artifact(), indent=2, sort_keys=True))
        return 0
    sys.stdout.write(report.render())
    if not cfg.no_timestamps:
        print("elapsed: %.2fs" % (time.perf_counter() - start))
    return 0


def cmd_ledger_audit(cfg, args):
    try:
        profile = peek_profile(cfg.ledger_path)
    except LedgerError:
        profile = cfg.profile  # too damaged to sniff; trust the flag
    report = audit_file(group_setup(profile), cfg.ledger_path)
    if report.ok:
        print("ledger audit: ok, %d entries" % report.entries)
        return 0
    print("ledger audit: FAILED at entry %d (%s)"
          % (report.bad_index, report.reason))
    return 1


def cmd_bench(cfg, args):
    rows = bench.measure(iterations=args.iterations, repeat=args.repeat)
    sys.stdout.write(bench.render(rows))
    return 0


# ---------------------------------------------------------------------------
# wiring


def _threshold_arg(text):
    try:
        t, n = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected T,N") from None
    if not 1 <= t <= n:
        raise argparse.ArgumentTypeError("need 1 <= T <= N")
    return (t, n)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--ledger", metavar="PATH",
                        default=CliConfig.ledger_path,
                        help="ledger file (default: %(default)s)")
    common.add_argument("--keybox", metavar="PATH",
                        default=CliConfig.keybox_path,
                        help="registrar secrets file (default: %(default)s)")
    common.add_argument("--profile", choices=PROFILES,
                        default=CliConfig.profile,
                        help="group profile where no ledger names one")
    common.add_argument("--seed", type=int, default=None,
                        help="deterministic randomness (default: system entropy)")
    common.add_argument("--no-timestamps", action="store_true",
                        help="omit wall-clock lines from output")
    common.add_argument("--json", dest="as_json", action="store_true",
                        help="print the machine-readable artifact where one exists")

    parser = argparse.ArgumentParser(
        prog="votebooth",
        description="Registrar operations: provisioning, the booth service, "
                    "credential verification, voting events, tallies, audits.",
        epilog="exit codes: 0 success, 1 failed verification or rejected "
               "operation, 2 usage error",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND",
                                required=True)

    p = sub.add_parser("setup", parents=[common],
                       help="generate keys and start a ledger from a roll file")
    p.add_argument("--roll", metavar="FILE", required=True,
                   help="voter roll, one id plus display name per line")
    p.add_argument("--threshold", type=_threshold_arg, metavar="T,N",
                   default=CliConfig.threshold,
                   help="tally threshold, T of N shares (default: 2,3)")
    p.add_argument("--officials", type=int, default=2)
    p.add_argument("--kiosks", type=int, default=2)
    p.add_argument("--printers", type=int, default=2)
    p.add_argument("--entity", action="append", default=[], metavar="NAME",
                   help="provision a standing entity (repeatable)")
    p.add_argument("--ticket-lifetime", type=int,
                   default=protocol.DEFAULT_TICKET_LIFETIME,
                   help="seconds a check-in ticket stays usable")
    p.set_defaults(func=cmd_setup)

    p = sub.add_parser("envelope-batch", parents=[common],
                       help="print and post a batch of challenge envelopes")
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--printer", type=int, default=0,
                   help="keybox printer index")
    p.add_argument("--out", metavar="FILE",
                   help="write payloads as JSON instead of stdout lines")
    p.set_defaults(func=cmd_envelope_batch)

    p = sub.add_parser("serve", parents=[common],
                       help="run the registrar HTTP service")
    p.add_argument("--config", metavar="FILE",
                   help="service config JSON; explicit flags override it")
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("ceremony-replay", parents=[common],
                       help="replay a fixture file and print its transcript")
    p.add_argument("fixture", help="fixture JSON file, or - for stdin")
    p.add_argument("--ledger-out", metavar="PATH", default=None,
                   help="persist the replayed ledger to this file")
    p.set_defaults(func=cmd_ceremony_replay)

    p = sub.add_parser("verify-credential", parents=[common],
                       help="run the activation checklist on a receipt bundle")
    p.add_argument("--bundle", metavar="FILE", required=True,
                   help="bundle JSON (the service's finish output shape)")
    p.add_argument("--voter", metavar="ID", default=None,
                   help="insist the receipts name this voter")
    p.add_argument("--offline", action="store_true",
                   help="skip the ledger-backed checks")
    p.add_argument("--enroll", action="store_true",
                   help="post the credential registration on a clean verdict")
    p.set_defaults(func=cmd_verify_credential)

    p = sub.add_parser("event", help="open or close a voting event")
    event_sub = p.add_subparsers(dest="action", metavar="ACTION",
                                 required=True)
    p = event_sub.add_parser("open", parents=[common],
                             help="post a voting event")
    p.add_argument("event_id")
    p.add_argument("--options", type=int, required=True,
                   help="number of menu options")
    p.add_argument("--opens-at", type=int, default=None,
                   help="unix time (default: now)")
    p.add_argument("--closes-at", type=int, required=True)
    p.add_argument("--revote", choices=(voting.REVOTE_FORBID, voting.REVOTE_LAST),
                   default=voting.REVOTE_FORBID)
    p.add_argument("--vote-limiting", action="store_true",
                   help="accept only ledger-registered credentials")
    p.add_argument("--official", type=int, default=0,
                   help="keybox official index")
    p.set_defaults(func=cmd_event_open)
    p = event_sub.add_parser("close", parents=[common],
                             help="amend an event closed as of --at")
    p.add_argument("event_id")
    p.add_argument("--at", type=int, default=None,
                   help="unix time (default: now)")
    p.add_argument("--official", type=int, default=0)
    p.set_defaults(func=cmd_event_close)

    p = sub.add_parser("cast", parents=[common],
                       help="cast a ballot with a credential secret")
    p.add_argument("event_id")
    p.add_argument("--option", type=int, required=True,
                   help="menu index of the chosen option")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--secret", metavar="B64",
                        help="credential secret scalar, base64")
    source.add_argument("--receipt", metavar="FILE",
                        help="credential receipt payload or bundle JSON")
    p.add_argument("--at", type=int, default=None,
                   help="unix time (default: now)")
    p.set_defaults(func=cmd_cast)

    p = sub.add_parser("tally", parents=[common],
                       help="tally a closed event and post the artifact")
    p.add_argument("event_id")
    p.add_argument("--at", type=int, default=None,
                   help="unix time (default: now)")
    p.add_argument("--shares", metavar="I,J,...", default=None,
                   help="tallier share indices (default: the first T)")
    p.add_argument("--tallier", type=int, default=0,
                   help="keybox tallier index signing the artifact")
    p.set_defaults(func=cmd_tally)

    p = sub.add_parser("scenario", parents=[common],
                       help="run an adversary simulation and print the report")
    p.add_argument("adversary", choices=simulation.ADVERSARIES)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--envelopes", type=int, default=10,
                   help="booth stack size (kiosk-guess)")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("ledger", help="ledger maintenance")
    ledger_sub = p.add_subparsers(dest="action", metavar="ACTION",
                                  required=True)
    p = ledger_sub.add_parser("audit", parents=[common],
                              help="re-verify every entry signature and rule")
    p.set_defaults(func=cmd_ledger_audit)

    p = sub.add_parser("bench", parents=[common],
                       help="time the curve kernels against each other")
    p.add_argument("--iterations", type=int, default=64)
    p.add_argument("--repeat", type=int, default=3)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = _config(args)
    try:
        return args.func(cfg, args)
    except (ProtocolError, VotingError, LedgerError) as exc:
        return _fail(exc, getattr(exc, "code", ""))
    except OSError as exc:
        return _fail(exc, status=2)
    except ValueError as exc:
        return _fail(exc, status=2)


if __name__ == "__main__":
    sys.exit(main())
