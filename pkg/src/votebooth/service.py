"""HTTP face of the registrar: sessions, ceremony steps, ledger reads.

The service holds every registrar-side secret (official, kiosk, and
printer keys, tallier shares) and walks untrusted clients through the
ceremony one validated step at a time. Clients exchange the canonical
byte payloads base64-wrapped in JSON; no caller input is trusted, and
no call sequence can reach a state the kiosk state machine would not
have allowed in person.

Kiosk sessions are in-memory and expire after a configurable idle
period, which stands in for the registrar asking a lingering voter to
leave the booth. Everything durable lives in the ledger file, so a
restart with the same file answers queries identically.
"""

import json
import os
import random
import secrets
import time
from dataclasses import dataclass, replace
from typing import Optional

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import elgamal, encoding, protocol, simulation, voting
from .elgamal import TallierShare
from .encoding import CodecError, from_base64, to_base64
from .groups import GroupError, group_setup
from .ledger import Ledger, LedgerError
from .protocol import ProtocolError, SystemParams
from .voting import VotingError

DEFAULT_PORT = 8733
DEFAULT_IDLE = 900  # seconds before an untouched session is swept

ENV_PREFIX = "VOTEBOOTH_"


class ApiError(Exception):
    def __init__(self, status, code, message):
        super().__init__(message)
        self.status = status
        self.code = code


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = DEFAULT_PORT
    ledger_path: str = "ledger.bin"
    keybox_path: str = "registrar.json"
    session_idle: int = DEFAULT_IDLE
    envelope_batch: int = 10
    ticket_lifetime: int = 0  # 0 defers to the genesis value


def load_config(path=None, env=None):
    """Config file first, VOTEBOOTH_* environment on top."""
    env = os.environ if env is None else env
    values = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        unknown = set(raw) - set(ServiceConfig.__dataclass_fields__)
        if unknown:
            raise ValueError("unknown config keys: %s" % ", ".join(sorted(unknown)))
        values.update(raw)
    for field, kind in (("host", str), ("port", int), ("ledger_path", str),
                        ("keybox_path", str), ("session_idle", int),
                        ("envelope_batch", int), ("ticket_lifetime", int)):
        raw = env.get(ENV_PREFIX + field.upper())
        if raw is not None:
            values[field] = kind(raw)
    return ServiceConfig(**values)


# ---------------------------------------------------------------------------
# Registrar secrets on disk


@dataclass
class KeyBox:
    """Every secret the registrar side needs at runtime.

    The ledger carries the public halves; this file never leaves the
    server. Tallier shares live here too, which collapses the t-of-n
    ceremony onto one operator box; fine for a desk-scale deployment,
    and the tally still verifies share proofs as if they were remote.
    """

    profile: str
    operator: int
    officials: list
    kiosks: list
    printers: list
    talliers: list
    shares: list
    entities: list  # (name, secret) pairs for provisioned standing entities

    def save(self, path):
        group = group_setup(self.profile)

        def enc(x):
            return to_base64(group.encode_scalar(x))

        blob = {
            "profile": self.profile,
            "operator": enc(self.operator),
            "officials": [enc(x) for x in self.officials],
            "kiosks": [enc(x) for x in self.kiosks],
            "printers": [enc(x) for x in self.printers],
            "talliers": [enc(x) for x in self.talliers],
            "shares": [{"index": s.index, "s1": enc(s.s1), "s2": enc(s.s2)}
                       for s in self.shares],
            "entities": [{"name": n, "secret": enc(x)}
                         for n, x in self.entities],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(blob, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            blob = json.load(fh)
        group = group_setup(blob["profile"])

        def dec(x):
            return group.decode_scalar(from_base64(x))

        return cls(
            blob["profile"],
            dec(blob["operator"]),
            [dec(x) for x in blob["officials"]],
            [dec(x) for x in blob["kiosks"]],
            [dec(x) for x in blob["printers"]],
            [dec(x) for x in blob["talliers"]],
            [TallierShare(s["index"], dec(s["s1"]), dec(s["s2"]))
             for s in blob["shares"]],
            [(e["name"], dec(e["secret"])) for e in blob.get("entities", ())],
        )


class _Session:
    __slots__ = ("machine", "touched", "result")

    def __init__(self, machine, touched):
        self.machine = machine
        self.touched = touched
        self.result = None


class ServiceState:
    def __init__(self, ledger, keybox, config, clock=time.time):
        self.ledger = ledger
        self.group = ledger.group
        self.keybox = keybox
        self.config = config
        self.clock = clock
        params = SystemParams.from_genesis(ledger.genesis)
        if config.ticket_lifetime:
            params = replace(params, ticket_lifetime=config.ticket_lifetime)
        self.params = params
        self.sessions = {}
        self.stack = {}  # challenge digest hex -> base64 payload, unclaimed
        self.rng = random.SystemRandom()

    def now(self, given=None):
        return int(self.clock() if given is None else given)

    def session(self, sid):
        entry = self.sessions.get(sid)
        if entry is None:
            raise ApiError(404, "unknown-session", "no such session")
        if self.clock() - entry.touched > self.config.session_idle:
            del self.sessions[sid]
            raise ApiError(410, "session-expired",
                           "session idled out; the booth was reclaimed")
        entry.touched = self.clock()
        return entry

    def official_sk(self, index):
        try:
            return self.keybox.officials[index]
        except IndexError:
            raise ApiError(400, "bad-payload", "no official %d" % index) from None

    def kiosk_sk(self, index):
        try:
            return self.keybox.kiosks[index]
        except IndexError:
            raise ApiError(400, "bad-payload", "no kiosk %d" % index) from None


def open_state(config, clock=time.time):
    keybox = KeyBox.load(config.keybox_path)
    group = group_setup(keybox.profile)
    ledger = Ledger.open(group, config.ledger_path)
    return ServiceState(ledger, keybox, config, clock)


# ---------------------------------------------------------------------------
# Wire helpers


def _decode(codec, group, field, value):
    try:
        return codec(group, from_base64(value))
    except (CodecError, GroupError, ValueError) as exc:
        raise ApiError(400, "bad-payload",
                       "field %r: %s" % (field, exc)) from None


def _bundle_json(group, bundle):
    return {
        "kind": bundle.kind,
        "ticket": to_base64(encoding.encode_ticket(group, bundle.ticket)),
        "commit_receipt": to_base64(
            encoding.encode_commit_receipt(group, bundle.commit_receipt)),
        "envelope": to_base64(encoding.encode_envelope(group, bundle.envelope)),
        "credential_receipt": to_base64(
            encoding.encode_credential_receipt(group,
                                               bundle.credential_receipt)),
        "transport_receipt": to_base64(
            encoding.encode_transport_receipt(group,
                                              bundle.transport_receipt)),
    }


def _event_json(group, event):
    return {
        "event_id": event.event_id,
        "options": [to_base64(group.encode_element(o))
                    for o in event.options],
        "opens_at": event.opens_at,
        "closes_at": event.closes_at,
        "revote": event.revote,
        "vote_limiting": event.vote_limiting,
    }


def _check_json(report):
    return {
        "verdict": report.verdict,
        "checks": [{"name": c.name, "status": c.status, "detail": c.detail}
                   for c in report.checks],
        "entity": report.entity_name,
        "entries": list(report.entries),
    }


# ---------------------------------------------------------------------------
# Request bodies


class TicketRequest(BaseModel):
    voter_id: str
    now: Optional[int] = None
    official: int = 0


class EnvelopeBatchRequest(BaseModel):
    count: Optional[int] = None
    printer: int = 0


class SessionOpenRequest(BaseModel):
    kiosk: int = 0


class CheckinRequest(BaseModel):
    ticket: str
    now: Optional[int] = None


class CommitRequest(BaseModel):
    count: int = 1
    delegate: Optional[str] = None  # standing entity name


class SelectRequest(BaseModel):
    index: int


class ScanRequest(BaseModel):
    envelope: str


class StandingRequest(BaseModel):
    envelope: str
    entity: str


class CheckoutRequest(BaseModel):
    transport_receipt: str
    now: Optional[int] = None
    official: int = 0


class ActivateRequest(BaseModel):
    commit_receipt: str
    envelope: str
    credential_receipt: str
    ticket: Optional[str] = None
    transport_receipt: Optional[str] = None
    expected_voter: Optional[str] = None
    enroll: bool = True  # post the credential to the ledger on a pass
    online: bool = True


class BallotRequest(BaseModel):
    event_id: str
    option: int
    secret: str
    now: Optional[int] = None


class EventRequest(BaseModel):
    event_id: str
    options: int
    opens_at: int
    closes_at: int
    revote: str = "forbid"
    vote_limiting: bool = False
    official: int = 0


class CloseRequest(BaseModel):
    now: Optional[int] = None
    official: int = 0


class TallyRequest(BaseModel):
    now: Optional[int] = None
    shares: Optional[list] = None  # tallier indexes, default the first t
    tallier: int = 0


class ScenarioRequest(BaseModel):
    adversary: str
    trials: int = 100
    seed: int = 0
    profile: str = "test-mod-p"
    envelopes: int = 10
    fake_fraction: float = 0.5


# ---------------------------------------------------------------------------
# The application


def build_app(state):
    app = FastAPI(title="votebooth", docs_url=None, redoc_url=None)
    # the booth UI is static files served from wherever, so any origin
    # may call; nothing here trusts cookies or ambient credentials
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    group = state.group

    @app.exception_handler(ApiError)
    async def _api_error(request, exc):
        return JSONResponse(
            {"error": {"code": exc.code, "message": str(exc)}},
            status_code=exc.status,
        )

    @app.exception_handler(ProtocolError)
    async def _protocol_error(request, exc):
        return JSONResponse(
            {"error": {"code": exc.code, "message": str(exc)}},
            status_code=409,
        )

    @app.exception_handler(LedgerError)
    async def _ledger_error(request, exc):
        return JSONResponse(
            {"error": {"code": "ledger-rejected", "message": str(exc)}},
            status_code=409,
        )

    @app.exception_handler(VotingError)
    async def _voting_error(request, exc):
        return JSONResponse(
            {"error": {"code": "voting-error", "message": str(exc)}},
            status_code=400,
        )

    # -- public parameters ------------------------------------------------

    @app.get("/params")
    def get_params():
        genesis = dict(state.ledger.genesis)
        genesis["ledger_length"] = len(state.ledger.entries)
        if state.config.ticket_lifetime:
            genesis["ticket_lifetime"] = state.params.ticket_lifetime
        return genesis

    # -- check-in desk ------------------------------------------------------

    @app.post("/tickets")
    def create_ticket(req: TicketRequest):
        if not state.params.on_roll(req.voter_id):
            raise ApiError(404, "not-on-roll",
                           "voter %r is not on the roll" % req.voter_id)
        now = state.now(req.now)
        ticket = protocol.issue_ticket(group, state.official_sk(req.official),
                                       req.voter_id, now, state.rng)
        return {
            "ticket": to_base64(encoding.encode_ticket(group, ticket)),
            "voter_id": ticket.voter_id,
            "issued_at": ticket.issued_at,
        }

    # -- envelope printer ---------------------------------------------------

    @app.post("/envelopes")
    def print_envelopes(req: EnvelopeBatchRequest):
        try:
            printer_sk = state.keybox.printers[req.printer]
        except IndexError:
            raise ApiError(400, "bad-payload",
                           "no printer %d" % req.printer) from None
        count = req.count or state.config.envelope_batch
        if not 1 <= count <= 1000:
            raise ApiError(400, "bad-payload", "count out of range")
        fresh = []
        for _ in range(count):
            env = protocol.print_envelope(group, printer_sk, state.rng)
            protocol.post_envelope(state.ledger, printer_sk, env)
            payload = to_base64(encoding.encode_envelope(group, env))
            state.stack[encoding.digest(env.challenge).hex()] = payload
            fresh.append(payload)
        return {"envelopes": fresh}

    @app.get("/envelopes")
    def unclaimed_envelopes():
        return {"envelopes": sorted(state.stack.values())}

    # -- the booth ---------------------------------------------------------

    @app.post("/sessions")
    def open_session(req: SessionOpenRequest):
        machine = protocol.KioskSession(state.params,
                                        state.kiosk_sk(req.kiosk),
                                        rng=state.rng)
        sid = secrets.token_urlsafe(16)
        state.sessions[sid] = _Session(machine, state.clock())
        return {
            "session_id": sid,
            "phase": machine.phase,
            "idle_timeout": state.config.session_idle,
        }

    @app.get("/sessions/{sid}")
    def session_status(sid: str):
        entry = state.session(sid)
        return {"phase": entry.machine.phase, "log": list(entry.machine.log)}

    @app.get("/sessions/{sid}/log")
    def session_log(sid: str):
        entry = state.session(sid)
        return {"log": list(entry.machine.log), "phase": entry.machine.phase}

    @app.post("/sessions/{sid}/checkin")
    def session_checkin(sid: str, req: CheckinRequest):
        entry = state.session(sid)
        ticket = _decode(encoding.decode_ticket, group, "ticket", req.ticket)
        entry.machine.checkin(ticket, state.now(req.now))
        return {"phase": entry.machine.phase, "voter_id": ticket.voter_id}

    @app.post("/sessions/{sid}/commit")
    def session_commit(sid: str, req: CommitRequest):
        entry = state.session(sid)
        delegate_pk = None
        if req.delegate is not None:
            for name, pk in state.params.entities:
                if name == req.delegate:
                    delegate_pk = pk
                    break
            else:
                raise ApiError(404, "unknown-entity",
                               "no standing entity %r" % req.delegate)
        receipts = entry.machine.print_commit(count=req.count,
                                              delegate_pk=delegate_pk)
        return {
            "phase": entry.machine.phase,
            "receipts": [
                to_base64(encoding.encode_commit_receipt(group, r))
                for r in receipts
            ],
        }

    @app.post("/sessions/{sid}/select")
    def session_select(sid: str, req: SelectRequest):
        entry = state.session(sid)
        receipt = entry.machine.select_commit(req.index)
        return {
            "phase": entry.machine.phase,
            "receipt": to_base64(encoding.encode_commit_receipt(group, receipt)),
        }

    def _claim(payload):
        env = _decode(encoding.decode_envelope, group, "envelope", payload)
        state.stack.pop(encoding.digest(env.challenge).hex(), None)
        return env

    @app.post("/sessions/{sid}/envelope")
    def session_scan(sid: str, req: ScanRequest):
        entry = state.session(sid)
        entry.machine.scan_envelope(_claim(req.envelope))
        bundle = entry.machine.bundles[-1]
        return {
            "phase": entry.machine.phase,
            "credential_receipt": to_base64(
                encoding.encode_credential_receipt(
                    group, bundle.credential_receipt)),
            "transport_receipt": to_base64(
                encoding.encode_transport_receipt(
                    group, bundle.transport_receipt)),
        }

    @app.post("/sessions/{sid}/fake")
    def session_fake(sid: str, req: ScanRequest):
        entry = state.session(sid)
        bundle = entry.machine.run_fake(_claim(req.envelope))
        return {"phase": entry.machine.phase,
                "bundle": _bundle_json(group, bundle)}

    @app.post("/sessions/{sid}/standing")
    def session_standing(sid: str, req: StandingRequest):
        entry = state.session(sid)
        for name, pk in state.params.entities:
            if name == req.entity:
                entity_pk = pk
                break
        else:
            raise ApiError(404, "unknown-entity",
                           "no standing entity %r" % req.entity)
        bundle = entry.machine.run_standing(_claim(req.envelope), entity_pk)
        return {"phase": entry.machine.phase,
                "bundle": _bundle_json(group, bundle)}

    @app.post("/sessions/{sid}/finish")
    def session_finish(sid: str):
        entry = state.session(sid)
        result = entry.machine.finish()
        entry.result = result
        return {
            "phase": entry.machine.phase,
            "transport_receipt": to_base64(
                encoding.encode_transport_receipt(group,
                                                  result.transport_receipt)),
            "bundles": [_bundle_json(group, b) for b in result.bundles],
        }

    # -- check-out desk ------------------------------------------------------

    @app.post("/checkout")
    def checkout(req: CheckoutRequest):
        receipt = _decode(encoding.decode_transport_receipt, group,
                          "transport_receipt", req.transport_receipt)
        entry, record = protocol.checkout_process(
            state.params, state.ledger, state.official_sk(req.official),
            receipt, state.now(req.now), state.rng,
        )
        return {
            "entry_index": entry.index,
            "registration": to_base64(encoding.encode_registration(group,
                                                                   record)),
        }

    # -- the voter's device --------------------------------------------------

    @app.post("/activate")
    def activate(req: ActivateRequest):
        ticket = None
        if req.ticket is not None:
            ticket = _decode(encoding.decode_ticket, group, "ticket",
                             req.ticket)
        transport = None
        if req.transport_receipt is not None:
            transport = _decode(encoding.decode_transport_receipt, group,
                                "transport_receipt", req.transport_receipt)
        bundle = protocol.ReceiptBundle(
            "submitted",
            ticket,
            _decode(encoding.decode_commit_receipt, group, "commit_receipt",
                    req.commit_receipt),
            _decode(encoding.decode_envelope, group, "envelope", req.envelope),
            _decode(encoding.decode_credential_receipt, group,
                    "credential_receipt", req.credential_receipt),
            transport,
        )
        report = protocol.activate(
            state.params, bundle,
            state.ledger if req.online else None,
            expected_voter_id=req.expected_voter,
            register=req.enroll,
            rng=state.rng,
        )
        return _check_json(report)

    @app.post("/ballots")
    def cast(req: BallotRequest):
        event = state.ledger.event(req.event_id)
        if event is None:
            raise ApiError(404, "event-unknown",
                           "no event %r" % req.event_id)
        try:
            secret = group.decode_scalar(from_base64(req.secret))
        except (GroupError, CodecError, ValueError) as exc:
            raise ApiError(400, "bad-payload",
                           "field 'secret': %s" % exc) from None
        now = state.now(req.now)
        ballot = voting.cast_ballot(group, state.params.joint_pk, event,
                                    secret, req.option, state.rng)
        entry = voting.submit_ballot(state.ledger, state.params.joint_pk,
                                     ballot, secret, now)
        return {
            "entry_index": entry.index,
            "ballot": to_base64(encoding.encode_ballot(group, ballot)),
        }

    # -- election lifecycle ---------------------------------------------------

    @app.get("/events")
    def list_events():
        return {"events": [_event_json(group, e)
                           for _, e in sorted(state.ledger.events().items())]}

    @app.get("/events/{event_id}")
    def get_event(event_id: str):
        event = state.ledger.event(event_id)
        if event is None:
            raise ApiError(404, "event-unknown", "no event %r" % event_id)
        return _event_json(group, event)

    @app.post("/events")
    def open_event(req: EventRequest):
        options = voting.standard_options(group, req.options)
        _, event = voting.open_event(
            state.ledger, state.official_sk(req.official), req.event_id,
            options, req.opens_at, req.closes_at, revote=req.revote,
            vote_limiting=req.vote_limiting, rng=state.rng,
        )
        return _event_json(group, event)

    @app.post("/events/{event_id}/close")
    def close_event(event_id: str, req: CloseRequest):
        entry = voting.close_event(state.ledger,
                                   state.official_sk(req.official),
                                   event_id, state.now(req.now), state.rng)
        event = state.ledger.event(event_id)
        return {"closed": entry is not None,
                "event": _event_json(group, event)}

    @app.post("/events/{event_id}/tally")
    def tally_event(event_id: str, req: TallyRequest):
        material = state.keybox.shares
        if req.shares is not None:
            wanted = set(req.shares)
            shares = [s for s in material if s.index in wanted]
        else:
            shares = material[:state.params.threshold[1]]
        try:
            tallier_sk = state.keybox.talliers[req.tallier]
        except IndexError:
            raise ApiError(400, "bad-payload",
                           "no tallier %d" % req.tallier) from None
        result = voting.tally(state.ledger, state.params, shares, tallier_sk,
                              event_id, state.now(req.now), state.rng)
        return {
            "event_id": result.event_id,
            "counts": {str(k): v for k, v in sorted(result.counts.items())},
            "cast": result.cast,
            "tallied": result.tallied,
            "unmatched": result.unmatched,
            "invalid": result.invalid,
            "standing": result.standing,
            "discarded": [[i, reason] for i, reason in result.discarded],
            "entry_index": result.entry_index,
            "artifact": result.artifact,
        }

    # -- ledger reads -----------------------------------------------------

    @app.get("/ledger")
    def ledger_info():
        return {
            "length": len(state.ledger.entries),
            "profile": group.name,
            "path": state.ledger.path,
        }

    @app.get("/ledger/entries")
    def ledger_entries(start: int = 0, count: int = 100):
        if start < 0 or not 1 <= count <= 1000:
            raise ApiError(400, "bad-payload", "bad entry range")
        rows = []
        for entry in state.ledger.entries[start:start + count]:
            rows.append({
                "index": entry.index,
                "kind": entry.kind,
                "author": to_base64(entry.author),
                "body": to_base64(entry.body),
            })
        return {"entries": rows, "length": len(state.ledger.entries)}

    @app.get("/ledger/audit")
    def ledger_audit():
        report = state.ledger.audit()
        return {"ok": report.ok, "entries": report.entries,
                "bad_index": report.bad_index, "reason": report.reason}

    @app.get("/notifications/{voter_id}")
    def notifications(voter_id: str):
        return {
            "notifications": [
                {"entry_index": n.entry_index, "issued_at": n.issued_at}
                for n in state.ledger.notifications(voter_id)
            ]
        }

    @app.get("/registrations/{voter_id}")
    def registration(voter_id: str):
        found = state.ledger.latest_registration(voter_id)
        if found is None:
            return {"registration": None}
        index, rec = found
        return {
            "registration": {
                "entry_index": index,
                "issued_at": rec.issued_at,
                "enc_credential": to_base64(
                    encoding.encode_ciphertext(group, rec.enc_credential)),
                "kiosk_pk": to_base64(group.encode_element(rec.kiosk_pk)),
                "official_pk": to_base64(
                    group.encode_element(rec.official_pk)),
            }
        }

    # -- drills ------------------------------------------------------------

    @app.post("/scenario")
    def scenario(req: ScenarioRequest):
        try:
            config = simulation.ScenarioConfig(
                adversary=req.adversary, trials=req.trials, seed=req.seed,
                profile=req.profile, envelopes=req.envelopes,
                fake_fraction=req.fake_fraction,
            )
            report = simulation.run_scenario(config)
        except simulation.ScenarioError as exc:
            raise ApiError(400, "bad-scenario", str(exc)) from None
        return {"text": report.render(), "report": report.artifact()}

    return app


def serve(config, clock=time.time):
    import uvicorn

    state = open_state(config, clock)
    app = build_app(state)
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
