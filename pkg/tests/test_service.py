"""The HTTP face: session discipline, structured errors, ledger reads."""

import json
import warnings

import pytest

with warnings.catch_warnings():
    warnings.simplefilter("ignore", DeprecationWarning)
    from fastapi.testclient import TestClient

from votebooth import encoding
from votebooth.ledger import Ledger
from votebooth.service import (KeyBox, ServiceConfig, ServiceState, build_app,
                               load_config)

from conftest import build_world

NOW = 1_000


class FakeClock:
    def __init__(self, start=0.0):
        self.t = start

    def __call__(self):
        return self.t


def make_state(world, config=None, clock=None):
    keybox = KeyBox(
        world.group.name, world.operator[0],
        [sk for sk, _ in world.officials],
        [sk for sk, _ in world.kiosks],
        [sk for sk, _ in world.printers],
        [sk for sk, _ in world.talliers],
        world.material.shares,
        [(name, sk) for name, sk, _ in world.entities],
    )
    return ServiceState(world.ledger, keybox, config or ServiceConfig(),
                        clock or FakeClock())


@pytest.fixture()
def client(world):
    return TestClient(build_app(make_state(world)))


def open_booth(client, voter_id="v-001", now=NOW):
    ticket = client.post("/tickets",
                         json={"voter_id": voter_id, "now": now}).json()
    sid = client.post("/sessions", json={}).json()["session_id"]
    r = client.post("/sessions/%s/checkin" % sid,
                    json={"ticket": ticket["ticket"], "now": now})
    assert r.status_code == 200
    return sid, ticket


def fresh_envelopes(client, count):
    return client.post("/envelopes",
                       json={"count": count}).json()["envelopes"]


def bundle_fields(bundle):
    return {k: bundle[k] for k in ("ticket", "commit_receipt", "envelope",
                                   "credential_receipt")}


def test_params_exposes_public_genesis(client):
    params = client.get("/params").json()
    assert params["threshold"] == {"n": 3, "t": 2}
    assert {"voter_id": "v-001", "name": params["roll"][0]["name"]} in params["roll"]
    assert "joint_pk" in params
    assert params["ledger_length"] >= 1


def test_full_ceremony_over_http(client):
    sid, _ = open_booth(client)
    envs = fresh_envelopes(client, 3)
    q1 = client.post("/sessions/%s/commit" % sid, json={}).json()
    assert q1["phase"] == "awaiting-envelope"
    scan = client.post("/sessions/%s/envelope" % sid,
                       json={"envelope": envs[0]}).json()
    assert scan["phase"] == "fake-loop"
    fake = client.post("/sessions/%s/fake" % sid,
                       json={"envelope": envs[1]}).json()
    assert fake["bundle"]["kind"] == "fake"
    fin = client.post("/sessions/%s/finish" % sid, json={}).json()
    assert [b["kind"] for b in fin["bundles"]] == ["real", "fake"]
    assert fin["bundles"][0]["transport_receipt"] == fin["transport_receipt"]

    log = client.get("/sessions/%s/log" % sid).json()["log"]
    assert log[:4] == ["scan:ticket", "print:commit-receipt",
                       "select:candidate", "scan:envelope"]

    co = client.post("/checkout",
                     json={"transport_receipt": fin["transport_receipt"],
                           "now": NOW + 60})
    assert co.status_code == 200
    for bundle in fin["bundles"]:
        act = client.post("/activate", json=bundle_fields(bundle)).json()
        assert act["verdict"] == "pass", act
        assert [c for c in act["checks"] if c["status"] != "pass"] == []
    assert client.get("/registrations/v-001").json()["registration"] is not None
    assert client.get("/ledger/audit").json()["ok"]


def test_phase_discipline_is_a_structured_409(client):
    sid, _ = open_booth(client)
    env = fresh_envelopes(client, 1)[0]
    r = client.post("/sessions/%s/envelope" % sid, json={"envelope": env})
    assert r.status_code == 409
    assert r.json()["error"]["code"] == "wrong-phase"


def test_stale_ticket_is_a_structured_409(client):
    ticket = client.post("/tickets",
                         json={"voter_id": "v-001", "now": NOW}).json()
    sid = client.post("/sessions", json={}).json()["session_id"]
    r = client.post("/sessions/%s/checkin" % sid,
                    json={"ticket": ticket["ticket"], "now": NOW + 10_000})
    assert r.status_code == 409
    assert r.json()["error"]["code"] == "stale-ticket"


def test_session_lifecycle_errors(world):
    clock = FakeClock()
    state = make_state(world, ServiceConfig(session_idle=900), clock)
    client = TestClient(build_app(state))
    missing = client.get("/sessions/nope")
    assert missing.status_code == 404
    assert missing.json()["error"]["code"] == "unknown-session"
    sid = client.post("/sessions", json={}).json()["session_id"]
    clock.t += 901
    gone = client.get("/sessions/%s" % sid)
    assert gone.status_code == 410
    assert gone.json()["error"]["code"] == "session-expired"


def test_garbage_payloads_are_400(client):
    sid = client.post("/sessions", json={}).json()["session_id"]
    r = client.post("/sessions/%s/checkin" % sid,
                    json={"ticket": "AAAA", "now": NOW})
    assert r.status_code == 400
    assert r.json()["error"]["code"] == "bad-payload"
    r = client.post("/tickets", json={"voter_id": "nobody", "now": NOW})
    assert r.status_code == 404
    assert r.json()["error"]["code"] == "not-on-roll"


def test_envelope_stack_tracks_claims(client):
    sid, _ = open_booth(client)
    envs = fresh_envelopes(client, 2)
    assert set(client.get("/envelopes").json()["envelopes"]) >= set(envs)
    client.post("/sessions/%s/commit" % sid, json={})
    client.post("/sessions/%s/envelope" % sid, json={"envelope": envs[0]})
    left = client.get("/envelopes").json()["envelopes"]
    assert envs[0] not in left
    assert envs[1] in left


def test_commit_candidates_and_select(client):
    sid, _ = open_booth(client)
    q1 = client.post("/sessions/%s/commit" % sid, json={"count": 3}).json()
    assert len(q1["receipts"]) == 3
    assert q1["phase"] == "committed"
    pick = client.post("/sessions/%s/select" % sid, json={"index": 1}).json()
    assert pick["receipt"] == q1["receipts"][1]
    env = fresh_envelopes(client, 1)[0]
    r = client.post("/sessions/%s/envelope" % sid, json={"envelope": env})
    assert r.status_code == 200


def test_standing_bundle_and_delegation(client):
    sid, _ = open_booth(client)
    envs = fresh_envelopes(client, 2)
    client.post("/sessions/%s/commit" % sid, json={"delegate": "civic-league"})
    client.post("/sessions/%s/envelope" % sid, json={"envelope": envs[0]})
    standing = client.post("/sessions/%s/standing" % sid,
                           json={"envelope": envs[1],
                                 "entity": "civic-league"}).json()
    assert standing["bundle"]["kind"] == "standing"
    fin = client.post("/sessions/%s/finish" % sid, json={}).json()
    client.post("/checkout",
                json={"transport_receipt": fin["transport_receipt"],
                      "now": NOW + 60})
    act = client.post("/activate",
                      json=bundle_fields(fin["bundles"][0])).json()
    assert act["verdict"] == "pass"
    assert act["entity"] == "civic-league"

    r = client.post("/sessions/%s/commit" % sid, json={"delegate": "ghost"})
    assert r.status_code == 404
    assert r.json()["error"]["code"] == "unknown-entity"


def register_voter(client, voter_id, now=NOW):
    sid, _ = open_booth(client, voter_id, now)
    env = fresh_envelopes(client, 1)[0]
    client.post("/sessions/%s/commit" % sid, json={})
    client.post("/sessions/%s/envelope" % sid, json={"envelope": env})
    fin = client.post("/sessions/%s/finish" % sid, json={}).json()
    client.post("/checkout",
                json={"transport_receipt": fin["transport_receipt"],
                      "now": now + 60})
    bundle = fin["bundles"][0]
    act = client.post("/activate", json=bundle_fields(bundle)).json()
    assert act["verdict"] == "pass"
    return bundle


def credential_secret(world, bundle):
    receipt = encoding.decode_credential_receipt(
        world.group, encoding.from_base64(bundle["credential_receipt"]))
    return encoding.to_base64(world.group.encode_scalar(receipt.secret))


def test_election_lifecycle_over_http(world):
    client = TestClient(build_app(make_state(world)))
    secret = credential_secret(world, register_voter(client, "v-001"))
    client.post("/events", json={"event_id": "e-1", "options": 3,
                                 "opens_at": NOW, "closes_at": NOW + 500})
    listed = client.get("/events").json()["events"]
    assert [e["event_id"] for e in listed] == ["e-1"]

    early = client.post("/ballots", json={"event_id": "e-1", "option": 1,
                                          "secret": secret, "now": NOW - 5})
    assert early.status_code == 400
    assert "event-not-open" in early.json()["error"]["message"]

    cast = client.post("/ballots", json={"event_id": "e-1", "option": 1,
                                         "secret": secret, "now": NOW + 10})
    assert cast.status_code == 200

    client.post("/events/e-1/close", json={"now": NOW + 100})
    assert client.get("/events/e-1").json()["closes_at"] == NOW + 100
    tally = client.post("/events/e-1/tally", json={"now": NOW + 200}).json()
    assert tally["counts"] == {"1": 1}
    assert tally["cast"] == 1

    r = client.post("/events/ghost/tally", json={"now": NOW + 200})
    assert r.status_code == 400
    assert r.json()["error"]["code"] == "voting-error"


def test_activation_can_stay_offline(client):
    bundle = register_voter(client, "v-002")
    act = client.post("/activate", json=dict(bundle_fields(bundle),
                                             online=False, enroll=False)).json()
    assert act["verdict"] == "pass"
    statuses = {c["name"]: c["status"] for c in act["checks"]}
    assert statuses["fresh-receipt"] == "unavailable"
    assert statuses["zkp"] == "pass"


def test_restart_reproduces_queries(tmp_path):
    path = str(tmp_path / "ledger.bin")
    world = build_world(path=path)
    state = make_state(world)
    first = TestClient(build_app(state))
    register_voter(first, "v-001")
    before_entries = first.get("/ledger/entries").json()
    before_reg = first.get("/registrations/v-001").json()

    second_state = ServiceState(Ledger.open(world.group, path),
                                state.keybox, ServiceConfig())
    second = TestClient(build_app(second_state))
    assert second.get("/ledger/entries").json() == before_entries
    assert second.get("/registrations/v-001").json() == before_reg


def test_scenario_trigger(client):
    r = client.post("/scenario", json={"adversary": "impersonation",
                                       "trials": 3, "seed": 1}).json()
    assert r["report"]["rate"] == 1.0
    assert "detection rate: 1.0000" in r["text"]
    bad = client.post("/scenario", json={"adversary": "gremlins"})
    assert bad.status_code == 400
    assert bad.json()["error"]["code"] == "bad-scenario"


def test_keybox_round_trip(world, tmp_path):
    box = make_state(world).keybox
    box.save(str(tmp_path / "registrar.json"))
    back = KeyBox.load(str(tmp_path / "registrar.json"))
    assert back == box


def test_load_config_precedence(tmp_path):
    path = tmp_path / "service.json"
    path.write_text(json.dumps({"port": 9001, "ledger_path": "a.bin"}))
    config = load_config(str(path), env={"VOTEBOOTH_PORT": "9002"})
    assert config.port == 9002
    assert config.ledger_path == "a.bin"
    assert config.host == "127.0.0.1"
    path.write_text(json.dumps({"laser": 1}))
    with pytest.raises(ValueError, match="unknown config keys"):
        load_config(str(path), env={})
