"""Release gate: the scaled-up runs the package must clear before any
desk trusts it.

One test per checklist line, tolerances and wall-clock budgets pinned
inline. The unit suites prove the same behavior in miniature and point
at the broken part when something here goes red; this file only decides
ship or no ship. Run with -v for the one-line-per-criterion view.
"""

import random
import time
from itertools import combinations

import pytest

from votebooth import elgamal, encoding, protocol, sigma
from votebooth.elgamal import ThresholdError
from votebooth.fixtures import random_fixture, replay
from votebooth.groups import group_setup
from votebooth.ledger import audit_file
from votebooth.simulation import ADVERSARIES, ScenarioConfig, run_scenario

import oracle
import test_oracle_vectors as vec
from conftest import build_world
from test_crypto import ScriptedRng
from test_fixtures import assert_agrees


def test_round_trip_volume_in_both_groups():
    """1000 random encrypt/decrypt cycles per group profile, any quorum;
    below the quorum, nothing, checked exhaustively where the group is
    small enough to enumerate. Budget: 10 s."""
    started = time.perf_counter()
    rng = random.Random(101)
    for profile in ("test-mod-p", "production-curve"):
        group = group_setup(profile)
        material = elgamal.dkg_keygen(group, n=3, t=2, rng=rng)
        indices = [s.index for s in material.shares]
        for _ in range(1000):
            m = group.exp(group.g1, group.random_scalar(rng))
            ct = elgamal.encrypt(group, material.joint_pk, m, rng=rng)
            subset = rng.sample(indices, 2)
            got = elgamal.threshold_decrypt(
                group, 2, ct, material.subset(subset)
            )
            assert got == m

    modp = group_setup("test-mod-p")
    material = elgamal.share_secrets(
        modp, vec.SK1, vec.SK2, n=3, t=2, rng=random.Random(5)
    )
    for lone in ([1], [2], [3]):
        with pytest.raises(ThresholdError):
            elgamal.threshold_decrypt(
                modp, 2, vec.CIPHER, material.subset(lone)
            )
    # a colluding minority that recombines anyway still gets garbage,
    # for every message, every randomness, every single share
    for m in modp.elements():
        for r in range(1, modp.q):
            c1, c2, c3 = elgamal.encrypt(modp, material.joint_pk, m, r=r)
            for share in material.shares:
                blind = (
                    oracle.power(c1, share.s1, modp.p)
                    * oracle.power(c2, share.s2, modp.p)
                ) % modp.p
                forced = c3 * oracle.inverse(blind, modp.p) % modp.p
                assert forced != m

    assert time.perf_counter() - started < 10.0


def test_proof_suite_at_volume():
    """Honest 1000/1000, simulated 1000/1000, tampered 0/1000, and 100
    commit-reuse extractions recovering the witness exactly."""
    group = group_setup("test-mod-p")
    rng = random.Random(202)
    bases = sigma.zkp_bases(group, vec.JOINT_A)

    for _ in range(1000):
        x = group.random_scalar(rng, nonzero=True)
        publics = tuple(group.exp(b, x) for b in bases)
        state, commit = sigma.dleq_commit(group, bases, x, rng)
        c = rng.randrange(group.q)
        r = state.respond(c)
        assert sigma.dleq_verify(group, bases, publics, (commit, c, r))

    for _ in range(1000):
        # three unrelated exponents: a statement that is simply false,
        # yet the challenge-first transcript verifies all the same
        publics = tuple(
            group.exp(b, group.random_scalar(rng, nonzero=True))
            for b in bases
        )
        c = rng.randrange(group.q)
        transcript = sigma.dleq_simulate(group, bases, publics, c, rng)
        assert sigma.dleq_verify(group, bases, publics, transcript)

    for i in range(1000):
        x = group.random_scalar(rng, nonzero=True)
        publics = tuple(group.exp(b, x) for b in bases)
        state, commit = sigma.dleq_commit(group, bases, x, rng)
        c = rng.randrange(group.q)
        r = state.respond(c)
        if i % 2:
            bad = (commit, (c + 1) % group.q, r)
        else:
            bad = (commit, c, (r + 1) % group.q)
        assert not sigma.dleq_verify(group, bases, publics, bad)

    for _ in range(100):
        x = group.random_scalar(rng, nonzero=True)
        y = group.random_scalar(rng)
        commit = tuple(group.exp(b, y) for b in bases)
        c_a = rng.randrange(group.q)
        c_b = (c_a + rng.randrange(1, group.q)) % group.q
        r_a = sigma.ProverState(group.q, x, y).respond(c_a)
        r_b = sigma.ProverState(group.q, x, y).respond(c_b)
        extracted = sigma.extract_witness(
            group, (commit, c_a, r_a), (commit, c_b, r_b)
        )
        assert extracted == x


def test_worked_values_recomputed_by_oracle():
    """The frozen small-group vectors, each produced twice: once by the
    brute-force oracle, once by the package."""
    group = group_setup("test-mod-p")
    c1, c2, x_pub = vec.ZKP_PUBLICS

    assert oracle.joint_key(vec.P, vec.G1, vec.G2, vec.SK1, vec.SK2) == vec.JOINT_A
    material = elgamal.share_secrets(
        group, vec.SK1, vec.SK2, n=3, t=2, rng=random.Random(5)
    )
    assert material.joint_pk == vec.JOINT_A

    assert oracle.meg_encrypt(
        vec.P, vec.G1, vec.G2, vec.JOINT_A, vec.MSG, vec.ENC_R
    ) == vec.CIPHER
    assert elgamal.encrypt(group, vec.JOINT_A, vec.MSG, r=vec.ENC_R) == vec.CIPHER

    assert oracle.zkp_commit(
        vec.P, vec.G1, vec.G2, vec.JOINT_A, vec.ZKP_Y
    ) == vec.ZKP_COMMIT
    assert oracle.zkp_response(vec.Q, vec.ZKP_X, vec.ZKP_Y, vec.ZKP_C) == vec.ZKP_R
    state, commit = sigma.zkp_commit(
        group, vec.JOINT_A, vec.ZKP_X, ScriptedRng([vec.ZKP_Y])
    )
    assert commit == vec.ZKP_COMMIT
    assert state.respond(vec.ZKP_C) == vec.ZKP_R
    assert sigma.zkp_verify(
        group, vec.JOINT_A, c1, c2, x_pub, (commit, vec.ZKP_C, vec.ZKP_R)
    )

    sim_x_pub = vec.CIPHER[2] * oracle.inverse(vec.SIM_FAKE_PK, vec.P) % vec.P
    assert sim_x_pub == vec.SIM_X_PUB
    o_commit, o_r = oracle.zkp_simulate(
        vec.P, vec.G1, vec.G2, vec.JOINT_A,
        vec.CIPHER[0], vec.CIPHER[1], sim_x_pub, vec.SIM_C, vec.SIM_Y,
    )
    assert o_commit == vec.SIM_COMMIT and o_r == vec.SIM_Y
    transcript = sigma.zkp_simulate(
        group, vec.JOINT_A, vec.CIPHER[0], vec.CIPHER[1], sim_x_pub,
        vec.SIM_C, ScriptedRng([vec.SIM_Y]),
    )
    assert transcript == (vec.SIM_COMMIT, vec.SIM_C, vec.SIM_Y)
    assert sigma.zkp_verify(
        group, vec.JOINT_A, vec.CIPHER[0], vec.CIPHER[1], sim_x_pub, transcript
    )


def test_hundred_randomized_ceremonies_activate():
    """100 full booth runs, 0..3 fakes each: every bundle (fakes too)
    activates with zero failed checks, and every printout of a session
    carries the byte-identical transport receipt."""
    voters = tuple("v-%03d" % i for i in range(100))
    world = build_world(seed=404, voters=voters)
    rng = random.Random(404)
    for i, voter in enumerate(voters):
        now = 1000 + 40 * i
        result, record = world.ceremony(voter, now, fakes=rng.randrange(4))
        assert record is not None

        receipts = {
            encoding.encode_transport_receipt(world.group, b.transport_receipt)
            for b in result.bundles
        }
        receipts.add(
            encoding.encode_transport_receipt(world.group,
                                              result.transport_receipt)
        )
        assert len(receipts) == 1

        assert result.bundles[0].kind == protocol.BUNDLE_REAL
        for bundle in result.bundles:
            report = protocol.activate(
                world.params, bundle, ledger=world.ledger,
                expected_voter_id=voter, rng=world.rng,
            )
            assert report.verdict == "pass"
            assert all(c.status == "pass" for c in report.checks)
            assert report.entries  # fakes must register like the real one


def test_kiosk_guess_caught_nine_times_in_ten():
    """A kiosk that commits before the envelope is drawn survives only
    when it guessed the challenge: 1/10 with a stack of ten. Band
    0.87..0.93 over 1000 trials, budget 60 s. Full-width challenges
    only; the tiny group would hand the kiosk extra collisions."""
    started = time.perf_counter()
    report = run_scenario(ScenarioConfig(
        adversary="kiosk-guess", trials=1000, seed=505,
        profile="production-curve", envelopes=10,
    ))
    assert report.violations == ()
    assert 0.87 <= report.rate <= 0.93, report.rate
    assert time.perf_counter() - started < 60.0


def test_coerced_receipts_look_alike_to_a_classifier():
    """A coercer holding a surrendered bundle plus the whole ledger
    cannot beat chance by more than noise: accuracy at most 0.56 over
    500 trials."""
    report = run_scenario(ScenarioConfig(
        adversary="coercer-distinguisher", trials=500, seed=606,
    ))
    assert report.violations == ()
    assert report.rate <= 0.56, report.rate


def test_fifty_random_elections_match_the_plaintext_count():
    """50 generated elections (rolls to 20 voters, up to 5 fakes per
    session, up to 2 standing delegations) tallied twice: once through
    the ciphertext pipeline, once by the plaintext oracle. Counts,
    weights, and every rejection must agree exactly."""
    for seed in range(50):
        fixture = random_fixture(seed)
        assert len(fixture["roll"]) <= 20
        assert all(s.get("fakes", 0) <= 5 for s in fixture["sessions"])
        assert sum(1 for s in fixture["sessions"] if s.get("delegate")) <= 2
        assert_agrees(replay(fixture))


def test_ten_thousand_entry_audit_localizes_any_flip(tmp_path):
    """A 10k-entry ledger re-verifies end to end, and a single flipped
    bit anywhere in the file is pinned to the entry that owns it."""
    path = tmp_path / "big.bin"
    world = build_world(seed=808, path=str(path))
    printer_sk = world.printers[0][0]
    while len(world.ledger.entries) < 10_000:
        env = protocol.print_envelope(world.group, printer_sk, world.rng)
        protocol.post_envelope(world.ledger, printer_sk, env)

    report = world.ledger.audit()
    assert report.ok
    assert report.entries >= 10_000

    data = path.read_bytes()
    frames = []  # (start, end) per entry, length prefix included
    start = 0
    while start < len(data):
        length = int.from_bytes(data[start:start + 4], "big")
        frames.append((start, start + 4 + length))
        start += 4 + length

    def owner(offset):
        for index, (lo, hi) in enumerate(frames):
            if lo <= offset < hi:
                return index
        raise AssertionError("offset %d past end of file" % offset)

    total = len(frames)
    targets = [
        10,                      # genesis body
        frames[1][0] + 2,        # a length prefix
        frames[total // 2][0] + 20,
        len(data) - 1,           # last byte of the last entry
    ]
    for offset in targets:
        corrupt = bytearray(data)
        corrupt[offset] ^= 0x40
        victim = tmp_path / ("flip-%d.bin" % offset)
        victim.write_bytes(bytes(corrupt))
        verdict = audit_file(world.group, str(victim))
        assert not verdict.ok
        assert verdict.bad_index == owner(offset), verdict.reason


def test_hardware_and_survey_metrics_stay_excluded():
    """Power draw needs a meter and usability scores need people; the
    package fabricates neither. The adversary scenarios and the volume
    runs above are the substitute evidence, so this line pins the
    exclusion as a decision rather than an oversight."""
    assert {"kiosk-guess", "coercer-distinguisher", "impersonation",
            "envelope-replacement", "credential-theft"} <= set(ADVERSARIES)
    import votebooth.simulation as simulation
    import votebooth.voting as voting
    surface = " ".join(dir(simulation) + dir(protocol) + dir(voting))
    assert "power" not in surface.lower()
    assert "usability" not in surface.lower()
