"""Shared world-building helpers: keys, genesis, ledger, ceremonies."""

import random
from dataclasses import dataclass, field

import pytest

from votebooth import elgamal, protocol, schnorr
from votebooth.groups import group_setup
from votebooth.ledger import Ledger


@dataclass
class World:
    group: object
    rng: random.Random
    material: object
    operator: tuple
    officials: list
    kiosks: list
    printers: list
    talliers: list
    entities: list  # (name, sk, pk)
    genesis: dict
    params: object
    ledger: Ledger
    envelopes: list = field(default_factory=list)

    def ticket(self, voter_id, now, official=0):
        return protocol.issue_ticket(
            self.group, self.officials[official][0], voter_id, now, self.rng
        )

    def envelope(self, post=True, printer=0):
        env = protocol.print_envelope(self.group, self.printers[printer][0], self.rng)
        if post:
            protocol.post_envelope(self.ledger, self.printers[printer][0], env)
        self.envelopes.append(env)
        return env

    def session(self, kiosk=0):
        return protocol.KioskSession(self.params, self.kiosks[kiosk][0], self.rng)

    def ceremony(self, voter_id, now, fakes=0, standing=0, checkout=True):
        """Ticket to check-out in one call. Returns (SessionResult,
        RegistrationRecord or None)."""
        sess = self.session()
        sess.checkin(self.ticket(voter_id, now), now)
        sess.print_commit()
        sess.scan_envelope(self.envelope())
        for _ in range(fakes):
            sess.run_fake(self.envelope())
        for i in range(standing):
            name, _sk, pk = self.entities[i % len(self.entities)]
            sess.run_standing(self.envelope(), pk)
        result = sess.finish()
        record = None
        if checkout:
            _, record = protocol.checkout_process(
                self.params, self.ledger, self.officials[0][0],
                result.transport_receipt, now + 30, self.rng,
            )
        return result, record


def build_world(profile="test-mod-p", seed=7, n=3, t=2,
                voters=("v-001", "v-002", "v-003"), path=None):
    group = group_setup(profile)
    rng = random.Random(seed)
    material = elgamal.dkg_keygen(group, n, t, rng)
    operator = schnorr.keygen(group, rng)
    officials = [schnorr.keygen(group, rng) for _ in range(2)]
    kiosks = [schnorr.keygen(group, rng) for _ in range(2)]
    printers = [schnorr.keygen(group, rng) for _ in range(2)]
    talliers = [schnorr.keygen(group, rng) for _ in range(n)]
    entities = [("civic-league", *schnorr.keygen(group, rng))]
    genesis = protocol.make_genesis_body(
        group, material.joint_pk, operator[1],
        [pk for _, pk in officials], [pk for _, pk in kiosks],
        [pk for _, pk in printers], [pk for _, pk in talliers],
        [(name, pk) for name, _, pk in entities],
        [(v, v.upper()) for v in voters],
        n=n, t=t, share_vks=material.share_vks,
    )
    ledger = Ledger.create(group, genesis, operator[0], path=path)
    params = protocol.SystemParams.from_genesis(genesis)
    return World(group, rng, material, operator, officials, kiosks,
                 printers, talliers, entities, genesis, params, ledger)


def fresh_key(world, *roles):
    """A keypair bound to none of the given roles. The tiny test group
    has only eleven public keys, so drawing one blindly can collide."""
    taken = set()
    for role in roles:
        taken |= world.ledger.role_keys(role)
    seed = 1000
    while True:
        sk, pk = schnorr.keygen(world.group, random.Random(seed))
        if world.group.encode_element(pk) not in taken:
            return sk, pk
        seed += 1


def break_sig(group, sig):
    """Deterministically invalidate a signature by bumping its response
    scalar. Bit-level tampering is tested elsewhere; in the small group a
    flipped message has a 1-in-11 chance of colliding challenges, so the
    negative tests here must not rely on that."""
    n = group.element_bytes
    s = group.decode_scalar(sig[n:])
    return sig[:n] + group.encode_scalar((s + 1) % group.q)


@pytest.fixture
def world():
    return build_world()


@pytest.fixture
def curve_world():
    return build_world(profile="production-curve", seed=11)
