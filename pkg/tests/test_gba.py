import itertools
import random

import pytest

from quadba.crypto import Group, Keystore
from quadba.expander import build
from quadba.gba import (EXP, TS, GbaError, GbaParty, collect_certificate, collect_certificates,
                        make_vote, verify_certificate)
from quadba.messages import ECHO, VOTE1, VOTE3, Delivery
from quadba.protocols import GbaProtocol
from quadba.simnet import check_agreement, check_certificates, run

from helpers import Scripted


def _ks(n, q=None):
    return Keystore(n, seed=3, groups={"Q1": Group(frozenset(range(n)), q or n)})


def test_init_checks():
    ks = _ks(7, 4)
    p = GbaParty(TS, range(7), 3, 2, "A", ks, group="Q1")
    assert p.quorum == 4 and p.rounds == 4
    g = build(8, 0.125, seed=0, closed=True)
    q = GbaParty(EXP, range(8), 3, 0, "B", Keystore(8), graph=g)
    assert q.rounds == 5 and q.graph is g
    with pytest.raises(GbaError):
        GbaParty(TS, range(7), 3, 9, "A", ks, group="Q1")
    with pytest.raises(GbaError):
        GbaParty(EXP, range(8), 3, 0, "B", Keystore(8))
    with pytest.raises(GbaError):
        GbaParty(TS, range(7), 3, 0, "A", ks)


def test_rounds_must_alternate():
    p = GbaParty(TS, range(4), 1, 0, "A", _ks(4, 3), group="Q1")
    with pytest.raises(GbaError):
        p.receive(1, [])
    p.send(1)
    with pytest.raises(GbaError):
        p.send(2)
    with pytest.raises(GbaError):
        p.output()


def _votes(ks, kind, signers, value, instance="gba"):
    return [make_vote(ks, s, instance, kind, value) for s in signers]


def test_collect_certificate_distinct_signers():
    ks = _ks(5)
    msgs = _votes(ks, VOTE1, range(4), "A")
    cert = collect_certificate(msgs, "gba", VOTE1, range(5), 4, ks)
    assert cert is not None and cert.value == "A" and cert.kappa == 4
    dup = _votes(ks, VOTE1, [0, 1, 2, 2], "A")
    assert collect_certificate(dup, "gba", VOTE1, range(5), 4, ks) is None


def test_collect_certificate_ignores_other_instances_and_outsiders():
    ks = _ks(6)
    msgs = _votes(ks, VOTE1, range(3), "A") + _votes(ks, VOTE1, [3], "A", instance="other")
    assert collect_certificate(msgs, "gba", VOTE1, range(4), 4, ks) is None
    msgs = _votes(ks, VOTE1, [0, 1, 2, 5], "A")
    assert collect_certificate(msgs, "gba", VOTE1, range(4), 4, ks) is None


def test_conflicting_quorums_pick_smallest_value():
    ks = _ks(4)
    msgs = _votes(ks, ECHO, range(3), "B") + _votes(ks, ECHO, range(3), "A")
    certs = collect_certificates(msgs, "gba", ECHO, range(4), 3, ks)
    assert list(certs) == ["A", "B"]
    assert collect_certificate(msgs, "gba", ECHO, range(4), 3, ks).value == "A"
    p = GbaParty(TS, range(4), 1, 0, "A", _ks(4, 3), group="Q1")
    p.send(1)
    p.receive(1, [Delivery(m.body.signer, m) for m in msgs])
    assert p.echo_cert.value == "A" and p.conflict
    assert p.send(2) and p.propagated == "A"
    p.receive(2, [])
    assert p.send(3) == []


def test_aggregated_certificate_roundtrip():
    ks = _ks(4, 3)
    msgs = _votes(ks, ECHO, range(3), "A")
    cert = collect_certificate(msgs, "gba", ECHO, range(4), 3, ks, group="Q1")
    assert cert.aggregated and cert.kappa == 1
    assert verify_certificate(cert, "gba", ECHO, "A", range(4), 3, ks, "Q1")
    assert not verify_certificate(cert, "gba", ECHO, "B", range(4), 3, ks, "Q1")
    assert not verify_certificate(cert, "gba", VOTE1, "A", range(4), 3, ks, "Q1")


def _honest(t):
    return {p: (t.outputs[p], t.grades[p]) for p in t.honest()}


@pytest.mark.parametrize("variant,n,f,eps", [(TS, 4, 1, None), (TS, 9, 4, None),
                                             (EXP, 8, 3, 0.125), (EXP, 16, 6, 0.125)])
def test_unanimous_gives_grade_one(variant, n, f, eps):
    proto = GbaProtocol(n, f, variant, epsilon=eps, seed=2)
    t = run(proto, ["B"] * n, f)
    assert set(_honest(t).values()) == {("B", 1)}


@pytest.mark.parametrize("variant,n,f,eps", [(TS, 7, 3, None), (EXP, 8, 3, 0.125)])
def test_unanimous_with_silent_faults(variant, n, f, eps):
    class Silent(Scripted):
        def on_round(self, view):
            pass
    proto = GbaProtocol(n, f, variant, epsilon=eps, seed=4)
    t = run(proto, ["A"] * n, f, Silent(range(f)))
    assert set(_honest(t).values()) == {("A", 1)}


def test_no_certificate_keeps_input_with_grade_zero():
    proto = GbaProtocol(4, 1, TS, seed=0)
    t = run(proto, ["A", "B", "A", "B"], 1)
    assert _honest(t) == {0: ("A", 0), 1: ("B", 0), 2: ("A", 0), 3: ("B", 0)}


def test_exp_vote3_goes_to_everyone():
    proto = GbaProtocol(8, 3, EXP, epsilon=0.125, seed=1)
    t = run(proto, ["A"] * 8, 3)
    v3 = [e for e in t.envelopes if e.message.kind == VOTE3 and e.honest]
    assert len(v3) == 8
    assert all(e.round == 5 and e.recipients == tuple(range(8)) and e.message.value == "A" for e in v3)


def test_exp_certificates_only_to_neighbours():
    proto = GbaProtocol(16, 6, EXP, epsilon=0.125, seed=1)
    t = run(proto, ["A"] * 16, 6)
    g = proto.graphs(16)
    certs = [e for e in t.envelopes if e.message.kind.endswith("-cert")]
    assert certs
    assert all(set(e.recipients) == g.neighbors(e.sender) for e in certs)


def test_exhaustive_echo_equivocation_at_four():
    """Party 3 is faulty; every echo and vote-1 choice per recipient, every honest input."""
    choices = ("A", "B", None)
    proto = GbaProtocol(4, 1, TS, seed=0)
    runs = 0
    for inputs in itertools.product("AB", repeat=3):
        for echo in itertools.product(choices, repeat=3):
            for v1 in itertools.product(choices, repeat=3):
                adv = Scripted([3], {(1, ECHO): dict(zip(range(3), echo)),
                                     (3, VOTE1): dict(zip(range(3), v1))})
                t = run(proto, list(inputs) + ["A"], 1, adv)
                certs = check_certificates(t)
                assert not certs.conflicting_vote1, (inputs, echo, v1)
                assert not certs.graded_violations, (inputs, echo, v1)
                if len(set(inputs)) == 1:
                    assert set(_honest(t).values()) == {(inputs[0], 1)}
                runs += 1
    assert runs == 8 * 27 * 27


@pytest.mark.parametrize("seed", range(20))
def test_random_inputs_graded_consistency(seed):
    rnd = random.Random(seed)
    for variant, n, f, eps in ((TS, 8, 3, None), (EXP, 16, 6, 0.125)):
        inputs = [rnd.choice("AB") for _ in range(n)]
        bad = rnd.sample(range(n), f)
        plan = {r: rnd.choice("AB") for r in range(n)}
        adv = Scripted(bad, {(1, ECHO): plan, (3, VOTE1): dict(plan)})
        t = run(GbaProtocol(n, f, variant, epsilon=eps, seed=seed), inputs, f, adv)
        rep = check_certificates(t)
        assert rep.ok
        assert check_agreement(t).termination
