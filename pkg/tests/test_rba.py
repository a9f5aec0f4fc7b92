import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from quadba.harness import RunConfig, execute, max_faults
from quadba.messages import DS, REPORT, Delivery, Message
from quadba.protocols import BaseBaProtocol, BoundError, RbaProtocol, make_protocol, rba_init
from quadba.rba import (RbaError, base_rounds, committee_members, majority_value, plurality,
                        rba_rounds, round_schedule)
from quadba.simnet import check_agreement, run

from helpers import Scripted


def _slice_oracle(w, n):
    # walk the binary expansion of w from the root: 0 = first half, 1 = second half
    q = list(range(n))
    for bit in bin(w)[3:]:
        h = (len(q) + 1) // 2
        q = q[:h] if bit == "0" else q[h:]
    return tuple(q)


def test_committee_examples():
    assert committee_members(1, 7) == tuple(range(7))
    assert committee_members(2, 7) == (0, 1, 2, 3)
    assert committee_members(3, 7) == (4, 5, 6)
    assert committee_members(5, 7) == _slice_oracle(5, 7) == (2, 3)


@given(st.integers(1, 200), st.integers(1, 64))
def test_committees_match_slicing_oracle(n, w):
    expect = _slice_oracle(w, n)
    if not expect:
        with pytest.raises(RbaError):
            committee_members(w, n)
    else:
        assert committee_members(w, n) == expect


@given(st.integers(2, 300))
def test_children_partition_parent(n):
    for w in (1, 2, 3):
        q = committee_members(w, n) if len(_slice_oracle(w, n)) else ()
        if len(q) < 2:
            continue
        a, b = committee_members(2 * w, n), committee_members(2 * w + 1, n)
        assert a + b == q and len(a) - len(b) in (0, 1)


def _rec_oracle(s, M, G):
    if s <= M:
        return (s - 1) // 2 + 3
    return G + _rec_oracle((s + 1) // 2, M, G) + 1 + G + _rec_oracle(s // 2, M, G) + 1


def test_schedule_examples():
    assert base_rounds(4) == 4
    assert rba_rounds(4, 4, 4) == 4
    assert rba_rounds(8, 4, 4) == 4 + 4 + 1 + 4 + 4 + 1 == 18


@pytest.mark.parametrize("n", [1, 3, 5, 8, 13, 16, 31, 64, 100])
@pytest.mark.parametrize("G", [4, 5])
def test_schedule_matches_recurrence(n, G):
    assert rba_rounds(n, 4, G) == _rec_oracle(n, 4, G)
    sched = round_schedule(n, 4, G)
    assert sched[n] == _rec_oracle(n, 4, G)
    assert sched == round_schedule(n, 4, G)


def test_base_round_count_matches_machine():
    proto = BaseBaProtocol(4, 1)
    t = run(proto, ["A"] * 4, 1)
    assert t.rounds == 4
    # with everyone honest each value is accepted in round 1 and relayed once
    assert max(e.round for e in t.envelopes) == 2


def test_majority_value():
    assert majority_value({0: "A", 1: "A", 2: "A", 3: "B"}, range(4)) == "A"
    assert majority_value({0: "A", 1: "A", 2: "B", 3: "B"}, range(4)) is None
    assert majority_value({0: "A", 1: "A"}, range(4)) is None
    assert majority_value({0: "A", 1: "A", 9: "A"}, range(3)) == "A"
    assert majority_value({0: "A", 9: "A", 8: "A"}, range(3)) is None


def test_duplicate_reports_counted_once():
    proto = RbaProtocol(8, 0, M=4)
    p = proto.party(0, "B")
    # drive party 0 to the first report round with an empty network
    first = 4 + rba_rounds(4, 4, 4) + 1
    for r in range(1, first):
        p.send(r)
        p.receive(r, [])
    p.send(first)
    dup = [Delivery(1, Message("w1/rA", REPORT, "A")), Delivery(1, Message("w1/rA", REPORT, "A")),
           Delivery(1, Message("w1/rA", REPORT, "A")), Delivery(2, Message("w1/rA", REPORT, "A"))]
    p.receive(first, dup)
    assert p.reports == {1: "A", 2: "A"}
    assert p.v == "B"          # 2 of 4 is no majority


def test_plurality_tie_breaks_to_smallest():
    assert plurality(["B", "A", "B", "A"]) == "A"
    assert plurality(["B", None, "B", "A"]) == "B"
    assert plurality([None, None]) is None


def test_init_phases():
    assert rba_init(0, 3, 1, "A").phase == "BASE"
    p = rba_init(5, 16, 7, "A")
    assert p.phase == "GBA-A" and p.committee == tuple(range(16))
    with pytest.raises(BoundError):
        rba_init(0, 16, 8, "A")


@pytest.mark.parametrize("name,n,f,eps", [("RBA-TS", 16, 7, None), ("RBA-EXP", 16, 6, 0.125),
                                          ("RBA-TS", 13, 6, None), ("BASE-BA", 4, 1, None)])
def test_unanimous_validity(name, n, f, eps):
    t = run(make_protocol(name, n, f, epsilon=eps, seed=1), ["B"] * n, f)
    assert set(t.outputs.values()) == {"B"}
    if name != "BASE-BA":
        # every GBA on the way agrees with grade 1, so no adopt step overwrites
        for label, outs in t.gba_outputs.items():
            assert set(outs.values()) == {("B", 1)}, label


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("name,eps", [("RBA-TS", None), ("RBA-EXP", 0.125)])
def test_mixed_inputs_agree(name, eps, seed):
    rnd = random.Random(seed)
    n = 16
    t = run(make_protocol(name, n, 0, epsilon=eps, seed=seed), [rnd.choice("AB") for _ in range(n)], 0)
    assert len(set(t.outputs.values())) == 1


def test_adopt_from_honest_half():
    # every honest party enters the adopt step with grade 0; the first half reports A
    n = 8
    inputs = ["A"] * 4 + ["B"] * 4
    t = run(RbaProtocol(n, 3, M=4, seed=0), inputs, 3)
    rA = t.gba_outputs["w1/gA"]
    assert set(g for _, g in rA.values()) == {0}
    assert set(t.outputs.values()) == {"A"}


def test_base_case_single_party():
    t = run(BaseBaProtocol(1, 0), ["B"], 0)
    assert t.outputs == {0: "B"}


def test_base_equivocating_sender_exhaustive():
    """s = 4, f = 1: party 3 sends any value or nothing to each honest party, in every round."""
    choices = ("A", "B", None)
    proto = BaseBaProtocol(4, 1)
    for inputs in itertools.product("AB", repeat=3):
        for first in itertools.product(choices, repeat=3):
            adv = Scripted([3], {(1, DS): dict(zip(range(3), first))})
            t = run(proto, list(inputs) + ["A"], 1, adv)
            rep = check_agreement(t)
            assert rep.consistency and rep.termination, (inputs, first)
            if rep.validity is not None:
                assert rep.validity


@pytest.mark.parametrize("adv", ["echo-equivocator", "grade-splitter", "half-corruptor", "rushing-splitter"])
def test_grade_one_is_sticky(adv):
    # whenever every honest party leaves the first GBA with (v, 1), the decision is v
    seen = 0
    for seed in range(8):
        for proto, eps in (("RBA-TS", None), ("RBA-EXP", 0.125)):
            _, t = execute(RunConfig(proto, 16, max_faults(proto, 16, eps), eps, seed=seed,
                                     adversary=adv, inputs=("split", "unanimous:B")[seed % 2]))
            first = {t.gba_outputs["w1/gA"][p] for p in t.honest()}
            if len(first) == 1 and next(iter(first))[1] == 1:
                seen += 1
                assert set(t.outputs.values()) == {next(iter(first))[0]}
    assert seen > 0


@st.composite
def _attacks(draw):
    name, eps = draw(st.sampled_from([("RBA-TS", None), ("RBA-EXP", 0.125)]))
    n = draw(st.sampled_from([5, 8, 11, 16]))
    f = max_faults(name, n, eps)
    bad = draw(st.lists(st.integers(0, n - 1), min_size=f, max_size=f, unique=True))
    inputs = draw(st.lists(st.sampled_from("AB"), min_size=n, max_size=n))
    plans = {}
    for kind, rnd in (("echo", 1), ("vote1", 3), ("vote2", 4)):
        plans[(rnd, kind)] = dict(enumerate(draw(st.lists(st.sampled_from(["A", "B", None]),
                                                          min_size=n, max_size=n))))
    return name, eps, n, f, bad, inputs, plans


@given(_attacks())
@settings(max_examples=40, deadline=None)
def test_scripted_equivocation_property(attack):
    # equivocating votes in the top-level first GBA never break agreement
    name, eps, n, f, bad, inputs, plans = attack
    t = run(make_protocol(name, n, f, epsilon=eps, seed=1), inputs, f, Scripted(bad, plans, instance="w1/gA"))
    rep = check_agreement(t)
    assert rep.consistency and rep.termination and rep.validity is not False
