"""Adversary strategy library.

Every strategy respects the simulator contract: it corrupts at most ``f``
parties and only signs or sends as corrupted parties.  Strategies that
"otherwise behave honestly" forward the outbox the corrupted party's own state
machine suggests (``view.shadow``).
"""
from __future__ import annotations

from collections import defaultdict

from .expander import make_rng
from .messages import CERT_KINDS, DS, ECHO, REPORT, VOTE3, VOTE_KINDS, Message, statement
from .rba import committee_members
from .simnet import Adversary, AdversaryView


class UnknownAdversary(KeyError):
    pass


class _Strategy(Adversary):
    def __init__(self, **params):
        self.params = params

    def setup(self, ctx):
        super().setup(ctx)
        self.rng = make_rng((int(ctx.seed), 0xADD))

    def random_parties(self, k: int, pool=None) -> list:
        pool = list(range(self.ctx.n)) if pool is None else list(pool)
        k = min(k, len(pool))
        if k <= 0:
            return []
        picked = self.rng.choice(len(pool), size=k, replace=False)
        return sorted(pool[int(i)] for i in picked)

    def other(self, v):
        values = self.ctx.values
        if v in values:
            return values[(values.index(v) + 1) % len(values)]
        return values[0]

    def info(self, instance: str):
        if instance in self.ctx.instances:
            return self.ctx.instances[instance]
        head = instance.rsplit("/", 1)[0]
        return self.ctx.instances.get(head)

    def resign(self, view: AdversaryView, p: int, m: Message, value) -> Message | None:
        """Same message with a different value, signed by corrupted ``p``; None if impossible."""
        if m.kind in VOTE_KINDS:
            return view.vote(p, m.instance, m.kind, value)
        if m.kind == DS and len(m.body) == 1 and m.body[0].signer == p:
            return Message(m.instance, DS, value, (view.sign(p, statement(m.instance, DS, value)),))
        if m.kind == REPORT:
            return Message(m.instance, REPORT, value)
        return None


class Passive(_Strategy):
    name = "passive"


class Crash(_Strategy):
    """Corrupt ``parties`` at round ``round`` and keep them silent afterwards."""

    name = "crash"

    def setup(self, ctx):
        super().setup(ctx)
        parties = self.params.get("parties")
        self.parties = sorted(parties) if parties is not None else self.random_parties(ctx.f)
        r = self.params.get("round")
        self.crash_round = int(r) if r is not None else int(self.rng.integers(1, ctx.rounds + 1))

    def before_round(self, rnd):
        return self.parties if rnd == self.crash_round else []


class EchoEquivocator(_Strategy):
    """Corrupted parties echo one value to half the recipients and another to the rest.

    The same split is applied to a corrupted sender's own broadcast in the base
    case; all other traffic follows the honest suggestion.
    """

    name = "echo-equivocator"

    def initial_corruptions(self):
        return self.params.get("parties") or self.random_parties(self.ctx.f)

    def on_round(self, view):
        for p, outs in sorted(view.shadow.items()):
            for out in outs:
                m = out.message
                alt = None
                if m.kind == ECHO or (m.kind == DS and len(m.body) == 1):
                    alt = self.resign(view, p, m, self.other(m.value))
                if alt is None:
                    view.forward(p, out)
                    continue
                rec = sorted(out.recipients)
                half = (len(rec) + 1) // 2
                view.send(p, rec[:half], m)
                view.send(p, rec[half:], alt)


class HalfCorruptor(_Strategy):
    """Spend the whole budget inside one half of the top committee and behave randomly there."""

    name = "half-corruptor"

    def initial_corruptions(self):
        half = self.params.get("half")
        if half is None:
            half = 2 + int(self.rng.integers(0, 2))
        self.half = int(half)
        n = self.ctx.n
        pool = committee_members(self.half, n) if n > 1 else (0,)
        return self.random_parties(self.ctx.f, pool)

    def on_round(self, view):
        values = self.ctx.values
        for p, outs in sorted(view.shadow.items()):
            for out in outs:
                m = out.message
                action = int(self.rng.integers(0, 4))
                rec = sorted(out.recipients)
                if action == 0:
                    view.forward(p, out)
                elif action == 1:
                    continue
                elif action == 2:
                    # equivocate: every recipient gets an independently drawn value
                    by_value = defaultdict(list)
                    for r in rec:
                        by_value[values[int(self.rng.integers(0, len(values)))]].append(r)
                    for v, who in sorted(by_value.items()):
                        alt = m if v == m.value else self.resign(view, p, m, v)
                        if alt is not None:
                            view.send(p, who, alt)
                else:
                    keep = [r for r in rec if self.rng.random() < 0.5]
                    view.send(p, keep, m)


class CertSuppressor(_Strategy):
    """Corrupted parties never forward or propagate certificates."""

    name = "cert-suppressor"

    def initial_corruptions(self):
        return self.params.get("parties") or self.random_parties(self.ctx.f)

    def on_round(self, view):
        for p, outs in sorted(view.shadow.items()):
            for out in outs:
                if out.message.kind not in CERT_KINDS:
                    view.forward(p, out)


class _Targeted(_Strategy):
    """Rushing vote placement.

    After seeing the honest votes of a round, pick a value that honest votes
    alone leave just short of its threshold and let corrupted members top it
    up for chosen targets only.  Without such a value, behave honestly.
    """

    def initial_corruptions(self):
        return self.params.get("parties") or self.random_parties(self.ctx.f)

    def targets(self, honest_members: list) -> list:
        raise NotImplementedError

    def minimal(self) -> bool:
        raise NotImplementedError

    def on_round(self, view):
        counts = defaultdict(lambda: defaultdict(set))
        for e in view.honest_envelopes:
            m = e.message
            if m.kind in VOTE_KINDS and m.body is not None:
                counts[(m.instance, m.kind)][m.value].add(m.body.signer)
        bad = view.corrupted
        handled = set()
        for (instance, kind), by_value in sorted(counts.items()):
            info = self.info(instance)
            if info is None or info.kind != "gba":
                continue
            threshold = info.f + 1 if kind == VOTE3 else info.quorum
            ours = [p for p in info.committee if p in bad]
            honest = [p for p in info.committee if p not in bad]
            ranked = sorted(by_value.items(), key=lambda kv: (-len(kv[1]), kv[0]))
            for value, signers in ranked:
                h = len(signers)
                if h < threshold <= h + len(ours):
                    senders = ours[:threshold - h] if self.minimal() else ours
                    who = self.targets(honest)
                    for p in senders:
                        view.send(p, who, view.vote(p, instance, kind, value))
                    handled.update((p, instance, kind) for p in ours)
                    break
        for p, outs in sorted(view.shadow.items()):
            for out in outs:
                m = out.message
                if (p, m.instance, m.kind) not in handled:
                    view.forward(p, out)


class RushingSplitter(_Targeted):
    name = "rushing-splitter"

    def targets(self, honest_members):
        return honest_members[:1]

    def minimal(self):
        return True


class GradeSplitter(_Targeted):
    name = "grade-splitter"

    def targets(self, honest_members):
        return honest_members[:(len(honest_members) + 1) // 2]

    def minimal(self):
        return False


STRATEGIES = {cls.name: cls for cls in
              (Passive, Crash, EchoEquivocator, HalfCorruptor, CertSuppressor, RushingSplitter, GradeSplitter)}
ADVERSARIES = tuple(STRATEGIES)


def adversary(name: str, params: dict | None = None) -> Adversary:
    try:
        cls = STRATEGIES[name]
    except KeyError:
        raise UnknownAdversary(name) from None
    return cls(**(params or {}))
