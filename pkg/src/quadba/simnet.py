"""Lock-step synchronous network with a rushing, adaptively corrupting adversary.

Each round ``r``:

1. every party's machine produces its round-``r`` outbox;
2. the adversary sees all of them and may corrupt parties (up to ``f`` in
   total) and send messages as any corrupted party;
3. every message is delivered at the end of round ``r``, inboxes sorted by
   ``(sender, digest)``.

A corrupted party's machine keeps running on its inbox, but its outbox is
handed to the adversary as a suggestion instead of being sent.  By default a
party corrupted during round ``r`` still sends its honest round-``r`` outbox;
``retract_on_corrupt=True`` withdraws it instead.
"""
from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field

from .crypto import Keystore, SignedMessage
from .gba import GradedOutput, make_vote
from .messages import CERT_KINDS, ECHO, ECHO_CERT, VOTE1, VOTE1_CERT, Certificate, Delivery, Message, Outgoing

log = logging.getLogger(__name__)

TRANSCRIPT_VERSION = 1


class ContractViolation(Exception):
    pass


@dataclass(frozen=True)
class Envelope:
    round: int
    sender: int
    recipients: tuple
    message: Message
    kappa: int
    honest: bool

    @property
    def cost(self) -> int:
        return self.kappa * len(self.recipients)

    def record(self) -> dict:
        m = self.message
        return {"type": "envelope", "round": self.round, "sender": self.sender,
                "recipients": list(self.recipients), "instance": m.instance, "kind": m.kind,
                "value": m.value, "kappa": self.kappa, "honest": self.honest}


@dataclass
class Transcript:
    protocol: str
    n: int
    f: int
    seed: int
    adversary: str
    rounds: int
    inputs: dict
    instances: dict = field(default_factory=dict)
    envelopes: list = field(default_factory=list)
    corruptions: list = field(default_factory=list)
    outputs: dict = field(default_factory=dict)
    grades: dict = field(default_factory=dict)
    decision_rounds: dict = field(default_factory=dict)
    gba_outputs: dict = field(default_factory=dict)
    dropped: int = 0
    keystore: Keystore | None = field(default=None, repr=False, compare=False)

    def corrupted(self) -> set:
        return {p for p, _ in self.corruptions}

    def honest(self) -> list:
        bad = self.corrupted()
        return [p for p in range(self.n) if p not in bad]

    def records(self):
        yield {"type": "header", "version": TRANSCRIPT_VERSION, "protocol": self.protocol,
               "n": self.n, "f": self.f, "seed": self.seed, "adversary": self.adversary,
               "rounds": self.rounds, "inputs": {str(p): v for p, v in sorted(self.inputs.items())}}
        for p, r in self.corruptions:
            yield {"type": "corruption", "party": p, "round": r}
        for e in self.envelopes:
            yield e.record()
        yield {"type": "summary",
               "outputs": {str(p): v for p, v in sorted(self.outputs.items())},
               "grades": {str(p): g for p, g in sorted(self.grades.items())},
               "decision_rounds": {str(p): r for p, r in sorted(self.decision_rounds.items())},
               "gba_outputs": {k: {str(p): list(o) for p, o in sorted(v.items())}
                               for k, v in sorted(self.gba_outputs.items())},
               "comm_cost": comm_cost(self), "dropped": self.dropped}

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n" for r in self.records())


@dataclass(frozen=True)
class AdversaryContext:
    protocol: str
    n: int
    f: int
    seed: int
    rounds: int
    instances: dict
    values: tuple
    cert_degree: int | None = None


class AdversaryView:
    """What the adversary sees and may do during one round."""

    def __init__(self, net: "_Network", rnd: int, honest: list, shadow: dict):
        self._net = net
        self.round = rnd
        self.honest_envelopes = tuple(honest)
        self.shadow = shadow
        self.outbox: list[Envelope] = []

    @property
    def corrupted(self) -> frozenset:
        return frozenset(self._net.corrupted)

    @property
    def keystore(self) -> Keystore:
        return self._net.ks

    def corrupt(self, p: int) -> None:
        self._net.corrupt(p, self.round)

    def sign(self, p: int, payload: bytes):
        if p not in self._net.corrupted:
            raise ContractViolation(f"adversary tried to sign as honest party {p}")
        return self._net.ks.sign(p, payload)

    def vote(self, p: int, instance: str, kind: str, value) -> Message:
        if p not in self._net.corrupted:
            raise ContractViolation(f"adversary tried to sign as honest party {p}")
        return make_vote(self._net.ks, p, instance, kind, value)

    def send(self, sender: int, recipients, message: Message) -> None:
        if sender not in self._net.corrupted:
            raise ContractViolation(f"adversary tried to send as honest party {sender}")
        recipients = tuple(sorted(set(recipients)))
        if not recipients:
            return
        if any(not 0 <= p < self._net.n for p in recipients):
            raise ContractViolation("recipient out of range")
        if not isinstance(message, Message):
            raise ContractViolation("adversary may only send protocol messages")
        self.outbox.append(Envelope(self.round, sender, recipients, message, message.kappa, False))

    def forward(self, sender: int, out: Outgoing) -> None:
        self.send(sender, out.recipients, out.message)


class Adversary:
    """Base adversary: corrupts nobody and sends nothing."""

    name = "passive"

    def setup(self, ctx: AdversaryContext) -> None:
        self.ctx = ctx

    def initial_corruptions(self) -> list:
        return []

    def before_round(self, rnd: int) -> list:
        """Parties to corrupt at the start of ``rnd``, before they send anything."""
        return []

    def on_round(self, view: AdversaryView) -> None:
        pass


class _Network:
    def __init__(self, n, f, ks):
        self.n, self.f, self.ks = n, f, ks
        self.corrupted: dict[int, int] = {}
        self.events: list = []

    def corrupt(self, p: int, rnd: int):
        if not 0 <= p < self.n:
            raise ContractViolation(f"no party {p}")
        if p in self.corrupted:
            return
        if len(self.corrupted) >= self.f:
            raise ContractViolation(f"corruption budget f={self.f} exhausted")
        self.corrupted[p] = rnd
        self.events.append((p, rnd))


def _inboxes(n: int, envelopes) -> list[list[Delivery]]:
    boxes: list[list] = [[] for _ in range(n)]
    for e in envelopes:
        key = (e.sender, e.message.digest())
        d = Delivery(e.sender, e.message)
        for p in e.recipients:
            boxes[p].append((key, d))
    out = []
    for box in boxes:
        box.sort(key=lambda kd: kd[0])
        out.append([d for _, d in box])
    return out


def run(protocol, inputs, f: int, adversary: Adversary | None = None, seed: int = 0,
        values=("A", "B"), retract_on_corrupt: bool = False) -> Transcript:
    """Execute ``protocol`` to completion and return the transcript."""
    n = protocol.n
    if not 0 <= f < n:
        raise ValueError(f"need 0 <= f < n, got f={f}, n={n}")
    if isinstance(inputs, dict):
        inputs = [inputs[p] for p in range(n)]
    inputs = list(inputs)
    if len(inputs) != n:
        raise ValueError("need one input per party")
    adversary = adversary or Adversary()
    net = _Network(n, f, protocol.keystore)
    ctx = AdversaryContext(protocol.name, n, f, seed, protocol.rounds, protocol.instances,
                           tuple(values), protocol.cert_degree())
    adversary.setup(ctx)
    for p in adversary.initial_corruptions():
        net.corrupt(p, 0)
    machines = [protocol.party(p, inputs[p]) for p in range(n)]
    t = Transcript(protocol.name, n, f, seed, getattr(adversary, "name", type(adversary).__name__),
                   protocol.rounds, dict(enumerate(inputs)), dict(protocol.instances),
                   keystore=protocol.keystore)

    for rnd in range(1, protocol.rounds + 1):
        for p in adversary.before_round(rnd):
            net.corrupt(p, rnd)
        honest, shadow = [], {}
        for p, m in enumerate(machines):
            outs = [o for o in m.send(rnd) if o.recipients]
            if p in net.corrupted:
                shadow[p] = outs
            else:
                honest += [Envelope(rnd, p, tuple(o.recipients), o.message, o.message.kappa, True)
                           for o in outs]
        before = set(net.corrupted)
        view = AdversaryView(net, rnd, honest, shadow)
        adversary.on_round(view)
        if retract_on_corrupt:
            fresh = set(net.corrupted) - before
            honest = [e for e in honest if e.sender not in fresh]
        sent = honest + view.outbox
        for p, box in enumerate(_inboxes(n, sent)):
            machines[p].receive(rnd, box)
        t.envelopes += sent

    t.corruptions = list(net.events)
    bad = set(net.corrupted)
    for p, m in enumerate(machines):
        t.dropped += getattr(m, "dropped", 0)
        if p in bad:
            continue
        out = m.output()
        if isinstance(out, GradedOutput):
            t.grades[p] = out.grade
            out = out.value
        t.outputs[p] = out
        t.decision_rounds[p] = protocol.rounds
        for label, og in m.gba_outputs().items():
            t.gba_outputs.setdefault(label, {})[p] = tuple(og)
    return t


# -- transcript analysis -----------------------------------------------------

def comm_cost(t: Transcript) -> int:
    """Signature units sent by honest parties; a k-recipient envelope costs k copies."""
    return sum(e.cost for e in t.envelopes if e.honest)


@dataclass
class AgreementReport:
    consistency: bool
    termination: bool
    validity: bool | None
    decisions: dict

    @property
    def ok(self) -> bool:
        return self.consistency and self.termination and self.validity is not False


def check_agreement(t: Transcript) -> AgreementReport:
    honest = t.honest()
    decided = {p: t.outputs[p] for p in honest if p in t.outputs}
    termination = len(decided) == len(honest)
    consistency = len(set(decided.values())) <= 1
    honest_inputs = {t.inputs[p] for p in honest}
    validity = None
    if len(honest_inputs) == 1:
        (v,) = honest_inputs
        validity = all(x == v for x in decided.values())
    return AgreementReport(consistency, termination, validity, decided)


@dataclass
class CertificateReport:
    conflicting_vote1: list
    conflicting_echo: list
    graded_violations: list
    over_bound: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.conflicting_vote1 and not self.graded_violations


def _certified(t: Transcript, instance: str, base_kind: str, cert_kind: str, quorum: int, committee):
    """Values for which a quorum certificate exists in the transcript."""
    ks = t.keystore
    members = set(committee)
    signers: dict = defaultdict(set)
    materialized = set()
    for e in t.envelopes:
        m = e.message
        if m.instance != instance:
            continue
        if m.kind == base_kind:
            s = m.body
            if isinstance(s, SignedMessage) and s.signer in members and (ks is None or ks.verify(s)):
                signers[m.value].add(s.signer)
        elif m.kind == cert_kind and isinstance(m.body, Certificate):
            c = m.body
            if c.aggregated:
                materialized.add(c.value)
            else:
                for s in c.evidence:
                    if isinstance(s, SignedMessage) and s.signer in members and (ks is None or ks.verify(s)):
                        signers[c.value].add(s.signer)
    return sorted(materialized | {v for v, s in signers.items() if len(s) >= quorum})


def check_certificates(t: Transcript) -> CertificateReport:
    """Look for conflicting vote-1 (and echo) certificates inside any GBA instance,
    and for graded outputs that break graded consistency.

    Both properties are promised only while a committee holds at most
    ``size - quorum`` corrupted members.  Instances past that bound (the
    recursion tolerates one bad half) are listed in ``over_bound`` and skipped.
    """
    c1, echo, graded, over = [], [], [], []
    bad = set(t.corrupted())
    for label, info in sorted(t.instances.items()):
        if info.kind != "gba":
            continue
        if len(bad.intersection(info.committee)) > len(info.committee) - info.quorum:
            over.append(label)
            continue
        vals = _certified(t, label, VOTE1, VOTE1_CERT, info.quorum, info.committee)
        if len(vals) > 1:
            c1.append((label, vals))
        vals = _certified(t, label, ECHO, ECHO_CERT, info.quorum, info.committee)
        if len(vals) > 1:
            echo.append((label, vals))
    honest = set(t.honest())
    for label, outs in sorted(t.gba_outputs.items()):
        if label in over:
            continue
        mine = {p: o for p, o in outs.items() if p in honest}
        sticky = {v for v, g in mine.values() if g == 1}
        if sticky and (len(sticky) > 1 or any(v not in sticky for v, _ in mine.values())):
            graded.append((label, sorted(set(mine.values()))))
    return CertificateReport(c1, echo, graded, over)


def check_unforgeability(t: Transcript) -> list:
    """Signatures of never-yet-corrupted parties that the adversary sent before any
    honest envelope carried them."""
    seen = set()
    corrupt_at = {p: r for p, r in t.corruptions}
    bad = []
    by_round = defaultdict(list)
    for e in t.envelopes:
        by_round[e.round].append(e)
    for rnd in sorted(by_round):
        for e in by_round[rnd]:
            if e.honest:
                seen.update((s.signer, s.payload, s.tag) for s in e.message.signatures())
        for e in by_round[rnd]:
            if e.honest:
                continue
            for s in e.message.signatures():
                key = (s.signer, s.payload, s.tag)
                if key in seen or corrupt_at.get(s.signer, rnd + 1) <= rnd:
                    continue
                if t.keystore is not None and not t.keystore.verify(s):
                    continue
                bad.append((rnd, e.sender, s.signer))
    return bad


def max_cert_recipients(t: Transcript, honest_only: bool = True) -> int:
    return max((len(e.recipients) for e in t.envelopes
                if e.message.kind in CERT_KINDS and (e.honest or not honest_only)), default=0)


def cert_kappas(t: Transcript) -> set:
    return {e.kappa for e in t.envelopes if e.message.kind in CERT_KINDS and e.honest}
