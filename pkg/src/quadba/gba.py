"""Graded Byzantine agreement, threshold-signature (TS) and expander (EXP) variants.

Both variants share one round skeleton:

====== ======================================= =========================================
round  TS (4 rounds)                           EXP (5 rounds)
====== ======================================= =========================================
1      multicast echo                          multicast echo
2      multicast aggregated echo certificate   send echo certificate to graph neighbours
3      multicast vote-1 if forwarded and       same
       no conflicting echo certificate seen
4      multicast aggregated vote-1 certificate send vote-1 certificate to neighbours,
       and vote-2                              multicast vote-2
5      --                                      multicast vote-3 if a vote-1 certificate
                                               is known
====== ======================================= =========================================

A party is driven by :meth:`GbaParty.send` and :meth:`GbaParty.receive`, called
in strictly alternating order for rounds ``1..rounds``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable

from .crypto import Keystore, SignedMessage
from .messages import (CERT_OF, ECHO, ECHO_CERT, VOTE1, VOTE1_CERT, VOTE2, VOTE3,
                       Certificate, Delivery, Message, Outgoing, Value, statement)

log = logging.getLogger(__name__)

TS = "TS"
EXP = "EXP"
ROUNDS = {TS: 4, EXP: 5}


class GbaError(Exception):
    pass


@dataclass(frozen=True)
class GradedOutput:
    value: Value
    grade: int = 0


def make_vote(ks: Keystore, signer: int, instance: str, kind: str, value: Value) -> Message:
    return Message(instance, kind, value, ks.sign(signer, statement(instance, kind, value)))


def tally(messages: Iterable[Message], instance: str, kind: str, committee,
          ks: Keystore) -> dict[Value, dict[int, SignedMessage]]:
    """Verified votes of one kind, grouped by value and keyed by distinct signer."""
    members = committee if isinstance(committee, (set, frozenset)) else frozenset(committee)
    out: dict[Value, dict[int, SignedMessage]] = {}
    for m in messages:
        if m.instance != instance or m.kind != kind:
            continue
        sig = m.body
        if not isinstance(sig, SignedMessage) or sig.signer not in members:
            continue
        if sig.payload != statement(instance, kind, m.value) or not ks.verify(sig):
            continue
        out.setdefault(m.value, {}).setdefault(sig.signer, sig)
    return out


def collect_certificates(messages: Iterable[Message], instance: str, kind: str, committee,
                         quorum: int, ks: Keystore, group: str | None = None) -> dict[Value, Certificate]:
    """Every value with at least ``quorum`` distinct verified signers, as a certificate.

    With ``group`` set the evidence is aggregated into one threshold signature;
    otherwise it is the first ``quorum`` signatures in signer order.
    """
    certs = {}
    for value, by_signer in tally(messages, instance, kind, committee, ks).items():
        if len(by_signer) < quorum:
            continue
        shares = [by_signer[s] for s in sorted(by_signer)][:quorum]
        if group is not None:
            evidence = ks.aggregate(shares, quorum, group)
        else:
            evidence = tuple(shares)
        certs[value] = Certificate(kind, value, instance, evidence)
    return dict(sorted(certs.items()))


def collect_certificate(messages, instance, kind, committee, quorum, ks, group=None):
    """Certificate for the smallest certified value, or ``None``."""
    certs = collect_certificates(messages, instance, kind, committee, quorum, ks, group)
    return next(iter(certs.values()), None)


def verify_certificate(cert, instance: str, kind: str, value: Value, committee,
                       quorum: int, ks: Keystore, group: str | None = None) -> bool:
    if not isinstance(cert, Certificate):
        return False
    if cert.instance != instance or cert.kind != kind or cert.value != value:
        return False
    payload = statement(instance, kind, value)
    if cert.aggregated:
        ts = cert.evidence
        return group is not None and ts.threshold >= quorum and ks.verify_aggregate(ts, payload, group)
    if not isinstance(cert.evidence, tuple):
        return False
    # the same certificate object reaches many parties; keep it alive so ids stay unique
    memo = ks._cert_memo
    key = (id(cert), quorum, tuple(committee) if not isinstance(committee, tuple) else committee)
    hit = memo.get(key)
    if hit is not None and hit[0] is cert:
        return hit[1]
    ok = _check_evidence(cert, payload, committee, quorum, ks)
    memo[key] = (cert, ok)
    return ok


def _check_evidence(cert, payload, committee, quorum, ks) -> bool:
    members = frozenset(committee)
    signers = set()
    for s in cert.evidence:
        if not isinstance(s, SignedMessage) or s.signer not in members:
            return False
        if s.payload != payload or not ks.verify(s):
            return False
        signers.add(s.signer)
    return len(signers) >= quorum


class GbaParty:
    """One party's state in one GBA instance.

    ``committee`` is the ordered list of participating party ids and ``f`` the
    number of faults the instance is parameterised for (quorum = |committee| - f).
    The EXP variant needs ``graph``, an expander on ``len(committee)`` vertices
    indexed by committee position.  The TS variant needs ``group``, the
    threshold group of the committee.
    """

    def __init__(self, variant: str, committee, f: int, me: int, value: Value,
                 keystore: Keystore, instance: str = "gba", group: str | None = None, graph=None):
        if variant not in ROUNDS:
            raise GbaError(f"unknown variant {variant!r}")
        committee = tuple(committee)
        if me not in committee:
            raise GbaError(f"party {me} is not in the committee")
        if variant == EXP and (graph is None or graph.n != len(committee)):
            raise GbaError("EXP variant needs an expander on the committee")
        if variant == TS and group is None:
            raise GbaError("TS variant needs a threshold group")
        self.variant = variant
        self.committee = committee
        self.members = frozenset(committee)
        self.f = f
        self.quorum = len(committee) - f
        self.me = me
        self.ks = keystore
        self.instance = instance
        self.group = group if variant == TS else None
        self.graph = graph
        self.rounds = ROUNDS[variant]
        self.input = value
        self.v = value
        self.g = 0

        self.echo_cert: Certificate | None = None
        self.conflict = False
        self.propagated: Value | None = None
        self.echoes: list[Message] = []
        self.c1: Certificate | None = None
        self.c1_conflict = False
        self.c1_known: set[Value] = set()
        self.c2_values: set[Value] = set()
        self.dropped = 0
        self._next = (1, "send")

        if variant == EXP:
            idx = committee.index(me)
            self.neighbors = tuple(committee[j] for j in sorted(graph.neighbors(idx)))
        else:
            self.neighbors = committee

    # -- plumbing -----------------------------------------------------------

    def _advance(self, rnd: int, stage: str):
        if (rnd, stage) != self._next:
            raise GbaError(f"expected {self._next}, got {(rnd, stage)}")
        if stage == "send":
            self._next = (rnd, "receive")
        else:
            self._next = (rnd + 1, "send")

    @property
    def finished(self) -> bool:
        return self._next == (self.rounds + 1, "send")

    def _vote(self, kind: str, value: Value) -> Outgoing:
        return Outgoing(self.committee, make_vote(self.ks, self.me, self.instance, kind, value))

    def _cert_msg(self, kind: str, cert: Certificate) -> Outgoing:
        # an isolated EXP vertex yields empty recipients; the network skips it
        return Outgoing(self.neighbors, Message(self.instance, kind, cert.value, cert))

    def _certs_received(self, inbox, kind: str) -> set[Value]:
        base = CERT_OF[kind]
        found = set()
        for d in inbox:
            m = d.message
            if m.instance != self.instance or m.kind != kind:
                continue
            if verify_certificate(m.body, self.instance, base, m.value, self.committee,
                                  self.quorum, self.ks, self.group):
                found.add(m.value)
            else:
                self.dropped += 1
                log.debug("party %d dropped invalid %s in %s", self.me, kind, self.instance)
        return found

    def _mine(self, inbox) -> list[Message]:
        return [d.message for d in inbox if d.message.instance == self.instance]

    # -- rounds -------------------------------------------------------------

    def send(self, rnd: int) -> list[Outgoing]:
        self._advance(rnd, "send")
        if rnd == 1:
            return [self._vote(ECHO, self.v)]
        if rnd == 2:
            if self.echo_cert is None:
                return []
            self.propagated = self.echo_cert.value
            return [self._cert_msg(ECHO_CERT, self.echo_cert)]
        if rnd == 3:
            if self.propagated is None or self.conflict:
                return []
            return [self._vote(VOTE1, self.propagated)]
        if rnd == 4:
            if self.c1 is None:
                return []
            return [self._cert_msg(VOTE1_CERT, self.c1), self._vote(VOTE2, self.c1.value)]
        if rnd == 5:
            if not self.c1_known:
                return []
            return [self._vote(VOTE3, min(self.c1_known))]
        raise GbaError(f"no round {rnd}")

    def receive(self, rnd: int, inbox: Iterable[Delivery]) -> None:
        self._advance(rnd, "receive")
        inbox = list(inbox)
        msgs = self._mine(inbox)
        if rnd == 1:
            self.echoes = [m for m in msgs if m.kind == ECHO]
            certs = collect_certificates(self.echoes, self.instance, ECHO, self.committee,
                                         self.quorum, self.ks, self.group)
            if certs:
                self.echo_cert = next(iter(certs.values()))
                self.conflict = len(certs) > 1
        elif rnd == 2:
            seen = self._certs_received(inbox, ECHO_CERT)
            # late echoes still count as evidence of a conflicting certificate
            late = [m for m in msgs if m.kind == ECHO]
            counts = tally(self.echoes + late, self.instance, ECHO, self.committee, self.ks)
            seen |= {v for v, s in counts.items() if len(s) >= self.quorum}
            if self.echo_cert is not None and seen - {self.echo_cert.value}:
                self.conflict = True
        elif rnd == 3:
            certs = collect_certificates(msgs, self.instance, VOTE1, self.committee,
                                         self.quorum, self.ks, self.group)
            if certs:
                self.c1 = next(iter(certs.values()))
                self.c1_conflict = len(certs) > 1
                self.c1_known |= set(certs)
        elif rnd == 4:
            self.c1_known |= self._certs_received(inbox, VOTE1_CERT)
            votes = tally(msgs, self.instance, VOTE2, self.committee, self.ks)
            self.c2_values = {v for v, s in votes.items() if len(s) >= self.quorum}
            if self.variant == TS:
                if self.c1_known:
                    self.v = min(self.c1_known)
                if self.c2_values:
                    self.g = 1
        elif rnd == 5:
            votes = tally(msgs, self.instance, VOTE3, self.committee, self.ks)
            backed = sorted(v for v, s in votes.items() if len(s) >= self.f + 1)
            if backed:
                self.v = backed[0]
            if self.c2_values:
                self.g = 1

    def output(self) -> GradedOutput:
        if not self.finished:
            raise GbaError("protocol not finished")
        return GradedOutput(self.v, self.g)

    def gba_outputs(self) -> dict:
        return {self.instance: (self.v, self.g)} if self.finished else {}


gba_init = GbaParty
