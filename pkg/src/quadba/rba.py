"""Recursive Byzantine agreement over halving committees.

Committee ``w`` is defined from the full party list: committee 1 is everyone,
committee ``2w`` is the first ``ceil(|Q_w|/2)`` members of ``Q_w`` and
``2w + 1`` the rest.  A committee larger than ``M`` runs

    GBA -> recurse on first half -> report + adopt -> GBA -> recurse on second half -> report + adopt

and a committee of at most ``M`` parties runs the base-case agreement
(parallel Dolev-Strong broadcasts followed by a majority).

The schedule is static: every party can compute from ``(n, M, G)`` alone which
sub-protocol runs in which round, and parties outside the active half simply
stay silent while it recurses.
"""
from __future__ import annotations

import logging
from collections import Counter
from functools import lru_cache

from .crypto import Keystore, SignedMessage
from .gba import GbaParty, GradedOutput
from .messages import DS, REPORT, Message, Outgoing, statement

log = logging.getLogger(__name__)


class RbaError(Exception):
    pass


class ScheduleError(RbaError):
    pass


# -- committees and schedule -------------------------------------------------

@lru_cache(maxsize=None)
def _members(w: int, n: int) -> tuple:
    if w == 1:
        return tuple(range(n))
    parent = _members(w // 2, n)
    half = (len(parent) + 1) // 2
    return parent[:half] if w % 2 == 0 else parent[half:]


def committee_members(w: int, n: int) -> tuple:
    if w < 1:
        raise RbaError(f"committee label must be >= 1, got {w}")
    q = _members(w, n)
    if not q:
        raise RbaError(f"committee {w} is empty for n={n}")
    return q


def base_fault_bound(s: int) -> int:
    return (s - 1) // 2


def base_rounds(s: int) -> int:
    # one round for the senders' initial multicast plus f + 2 relay rounds
    return base_fault_bound(s) + 3


@lru_cache(maxsize=None)
def rba_rounds(s: int, M: int, G: int) -> int:
    if s <= M:
        return base_rounds(s)
    return G + rba_rounds((s + 1) // 2, M, G) + 1 + G + rba_rounds(s // 2, M, G) + 1


def round_schedule(n: int, M: int, G: int) -> dict[int, int]:
    """Total rounds for every committee size that occurs in a run on ``n`` parties."""
    if M < 1 or G not in (4, 5):
        raise RbaError("need M >= 1 and G in {4, 5}")
    sizes, todo = {}, [n]
    while todo:
        s = todo.pop()
        if s in sizes or s < 1:
            continue
        sizes[s] = rba_rounds(s, M, G)
        if s > M:
            todo += [(s + 1) // 2, s // 2]
    return dict(sorted(sizes.items()))


def majority_value(reports: dict, half) -> str | None:
    """Value reported by more than half of ``half``; reports from outsiders are ignored."""
    members = set(half)
    counts = Counter(v for p, v in reports.items() if p in members)
    for value, c in sorted(counts.items()):
        if 2 * c > len(members):
            return value
    return None


def plurality(values) -> str | None:
    counts = Counter(v for v in values if v is not None)
    if not counts:
        return None
    top = max(counts.values())
    return min(v for v, c in counts.items() if c == top)


# -- base case ---------------------------------------------------------------

class BaseBaParty:
    """Agreement among at most ``M`` parties.

    Every member broadcasts its input with Dolev-Strong (signature chains).  A
    value received at the end of round ``k`` is accepted if its chain starts
    with the designated sender and carries ``k`` distinct committee
    signatures; each newly accepted value (at most two per sender) is relayed
    with one more signature.  The decision is the plurality of the broadcast
    outputs, ties broken by the smallest value.
    """

    def __init__(self, committee, me: int, value, keystore: Keystore, instance: str = "base"):
        committee = tuple(committee)
        if me not in committee:
            raise RbaError(f"party {me} is not in the committee")
        self.committee = committee
        self.members = frozenset(committee)
        self.me = me
        self.input = value
        self.ks = keystore
        self.instance = instance
        self.rounds = base_rounds(len(committee))
        self.labels = {f"{instance}/ds{j}": j for j in range(len(committee))}
        self.accepted: list[list] = [[] for _ in committee]
        self.pending: list[Message] = []
        self.dropped = 0
        self._done = 0

    def _label(self, j: int) -> str:
        return f"{self.instance}/ds{j}"

    def send(self, rnd: int) -> list[Outgoing]:
        if rnd != self._done + 1:
            raise ScheduleError(f"base BA expected round {self._done + 1}, got {rnd}")
        if rnd == 1:
            j = self.committee.index(self.me)
            label = self._label(j)
            self.accepted[j].append(self.input)
            sig = self.ks.sign(self.me, statement(label, DS, self.input))
            return [Outgoing(self.committee, Message(label, DS, self.input, (sig,)))]
        out = [Outgoing(self.committee, m) for m in self.pending]
        self.pending = []
        return out

    def _valid_chain(self, m: Message, j: int, rnd: int) -> bool:
        chain = m.body
        if not isinstance(chain, tuple) or len(chain) < rnd:
            return False
        payload = statement(m.instance, DS, m.value)
        signers = []
        for s in chain:
            if not isinstance(s, SignedMessage) or s.signer not in self.members:
                return False
            if s.payload != payload or not self.ks.verify(s):
                return False
            signers.append(s.signer)
        return signers[0] == self.committee[j] and len(set(signers)) == len(signers)

    def receive(self, rnd: int, inbox) -> None:
        if rnd != self._done + 1:
            raise ScheduleError(f"base BA expected round {self._done + 1}, got {rnd}")
        self._done = rnd
        for d in inbox:
            m = d.message
            j = self.labels.get(m.instance)
            if j is None or m.kind != DS:
                continue
            if not self._valid_chain(m, j, rnd):
                self.dropped += 1
                continue
            got = self.accepted[j]
            if m.value in got or len(got) >= 2:
                continue
            got.append(m.value)
            if rnd < self.rounds and all(s.signer != self.me for s in m.body):
                sig = self.ks.sign(self.me, statement(m.instance, DS, m.value))
                self.pending.append(Message(m.instance, DS, m.value, m.body + (sig,)))

    @property
    def finished(self) -> bool:
        return self._done == self.rounds

    def broadcast_outputs(self) -> list:
        return [a[0] if len(a) == 1 else None for a in self.accepted]

    def output(self):
        if not self.finished:
            raise RbaError("base agreement not finished")
        decided = plurality(self.broadcast_outputs())
        return self.input if decided is None else decided

    def gba_outputs(self) -> dict:
        return {}


def base_ba(committee, me, value, keystore, instance="base") -> BaseBaParty:
    return BaseBaParty(committee, me, value, keystore, instance)


# -- recursion ---------------------------------------------------------------

PHASES = ("GBA-A", "REC-A", "ADOPT-A", "GBA-B", "REC-B", "ADOPT-B")


class RbaParty:
    """One party's view of the recursive protocol on committee ``w``.

    ``setup`` supplies everything shared across parties: ``n``, ``M``, the GBA
    variant and a factory for GBA instances (see :class:`quadba.protocols.RbaProtocol`).
    """

    def __init__(self, setup, w: int, me: int, value):
        self.setup = setup
        self.w = w
        self.committee = committee_members(w, setup.n)
        if me not in self.committee:
            raise RbaError(f"party {me} is not in committee {w}")
        self.me = me
        self.v = value
        self.g = 0
        s = len(self.committee)
        G = setup.gba_rounds
        if s <= setup.M:
            self.segments = [("BASE", base_rounds(s))]
        else:
            first, second = (s + 1) // 2, s // 2
            self.segments = [("GBA-A", G), ("REC-A", rba_rounds(first, setup.M, G)), ("ADOPT-A", 1),
                             ("GBA-B", G), ("REC-B", rba_rounds(second, setup.M, G)), ("ADOPT-B", 1)]
        self.rounds = sum(length for _, length in self.segments)
        assert self.rounds == rba_rounds(s, setup.M, G)
        self.child = None
        self.rec_output = None
        self.log: dict = {}
        self.phase = self.segments[0][0]
        self._expect = (1, "send")

    def _locate(self, rnd: int):
        start = 0
        for name, length in self.segments:
            if rnd <= start + length:
                return name, rnd - start, length
            start += length
        raise ScheduleError(f"round {rnd} beyond schedule of {self.rounds}")

    def _check(self, rnd: int, stage: str):
        if (rnd, stage) != self._expect:
            raise ScheduleError(f"committee {self.w}: expected {self._expect}, got {(rnd, stage)}")
        self._expect = (rnd, "receive") if stage == "send" else (rnd + 1, "send")

    def _half(self, phase: str) -> tuple:
        return committee_members(2 * self.w + (phase.endswith("B")), self.setup.n)

    def _label(self, phase: str) -> str:
        tag = {"GBA-A": "gA", "GBA-B": "gB", "ADOPT-A": "rA", "ADOPT-B": "rB", "BASE": "base"}
        return f"w{self.w}/{tag[phase]}"

    def send(self, rnd: int) -> list[Outgoing]:
        self._check(rnd, "send")
        phase, local, _ = self._locate(rnd)
        self.phase = phase
        if local == 1:
            self._start(phase)
        if phase.startswith("ADOPT"):
            if self.me in self._half(phase):
                return [Outgoing(self.committee, Message(self._label(phase), REPORT, self.rec_output))]
            return []
        if self.child is None:
            return []
        return self.child.send(local)

    def _start(self, phase: str):
        if phase == "BASE":
            self.child = BaseBaParty(self.committee, self.me, self.v, self.setup.keystore, self._label(phase))
        elif phase.startswith("GBA"):
            self.child = self.setup.gba_party(self.w, self.me, self.v, self._label(phase))
        elif phase.startswith("REC"):
            half_w = 2 * self.w + (phase == "REC-B")
            if self.me in committee_members(half_w, self.setup.n):
                self.child = RbaParty(self.setup, half_w, self.me, self.v)
            else:
                self.child = None
            self.rec_output = None
        else:
            self.child = None

    def receive(self, rnd: int, inbox) -> None:
        self._check(rnd, "receive")
        phase, local, length = self._locate(rnd)
        if phase.startswith("ADOPT"):
            self._adopt(phase, inbox)
        elif self.child is not None:
            self.child.receive(local, inbox)
        if local < length:
            return
        # last round of the segment
        if phase == "BASE":
            self.v = self.child.output()
        elif phase.startswith("GBA"):
            out: GradedOutput = self.child.output()
            self.v, self.g = out.value, out.grade
            self.log[self.child.instance] = (out.value, out.grade)
        elif phase.startswith("REC") and self.child is not None:
            self.rec_output = self.child.output()
            self.log.update(self.child.log)
        self.child = None
        if rnd == self.rounds:
            self.phase = "DONE"

    def _adopt(self, phase: str, inbox):
        label = self._label(phase)
        half = self._half(phase)
        members = set(half)
        reports = {}
        for d in inbox:
            m = d.message
            if m.instance == label and m.kind == REPORT and d.sender in members:
                reports.setdefault(d.sender, m.value)
        self.reports = reports
        value = majority_value(reports, half)
        if value is not None and self.g == 0:
            self.v = value

    @property
    def finished(self) -> bool:
        return self.phase == "DONE"

    def output(self):
        if not self.finished:
            raise RbaError("recursive agreement not finished")
        return self.v

    def gba_outputs(self) -> dict:
        return dict(self.log)
