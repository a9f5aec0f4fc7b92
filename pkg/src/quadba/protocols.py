"""Shared setup for each runnable protocol.

A protocol object carries what all parties agree on before round 1: the round
count, the keystore (with threshold groups when the TS variant is used), the
expander graphs for the EXP variant, and a map of every sub-protocol instance
with its committee and quorum.  ``party(me, value)`` builds one party's state
machine.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from . import expander
from .crypto import Group, Keystore
from .gba import EXP, ROUNDS, TS, GbaParty
from .rba import (BaseBaParty, RbaParty, base_fault_bound, base_rounds, committee_members,
                  rba_rounds)

PROTOCOLS = ("RBA-TS", "RBA-EXP", "GBA-TS", "GBA-EXP", "BASE-BA")
DEFAULT_M = 4


class BoundError(ValueError):
    pass


@dataclass(frozen=True)
class InstanceInfo:
    label: str
    kind: str          # "gba", "report" or "base"
    committee: tuple
    quorum: int
    f: int
    variant: str = ""


def exp_fault_bound(s: int, epsilon) -> int:
    return math.floor((Fraction(1, 2) - expander.as_fraction(epsilon)) * s)


def ts_fault_bound(s: int) -> int:
    return (s - 1) // 2


def fault_bound(variant: str, s: int, epsilon=None) -> int:
    return exp_fault_bound(s, epsilon) if variant == EXP else ts_fault_bound(s)


def check_bound(variant: str, n: int, f: int, epsilon=None) -> bool:
    if f < 0:
        return False
    return f <= fault_bound(variant, n, epsilon)


def _graph_seed(seed: int, size: int) -> int:
    return (int(seed) * 1_000_003 + size) % (1 << 63)


class _GraphCache:
    def __init__(self, epsilon, seed):
        self.epsilon = expander.as_fraction(epsilon)
        self.seed = seed
        self.graphs: dict[int, expander.ExpanderGraph] = {}

    def __call__(self, size: int):
        if size not in self.graphs:
            self.graphs[size] = expander.build(size, self.epsilon, _graph_seed(self.seed, size), closed=True)
        return self.graphs[size]

    def degree(self) -> int:
        return expander.min_degree(self.epsilon)


class RbaProtocol:
    """Recursive agreement instantiated with the TS or EXP graded agreement."""

    def __init__(self, n: int, f: int, variant: str = TS, M: int = DEFAULT_M, epsilon=None,
                 seed: int = 0, allow_over_bound: bool = False):
        if variant not in ROUNDS:
            raise ValueError(f"unknown variant {variant!r}")
        if variant == EXP and epsilon is None:
            raise ValueError("EXP variant needs epsilon")
        if not allow_over_bound and not check_bound(variant, n, f, epsilon):
            raise BoundError(f"f={f} exceeds the {variant} bound for n={n}")
        if M < 1:
            raise ValueError("M must be >= 1")
        self.name = f"RBA-{variant}"
        self.n, self.f, self.variant, self.M = n, f, variant, M
        self.epsilon = None if epsilon is None else expander.as_fraction(epsilon)
        self.seed = seed
        self.gba_rounds = ROUNDS[variant]
        self.rounds = rba_rounds(n, M, self.gba_rounds)
        self.instances: dict[str, InstanceInfo] = {}
        groups = {}
        stack = [1]
        while stack:
            w = stack.pop()
            q = committee_members(w, n)
            if len(q) <= M:
                self.instances[f"w{w}/base"] = InstanceInfo(
                    f"w{w}/base", "base", q, len(q) - base_fault_bound(len(q)), base_fault_bound(len(q)))
                continue
            fw = self.committee_f(w)
            for tag in ("gA", "gB"):
                self.instances[f"w{w}/{tag}"] = InstanceInfo(f"w{w}/{tag}", "gba", q, len(q) - fw, fw, variant)
            for tag, half in (("rA", 2 * w), ("rB", 2 * w + 1)):
                h = committee_members(half, n)
                self.instances[f"w{w}/{tag}"] = InstanceInfo(f"w{w}/{tag}", "report", h, len(h) // 2 + 1, 0)
            if variant == TS:
                groups[f"Q{w}"] = Group(frozenset(q), len(q) - fw)
            stack += [2 * w + 1, 2 * w]
        self.keystore = Keystore(n, seed, groups)
        self.graphs = _GraphCache(self.epsilon, seed) if variant == EXP else None

    def committee_f(self, w: int) -> int:
        if w == 1:
            return self.f
        return fault_bound(self.variant, len(committee_members(w, self.n)), self.epsilon)

    def cert_degree(self) -> int | None:
        return self.graphs.degree() if self.graphs else None

    def gba_party(self, w: int, me: int, value, instance: str) -> GbaParty:
        q = committee_members(w, self.n)
        graph = self.graphs(len(q)) if self.variant == EXP else None
        group = f"Q{w}" if self.variant == TS else None
        return GbaParty(self.variant, q, self.committee_f(w), me, value, self.keystore,
                        instance, group=group, graph=graph)

    def party(self, me: int, value) -> RbaParty:
        return RbaParty(self, 1, me, value)


class GbaProtocol:
    """A single graded agreement on all ``n`` parties."""

    def __init__(self, n: int, f: int, variant: str = TS, epsilon=None, seed: int = 0,
                 allow_over_bound: bool = False):
        if variant == EXP and epsilon is None:
            raise ValueError("EXP variant needs epsilon")
        if not allow_over_bound and not check_bound(variant, n, f, epsilon):
            raise BoundError(f"f={f} exceeds the {variant} bound for n={n}")
        self.name = f"GBA-{variant}"
        self.n, self.f, self.variant = n, f, variant
        self.epsilon = None if epsilon is None else expander.as_fraction(epsilon)
        self.seed = seed
        self.rounds = ROUNDS[variant]
        q = tuple(range(n))
        self.instances = {"gba": InstanceInfo("gba", "gba", q, n - f, f, variant)}
        groups = {"Q1": Group(frozenset(q), n - f)} if variant == TS else {}
        self.keystore = Keystore(n, seed, groups)
        self.graphs = _GraphCache(self.epsilon, seed) if variant == EXP else None

    def cert_degree(self) -> int | None:
        return self.graphs.degree() if self.graphs else None

    def party(self, me: int, value) -> GbaParty:
        graph = self.graphs(self.n) if self.graphs else None
        return GbaParty(self.variant, range(self.n), self.f, me, value, self.keystore, "gba",
                        group="Q1" if self.variant == TS else None, graph=graph)


class BaseBaProtocol:
    """Dolev-Strong based agreement on all ``n`` parties."""

    def __init__(self, n: int, f: int, seed: int = 0, allow_over_bound: bool = False):
        if not allow_over_bound and not 0 <= f <= base_fault_bound(n):
            raise BoundError(f"f={f} exceeds f < n/2 for n={n}")
        self.name = "BASE-BA"
        self.n, self.f, self.variant = n, f, ""
        self.seed = seed
        self.rounds = base_rounds(n)
        q = tuple(range(n))
        self.instances = {"base": InstanceInfo("base", "base", q, n - base_fault_bound(n), base_fault_bound(n))}
        self.keystore = Keystore(n, seed)
        self.graphs = None

    def cert_degree(self):
        return None

    def party(self, me: int, value) -> BaseBaParty:
        return BaseBaParty(range(self.n), me, value, self.keystore, "base")


def make_protocol(name: str, n: int, f: int, epsilon=None, M: int = DEFAULT_M, seed: int = 0,
                  allow_over_bound: bool = False):
    if name == "RBA-TS":
        return RbaProtocol(n, f, TS, M, None, seed, allow_over_bound)
    if name == "RBA-EXP":
        return RbaProtocol(n, f, EXP, M, epsilon, seed, allow_over_bound)
    if name == "GBA-TS":
        return GbaProtocol(n, f, TS, None, seed, allow_over_bound)
    if name == "GBA-EXP":
        return GbaProtocol(n, f, EXP, epsilon, seed, allow_over_bound)
    if name == "BASE-BA":
        return BaseBaProtocol(n, f, seed, allow_over_bound)
    raise ValueError(f"unknown protocol {name!r}")


def rba_init(me: int, n: int, f: int, value, variant: str = TS, M: int = DEFAULT_M,
             epsilon=None, seed: int = 0) -> RbaParty:
    return RbaProtocol(n, f, variant, M, epsilon, seed).party(me, value)
