"""Ideal signatures and threshold signatures.

Signatures are simulated: a tag is an HMAC of the payload under a secret that
only the keystore holds, so a tag can only come out of :meth:`Keystore.sign`.
Threshold signatures are issued by :meth:`Keystore.aggregate` once it has seen
enough valid shares, and carry a group tag of the same size as a single
signature.

Communication is measured in signature units (one unit = one signature or one
input value).  Control metadata (round numbers, instance labels) costs nothing.
"""
from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass, field
from typing import Iterable

TAG_BYTES = 16


class CryptoError(Exception):
    pass


class UnknownSigner(CryptoError):
    pass


class InsufficientShares(CryptoError):
    pass


class PayloadMismatch(CryptoError):
    pass


@dataclass(frozen=True)
class SignedMessage:
    payload: bytes
    signer: int
    tag: bytes = field(repr=False)


@dataclass(frozen=True)
class ThresholdSignature:
    payload: bytes
    threshold: int
    group: str
    tag: bytes = field(repr=False)


@dataclass(frozen=True)
class Group:
    members: frozenset
    threshold: int


def _derive(seed: int, *parts) -> bytes:
    text = "|".join(str(p) for p in (seed, *parts))
    return hashlib.sha256(text.encode()).digest()


class Keystore:
    """Trusted-dealer output: per-party signing keys and per-committee groups.

    The keystore is built once before round 1 and is read-only afterwards.
    Groups exist only when threshold signatures are configured.
    """

    def __init__(self, n: int, seed: int = 0, groups: dict[str, Group] | None = None):
        self.n = n
        self.seed = seed
        self._secrets = [_derive(seed, "party", i) for i in range(n)]
        self.groups = dict(groups or {})
        self._group_secrets = {g: _derive(seed, "group", g) for g in self.groups}
        self._checked: dict = {}
        self._cert_memo: dict = {}

    def has_groups(self) -> bool:
        return bool(self.groups)

    def _tag(self, secret: bytes, payload: bytes) -> bytes:
        return hmac.new(secret, payload, hashlib.sha256).digest()[:TAG_BYTES]

    def sign(self, signer: int, payload: bytes) -> SignedMessage:
        if not 0 <= signer < self.n:
            raise UnknownSigner(f"no key for party {signer}")
        return SignedMessage(payload, signer, self._tag(self._secrets[signer], payload))

    def verify(self, m) -> bool:
        if not isinstance(m, SignedMessage):
            return False
        if not isinstance(m.signer, int) or not 0 <= m.signer < self.n:
            return False
        key = (m.signer, m.payload, m.tag)
        ok = self._checked.get(key)
        if ok is None:
            # memo only; the answer is a pure function of the key
            expected = self._tag(self._secrets[m.signer], m.payload)
            ok = self._checked[key] = hmac.compare_digest(expected, m.tag)
        return ok

    def aggregate(self, shares: Iterable[SignedMessage], t: int, group: str) -> ThresholdSignature:
        """Combine ``t`` or more shares on one payload into a threshold signature."""
        if group not in self.groups:
            raise CryptoError(f"unknown group {group!r}")
        members = self.groups[group].members
        shares = list(shares)
        if any(not self.verify(s) for s in shares):
            raise CryptoError("share does not verify")
        payloads = {s.payload for s in shares}
        if len(payloads) > 1:
            raise PayloadMismatch("shares sign different payloads")
        signers = {s.signer for s in shares if s.signer in members}
        if len(signers) < t:
            raise InsufficientShares(f"{len(signers)} distinct signers, need {t}")
        payload = payloads.pop()
        tag = self._tag(self._group_secrets[group], _group_payload(payload, t))
        return ThresholdSignature(payload, t, group, tag)

    def verify_aggregate(self, ts, payload: bytes, group: str | None = None) -> bool:
        if not isinstance(ts, ThresholdSignature) or ts.group not in self.groups:
            return False
        if group is not None and ts.group != group:
            return False
        if ts.payload != payload:
            return False
        key = (ts.group, payload, ts.threshold, ts.tag)
        ok = self._checked.get(key)
        if ok is None:
            expected = self._tag(self._group_secrets[ts.group], _group_payload(payload, ts.threshold))
            ok = self._checked[key] = hmac.compare_digest(expected, ts.tag)
        return ok


def _group_payload(payload: bytes, t: int) -> bytes:
    return b"%d|" % t + payload


# Functional aliases.

def sign(signer: int, payload: bytes, ks: Keystore) -> SignedMessage:
    return ks.sign(signer, payload)


def verify(m, ks: Keystore) -> bool:
    return ks.verify(m)


def aggregate(shares, t: int, ks: Keystore, group: str) -> ThresholdSignature:
    return ks.aggregate(shares, t, group)


def verify_aggregate(ts, payload: bytes, ks: Keystore, group: str | None = None) -> bool:
    return ks.verify_aggregate(ts, payload, group)


def kappa_size(m) -> int:
    """Size of ``m`` in signature units.

    A signature, a threshold signature and a bare value each cost 1.  Objects
    carrying several signatures cost one unit per signature.  Anything that
    defines ``kappa`` reports its own size.
    """
    if isinstance(m, (SignedMessage, ThresholdSignature)):
        return 1
    k = getattr(m, "kappa", None)
    if k is not None:
        return max(1, int(k))
    if isinstance(m, (tuple, list, frozenset, set)):
        return max(1, sum(kappa_size(x) for x in m))
    return 1
