"""Protocol messages shared by every state machine.

Every message names the protocol instance it belongs to (``instance``), which
is routing metadata and costs nothing.  The signed part of a vote is the
statement ``instance|kind|value``, so a signature can never be replayed into a
different instance or round type.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import NamedTuple, Union

from .crypto import SignedMessage, ThresholdSignature, kappa_size

Value = str

ECHO = "echo"
VOTE1 = "vote1"
VOTE2 = "vote2"
VOTE3 = "vote3"
ECHO_CERT = "echo-cert"
VOTE1_CERT = "vote1-cert"
REPORT = "report"
DS = "ds"

VOTE_KINDS = (ECHO, VOTE1, VOTE2, VOTE3)
CERT_KINDS = (ECHO_CERT, VOTE1_CERT)
CERT_OF = {ECHO_CERT: ECHO, VOTE1_CERT: VOTE1}


def statement(instance: str, kind: str, value: Value) -> bytes:
    return f"{instance}|{kind}|{value}".encode()


@dataclass(frozen=True)
class Certificate:
    """Quorum evidence on one (instance, kind, value).

    ``evidence`` is either a tuple of individual signatures or a single
    threshold signature.
    """
    kind: str
    value: Value
    instance: str
    evidence: Union[tuple, ThresholdSignature]

    @property
    def aggregated(self) -> bool:
        return isinstance(self.evidence, ThresholdSignature)

    @property
    def kappa(self) -> int:
        if self.aggregated:
            return 1
        return len(self.evidence)

    def signers(self) -> frozenset:
        if self.aggregated:
            return frozenset()
        return frozenset(s.signer for s in self.evidence)


@dataclass(frozen=True)
class Message:
    instance: str
    kind: str
    value: Value
    body: object = None

    @property
    def kappa(self) -> int:
        if self.body is None:
            return 1
        return kappa_size(self.body)

    def digest(self) -> bytes:
        return hashlib.sha256(encode(self)).digest()

    def signatures(self):
        """Every individual signature carried by this message."""
        b = self.body
        if isinstance(b, SignedMessage):
            return (b,)
        if isinstance(b, Certificate):
            return () if b.aggregated else tuple(b.evidence)
        if isinstance(b, tuple):
            return tuple(s for s in b if isinstance(s, SignedMessage))
        return ()


def _enc_body(b) -> str:
    if b is None:
        return "-"
    if isinstance(b, SignedMessage):
        return f"s{b.signer}:{b.payload.hex()}:{b.tag.hex()}"
    if isinstance(b, ThresholdSignature):
        return f"t{b.group}:{b.threshold}:{b.payload.hex()}:{b.tag.hex()}"
    if isinstance(b, Certificate):
        return f"c[{b.kind}|{b.value}|{b.instance}|{_enc_body(b.evidence)}]"
    if isinstance(b, tuple):
        return "(" + ",".join(_enc_body(x) for x in b) + ")"
    return repr(b)


def encode(m: Message) -> bytes:
    return f"{m.instance}#{m.kind}#{m.value}#{_enc_body(m.body)}".encode()


class Outgoing(NamedTuple):
    recipients: tuple
    message: Message


class Delivery(NamedTuple):
    sender: int
    message: Message
