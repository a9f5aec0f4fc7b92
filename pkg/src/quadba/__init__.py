"""Quadratic-communication Byzantine agreement: protocols, simulator and test harness.

The package models the recursive agreement framework with two graded agreement
building blocks (threshold signatures and expander propagation), runs them in a
deterministic lock-step network against pluggable adversaries, and checks the
resulting transcripts.
"""
from .crypto import Keystore, aggregate, sign, verify, verify_aggregate
from .expander import build, min_degree, verify_expansion
from .gba import GbaParty, GradedOutput
from .harness import RunConfig, RunRecord, run_config, run_suite, scaling_report
from .protocols import PROTOCOLS, make_protocol
from .rba import BaseBaParty, RbaParty, committee_members
from .simnet import Transcript, check_agreement, check_certificates, comm_cost, run

__version__ = "0.1.0"

__all__ = [
    "Keystore", "sign", "verify", "aggregate", "verify_aggregate",
    "build", "min_degree", "verify_expansion",
    "GbaParty", "GradedOutput", "RbaParty", "BaseBaParty", "committee_members",
    "PROTOCOLS", "make_protocol", "run", "Transcript", "comm_cost",
    "check_agreement", "check_certificates",
    "RunConfig", "RunRecord", "run_config", "run_suite", "scaling_report",
]
