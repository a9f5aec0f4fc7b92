"""Run configurations, suites and the communication-scaling analysis."""
from __future__ import annotations

import csv
import io
import itertools
import json
import os
import string
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import yaml

from . import expander
from .adversaries import STRATEGIES, adversary
from .protocols import PROTOCOLS, check_bound, fault_bound, make_protocol
from .rba import base_fault_bound, committee_members
from .simnet import (check_agreement, check_certificates, comm_cost, cert_kappas,
                     max_cert_recipients, run)

CONFIG_VERSION = 1
JOBS_ENV = "QUADBA_JOBS"
RATIO_LIMIT = 4.5
GROWTH_LIMIT = 1.5


class ConfigError(ValueError):
    pass


class InsufficientData(ValueError):
    pass


def value_domain(size: int) -> tuple:
    if size < 1:
        raise ConfigError("value domain must be non-empty")
    letters = string.ascii_uppercase
    return tuple(letters[i] if i < len(letters) else f"v{i}" for i in range(size))


def variant_of(protocol: str) -> str:
    if protocol.endswith("EXP"):
        return "EXP"
    return "TS"


def max_faults(protocol: str, n: int, epsilon=None) -> int:
    if protocol == "BASE-BA":
        return base_fault_bound(n)
    return fault_bound(variant_of(protocol), n, epsilon)


@dataclass
class RunConfig:
    protocol: str
    n: int
    f: int
    epsilon: float | None = None
    M: int = 4
    seed: int = 0
    adversary: str = "passive"
    adversary_params: dict = field(default_factory=dict)
    domain: int = 2
    inputs: object = "unanimous"
    over_bound: bool = False
    retract: bool = False

    def in_bound(self) -> bool:
        if self.protocol == "BASE-BA":
            return 0 <= self.f <= base_fault_bound(self.n)
        return check_bound(variant_of(self.protocol), self.n, self.f, self.epsilon)

    def validate(self) -> "RunConfig":
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"unknown protocol {self.protocol!r}")
        if self.adversary not in STRATEGIES:
            raise ConfigError(f"unknown adversary {self.adversary!r}")
        if self.n < 1 or not 0 <= self.f < max(self.n, 1):
            raise ConfigError(f"need n >= 1 and 0 <= f < n, got n={self.n}, f={self.f}")
        if variant_of(self.protocol) == "EXP":
            if self.epsilon is None or not 0 < float(self.epsilon) < 0.5:
                raise ConfigError("EXP protocols need 0 < epsilon < 1/2")
        if self.M < 1:
            raise ConfigError("M must be >= 1")
        if not self.over_bound and not self.in_bound():
            raise ConfigError(f"f={self.f} exceeds the fault bound of {self.protocol} at n={self.n}")
        self.input_values()
        return self

    def values(self) -> tuple:
        return value_domain(self.domain)

    def input_values(self) -> list:
        vals = self.values()
        assign = self.inputs
        if isinstance(assign, (list, tuple)):
            if len(assign) != self.n:
                raise ConfigError("per-party inputs need exactly n entries")
            return [str(v) for v in assign]
        if assign == "unanimous":
            return [vals[0]] * self.n
        if isinstance(assign, str) and assign.startswith("unanimous:"):
            return [assign.split(":", 1)[1]] * self.n
        if assign == "split":
            if len(vals) < 2:
                raise ConfigError("split inputs need at least two values")
            k = (self.n + 1) // 2
            return [vals[0]] * k + [vals[1]] * (self.n - k)
        if assign == "random":
            rng = expander.make_rng((self.seed, 0x1A))
            return [vals[int(i)] for i in rng.integers(0, len(vals), size=self.n)]
        raise ConfigError(f"bad input assignment {assign!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        if isinstance(d["inputs"], tuple):
            d["inputs"] = list(d["inputs"])
        return d


@dataclass
class RunRecord:
    config: dict
    in_bound: bool
    decisions: dict
    grades: dict
    consistency: bool
    termination: bool
    validity: bool | None
    graded_violations: int
    c1_conflicts: int
    echo_conflicts: int
    kappa: int
    rounds: int
    corruptions: list
    degree: int | None
    max_cert_recipients: int
    cert_kappas: list
    structural_ok: bool
    half_faults: dict = field(default_factory=dict)
    over_bound_instances: int = 0
    runtime: float = 0.0

    @property
    def violation(self) -> bool:
        # a graded agreement may leave honest values split as long as every grade is 0
        graded_only = self.config["protocol"].startswith("GBA")
        bad = ((not self.consistency and not graded_only) or not self.termination
               or self.validity is False or self.c1_conflicts or self.graded_violations
               or not self.structural_ok)
        return bool(self.in_bound and bad)

    def to_dict(self, timing: bool = False) -> dict:
        d = asdict(self)
        d["violation"] = self.violation
        if not timing:
            d.pop("runtime")
        return d

    def to_json(self, timing: bool = False) -> str:
        return json.dumps(self.to_dict(timing), sort_keys=True, separators=(",", ":"))


def execute(cfg: RunConfig):
    """Run one configuration; returns ``(record, transcript)``."""
    cfg.validate()
    start = time.perf_counter()
    proto = make_protocol(cfg.protocol, cfg.n, cfg.f, epsilon=cfg.epsilon, M=cfg.M,
                          seed=cfg.seed, allow_over_bound=cfg.over_bound)
    adv = adversary(cfg.adversary, cfg.adversary_params)
    t = run(proto, cfg.input_values(), cfg.f, adv, seed=cfg.seed, values=cfg.values(),
            retract_on_corrupt=cfg.retract)
    agreement = check_agreement(t)
    certs = check_certificates(t)
    degree = proto.cert_degree()
    kappas = sorted(cert_kappas(t))
    widest = max_cert_recipients(t)
    if variant_of(cfg.protocol) == "EXP" and cfg.protocol != "BASE-BA":
        structural = widest <= degree
    elif cfg.protocol in ("RBA-TS", "GBA-TS"):
        structural = all(k == 1 for k in kappas)
    else:
        structural = True
    rec = RunRecord(
        config=cfg.to_dict(), in_bound=cfg.in_bound(),
        decisions={str(p): v for p, v in sorted(t.outputs.items())},
        grades={str(p): g for p, g in sorted(t.grades.items())},
        consistency=agreement.consistency, termination=agreement.termination,
        validity=agreement.validity, graded_violations=len(certs.graded_violations),
        c1_conflicts=len(certs.conflicting_vote1), echo_conflicts=len(certs.conflicting_echo),
        kappa=comm_cost(t), rounds=t.rounds, corruptions=[list(c) for c in t.corruptions],
        degree=degree, max_cert_recipients=widest, cert_kappas=kappas, structural_ok=structural,
        half_faults=_half_faults(cfg.n, t.corrupted()),
        over_bound_instances=len(certs.over_bound), runtime=time.perf_counter() - start)
    return rec, t


def _half_faults(n: int, bad) -> dict:
    """Corrupted members of each top-level half (committees 2 and 3)."""
    if n < 2:
        return {}
    return {f"Q{w}": len(set(committee_members(w, n)) & set(bad)) for w in (2, 3)}


def run_config(cfg: RunConfig) -> RunRecord:
    return execute(cfg)[0]


def jobs_from_env() -> int:
    try:
        return max(1, int(os.environ.get(JOBS_ENV, "1")))
    except ValueError:
        return 1


def run_suite(configs, jobs: int | None = None) -> list[RunRecord]:
    """One record per config, in config order."""
    configs = [c.validate() for c in configs]
    jobs = jobs or jobs_from_env()
    if jobs == 1 or len(configs) < 2:
        return [run_config(c) for c in configs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run_config, configs, chunksize=max(1, len(configs) // (4 * jobs))))


def suite_passed(records) -> bool:
    return not any(r.violation for r in records)


# -- sweep files -------------------------------------------------------------

def _seeds(value) -> list:
    if isinstance(value, dict) and "range" in value:
        lo, hi = value["range"]
        return list(range(lo, hi))
    if isinstance(value, int):
        return [value]
    return list(value)


def expand_grid(doc: dict) -> list[RunConfig]:
    """Configs from a sweep document (YAML/JSON, ``version: 1``)."""
    if doc.get("version") != CONFIG_VERSION:
        raise ConfigError(f"unsupported sweep version {doc.get('version')!r}")
    defaults = dict(doc.get("defaults", {}))
    configs = []
    for run_doc in doc.get("runs", []):
        configs.append(_make_config({**defaults, **run_doc}))
    grid = dict(doc.get("grid", {}))
    if grid:
        if "seed" in grid:
            grid["seed"] = _seeds(grid["seed"])
        keys = sorted(grid)
        axes = [grid[k] if isinstance(grid[k], list) else [grid[k]] for k in keys]
        for combo in itertools.product(*axes):
            configs.append(_make_config({**defaults, **dict(zip(keys, combo))}))
    return configs


def _make_config(d: dict) -> RunConfig:
    d = dict(d)
    f = d.get("f", "max")
    if f == "max":
        d["f"] = max_faults(d["protocol"], d["n"], d.get("epsilon"))
    known = RunConfig.__dataclass_fields__
    extra = set(d) - set(known)
    if extra:
        raise ConfigError(f"unknown config keys {sorted(extra)}")
    return RunConfig(**d)


def load_sweep(path: str) -> list[RunConfig]:
    with open(path) as fh:
        return expand_grid(yaml.safe_load(fh))


def write_records(records, path: str, timing: bool = False) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(r.to_json(timing) + "\n")


def read_records(path: str) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


CSV_FIELDS = ("protocol", "n", "f", "adversary", "seed", "inputs", "in_bound", "consistency",
              "termination", "validity", "c1_conflicts", "graded_violations", "kappa", "rounds",
              "structural_ok", "violation")


def summary_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in records:
        d = r.to_dict() if isinstance(r, RunRecord) else r
        c = d["config"]
        w.writerow([c["protocol"], c["n"], c["f"], c["adversary"], c["seed"],
                    c["inputs"] if isinstance(c["inputs"], str) else "list",
                    d["in_bound"], d["consistency"], d["termination"], d["validity"],
                    d["c1_conflicts"], d["graded_violations"], d["kappa"], d["rounds"],
                    d["structural_ok"], d["violation"]])
    return buf.getvalue()


# -- scaling -----------------------------------------------------------------

def scaling_report(records, ratio_limit: float = RATIO_LIMIT, growth_limit: float = GROWTH_LIMIT) -> dict:
    """Per (protocol, adversary): C(n), C(n)/n^2, doubling ratios and a verdict.

    C(n) is the mean honest cost over the records at that n.  The verdict is
    ``quadratic-consistent`` iff every ratio C(2n)/C(n) is at most
    ``ratio_limit`` and C(n)/n^2 never exceeds ``growth_limit`` times its value at
    the smallest n.
    """
    groups: dict = {}
    for r in records:
        d = r.to_dict() if isinstance(r, RunRecord) else r
        key = (d["config"]["protocol"], d["config"]["adversary"])
        groups.setdefault(key, {}).setdefault(d["config"]["n"], []).append(d["kappa"])
    if not groups:
        raise InsufficientData("no records")
    out = {}
    for (proto, adv), by_n in sorted(groups.items()):
        ns = sorted(by_n)
        cost = {n: sum(v) / len(v) for n, v in by_n.items()}
        pairs = [(n, 2 * n) for n in ns if 2 * n in cost]
        if len(pairs) < 3:
            raise InsufficientData(f"{proto}/{adv}: need at least 3 doublings of n, got {len(pairs)}")
        norm = {n: cost[n] / n**2 for n in ns}
        ratios = {f"{a}->{b}": cost[b] / cost[a] for a, b in pairs}
        base = norm[ns[0]]
        growth = max(norm.values()) / base
        ok = all(x <= ratio_limit for x in ratios.values()) and growth <= growth_limit
        out[f"{proto}/{adv}"] = {
            "protocol": proto, "adversary": adv,
            "cost": {str(n): cost[n] for n in ns},
            "cost_per_n2": {str(n): norm[n] for n in ns},
            "doubling_ratios": ratios,
            "max_ratio": max(ratios.values()),
            "growth": growth,
            "fitted_c": max(norm.values()),
            "verdict": "quadratic-consistent" if ok else "not-quadratic-consistent",
        }
    return out


def fitted_constant(records) -> float:
    return max(d["kappa"] / d["config"]["n"] ** 2
               for d in (r.to_dict() if isinstance(r, RunRecord) else r for r in records))


__all__ = [
    "RunConfig", "RunRecord", "ConfigError", "InsufficientData", "execute", "run_config",
    "run_suite", "suite_passed", "expand_grid", "load_sweep", "write_records", "read_records",
    "summary_csv", "scaling_report", "max_faults", "value_domain",
]
