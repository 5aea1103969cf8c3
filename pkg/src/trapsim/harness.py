"""Scenario files, batch execution, JSON reports and milestone traces."""

from __future__ import annotations

import difflib
import hashlib
import json
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

import jsonschema

from .bftcr import RESOLVED
from .game_params import (FinancialParams, ProtocolParams, as_fraction, compute_t0,
                          corollary_deposit_coeff, feasible, params_report)
from .net_sim import PARTITION
from .strategies import (BAIT, CORRECT, V_A, V_B, SplitPlayer, compute_utilities, simulate)

DATA = resources.files("trapsim") / "data"


class ScenarioError(ValueError):
    pass


def threads_from_env(default: int = 1) -> int:
    raw = os.environ.get("TRAP_THREADS")
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ScenarioError(f"TRAP_THREADS must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise ScenarioError(f"TRAP_THREADS must be a positive integer, got {raw!r}")
    return value


def load_schema() -> dict:
    return json.loads((DATA / "scenario.schema.json").read_text())


@dataclass
class Scenario:
    name: str
    n: int
    k: int
    t: int
    policy: str
    seeds: tuple
    G: Fraction = Fraction(1)
    d: Fraction | None = None
    delta: Fraction | None = None
    baiters: int | None = None
    late_bait: int = 0
    roles: dict | None = None
    step_ceiling: int | None = None
    expect_infeasible: bool = False
    expect: dict = field(default_factory=dict)
    description: str = ""
    source: str = ""

    @property
    def seed_range(self) -> range:
        return range(self.seeds[0], self.seeds[1] + 1)

    def params(self) -> ProtocolParams:
        d = self.d
        if d is None:
            d = corollary_deposit_coeff(self.n) if compute_t0(self.n) >= 1 else Fraction(0)
        return ProtocolParams(self.n, self.k, self.t, self.G, d, self.delta)

    def canonical(self) -> dict:
        out = {
            "name": self.name, "n": self.n, "k": self.k, "t": self.t,
            "G": str(self.G), "d": None if self.d is None else str(self.d),
            "delta": None if self.delta is None else str(self.delta),
            "baiters": self.baiters, "late_bait": self.late_bait,
            "roles": None if self.roles is None else {str(p): r for p, r in sorted(self.roles.items())},
            "policy": self.policy, "seeds": list(self.seeds), "step_ceiling": self.step_ceiling,
            "expect_infeasible": self.expect_infeasible, "expect": self.expect,
        }
        return out

    def digest(self) -> str:
        raw = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.blake2b(raw.encode(), digest_size=16).hexdigest()


def _line_of(text: str, path) -> int | None:
    """Best-effort line number for a JSON path inside the source text."""
    keys = [p for p in path if isinstance(p, str)]
    if not keys:
        return 1 if text else None
    m = re.search(r'"%s"\s*:' % re.escape(keys[-1]), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{source}:{exc.lineno}: not valid JSON ({exc.msg})") from None
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        msgs = []
        for e in errors:
            where = "/".join(str(p) for p in e.absolute_path) or "<root>"
            line = _line_of(text, list(e.absolute_path))
            msgs.append(f"{source}:{line if line else '?'}: field {where}: {e.message}")
        raise ScenarioError("\n".join(msgs))
    if raw["seeds"][0] > raw["seeds"][1]:
        raise ScenarioError(f"{source}:{_line_of(text, ['seeds'])}: field seeds: empty interval")
    try:
        sc = Scenario(
            name=raw["name"], n=raw["n"], k=raw["k"], t=raw["t"], policy=raw["policy"],
            seeds=tuple(raw["seeds"]), G=as_fraction(raw.get("G", 1)),
            d=None if raw.get("d") is None else as_fraction(raw["d"]),
            delta=None if raw.get("delta") is None else as_fraction(raw["delta"]),
            baiters=raw.get("baiters"), late_bait=raw.get("late_bait", 0),
            roles=None if raw.get("roles") is None else {int(p): r for p, r in raw["roles"].items()},
            step_ceiling=raw.get("step_ceiling"),
            expect_infeasible=raw.get("expect_infeasible", False),
            expect=raw.get("expect", {}), description=raw.get("description", ""), source=source)
    except (ValueError, ZeroDivisionError) as exc:
        raise ScenarioError(f"{source}: {exc}") from None
    if sc.roles is not None and any(p >= sc.n for p in sc.roles):
        raise ScenarioError(f"{source}:{_line_of(text, ['roles'])}: field roles: player id out of range")
    is_feasible = feasible(sc.n, sc.k, sc.t)
    if not is_feasible and not sc.expect_infeasible:
        raise ScenarioError(f"{source}: (n, k, t) = ({sc.n}, {sc.k}, {sc.t}) is infeasible; "
                            "tag the scenario with expect_infeasible to run it anyway")
    if is_feasible and sc.expect_infeasible:
        raise ScenarioError(f"{source}: tagged expect_infeasible but (n, k, t) is feasible")
    return sc


def bundled_scenarios() -> list[str]:
    return sorted(p.name[:-5] for p in (DATA / "scenarios").iterdir() if p.name.endswith(".json"))


def load_scenario(ref: str | os.PathLike) -> Scenario:
    """A path to a scenario file, or the name of a bundled scenario."""
    path = Path(ref)
    if path.exists():
        return parse_scenario(path.read_text(), str(path))
    name = str(ref)
    if name in bundled_scenarios():
        res = DATA / "scenarios" / f"{name}.json"
        return parse_scenario(res.read_text(), f"{name}.json")
    raise ScenarioError(f"no scenario file or bundled scenario named {name!r}")


# -- running ----------------------------------------------------------------

def _run_seed(sc: Scenario, seed: int, trace_dir: Path | None) -> dict:
    params = sc.params()
    fin = FinancialParams.from_params(params)
    out = simulate(params, sc.policy, seed, baiter_count=sc.baiters, late_bait=sc.late_bait,
                   roles=sc.roles, step_ceiling=sc.step_ceiling, record=True)
    util = compute_utilities(out, fin, params)
    trace = out.trace
    if trace_dir is not None:
        (trace_dir / f"{sc.name}.seed{seed}.log").write_text("\n".join(trace.lines()) + "\n")
    return {
        "seed": seed,
        "roles": {str(p): out.roles.get(p, CORRECT) for p in range(sc.n)},
        "run_class": {str(p): c for p, c in sorted(out.run_class.items())},
        "decisions": {str(p): None if d is None else [d.kind, d.value.decode("latin-1")]
                      for p, d in sorted(out.decisions.items())},
        "winner": out.winner,
        "slashed": sorted(out.slashed),
        "resolved": out.resolved,
        "terminated": out.terminated,
        "disagreement": out.disagreement,
        "utilities": {str(p): str(u) for p, u in sorted(util.per_player.items())},
        "steps": out.steps,
        "messages": out.messages,
        "trace_digest": trace.digest(),
    }


def _check_expectations(sc: Scenario, runs: list[dict]) -> list[dict]:
    exp = sc.expect
    results = []
    if "classes" in exp:
        bad = []
        for r in runs:
            for p, c in r["run_class"].items():
                allowed = exp["classes"].get(r["roles"][p])
                if allowed is not None and c not in allowed:
                    bad.append(f"seed {r['seed']} player {p}: class {c}")
        results.append({"assertion": "classes", "passed": not bad, "detail": bad[:5]})
    if "class_seen" in exp:
        seen = {c for r in runs for c in r["run_class"].values()}
        missing = [c for c in exp["class_seen"] if c not in seen]
        results.append({"assertion": "class_seen", "passed": not missing, "detail": missing})
    if "winners" in exp:
        bad = [r["seed"] for r in runs
               if (r["winner"] is not None) != (exp["winners"] == 1) or not r["terminated"]]
        results.append({"assertion": "winners", "passed": not bad, "detail": bad[:5]})
    if "slashed" in exp:
        bad = [r["seed"] for r in runs if len(r["slashed"]) != exp["slashed"]]
        results.append({"assertion": "slashed", "passed": not bad, "detail": bad[:5]})
    if "agreement" in exp:
        bad = [r["seed"] for r in runs if r["disagreement"] == exp["agreement"]]
        results.append({"assertion": "agreement", "passed": not bad, "detail": bad[:5]})
    return results


def _aggregate(runs: list[dict]) -> dict:
    per_kind: dict = {}
    hist: dict = {}
    for r in runs:
        for p, u in r["utilities"].items():
            per_kind.setdefault(r["roles"][p], []).append(Fraction(u))
        for p, c in r["run_class"].items():
            h = hist.setdefault(r["roles"][p], {})
            h[str(c)] = h.get(str(c), 0) + 1
    stats = {}
    for kind, vals in sorted(per_kind.items()):
        mean = sum(vals, Fraction(0)) / len(vals)
        stats[kind] = {"mean": str(mean), "mean_float": float(mean),
                       "min": str(min(vals)), "max": str(max(vals)), "samples": len(vals)}
    return {"utility": stats, "class_histogram": {k: dict(sorted(v.items())) for k, v in sorted(hist.items())},
            "runs": len(runs),
            "disagreements": sum(r["disagreement"] for r in runs),
            "non_terminated": sum(not r["terminated"] for r in runs)}


def run_scenario(sc: Scenario, threads: int | None = None, trace_dir=None) -> dict:
    """Run every seed of the scenario. The report does not depend on ``threads``."""
    threads = threads_from_env() if threads is None else threads
    tdir = Path(trace_dir) if trace_dir is not None else None
    if tdir is not None:
        tdir.mkdir(parents=True, exist_ok=True)
    seeds = list(sc.seed_range)
    if threads > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            runs = list(pool.map(lambda s: _run_seed(sc, s, tdir), seeds))
    else:
        runs = [_run_seed(sc, s, tdir) for s in seeds]
    runs.sort(key=lambda r: r["seed"])
    assertions = _check_expectations(sc, runs)
    report = {
        "scenario": sc.name,
        "scenario_digest": sc.digest(),
        "params": params_report(sc.n, sc.k, sc.t, sc.G, sc.params().deposit_coeff),
        "policy": sc.policy,
        "seeds": list(sc.seeds),
        "runs": runs,
        "aggregate": _aggregate(runs),
        "assertions": assertions,
        "passed": all(a["passed"] for a in assertions),
    }
    report["report_digest"] = report_digest(report)
    return report


def report_digest(report: dict) -> str:
    body = {k: v for k, v in report.items() if k != "report_digest"}
    raw = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.blake2b(raw.encode(), digest_size=16).hexdigest()


def sweep(ns, ks, ts, ds, gain_total=1, threads: int | None = None) -> list[dict]:
    """params_report over the cartesian product of the given values."""
    combos = [(n, k, t, d) for n in ns for k in ks for t in ts for d in ds]
    threads = threads_from_env() if threads is None else threads

    def one(c):
        n, k, t, d = c
        return params_report(n, k, t, gain_total, d)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, combos))
    return [one(c) for c in combos]


# -- milestones and golden traces ---------------------------------------------

class MilestoneObserver:
    """Tags the first step at which each stage of the baited execution holds.

    Stages are checked in order and each fires once:
    M1 correct players hold conflicting predecisions,
    M2 every correct player has committed and none can decide,
    M3 every baiter has assembled its proofs of fraud,
    M4 every baiter has committed them,
    M5 every baiter has revealed and a correct player has resolved.
    """

    def __init__(self, setup):
        self.nodes = setup.nodes
        self.baiters = [pl for pl in setup.players if getattr(pl, "kind", None) == BAIT]
        self.hashers = [pl for pl in setup.players
                        if isinstance(pl, SplitPlayer) and pl.kind != BAIT]
        n = len(setup.players)
        self.q = n - compute_t0(n)
        self.stage = 0
        self.steps: list[int] = []

    def _check(self) -> str | None:
        nodes = self.nodes.values()
        s = self.stage
        if s == 0:
            vals = {nd.predecision.value for nd in nodes if nd.predecision is not None}
            if len(vals) > 1:
                return "split " + "/".join(sorted(v.decode("latin-1") for v in vals))
        elif s == 1:
            if all(nd.commitment is not None for nd in nodes) and \
                    all(nd.decision is None for nd in nodes):
                counts = []
                for w, v in enumerate((V_A, V_B)):
                    c = sum(1 for nd in nodes if nd.predecision.value == v)
                    c += sum(1 for pl in self.hashers
                             if pl.personas[w].commit_kind == "HASH")
                    counts.append(c)
                if max(counts) < self.q:
                    return f"blocked hashes={counts[0]}/{counts[1]} need={self.q}"
        elif s == 2:
            if self.baiters and all(b.pofs_ready for b in self.baiters):
                return "pofs=" + ",".join(str(b.pof_count) for b in self.baiters)
        elif s == 3:
            if self.baiters and all(b.committed for b in self.baiters):
                return "commit=POFS"
        elif s == 4:
            if all(b.revealed for b in self.baiters):
                for p in sorted(self.nodes):
                    d = self.nodes[p].decision
                    if d is not None and d.kind == RESOLVED:
                        return f"resolve={d.value.decode('latin-1')}/winner={d.winner}"
        return None

    def __call__(self, step: int, player: int, action: str) -> str:
        tags = []
        while self.stage < 5:
            tag = self._check()
            if tag is None:
                break
            self.stage += 1
            self.steps.append(step)
            tags.append(f"!M{self.stage} {tag}")
        return action + ";" + ";".join(tags) if tags else action


@dataclass(frozen=True)
class GoldenRun:
    n: int
    k: int
    t: int
    seed: int
    policy: str = PARTITION
    gain_total: int = 60


GOLDEN = {
    # ten players, two rational and two Byzantine colluders, one of them baiting
    "baiting_n10": GoldenRun(10, 2, 2, seed=0),
}


def golden_path(name: str):
    return DATA / "golden" / f"{name}.log"


def replay_golden(name: str, isolation_cap: int | None = None):
    """Replay a golden scenario. Returns (milestone lines, outcome, observer)."""
    golden = GOLDEN.get(name)
    if golden is None:
        raise ScenarioError(f"unknown golden trace {name!r}; known: {', '.join(sorted(GOLDEN))}")
    params = ProtocolParams.corollary(golden.n, golden.k, golden.t, golden.gain_total)
    holder = {}

    def make(setup):
        holder["obs"] = MilestoneObserver(setup)
        return holder["obs"]

    out = simulate(params, golden.policy, golden.seed, record=True, isolation_cap=isolation_cap,
                   observer=make)
    return out.trace.lines(milestones_only=True), out, holder["obs"]


def diff_golden(name: str, lines=None) -> list[str]:
    """Unified diff between the checked-in golden log and a fresh replay (empty when equal)."""
    if lines is None:
        lines = replay_golden(name)[0]
    expected = golden_path(name).read_text().splitlines()
    return list(difflib.unified_diff(expected, lines, f"golden/{name}.log", "replay", lineterm=""))


def write_golden(name: str, path=None) -> Path:
    lines = replay_golden(name)[0]
    target = Path(path) if path is not None else Path(str(golden_path(name)))
    target.write_text("\n".join(lines) + "\n")
    return target


def scenario_to_json(sc: Scenario) -> str:
    return json.dumps(asdict(sc), default=str, indent=2)
