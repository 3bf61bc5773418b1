"""Estimator benchmarking: campaigns over generated models.

A campaign crosses a list of generator configurations with a grid of
(objective chain, optimizer) entries. Every replication generates one
case from a per-case seed, and every grid entry fits that same case from
the default start, so entries are compared on identical problems.

Failure taxonomy per fitted case, checked in order:

- nan-param: some estimate is not finite;
- nan-objective: the final objective value is not finite, or the run
  ended in a domain failure (including hard errors during the fit);
- diverged: mean relative error delta exceeds DIVERGENCE_LIMIT;
- otherwise the case counts as a success (failure is None).

Wall time covers minimization only; generation, parsing and matrix
assembly are excluded. With a fixed master seed everything except the
wall-time field is reproducible bit for bit.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import SemforgeError
from .generator import GenConfig, generate
from .model import build
from .objective import get_objective
from .optim import TERM_DOMAIN, Minimizer, canonical_method
from .syntax import parse

logger = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 0.3

FAIL_NAN_PARAM = "nan-param"
FAIL_NAN_OBJECTIVE = "nan-objective"
FAIL_DIVERGED = "diverged"


def delta(theta_true: dict[str, float], estimates: dict[str, float]) -> float:
    """Mean relative error over the named true parameters.

    Both maps must cover exactly the same names, and no true value may be
    zero (the error is relative).
    """
    if set(theta_true) != set(estimates):
        missing = sorted(set(theta_true) - set(estimates))
        extra = sorted(set(estimates) - set(theta_true))
        raise ValueError(
            f"parameter name mismatch: missing {missing}, unexpected {extra}"
        )
    if not theta_true:
        raise ValueError("no parameters to compare")
    if any(v == 0 for v in theta_true.values()):
        raise ValueError("true values must be nonzero for relative error")
    total = sum(
        abs(estimates[k] - v) / abs(v) for k, v in theta_true.items()
    )
    return total / len(theta_true)


def classify_failure(theta, value: float, delta_value: float,
                     termination: str | None = None) -> str | None:
    """Failure tag for one fitted case, or None on success."""
    theta = np.asarray(theta, dtype=float)
    if theta.size and not np.all(np.isfinite(theta)):
        return FAIL_NAN_PARAM
    if not math.isfinite(value) or termination == TERM_DOMAIN:
        return FAIL_NAN_OBJECTIVE
    if delta_value > DIVERGENCE_LIMIT:
        return FAIL_DIVERGED
    return None


@dataclass
class BenchRecord:
    """Outcome of one (case, objective, method) fit."""

    case: str
    set_label: str
    rep: int
    seed: int
    objective: str
    method: str
    delta: float
    value: float
    wall_time: float
    converged: bool
    termination: str
    failure: str | None


def _as_chain(objective) -> tuple[str, ...]:
    if isinstance(objective, str):
        parts = [p.strip() for p in objective.split("+")]
    else:
        parts = list(objective)
    if not parts or any(not p for p in parts):
        raise ValueError(f"invalid objective entry: {objective!r}")
    for part in parts:
        get_objective(part)
    return tuple(p.upper() for p in parts)


@dataclass(frozen=True)
class Campaign:
    """A benchmark campaign: sets x replications x (objective, method) grid.

    Objective entries may be single names ("MLW") or warm-start chains,
    written either as "ULS+MLW" or as a sequence of names.
    """

    sets: tuple[GenConfig, ...]
    reps: int = 1
    methods: tuple[str, ...] = ("SLSQP",)
    objectives: tuple = ("MLW",)
    seed: int = 0
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "sets", tuple(self.sets))
        object.__setattr__(self, "methods",
                           tuple(canonical_method(m) for m in self.methods))
        object.__setattr__(self, "objectives",
                           tuple(_as_chain(o) for o in self.objectives))
        if not self.sets:
            raise ValueError("campaign needs at least one generator config")
        if self.reps < 1:
            raise ValueError("replication count must be at least 1")
        if not self.methods or not self.objectives:
            raise ValueError("campaign needs at least one method and objective")
        labels = tuple(self.labels) or tuple(
            f"set{i + 1}" for i in range(len(self.sets))
        )
        if len(labels) != len(self.sets) or len(set(labels)) != len(labels):
            raise ValueError("set labels must be unique and match the sets")
        object.__setattr__(self, "labels", labels)

    @property
    def grid(self) -> list[tuple[tuple[str, ...], str]]:
        return [(obj, m) for obj in self.objectives for m in self.methods]


def grid_label(chain: tuple[str, ...], method: str) -> str:
    return f"{'+'.join(chain)}/{method}"


def standard_sets() -> list[GenConfig]:
    """The 15 stock benchmark configurations.

    Sets 1-5 sweep the coefficient scale on a small graph; sets 6-10 sweep
    the latent count on a 10-node acyclic graph; sets 11-15 repeat that
    sweep with one cycle.
    """
    sets = [
        GenConfig(n_obs=5, n_lat=2, n_manif=(2, 2), p_manif=0.1,
                  n_cycles=0, scale=s, n_samples=500)
        for s in (0.5, 0.75, 1.0, 1.5, 2.0)
    ]
    for n_cycles in (0, 1):
        sets.extend(
            GenConfig(n_obs=10, n_lat=k, n_manif=(2, 2), p_manif=0.1,
                      n_cycles=n_cycles, scale=1.0, n_samples=500)
            for k in (0, 1, 2, 4, 8)
        )
    return sets


def campaign_from_dict(payload: dict) -> Campaign:
    """Build a Campaign from a JSON-shaped dict.

    "sets" may be the string "standard" (the 15 stock configurations) or a
    list of generator config objects.
    """
    payload = dict(payload)
    sets = payload.pop("sets", "standard")
    if sets == "standard":
        configs = standard_sets()
    else:
        configs = [GenConfig.from_dict(s) for s in sets]
    known = {"reps", "methods", "objectives", "seed", "labels"}
    unknown = set(payload) - known
    if unknown:
        raise ValueError(f"unknown campaign fields: {sorted(unknown)}")
    for key in ("methods", "objectives", "labels"):
        if key in payload:
            payload[key] = tuple(payload[key])
    return Campaign(sets=tuple(configs), **payload)


def case_seed(master: int, set_index: int, rep: int) -> int:
    """Deterministic per-case seed derived from the campaign master seed."""
    seq = np.random.SeedSequence((master, set_index, rep))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def run_case(case, chain: tuple[str, ...], method: str):
    """Fit one generated case; returns (delta, value, wall, outcome|None).

    Hard errors during build or fit are swallowed into a domain-failure
    shaped result so campaigns keep running.
    """
    start = time.perf_counter()
    try:
        desc = parse(case.model_text)
        ps = build(desc, case.data)
        S = case.data.covariance(ps.z_names)
        mz = Minimizer(ps, S)
        start = time.perf_counter()
        for stage in chain:
            outcome = mz.minimize(objective=stage, method=method)
        wall = time.perf_counter() - start
        estimates = ps.estimates(outcome.theta)
        named = {k: v for k, v in estimates.items() if k in case.theta_true}
        d = delta(case.theta_true, named)
        return d, outcome.value, wall, outcome
    except SemforgeError as exc:
        wall = time.perf_counter() - start
        logger.warning("case failed hard: %s", exc)
        return math.nan, math.nan, wall, None


def run_campaign(campaign: Campaign) -> list[BenchRecord]:
    """Run the full campaign sequentially and return all records."""
    records = []
    for si, (cfg, label) in enumerate(zip(campaign.sets, campaign.labels)):
        logger.info("benchmark %s: %d reps x %d grid entries",
                    label, campaign.reps, len(campaign.grid))
        for rep in range(campaign.reps):
            seed = case_seed(campaign.seed, si, rep)
            case = generate(cfg, seed=seed)
            case_id = f"{label}/r{rep + 1:03d}"
            for chain, method in campaign.grid:
                d, value, wall, outcome = run_case(case, chain, method)
                if outcome is None:
                    theta = [math.nan]
                    converged, termination = False, TERM_DOMAIN
                else:
                    theta = outcome.theta
                    converged, termination = outcome.converged, outcome.termination
                records.append(BenchRecord(
                    case=case_id,
                    set_label=label,
                    rep=rep + 1,
                    seed=seed,
                    objective="+".join(chain),
                    method=method,
                    delta=d,
                    value=value,
                    wall_time=wall,
                    converged=converged,
                    termination=termination,
                    failure=classify_failure(theta, value, d, termination),
                ))
    return records


def records_frame(records: list[BenchRecord]) -> pd.DataFrame:
    frame = pd.DataFrame([vars(r) for r in records])
    frame["failure"] = frame["failure"].map(lambda f: f or "none")
    return frame


def summarize(records: list[BenchRecord]) -> dict:
    """Per-set failure counts and wall times, plus the pairwise grid matrix.

    pairwise["matrix"][i][j] counts cases where grid entry i failed and
    entry j succeeded; the diagonal holds each entry's own failure count.
    """
    labels: list[str] = []
    grid: list[str] = []
    cases: dict[str, set] = {}
    for r in records:
        if r.set_label not in labels:
            labels.append(r.set_label)
        key = grid_label(tuple(r.objective.split("+")), r.method)
        if key not in grid:
            grid.append(key)
        cases.setdefault(r.set_label, set()).add(r.case)

    failures: dict[str, dict[str, int]] = {}
    kinds: dict[str, dict[str, int]] = {g: {} for g in grid}
    wall: dict[str, dict[str, float]] = {}
    deltas: dict[str, dict[str, list[float]]] = {}
    by_case: dict[str, dict[str, bool]] = {}
    for r in records:
        g = grid_label(tuple(r.objective.split("+")), r.method)
        failures.setdefault(r.set_label, {}).setdefault(g, 0)
        wall.setdefault(r.set_label, {}).setdefault(g, 0.0)
        deltas.setdefault(r.set_label, {}).setdefault(g, [])
        if r.failure:
            failures[r.set_label][g] += 1
            kinds[g][r.failure] = kinds[g].get(r.failure, 0) + 1
        else:
            deltas[r.set_label][g].append(r.delta)
        wall[r.set_label][g] += r.wall_time
        by_case.setdefault(r.case, {})[g] = r.failure is None

    n = len(grid)
    matrix = [[0] * n for _ in range(n)]
    for outcomes in by_case.values():
        for i, gi in enumerate(grid):
            if outcomes.get(gi, True):
                continue
            matrix[i][i] += 1
            for j, gj in enumerate(grid):
                if j != i and outcomes.get(gj, False):
                    matrix[i][j] += 1

    delta_mean = {
        s: {g: (float(np.mean(v)) if v else None) for g, v in per.items()}
        for s, per in deltas.items()
    }
    return {
        "grid": grid,
        "sets": labels,
        "cases_per_set": {s: len(ids) for s, ids in cases.items()},
        "failures": failures,
        "failure_kinds": kinds,
        "wall_time": wall,
        "delta_mean": delta_mean,
        "pairwise": {"labels": grid, "matrix": matrix},
    }


def write_results(records: list[BenchRecord], outdir) -> dict[str, Path]:
    """Emit records.csv and summary.json into outdir."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {"records": outdir / "records.csv",
             "summary": outdir / "summary.json"}
    records_frame(records).to_csv(paths["records"], index=False)
    summary = summarize(records)
    paths["summary"].write_text(json.dumps(summary, indent=2) + "\n")
    return paths
