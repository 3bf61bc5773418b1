"""Random model and dataset generation for benchmarking.

Generation runs in four steps:

1. structural graph: a random topological order over n_obs nodes, each
   forward pair connected with probability 2/n_obs, then n_cycles extra
   back edges between pairs already joined by a forward path (each one
   therefore closes a cycle); n_lat latent variables are chosen among the
   non-isolated nodes. Configurations that leave too few connected nodes
   or no path for a back edge are redrawn a bounded number of times.
2. measurement part: every latent receives between l_manif and u_manif
   fresh manifest variables; random pairs of manifests belonging to
   disjoint latent sets are then merged (the surviving manifest loads on
   both) until the manifest count is ceil((1 - p_manif) * initial).
3. parameter values: every structural coefficient and every non-anchor
   loading is drawn uniformly from +-[0.1, 1.0] * scale. The anchor
   loading of each latent (its alphabetically first manifest) is exactly
   1, mirroring the pinned cell of the fitted layout, so every sampled
   value corresponds to a free parameter of the estimated model.
4. data: per-sample innovations (standard normal for exogenous nodes,
   plus N(0, 0.1) additive noise on every variable, variance 0.1) are
   propagated through the exact reduced form omega = inv(I - B) eps,
   which equals topological propagation on acyclic graphs and stays
   well-defined on cyclic ones; manifests add their own N(0, 0.1) noise.
   Latent columns are dropped from the emitted dataset.

The same seed reproduces every byte of output.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .data import Dataset
from .errors import GenerationError

NOISE_VARIANCE = 0.1
_MAX_REDRAWS = 200


@dataclass(frozen=True)
class GenConfig:
    """Knobs for one synthetic configuration.

    n_manif is the inclusive (low, high) range for the number of manifest
    variables created per latent.
    """

    n_obs: int
    n_lat: int
    n_manif: tuple[int, int] = (2, 2)
    p_manif: float = 0.1
    n_cycles: int = 0
    scale: float = 1.0
    n_samples: int = 500
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "n_manif", tuple(self.n_manif))
        low, high = self.n_manif
        if self.n_obs < 1:
            raise GenerationError("n_obs must be at least 1")
        if not 0 <= self.n_lat <= self.n_obs:
            raise GenerationError("n_lat must lie in [0, n_obs]")
        if not 1 <= low <= high:
            raise GenerationError("n_manif range must satisfy 1 <= low <= high")
        if not 0.0 <= self.p_manif < 1.0:
            raise GenerationError("p_manif must lie in [0, 1)")
        if self.n_cycles < 0:
            raise GenerationError("n_cycles must be nonnegative")
        if self.scale <= 0:
            raise GenerationError("scale must be positive")
        if self.n_samples < 2:
            raise GenerationError("n_samples must be at least 2")

    @classmethod
    def from_dict(cls, payload: dict) -> "GenConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(payload) - known
        if unknown:
            raise GenerationError(f"unknown config fields: {sorted(unknown)}")
        return cls(**payload)


@dataclass
class GeneratedCase:
    """One synthetic model plus its truth and sample."""

    model_text: str
    theta_true: dict[str, float]
    data: Dataset
    config: GenConfig
    seed: int | None = None


def _transitive_pairs(n: int, edges: set) -> list:
    """Ordered pairs (u, v) with a directed path u -> ... -> v."""
    adj: dict[int, list[int]] = {u: [] for u in range(n)}
    for u, v in edges:
        adj[u].append(v)
    pairs = []
    for src in range(n):
        seen = set()
        stack = list(adj[src])
        while stack:
            node = stack.pop()
            if node in seen:
                continue
            seen.add(node)
            stack.extend(adj[node])
        pairs.extend((src, dst) for dst in sorted(seen) if dst != src)
    return pairs


def _draw_graph(cfg: GenConfig, rng) -> tuple[set, list]:
    """Step 1: structural edges (u -> v on node ids) and latent node ids."""
    p_edge = 2.0 / cfg.n_obs
    for _ in range(_MAX_REDRAWS):
        order = rng.permutation(cfg.n_obs)
        edges = set()
        for i in range(cfg.n_obs):
            for j in range(i + 1, cfg.n_obs):
                if rng.random() < p_edge:
                    edges.add((int(order[i]), int(order[j])))
        if not edges:
            continue
        if cfg.n_cycles:
            pairs = _transitive_pairs(cfg.n_obs, edges)
            if len(pairs) < cfg.n_cycles:
                continue
            picks = rng.choice(len(pairs), size=cfg.n_cycles, replace=False)
            for k in sorted(int(i) for i in picks):
                u, v = pairs[k]
                edges.add((v, u))
        if cfg.n_lat:
            connected = sorted({u for e in edges for u in e})
            if len(connected) < cfg.n_lat:
                continue
            latent = [int(v) for v in rng.choice(connected, size=cfg.n_lat,
                                                 replace=False)]
        else:
            latent = []
        return edges, latent
    raise GenerationError(
        "could not draw a structural graph satisfying the configuration "
        f"(n_obs={cfg.n_obs}, n_lat={cfg.n_lat}, n_cycles={cfg.n_cycles})"
    )


def _merge_manifests(lat_names, counts, p_manif, rng) -> dict[str, list[str]]:
    """Step 2: manifests per latent, with cross-latent merging applied.

    Returns manifest name -> sorted list of latent names it loads on.
    """
    man_lats: dict[str, set[str]] = {}
    counter = 0
    for lat, k in zip(lat_names, counts):
        for _ in range(k):
            counter += 1
            man_lats[f"y{counter}"] = {lat}
    total = len(man_lats)
    target = math.ceil((1.0 - p_manif) * total)
    while len(man_lats) > target:
        names = sorted(man_lats)
        candidates = [
            (a, b)
            for i, a in enumerate(names)
            for b in names[i + 1 :]
            if not (man_lats[a] & man_lats[b])
        ]
        if not candidates:
            raise GenerationError(
                "cannot reach the manifest target: no manifest pair with "
                "disjoint latent sets is left to merge (p_manif too high)"
            )
        a, b = candidates[int(rng.integers(len(candidates)))]
        man_lats[a] |= man_lats[b]
        del man_lats[b]
    return {m: sorted(lats) for m, lats in man_lats.items()}


def _draw_coefficient(rng, scale: float) -> float:
    magnitude = rng.uniform(0.1, 1.0) * scale
    sign = 1.0 if rng.random() < 0.5 else -1.0
    return float(sign * magnitude)


def generate(config: GenConfig, seed: int | None = None) -> GeneratedCase:
    """Draw one synthetic case. seed overrides config.seed when given."""
    used_seed = config.seed if seed is None else seed
    rng = np.random.default_rng(used_seed)

    edges, latent_nodes = _draw_graph(config, rng)
    latent_set = set(latent_nodes)
    node_name = {}
    n_lat_seen = n_x_seen = 0
    for node in range(config.n_obs):
        if node in latent_set:
            n_lat_seen += 1
            node_name[node] = f"eta{n_lat_seen}"
        else:
            n_x_seen += 1
            node_name[node] = f"x{n_x_seen}"

    lat_names = [node_name[v] for v in sorted(latent_set)]
    counts = [int(rng.integers(config.n_manif[0], config.n_manif[1] + 1))
              for _ in lat_names]
    man_lats = _merge_manifests(lat_names, counts, config.p_manif, rng)
    lat_mans: dict[str, list[str]] = {lat: [] for lat in lat_names}
    for man, lats in man_lats.items():
        for lat in lats:
            lat_mans[lat].append(man)
    for ms in lat_mans.values():
        ms.sort()

    # step 3: coefficients; anchors pinned at 1 exactly as the fit will pin them
    theta_true: dict[str, float] = {}
    for u, v in sorted(edges):
        theta_true[f"{node_name[v]} ~ {node_name[u]}"] = _draw_coefficient(
            rng, config.scale
        )
    loading_true: dict[tuple[str, str], float] = {}
    for lat in lat_names:
        anchor = lat_mans[lat][0]
        for man in lat_mans[lat]:
            if man == anchor:
                loading_true[(man, lat)] = 1.0
            else:
                value = _draw_coefficient(rng, config.scale)
                loading_true[(man, lat)] = value
                theta_true[f"{lat} =~ {man}"] = value

    # step 4: sample
    n_obs, n = config.n_obs, config.n_samples
    b_true = np.zeros((n_obs, n_obs))
    for u, v in edges:
        b_true[v, u] = theta_true[f"{node_name[v]} ~ {node_name[u]}"]
    has_parent = {v for _, v in edges}
    noise_sd = math.sqrt(NOISE_VARIANCE)
    eps = rng.standard_normal((n, n_obs)) * noise_sd
    for node in range(n_obs):
        if node not in has_parent:
            eps[:, node] += rng.standard_normal(n)
    try:
        omega = np.linalg.solve(np.eye(n_obs) - b_true, eps.T).T
    except np.linalg.LinAlgError:
        raise GenerationError(
            "cycle coefficients made (I - B) singular; re-seed and retry"
        ) from None

    man_names = sorted(man_lats, key=lambda s: (len(s), s))
    x_nodes = [v for v in range(n_obs) if v not in latent_set]
    columns = {}
    for node in x_nodes:
        columns[node_name[node]] = omega[:, node]
    node_of = {node_name[v]: v for v in range(n_obs)}
    for man in man_names:
        signal = np.zeros(n)
        for lat in man_lats[man]:
            signal += loading_true[(man, lat)] * omega[:, node_of[lat]]
        columns[man] = signal + rng.standard_normal(n) * noise_sd
    names = [node_name[v] for v in x_nodes] + man_names
    rows = np.column_stack([columns[c] for c in names]) if names else np.empty((n, 0))
    data = Dataset(names, rows)

    model_text = _render_model(node_name, edges, lat_mans)
    return GeneratedCase(model_text, theta_true, data, config, used_seed)


def _render_model(node_name, edges, lat_mans) -> str:
    by_dep: dict[str, list[str]] = {}
    for u, v in edges:
        by_dep.setdefault(node_name[v], []).append(node_name[u])
    lines = []
    if by_dep:
        lines.append("# structural part")
        for dep in sorted(by_dep):
            lines.append(f"{dep} ~ " + " + ".join(sorted(by_dep[dep])))
    if lat_mans:
        lines.append("# measurement part")
        for lat in sorted(lat_mans):
            lines.append(f"{lat} =~ " + " + ".join(lat_mans[lat]))
    return "\n".join(lines) + "\n"


def write_case(case: GeneratedCase, outdir) -> dict[str, Path]:
    """Emit model.txt, params.json, data.csv into outdir."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {
        "model": outdir / "model.txt",
        "params": outdir / "params.json",
        "data": outdir / "data.csv",
    }
    paths["model"].write_text(case.model_text)
    paths["params"].write_text(
        json.dumps(case.theta_true, indent=2, sort_keys=True) + "\n"
    )
    frame = pd.DataFrame(case.data.rows, columns=case.data.names)
    frame.to_csv(paths["data"], index=True)
    return paths
