"""High-level estimation: parse, build, minimise, collect results."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .model import ParamSystem, build
from .optim import Minimizer, OptimOutcome
from .syntax import ModelDescription, parse


@dataclass
class FitResult:
    """Everything produced by fitting one model to one dataset.

    Inference fields (se, zscores, pvalues) and indices are None until
    filled in by the stats layer.
    """

    system: ParamSystem
    n: int
    S: np.ndarray
    objective: str
    method: str
    theta: np.ndarray
    value: float
    converged: bool
    outcome: OptimOutcome
    se: np.ndarray | None = None
    zscores: np.ndarray | None = None
    pvalues: np.ndarray | None = None
    indices: object | None = None
    chain: list[OptimOutcome] = field(default_factory=list)

    @property
    def names(self) -> list[str]:
        return list(self.system.names)

    @property
    def estimates(self) -> dict[str, float]:
        return self.system.estimates(self.theta)


def fit_system(ps: ParamSystem, data: Dataset, objective="MLW",
               method: str = "SLSQP", theta0=None, **options) -> FitResult:
    """Fit an already-built ParamSystem.

    objective may be a single name or a sequence of names; a sequence is
    minimised left to right with each stage starting from the previous
    solution (warm restart).
    """
    S = data.covariance(ps.z_names)
    stages = [objective] if isinstance(objective, str) else list(objective)
    if not stages:
        raise ValueError("need at least one objective")
    mz = Minimizer(ps, S)
    chain = []
    for k, stage in enumerate(stages):
        out = mz.minimize(stage, method, theta0=theta0 if k == 0 else None,
                          **options)
        chain.append(out)
    return FitResult(
        system=ps,
        n=data.n,
        S=S,
        objective=chain[-1].objective,
        method=chain[-1].method,
        theta=out.theta,
        value=out.value,
        converged=out.converged,
        outcome=out,
        chain=chain,
    )


def fit_model(model, data: Dataset, objective="MLW", method: str = "SLSQP",
              theta0=None, **options) -> FitResult:
    """Parse (if needed), build, and fit a model against a dataset."""
    desc = parse(model) if isinstance(model, str) else model
    if not isinstance(desc, ModelDescription):
        raise TypeError("model must be model text or a ModelDescription")
    ps = build(desc, data)
    return fit_system(ps, data, objective, method, theta0=theta0, **options)
