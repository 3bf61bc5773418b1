"""Bound-constrained minimisation of the discrepancy objectives.

Five methods are exposed by name: SLSQP and L-BFGS-B (delegated to
scipy.optimize, which provides exactly these algorithms), plus first-order
Adam, Nesterov, and SGD loops implemented here. All five respect the
per-parameter box bounds of the ParamSystem by projection.

The objectives are deterministic functions of the sample covariance, so
even the "stochastic" first-order methods run full-gradient steps and are
bit-for-bit reproducible from the same starting point; there is no
randomness to seed.

A Minimizer keeps the last estimate between calls: a second minimize()
on the same instance starts from the previous solution, which is how
objectives are chained (e.g. ULS first, MLW refinement after).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .model import ParamSystem
from .objective import value_and_grad

TERM_GRADIENT = "gradient-tol"
TERM_MAXITER = "max-iter"
TERM_DOMAIN = "domain-failure"

#: Number of times a rejected (non-finite) step is halved before giving up.
MAX_HALVINGS = 30

_CANON = {
    "SLSQP": "SLSQP",
    "LBFGSB": "L-BFGS-B",
    "ADAM": "Adam",
    "NESTEROV": "Nesterov",
    "SGD": "SGD",
}

DEFAULT_OPTIONS = {
    "SLSQP": {"maxiter": 1000, "ftol": 1e-10},
    "L-BFGS-B": {"maxiter": 5000, "ftol": 1e-12, "gtol": 1e-8},
    "Adam": {"lr": 1e-3, "beta1": 0.9, "beta2": 0.999, "eps": 1e-8,
             "max_iter": 10000, "gtol": 1e-6},
    "Nesterov": {"lr": 1e-3, "momentum": 0.9, "max_iter": 10000, "gtol": 1e-6},
    "SGD": {"lr": 1e-3, "momentum": 0.0, "max_iter": 10000, "gtol": 1e-6},
}


@dataclass
class OptimOutcome:
    """Result of one minimize() call."""

    theta: np.ndarray
    value: float
    iterations: int
    converged: bool
    termination: str
    method: str
    objective: str


def canonical_method(name: str) -> str:
    key = name.upper().replace("-", "").replace("_", "")
    try:
        return _CANON[key]
    except KeyError:
        raise ValueError(
            f"unknown method {name!r}; choose from {', '.join(_CANON.values())}"
        ) from None


def _clip(theta, bounds):
    lo = np.array([-np.inf if b[0] is None else b[0] for b in bounds])
    hi = np.array([np.inf if b[1] is None else b[1] for b in bounds])
    return np.clip(theta, lo, hi)


class Minimizer:
    """Stateful estimation driver for one ParamSystem and sample covariance.

    The current estimate starts at the system's starting values and is
    replaced by each minimize() result, so consecutive calls refine the
    previous solution.
    """

    def __init__(self, ps: ParamSystem, S):
        self.ps = ps
        self.S = np.asarray(S, dtype=float)
        self.theta = ps.start.copy()

    def minimize(self, objective: str = "MLW", method: str = "SLSQP",
                 theta0=None, **options) -> OptimOutcome:
        """Minimise one objective, starting from theta0 or the stored estimate.

        Extra keyword options override the method defaults (see
        DEFAULT_OPTIONS). If the objective cannot be evaluated at the
        starting point, free variances are lifted to at least 1e-4 and the
        evaluation retried once; a second failure reports domain-failure
        without iterating.
        """
        method = canonical_method(method)
        objective = objective.upper()
        opts = dict(DEFAULT_OPTIONS[method])
        unknown = set(options) - set(opts)
        if unknown:
            raise ValueError(f"unknown options for {method}: {sorted(unknown)}")
        opts.update(options)

        fun, grad = value_and_grad(self.ps, self.S, objective)
        x0 = self.theta if theta0 is None else np.asarray(theta0, dtype=float)
        x0 = _clip(x0.copy(), self.ps.bounds)

        if not np.isfinite(fun(x0)):
            mask = self.ps.variance_mask
            x0[mask] = np.maximum(x0[mask], 1e-4)
            if not np.isfinite(fun(x0)):
                return self._finish(x0, fun, 0, False, TERM_DOMAIN,
                                    method, objective)

        if self.ps.n_free == 0:
            return self._finish(x0, fun, 0, True, TERM_GRADIENT, method, objective)

        if method in ("SLSQP", "L-BFGS-B"):
            out = self._scipy_run(fun, grad, x0, method, opts)
        else:
            out = self._first_order_run(fun, grad, x0, method, opts)
        theta, iters, converged, termination = out
        return self._finish(theta, fun, iters, converged, termination,
                            method, objective)

    def _finish(self, theta, fun, iters, converged, termination,
                method, objective):
        theta = _clip(np.asarray(theta, dtype=float), self.ps.bounds)
        value = float(fun(theta))
        if converged and not np.isfinite(value):
            converged, termination = False, TERM_DOMAIN
        self.theta = theta.copy()
        return OptimOutcome(theta, value, iters, converged, termination,
                            method, objective)

    def _scipy_run(self, fun, grad, x0, method, opts):
        res = scipy.optimize.minimize(
            fun, x0, jac=grad, method=method, bounds=self.ps.bounds,
            options=opts,
        )
        theta = np.asarray(res.x, dtype=float)
        iters = int(getattr(res, "nit", 0) or 0)
        if res.success:
            return theta, iters, True, TERM_GRADIENT
        hit_limit = (method == "SLSQP" and res.status == 9) or (
            method == "L-BFGS-B" and res.status == 1
        )
        return theta, iters, False, TERM_MAXITER if hit_limit else TERM_DOMAIN

    def _first_order_run(self, fun, grad, x0, method, opts):
        lr, gtol = opts["lr"], opts["gtol"]
        max_iter = opts["max_iter"]
        x = x0.copy()
        velocity = np.zeros_like(x)
        m1 = np.zeros_like(x)
        m2 = np.zeros_like(x)

        for it in range(1, max_iter + 1):
            if method == "Nesterov":
                g = self._lookahead_grad(grad, x, opts["momentum"], velocity)
                if g is None:
                    return x, it, False, TERM_DOMAIN
            else:
                g = grad(x)
            if not np.isfinite(g).all():
                return x, it, False, TERM_DOMAIN
            if np.max(np.abs(g)) < gtol:
                return x, it, True, TERM_GRADIENT

            if method == "Adam":
                m1 = opts["beta1"] * m1 + (1 - opts["beta1"]) * g
                m2 = opts["beta2"] * m2 + (1 - opts["beta2"]) * g * g
                hat1 = m1 / (1 - opts["beta1"] ** it)
                hat2 = m2 / (1 - opts["beta2"] ** it)
                step = -lr * hat1 / (np.sqrt(hat2) + opts["eps"])
            else:
                velocity = opts["momentum"] * velocity - lr * g
                step = velocity

            accepted = None
            for _ in range(MAX_HALVINGS + 1):
                candidate = _clip(x + step, self.ps.bounds)
                if np.isfinite(fun(candidate)):
                    accepted = candidate
                    break
                step = step / 2.0
                if method != "Adam":
                    velocity = velocity / 2.0
            if accepted is None:
                return x, it, False, TERM_DOMAIN
            x = accepted
        return x, max_iter, False, TERM_MAXITER

    def _lookahead_grad(self, grad, x, momentum, velocity):
        """Nesterov gradient at the lookahead point, halving on bad regions."""
        v = velocity.copy()
        for _ in range(MAX_HALVINGS + 1):
            g = grad(_clip(x + momentum * v, self.ps.bounds))
            if np.isfinite(g).all():
                velocity[:] = v
                return g
            v = v / 2.0
        return None


def minimize(ps: ParamSystem, S, objective: str = "MLW",
             method: str = "SLSQP", theta0=None, **options) -> OptimOutcome:
    """One-shot minimisation (no state kept between calls)."""
    return Minimizer(ps, S).minimize(objective, method, theta0=theta0, **options)
