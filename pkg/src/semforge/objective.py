"""Discrepancy functions between the implied and sample covariances.

Three objectives are supported, all functions of sigma(theta) and the
sample covariance S of the z-ordered observed variables:

    ULS:  tr[(sigma - S) @ (sigma - S).T]
    GLS:  tr[(I - sigma @ inv(S))^2]
    MLW:  tr[S @ inv(sigma)] + ln det(sigma)

MLW is the Wishart likelihood-ratio discrepancy with its constant terms
dropped, so its value at a perfect fit is p + ln det(S), not zero.
Gradients are exact, assembled from the analytic derivatives of sigma;
the MLW Hessian is available on request and is exact as well.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import DataError, NotPositiveDefiniteError
from .model import ParamSystem

_TRACE = "ij,ji->"


@dataclass
class ObjectiveEval:
    """Value, gradient, and (MLW only, on request) Hessian at one point."""

    value: float
    gradient: np.ndarray
    hessian: np.ndarray | None = None


def eval_uls(ps: ParamSystem, theta, S) -> ObjectiveEval:
    """Unweighted least squares discrepancy."""
    sigma, aux = ps.sigma_aux(theta)
    diff = sigma - S
    value = float(np.einsum(_TRACE, diff, diff.T))
    grads = ps.dsigma(aux)
    gradient = np.array([2.0 * np.einsum(_TRACE, diff, g) for g in grads])
    return ObjectiveEval(value, gradient)


def _checked_cho_factor(mat):
    # potrf tolerates pivots that are only rounding noise (a singular matrix
    # comes out with sqrt(eps)-sized trailing pivots instead of an error), so
    # also reject factors whose conditional variances sit at the roundoff
    # floor of the matrix.
    mat = np.asarray(mat, dtype=float)
    chol = cho_factor(mat)
    pivots = np.diag(chol[0]) ** 2
    floor = 8.0 * mat.shape[0] * np.finfo(float).eps * np.max(np.diag(mat))
    if not np.all(pivots > floor):
        raise np.linalg.LinAlgError("matrix is numerically singular")
    return chol


def eval_gls(ps: ParamSystem, theta, S) -> ObjectiveEval:
    """Generalised least squares discrepancy, weighting by inv(S)."""
    sigma, aux = ps.sigma_aux(theta)
    try:
        s_chol = _checked_cho_factor(np.asarray(S, dtype=float))
    except np.linalg.LinAlgError:
        raise DataError("sample covariance is singular, GLS is unavailable") from None
    a = np.eye(S.shape[0]) - cho_solve(s_chol, sigma).T  # I - sigma @ inv(S)
    value = float(np.einsum(_TRACE, a, a))
    w = -2.0 * cho_solve(s_chol, a)  # -2 inv(S) (I - sigma inv(S))
    grads = ps.dsigma(aux)
    gradient = np.array([np.einsum(_TRACE, w, g) for g in grads])
    return ObjectiveEval(value, gradient)


def eval_mlw(ps: ParamSystem, theta, S, hessian: bool = False) -> ObjectiveEval:
    """Wishart likelihood-ratio discrepancy (constants dropped).

    Raises NotPositiveDefiniteError when sigma(theta) is not positive
    definite, which estimation layers treat as a domain failure.
    """
    sigma, aux = ps.sigma_aux(theta)
    try:
        chol = _checked_cho_factor(sigma)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError("implied covariance is not PD") from None
    inv_sigma = cho_solve(chol, np.eye(sigma.shape[0]))
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol[0]))))
    value = float(np.einsum(_TRACE, S, inv_sigma)) + logdet

    k = inv_sigma @ S @ inv_sigma
    w = inv_sigma - k
    grads = ps.dsigma(aux)
    gradient = np.array([np.einsum(_TRACE, w, g) for g in grads])

    hess = None
    if hessian:
        m = len(grads)
        ag = [inv_sigma @ g for g in grads]
        kg = [k @ g for g in grads]
        hess = np.empty((m, m))
        for i in range(m):
            for j in range(i, m):
                val = (
                    np.einsum(_TRACE, ag[j], kg[i])
                    + np.einsum(_TRACE, kg[j], ag[i])
                    - np.einsum(_TRACE, ag[j], ag[i])
                )
                d2 = ps.d2sigma(i, j, aux)
                if d2 is not None:
                    val += np.einsum(_TRACE, w, d2)
                hess[i, j] = hess[j, i] = val
        hess = np.asarray(hess)
    return ObjectiveEval(value, gradient, hess)


OBJECTIVES = {"ULS": eval_uls, "GLS": eval_gls, "MLW": eval_mlw}


def get_objective(name: str):
    """Look up an objective by its public name (case-insensitive)."""
    try:
        return OBJECTIVES[name.upper()]
    except KeyError:
        raise ValueError(
            f"unknown objective {name!r}; choose from {', '.join(OBJECTIVES)}"
        ) from None


def value_and_grad(ps: ParamSystem, S, name: str):
    """Closures (fun, grad) over theta for optimizer consumption.

    Domain failures (non-PD sigma, singular reduced form, non-finite
    parameter values) are mapped to +inf so line searches backtrack
    instead of crashing.
    """
    fn = get_objective(name)
    m = ps.n_free

    def fun(theta):
        if not np.isfinite(theta).all():
            return np.inf
        try:
            return fn(ps, theta, S).value
        except ArithmeticError:
            return np.inf

    def grad(theta):
        if not np.isfinite(theta).all():
            return np.full(m, np.inf)
        try:
            return fn(ps, theta, S).gradient
        except ArithmeticError:
            return np.full(m, np.inf)

    return fun, grad
