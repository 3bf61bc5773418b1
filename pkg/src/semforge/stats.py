"""Inference and goodness-of-fit summaries for fitted models.

Standard errors come from the inverse Fisher information at the estimate,
se_i = sqrt(diag(inv(FIM))_i), with two information variants:

* expected (default): FIM_ij = (n/2) tr[inv(sigma) dsigma_i inv(sigma) dsigma_j]
* observed: the exact Hessian of the Wishart negative log-likelihood,
  (n/2) times the MLW discrepancy Hessian.

z-scores are estimate/se and p-values two-sided standard normal.

Fit indices follow the conventional covariance-structure formulas with
chi2 = n * F(theta_hat), F being whichever objective produced the fit;
comparing a fit and a baseline estimated under different objectives is
refused. The log-likelihood L entering AIC and BIC defaults to the
Wishart value at the estimate with additive constants dropped,
L = -(n/2) * F_MLW(theta_hat), and can be overridden.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .data import Dataset
from .errors import SemforgeError
from .fitting import FitResult, fit_system
from .model import baseline_system, classify
from .objective import eval_mlw
from .optim import Minimizer
from .syntax import parse

logger = logging.getLogger(__name__)

FIM_MODES = ("expected", "observed")


@dataclass
class Inference:
    """Per-parameter inference block."""

    se: np.ndarray
    zscores: np.ndarray
    pvalues: np.ndarray
    fim_mode: str
    unidentified: tuple[str, ...] = ()


@dataclass
class FitIndices:
    chi2: float
    dof: float
    chi2_baseline: float
    dof_baseline: float
    rmsea: float
    gfi: float
    agfi: float
    nfi: float
    tli: float
    cfi: float
    aic: float
    bic: float
    loglik: float


def fisher_information(ps, theta, S, n, mode: str = "expected") -> np.ndarray:
    """Fisher information matrix of the free parameters at theta."""
    if mode not in FIM_MODES:
        raise ValueError(f"mode must be one of {FIM_MODES}")
    if mode == "observed":
        return (n / 2.0) * eval_mlw(ps, theta, S, hessian=True).hessian
    sigma, aux = ps.sigma_aux(theta)
    inv_sigma = np.linalg.inv(sigma)
    grads = ps.dsigma(aux)
    sg = [inv_sigma @ g for g in grads]
    m = len(sg)
    fim = np.empty((m, m))
    for i in range(m):
        for j in range(i, m):
            fim[i, j] = fim[j, i] = np.einsum("ij,ji->", sg[i], sg[j])
    return (n / 2.0) * fim


def _invert_information(fim, names):
    """inv(FIM), falling back to the pseudo-inverse when singular."""
    try:
        low = np.linalg.cholesky(fim)
        # potrf factors a rank-deficient matrix without complaint, leaving
        # rounding-noise pivots; inverting through those would produce huge
        # silent standard errors, so route such matrices to the pseudo-inverse
        # as well. 1e-10 matches the eigenvalue cutoff used below.
        pivots = np.diag(low) ** 2
        floor = 1e-10 * np.max(np.diag(fim))
        if np.all(pivots > floor):
            identity = np.eye(fim.shape[0])
            half = np.linalg.solve(low, identity)
            return half.T @ half, ()
    except np.linalg.LinAlgError:
        pass
    eigvals, eigvecs = np.linalg.eigh((fim + fim.T) / 2.0)
    tol = max(abs(eigvals.max()), 1.0) * 1e-10
    null = eigvals < tol
    flagged: set[str] = set()
    for vec in eigvecs.T[null]:
        cutoff = 0.1 * np.abs(vec).max()
        flagged.update(names[i] for i in np.flatnonzero(np.abs(vec) > cutoff))
    unidentified = tuple(sorted(flagged))
    logger.warning(
        "information matrix is singular; using pseudo-inverse "
        "(parameters possibly unidentified: %s)", ", ".join(unidentified) or "?",
    )
    return np.linalg.pinv(fim), unidentified


def infer(fit: FitResult, mode: str = "expected") -> Inference:
    """Standard errors, z-scores, and p-values; also stored on the fit."""
    fim = fisher_information(fit.system, fit.theta, fit.S, fit.n, mode)
    cov, unidentified = _invert_information(fim, fit.system.names)
    diag = np.diag(cov).copy()
    with np.errstate(invalid="ignore"):
        se = np.where(diag >= 0, np.sqrt(np.abs(diag)), np.nan)
        z = fit.theta / se
    p = 2.0 * norm.sf(np.abs(z))
    out = Inference(se, z, np.asarray(p), mode, unidentified)
    fit.se, fit.zscores, fit.pvalues = out.se, out.zscores, out.pvalues
    return out


# ---------------------------------------------------------------------------
# fit indices

def chi_square(n: int, value: float) -> float:
    """Discrepancy scaled by sample size: n * F(theta_hat)."""
    return n * value


def degrees_of_freedom(k: int, m: int) -> float:
    """Moment count k(k+1)/2 minus the number of free parameters."""
    return k * (k + 1) / 2.0 - m


def rmsea(chi2: float, df: float, n: int) -> float:
    if df <= 0 or n <= 1:
        return np.nan
    return float(np.sqrt(max(0.0, (chi2 / df - 1.0) / (n - 1.0))))

def gfi(chi2: float, chi2_baseline: float) -> float:
    if chi2_baseline == 0:
        return np.nan
    return 1.0 - chi2 / chi2_baseline


def agfi(gfi_value: float, k: int, df: float) -> float:
    if df <= 0:
        return np.nan
    return 1.0 - k * (k + 1) / (2.0 * df) * (1.0 - gfi_value)


def nfi(chi2: float, chi2_baseline: float) -> float:
    if chi2_baseline == 0:
        return np.nan
    return (chi2_baseline - chi2) / chi2_baseline


def tli(chi2: float, df: float, chi2_baseline: float, df_baseline: float) -> float:
    if df <= 0 or df_baseline <= 0:
        return np.nan
    denom = chi2_baseline / df_baseline - 1.0
    if denom <= 0:
        return np.nan
    return (chi2_baseline / df_baseline - chi2 / df) / denom


def cfi(chi2: float, df: float, chi2_baseline: float, df_baseline: float) -> float:
    denom = chi2_baseline - df_baseline
    if denom <= 0:
        return np.nan
    return 1.0 - (chi2 - df) / denom


def aic(k_params: int, loglik: float) -> float:
    return 2.0 * (k_params - loglik)


def bic(k_params: int, loglik: float, n: int) -> float:
    return float(np.log(n)) * k_params - 2.0 * loglik


def wishart_loglik(fit: FitResult) -> float:
    """Default L for AIC/BIC: -(n/2) * MLW discrepancy at the estimate.

    Additive constants of the Wishart density are dropped, matching the
    discrepancy definition; the value is therefore a log-likelihood up to
    a data-only constant. NaN when the implied covariance is not PD.
    """
    try:
        value = eval_mlw(fit.system, fit.theta, fit.S).value
    except ArithmeticError:
        logger.warning("implied covariance not PD at the estimate; L is NaN")
        return np.nan
    return -(fit.n / 2.0) * value


def fit_baseline(model, data: Dataset, objective: str = "MLW",
                 method: str = "SLSQP", **options) -> FitResult:
    """Fit the independence baseline implied by a model's variable roles."""
    desc = parse(model) if isinstance(model, str) else model
    taxonomy = classify(desc)
    variances = {
        v: float(np.var(data.column(v), ddof=1)) for v in taxonomy.z_names
    }
    ps = baseline_system(taxonomy, variances)
    return fit_system(ps, data, objective, method, **options)


def _baseline_from_fit(fit: FitResult) -> FitResult:
    """Baseline fit reusing the sample covariance stored on a fit."""
    taxonomy = fit.system.taxonomy
    z = taxonomy.z_names
    variances = {v: float(fit.S[i, i]) for i, v in enumerate(z)}
    ps = baseline_system(taxonomy, variances)
    mz = Minimizer(ps, fit.S)
    out = mz.minimize(fit.objective, fit.method)
    return FitResult(
        system=ps, n=fit.n, S=fit.S, objective=out.objective,
        method=out.method, theta=out.theta, value=out.value,
        converged=out.converged, outcome=out, chain=[out],
    )


def fit_indices(fit: FitResult, baseline: FitResult, lh: float | None = None) -> FitIndices:
    """Assemble the index block from a fit and its baseline fit.

    Both fits must have been estimated under the same objective; mixing
    discrepancies in one chi-square comparison is refused. lh overrides
    the log-likelihood used by AIC/BIC.
    """
    if fit.objective != baseline.objective:
        raise SemforgeError(
            "fit and baseline use different objectives "
            f"({fit.objective} vs {baseline.objective}); refusing to mix them"
        )
    n = fit.n
    k = len(fit.system.z_names)
    m = fit.system.n_free
    chi2 = chi_square(n, fit.value)
    df = degrees_of_freedom(k, m)
    chi2_b = chi_square(n, baseline.value)
    df_b = degrees_of_freedom(k, baseline.system.n_free)
    gfi_v = gfi(chi2, chi2_b)
    nfi_v = nfi(chi2, chi2_b)
    if np.isfinite(gfi_v) and np.isfinite(nfi_v):
        assert abs(gfi_v - nfi_v) < 1e-12, "GFI and NFI must agree identically"
    loglik = wishart_loglik(fit) if lh is None else float(lh)
    out = FitIndices(
        chi2=chi2,
        dof=df,
        chi2_baseline=chi2_b,
        dof_baseline=df_b,
        rmsea=rmsea(chi2, df, n),
        gfi=gfi_v,
        agfi=agfi(gfi_v, k, df),
        nfi=nfi_v,
        tli=tli(chi2, df, chi2_b, df_b),
        cfi=cfi(chi2, df, chi2_b, df_b),
        aic=aic(m, loglik),
        bic=bic(m, loglik, n),
        loglik=loglik,
    )
    fit.indices = out
    return out


def gather(fit: FitResult, mode: str = "expected", lh: float | None = None,
           baseline: FitResult | None = None) -> FitResult:
    """Fill a fit with inference and fit indices (fitting the baseline)."""
    infer(fit, mode)
    if baseline is None:
        baseline = _baseline_from_fit(fit)
    fit_indices(fit, baseline, lh=lh)
    return fit


# ---------------------------------------------------------------------------
# reporting

def report_dict(fit: FitResult) -> dict:
    """JSON-ready summary of a (possibly gathered) fit."""
    params = {}
    for i, name in enumerate(fit.names):
        entry: dict = {"estimate": float(fit.theta[i])}
        if fit.se is not None:
            entry["se"] = float(fit.se[i])
            entry["z"] = float(fit.zscores[i])
            entry["p"] = float(fit.pvalues[i])
        params[name] = entry
    out = {
        "objective": fit.objective,
        "method": fit.method,
        "converged": bool(fit.converged),
        "termination": fit.outcome.termination,
        "iterations": fit.outcome.iterations,
        "value": float(fit.value),
        "n": int(fit.n),
        "parameters": params,
    }
    if fit.indices is not None:
        ix = fit.indices
        out["indices"] = {
            "chi2": ix.chi2, "dof": ix.dof,
            "chi2_baseline": ix.chi2_baseline, "dof_baseline": ix.dof_baseline,
            "rmsea": ix.rmsea, "gfi": ix.gfi, "agfi": ix.agfi, "nfi": ix.nfi,
            "tli": ix.tli, "cfi": ix.cfi, "aic": ix.aic, "bic": ix.bic,
            "loglik": ix.loglik,
        }
        out["loglik_convention"] = (
            "L = -(n/2) * F_MLW(theta_hat), additive constants dropped"
        )
    return out


def report(fit: FitResult) -> str:
    """Aligned text table of estimates plus the fit-index block."""
    lines = [
        f"objective {fit.objective}, method {fit.method}: "
        + ("converged" if fit.converged else "NOT converged")
        + f" ({fit.outcome.termination}, {fit.outcome.iterations} iterations)",
        f"F(theta_hat) = {fit.value:.6g}   n = {fit.n}   "
        f"free parameters = {fit.system.n_free}",
        "",
    ]
    width = max((len(n) for n in fit.names), default=8)
    if fit.se is not None:
        lines.append(
            f"{'parameter':<{width}}  {'estimate':>12}  {'se':>10}  "
            f"{'z':>9}  {'p':>8}"
        )
        for i, name in enumerate(fit.names):
            lines.append(
                f"{name:<{width}}  {fit.theta[i]:>12.6f}  {fit.se[i]:>10.4f}  "
                f"{fit.zscores[i]:>9.3f}  {fit.pvalues[i]:>8.4f}"
            )
    else:
        lines.append(f"{'parameter':<{width}}  {'estimate':>12}")
        for i, name in enumerate(fit.names):
            lines.append(f"{name:<{width}}  {fit.theta[i]:>12.6f}")
    if fit.indices is not None:
        ix = fit.indices
        lines += [
            "",
            f"chi2 = {ix.chi2:.6g} (df {ix.dof:g})   "
            f"baseline chi2 = {ix.chi2_baseline:.6g} (df {ix.dof_baseline:g})",
            f"rmsea = {ix.rmsea:.4f}   gfi = {ix.gfi:.4f}   agfi = {ix.agfi:.4f}",
            f"nfi = {ix.nfi:.4f}   tli = {ix.tli:.4f}   cfi = {ix.cfi:.4f}",
            f"aic = {ix.aic:.4f}   bic = {ix.bic:.4f}   "
            f"L = {ix.loglik:.4f} (constants dropped)",
        ]
    return "\n".join(lines) + "\n"
