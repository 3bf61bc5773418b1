"""Variable taxonomy, parameter layout, and the implied covariance.

The model has a structural part over omega = [latents; observed-structural]
and a measurement part over z = [manifests; observed-structural]:

    omega = beta @ omega + zeta,   z = lamb @ omega + delta

giving the implied covariance of z

    sigma = lamb @ C @ psi @ C.T @ lamb.T + theta,   C = inv(I - beta).

Matrix layout rules applied by build():

* omega order is all latents then all observed-structural variables, each
  group alphabetically; z order is all manifests then observed-structural,
  likewise alphabetical.
* lamb carries the loading cells over latent columns plus an identity
  block mapping each observed-structural variable to itself; theta is
  nonzero only on the manifest block.
* In each lamb column the alphabetically first manifest of that latent is
  pinned to 1, unless the user pinned some loading in the column herself.
* psi: the exogenous-latent block is fully parametrised; the
  exogenous-observed block is pinned to the sample covariance of those
  columns; endogenous variables get free variances, plus free covariances
  between pairs of endogenous variables that never act as regressors;
  remaining cells are zero unless a covariance statement frees or pins
  them explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import DataError, ModelError, SingularityError
from .syntax import COVARIANCE, LOADING, REGRESSION, ModelDescription

MAT_BETA = "beta"
MAT_LAMBDA = "lambda"
MAT_PSI = "psi"
MAT_THETA = "theta"

#: Default starting value for a free variance that has no data-driven rule.
START_VARIANCE = 0.05


@dataclass(frozen=True)
class VariableTaxonomy:
    """Role assignment for every variable mentioned by the model.

    Latent variables are exactly the left-hand sides of loadings, manifests
    exactly the right-hand sides. A variable is endogenous when it is the
    left-hand side of at least one regression, exogenous otherwise.
    """

    eta_exo: tuple[str, ...]
    eta_endo: tuple[str, ...]
    x_exo: tuple[str, ...]
    x_endo: tuple[str, ...]
    manifests: tuple[str, ...]

    @property
    def latents(self) -> tuple[str, ...]:
        return tuple(sorted(self.eta_exo + self.eta_endo))

    @property
    def observed_structural(self) -> tuple[str, ...]:
        return tuple(sorted(self.x_exo + self.x_endo))

    @property
    def omega_names(self) -> tuple[str, ...]:
        return self.latents + self.observed_structural

    @property
    def z_names(self) -> tuple[str, ...]:
        return self.manifests + self.observed_structural


def classify(desc: ModelDescription) -> VariableTaxonomy:
    """Assign every referenced variable to exactly one role.

    Raises ModelError naming the offending variable when the statements
    contradict each other (latent that is also a manifest, manifest used
    in the structural part, covariance linking the two parts).
    """
    latents: set[str] = set()
    manifests: set[str] = set()
    for st in desc.by_kind(LOADING):
        latents.add(st.lhs[0])
        manifests.update(t.name for t in st.rhs)
    for v in sorted(latents & manifests):
        raise ModelError(f"variable {v!r} is declared both latent and manifest")

    struct_vars: set[str] = set()
    endo: set[str] = set()
    for st in desc.by_kind(REGRESSION):
        endo.add(st.lhs[0])
        struct_vars.add(st.lhs[0])
        struct_vars.update(t.name for t in st.rhs)
    for v in sorted(struct_vars & manifests):
        raise ModelError(f"manifest variable {v!r} cannot enter the structural part")

    for st in desc.by_kind(COVARIANCE):
        a, b = st.lhs[0], st.rhs[0].name
        in_y = (a in manifests, b in manifests)
        if in_y[0] != in_y[1]:
            raise ModelError(
                f"covariance {a} ~~ {b} links the measurement and structural parts"
            )
        if not in_y[0]:
            struct_vars.update((a, b))

    xs = struct_vars - latents
    return VariableTaxonomy(
        eta_exo=tuple(sorted(latents - endo)),
        eta_endo=tuple(sorted(latents & endo)),
        x_exo=tuple(sorted(xs - endo)),
        x_endo=tuple(sorted(xs & endo)),
        manifests=tuple(sorted(manifests)),
    )


@dataclass(frozen=True)
class Placement:
    """One cell assignment in a model matrix.

    index is the position in the free-parameter vector, or None when the
    cell is pinned to value. symmetric placements also write (col, row).
    """

    mat: str
    row: int
    col: int
    index: int | None
    value: float | None
    symmetric: bool = False


class ParamSystem:
    """Frozen parameter layout produced by build().

    Attributes
    ----------
    taxonomy : VariableTaxonomy
    omega_names, z_names : tuple of str
    placements : list of Placement
        Every non-structural cell, free and pinned, in canonical order.
    names : list of str
        One canonical label per free parameter ("a ~ b", "l =~ m", "a ~~ b").
    start : ndarray
        Starting point for estimation.
    bounds : list of (lo, hi)
        Box bounds per free parameter; variances get (0, None).

    The instance is treated as immutable once built: evaluation methods
    never modify it.
    """

    def __init__(self, taxonomy, placements, names, start, bounds, base):
        self.taxonomy = taxonomy
        self.omega_names = taxonomy.omega_names
        self.z_names = taxonomy.z_names
        self.placements = placements
        self.names = names
        self.start = np.asarray(start, dtype=float)
        self.bounds = bounds
        self._base = base
        self._free = [p for p in placements if p.index is not None]
        self._free.sort(key=lambda p: p.index)
        self.param_index = {name: k for k, name in enumerate(names)}

    @property
    def n_free(self) -> int:
        return len(self.names)

    @property
    def free_placements(self) -> list[Placement]:
        return list(self._free)

    @property
    def variance_mask(self) -> np.ndarray:
        """True for parameters bounded below by 0."""
        return np.array([lo == 0 for lo, _ in self.bounds], dtype=bool)

    def estimates(self, theta) -> dict[str, float]:
        theta = self._check_theta(theta)
        return {name: float(v) for name, v in zip(self.names, theta)}

    def _check_theta(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_free,):
            raise ValueError(
                f"expected {self.n_free} parameter values, got shape {theta.shape}"
            )
        return theta

    def matrices(self, theta) -> dict[str, np.ndarray]:
        """Assemble beta, lambda, psi, theta for a parameter vector."""
        theta = self._check_theta(theta)
        mats = {k: v.copy() for k, v in self._base.items()}
        for p in self.placements:
            val = p.value if p.index is None else theta[p.index]
            mats[p.mat][p.row, p.col] = val
            if p.symmetric:
                mats[p.mat][p.col, p.row] = val
        return mats

    def sigma_aux(self, theta):
        """Implied covariance plus the reusable intermediates.

        Returns (sigma, aux) where aux holds the assembled matrices and
        C = inv(I - beta), M = lamb @ C, D = C @ psi @ M.T, used by the
        derivative routines. Raises SingularityError when (I - beta) is
        singular.
        """
        mats = self.matrices(theta)
        b, lamb, psi, theta_m = (
            mats[MAT_BETA],
            mats[MAT_LAMBDA],
            mats[MAT_PSI],
            mats[MAT_THETA],
        )
        imb = np.eye(b.shape[0]) - b
        try:
            c = np.linalg.solve(imb, np.eye(b.shape[0]))
        except np.linalg.LinAlgError:
            raise SingularityError("(I - beta) is singular") from None
        m = lamb @ c
        d = c @ psi @ m.T
        sigma = lamb @ d + theta_m
        sigma = (sigma + sigma.T) / 2.0
        if not np.isfinite(sigma).all():
            raise SingularityError("implied covariance overflowed")
        aux = {"mats": mats, "c": c, "m": m, "d": d}
        return sigma, aux

    def sigma(self, theta) -> np.ndarray:
        """Implied covariance of the z variables at theta."""
        return self.sigma_aux(theta)[0]

    def dsigma(self, aux) -> list[np.ndarray]:
        """d(sigma)/d(theta_i) for every free parameter, given sigma_aux output.

        Each derivative is assembled from the single-entry seed of that
        parameter's cell via rank-one updates on the reduced form.
        """
        m, d = aux["m"], aux["d"]
        nz = m.shape[0]
        grads = []
        for p in self._free:
            g = np.zeros((nz, nz))
            if p.mat == MAT_BETA:
                z = np.outer(m[:, p.row], d[p.col, :])
                g = z + z.T
            elif p.mat == MAT_LAMBDA:
                g[p.row, :] = d[p.col, :]
                g = g + g.T
            elif p.mat == MAT_PSI:
                g = np.outer(m[:, p.row], m[:, p.col])
                if p.row != p.col:
                    g = g + g.T
            else:  # theta
                g[p.row, p.col] = 1.0
                g[p.col, p.row] = 1.0
            grads.append(g)
        return grads

    def d2sigma(self, i: int, j: int, aux) -> np.ndarray | None:
        """Second derivative of sigma w.r.t. free parameters i and j.

        Returns None when the second derivative is identically zero
        (any pair involving theta, and psi-psi pairs).
        """
        a, b = self._free[i], self._free[j]
        if MAT_THETA in (a.mat, b.mat):
            return None
        if a.mat == MAT_PSI and b.mat == MAT_PSI:
            return None
        # Order the pair so the handful of cases below is exhaustive.
        rank = {MAT_BETA: 0, MAT_LAMBDA: 1, MAT_PSI: 2}
        if rank[a.mat] > rank[b.mat]:
            a, b = b, a
        c, m, d = aux["c"], aux["m"], aux["d"]
        lamb, psi = aux["mats"][MAT_LAMBDA], aux["mats"][MAT_PSI]
        q = c @ psi @ c.T
        nz = m.shape[0]

        if a.mat == MAT_BETA and b.mat == MAT_BETA:
            r, s = a.row, a.col
            u, v = b.row, b.col
            z = c[v, r] * np.outer(m[:, u], d[s, :])
            z += c[s, u] * np.outer(m[:, r], d[v, :])
            z += q[s, v] * np.outer(m[:, r], m[:, u])
            return z + z.T
        if a.mat == MAT_BETA and b.mat == MAT_LAMBDA:
            r, s = a.row, a.col
            i_z, k = b.row, b.col
            dq = np.outer(c[:, r], q[s, :])
            dq = dq + dq.T
            z = np.zeros((nz, nz))
            z[i_z, :] = (dq @ lamb.T)[k, :]
            return z + z.T
        if a.mat == MAT_BETA and b.mat == MAT_PSI:
            u, v = a.row, a.col
            r, s = b.row, b.col
            w = c[v, r] * m[:, s]
            if r != s:
                w = w + c[v, s] * m[:, r]
            z = np.outer(m[:, u], w)
            return z + z.T
        if a.mat == MAT_LAMBDA and b.mat == MAT_LAMBDA:
            iz, k = a.row, a.col
            jz, l = b.row, b.col
            g = np.zeros((nz, nz))
            g[iz, jz] += q[k, l]
            g[jz, iz] += q[k, l]
            return g
        # lambda-psi
        iz, k = a.row, a.col
        r, s = b.row, b.col
        u = np.outer(c[:, r], c[:, s])
        if r != s:
            u = u + u.T
        z = np.zeros((nz, nz))
        z[iz, :] = (u @ lamb.T)[k, :]
        return z + z.T

    def pattern(self, mat: str) -> np.ndarray:
        """Cell classification for one matrix: 'zero', 'free' or 'fixed'.

        Structural constants (the lambda identity block) count as 'fixed',
        as do pinned loadings and the sample-covariance block of psi.
        """
        shape = self._base[mat].shape
        out = np.full(shape, "zero", dtype=object)
        out[self._base[mat] != 0] = "fixed"
        for p in self.placements:
            if p.mat != mat:
                continue
            tag = "free" if p.index is not None else "fixed"
            out[p.row, p.col] = tag
            if p.symmetric:
                out[p.col, p.row] = tag
        return out


def _slope_start(data: Dataset, manifest: str, anchor: str) -> float:
    """Least-squares slope of manifest on the latent's first indicator."""
    x = data.column(anchor)
    y = data.column(manifest)
    vx = float(np.var(x, ddof=1))
    if vx < 1e-12:
        return 0.0
    cov = float(np.cov(x, y, ddof=1)[0, 1])
    return cov / vx


def _collect_cells(desc: ModelDescription, taxonomy: VariableTaxonomy):
    """Gather user-declared cells, keyed for conflict detection."""
    beta: dict[tuple[str, str], float | None] = {}
    lamb: dict[tuple[str, str], float | None] = {}
    psi: dict[tuple[str, str], float | None] = {}
    theta: dict[tuple[str, str], float | None] = {}
    manifests = set(taxonomy.manifests)

    for st in desc.by_kind(REGRESSION):
        dep = st.lhs[0]
        for t in st.rhs:
            if (dep, t.name) in beta:
                raise ModelError(f"path {dep} ~ {t.name} declared twice")
            beta[(dep, t.name)] = t.fixed
    for st in desc.by_kind(LOADING):
        lat = st.lhs[0]
        for t in st.rhs:
            if (t.name, lat) in lamb:
                raise ModelError(f"loading {lat} =~ {t.name} declared twice")
            lamb[(t.name, lat)] = t.fixed
    for st in desc.by_kind(COVARIANCE):
        a, b = st.lhs[0], st.rhs[0].name
        key = tuple(sorted((a, b)))
        target = theta if a in manifests else psi
        if key in target:
            raise ModelError(f"covariance {a} ~~ {b} declared twice")
        target[key] = st.rhs[0].fixed
    return beta, lamb, psi, theta


def build(desc: ModelDescription, data: Dataset, baseline: bool = False) -> ParamSystem:
    """Lay out the four model matrices and the free-parameter vector.

    Starting values: regressions 0; free loadings the least-squares slope
    on the latent's first indicator; manifest residual variances half the
    sample variance; remaining free variances 0.05 and covariances 0.

    With baseline=True the layout is the independence variant used for
    incremental fit indices: only manifest residual variances and
    observed-structural variances stay free (started at the sample
    variances), every other cell is pinned to zero.

    Raises ModelError for contradictory or unsupported models (including
    any ordinal type declaration) and DataError when columns are missing
    or the sample is too small.
    """
    decls = desc.typedecls
    if decls:
        names = sorted({v for st in decls for v in st.lhs})
        raise ModelError(
            "ordinal variables are not supported: " + ", ".join(names)
        )
    taxonomy = classify(desc)
    if not taxonomy.z_names:
        raise ModelError("model declares no observed variables")
    data.subset(taxonomy.z_names)  # raises DataError listing missing columns
    if data.n < 2:
        raise DataError("need at least 2 rows to build a model")

    omega = taxonomy.omega_names
    z = taxonomy.z_names
    w_idx = {v: k for k, v in enumerate(omega)}
    z_idx = {v: k for k, v in enumerate(z)}
    n_w, n_z = len(omega), len(z)

    base = {
        MAT_BETA: np.zeros((n_w, n_w)),
        MAT_LAMBDA: np.zeros((n_z, n_w)),
        MAT_PSI: np.zeros((n_w, n_w)),
        MAT_THETA: np.zeros((n_z, n_z)),
    }
    for v in taxonomy.observed_structural:
        base[MAT_LAMBDA][z_idx[v], w_idx[v]] = 1.0

    if baseline:
        variances = {v: float(np.var(data.column(v), ddof=1)) for v in z}
        return baseline_system(taxonomy, variances)

    beta_cells, lamb_cells, psi_user, theta_user = _collect_cells(desc, taxonomy)

    manifests_of: dict[str, list[str]] = {}
    for m, lat in lamb_cells:
        manifests_of.setdefault(lat, []).append(m)
    for lat, ms in manifests_of.items():
        ms.sort()
        if all(lamb_cells[(m, lat)] is None for m in ms):
            lamb_cells[(ms[0], lat)] = 1.0  # scale anchor

    # psi defaults before user overrides: cell -> (kind, value-or-start)
    psi_cells: dict[tuple[str, str], tuple[str, float]] = {}
    exo_x = taxonomy.x_exo
    if exo_x:
        s_block = data.covariance(exo_x)
        for i, a in enumerate(exo_x):
            for j, b in enumerate(exo_x[i:], start=i):
                psi_cells[(a, b) if a <= b else (b, a)] = ("fixed", s_block[i, j])
    for i, a in enumerate(taxonomy.eta_exo):
        for b in taxonomy.eta_exo[i:]:
            start = START_VARIANCE if a == b else 0.0
            psi_cells[tuple(sorted((a, b)))] = ("free", start)
    endo = tuple(sorted(taxonomy.eta_endo + taxonomy.x_endo))
    regressors = {
        t.name for st in desc.by_kind(REGRESSION) for t in st.rhs
    }
    for v in endo:
        psi_cells[(v, v)] = ("free", START_VARIANCE)
    outputs = [v for v in endo if v not in regressors]
    for i, a in enumerate(outputs):
        for b in outputs[i + 1 :]:
            psi_cells[tuple(sorted((a, b)))] = ("free", 0.0)
    for (a, b), fixed in psi_user.items():
        if fixed is not None:
            psi_cells[(a, b)] = ("fixed", fixed)
        else:
            psi_cells[(a, b)] = ("free", START_VARIANCE if a == b else 0.0)

    theta_cells: dict[tuple[str, str], tuple[str, float]] = {}
    for m in taxonomy.manifests:
        theta_cells[(m, m)] = ("free", float(np.var(data.column(m), ddof=1)) / 2.0)
    for (a, b), fixed in theta_user.items():
        if fixed is not None:
            theta_cells[(a, b)] = ("fixed", fixed)
        elif a != b:
            theta_cells[(a, b)] = ("free", 0.0)
        # a free diagonal entry is already free by default

    placements: list[Placement] = []
    names: list[str] = []
    start: list[float] = []
    bounds: list[tuple] = []

    def emit(mat, row, col, name, spec, variance, symmetric=False):
        kind, val = spec
        if kind == "fixed":
            placements.append(Placement(mat, row, col, None, float(val), symmetric))
            return
        placements.append(Placement(mat, row, col, len(names), None, symmetric))
        names.append(name)
        start.append(float(val))
        bounds.append((0, None) if variance else (None, None))

    for (dep, reg) in sorted(beta_cells, key=lambda c: (w_idx[c[0]], w_idx[c[1]])):
        fixed = beta_cells[(dep, reg)]
        spec = ("fixed", fixed) if fixed is not None else ("free", 0.0)
        emit(MAT_BETA, w_idx[dep], w_idx[reg], f"{dep} ~ {reg}", spec, False)
    for (man, lat) in sorted(lamb_cells, key=lambda c: (z_idx[c[0]], w_idx[c[1]])):
        fixed = lamb_cells[(man, lat)]
        anchor = manifests_of[lat][0]
        spec = (
            ("fixed", fixed)
            if fixed is not None
            else ("free", _slope_start(data, man, anchor))
        )
        emit(MAT_LAMBDA, z_idx[man], w_idx[lat], f"{lat} =~ {man}", spec, False)
    for (a, b) in sorted(psi_cells, key=lambda c: (w_idx[c[0]], w_idx[c[1]])):
        emit(
            MAT_PSI,
            w_idx[a],
            w_idx[b],
            f"{a} ~~ {b}",
            psi_cells[(a, b)],
            variance=a == b,
            symmetric=a != b,
        )
    for (a, b) in sorted(theta_cells, key=lambda c: (z_idx[c[0]], z_idx[c[1]])):
        emit(
            MAT_THETA,
            z_idx[a],
            z_idx[b],
            f"{a} ~~ {b}",
            theta_cells[(a, b)],
            variance=a == b,
            symmetric=a != b,
        )
    return ParamSystem(taxonomy, placements, names, start, bounds, base)


def baseline_system(taxonomy: VariableTaxonomy, variances: dict) -> ParamSystem:
    """Independence layout: only the observed variances stay free.

    Loadings, regressions, latent variances, and every covariance are
    pinned to zero, so the implied matrix is diagonal. variances maps each
    observed variable to its sample variance, used for starting values
    (manifests start at half of it, as in the full layout).
    """
    omega, z = taxonomy.omega_names, taxonomy.z_names
    w_idx = {v: k for k, v in enumerate(omega)}
    z_idx = {v: k for k, v in enumerate(z)}
    base = {
        MAT_BETA: np.zeros((len(omega), len(omega))),
        MAT_LAMBDA: np.zeros((len(z), len(omega))),
        MAT_PSI: np.zeros((len(omega), len(omega))),
        MAT_THETA: np.zeros((len(z), len(z))),
    }
    for v in taxonomy.observed_structural:
        base[MAT_LAMBDA][z_idx[v], w_idx[v]] = 1.0

    placements: list[Placement] = []
    names: list[str] = []
    start: list[float] = []
    bounds: list[tuple] = []
    for v in taxonomy.manifests:
        placements.append(Placement(MAT_THETA, z_idx[v], z_idx[v], len(names), None))
        names.append(f"{v} ~~ {v}")
        start.append(variances[v] / 2.0)
        bounds.append((0, None))
    for v in taxonomy.observed_structural:
        placements.append(Placement(MAT_PSI, w_idx[v], w_idx[v], len(names), None))
        names.append(f"{v} ~~ {v}")
        start.append(variances[v])
        bounds.append((0, None))
    return ParamSystem(taxonomy, placements, names, start, bounds, base)
