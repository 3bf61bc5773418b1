"""Independent numerical oracles shared across the test suite.

Everything here deliberately avoids the library's own derivative and
factorization code: gradients and Hessians come from finite differences,
slopes from lstsq, cycle checks from a plain DFS.
"""

from __future__ import annotations

import numpy as np

from semforge import parse
from semforge.model import MAT_BETA, MAT_LAMBDA, MAT_PSI, MAT_THETA


def fd_gradient(fun, theta, h=1e-6):
    """Central-difference gradient of a scalar function."""
    theta = np.asarray(theta, dtype=float)
    grad = np.zeros_like(theta)
    for i in range(theta.size):
        step = h * max(1.0, abs(theta[i]))
        up = theta.copy()
        dn = theta.copy()
        up[i] += step
        dn[i] -= step
        grad[i] = (fun(up) - fun(dn)) / (2.0 * step)
    return grad


def fd_hessian_values(fun, theta, h=1e-4):
    """Hessian from second differences of the scalar objective only."""
    theta = np.asarray(theta, dtype=float)
    m = theta.size
    steps = np.array([h * max(1.0, abs(t)) for t in theta])
    hess = np.zeros((m, m))
    f0 = fun(theta)
    for i in range(m):
        up = theta.copy()
        dn = theta.copy()
        up[i] += steps[i]
        dn[i] -= steps[i]
        hess[i, i] = (fun(up) - 2.0 * f0 + fun(dn)) / steps[i] ** 2
    for i in range(m):
        for j in range(i + 1, m):
            pp = theta.copy()
            pm = theta.copy()
            mp = theta.copy()
            mm = theta.copy()
            pp[i] += steps[i]
            pp[j] += steps[j]
            pm[i] += steps[i]
            pm[j] -= steps[j]
            mp[i] -= steps[i]
            mp[j] += steps[j]
            mm[i] -= steps[i]
            mm[j] -= steps[j]
            val = (fun(pp) - fun(pm) - fun(mp) + fun(mm)) / (4.0 * steps[i] * steps[j])
            hess[i, j] = val
            hess[j, i] = val
    return hess


def fd_hessian_grad(grad_fun, theta, h=1e-5):
    """Hessian from central differences of a gradient function."""
    theta = np.asarray(theta, dtype=float)
    m = theta.size
    hess = np.zeros((m, m))
    for j in range(m):
        step = h * max(1.0, abs(theta[j]))
        up = theta.copy()
        dn = theta.copy()
        up[j] += step
        dn[j] -= step
        hess[:, j] = (grad_fun(up) - grad_fun(dn)) / (2.0 * step)
    return 0.5 * (hess + hess.T)


def max_rel_err(approx, ref, floor_frac=1e-4, floor_abs=1e-10):
    """Worst relative error with a floor so near-zero entries compare absolutely."""
    approx = np.asarray(approx, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if ref.size == 0:
        return 0.0
    scale = max(float(np.max(np.abs(ref))), floor_abs)
    denom = np.maximum(np.abs(ref), max(floor_frac * scale, floor_abs))
    return float(np.max(np.abs(approx - ref) / denom))


def ols_slope(x, y):
    """Slope of y on x with intercept, via lstsq."""
    x = np.asarray(x, dtype=float)
    design = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(design, np.asarray(y, dtype=float), rcond=None)
    return float(coef[1])


def regression_edges(model_text):
    """Directed edges regressor -> dependent from the model's regressions."""
    desc = parse(model_text)
    edges = []
    for stmt in desc.regressions:
        dep = stmt.lhs[0]
        for term in stmt.rhs:
            edges.append((term.name, dep))
    return edges


def has_cycle(edges):
    """DFS three-color cycle check on a directed edge list."""
    adjacency = {}
    for src, dst in edges:
        adjacency.setdefault(src, []).append(dst)
        adjacency.setdefault(dst, [])
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {node: WHITE for node in adjacency}

    def visit(node):
        color[node] = GRAY
        for nxt in adjacency[node]:
            if color[nxt] == GRAY:
                return True
            if color[nxt] == WHITE and visit(nxt):
                return True
        color[node] = BLACK
        return False

    return any(color[node] == WHITE and visit(node) for node in list(adjacency))


def perturbed_theta(ps, rng, spread=0.2, min_variance=0.05):
    """Random point near the start values, keeping variances safely positive."""
    theta = ps.start + rng.uniform(-spread, spread, size=ps.n_free)
    theta[ps.variance_mask] = np.maximum(theta[ps.variance_mask], min_variance)
    return theta


def truth_theta(ps, theta_true, exo_variance=1.1, endo_variance=0.1, noise_variance=0.1):
    """Parameter vector matching the generator's data-producing process.

    Path and loading entries come from theta_true; variance entries use the
    generator's noise layout (unit exogenous shocks plus noise), covariances
    stay at zero.
    """
    taxonomy = ps.taxonomy
    theta = ps.start.copy()
    for name, value in theta_true.items():
        theta[ps.param_index[name]] = value
    endo = set(taxonomy.eta_endo) | set(taxonomy.x_endo)
    exo_latent = set(taxonomy.eta_exo)
    manifests = set(taxonomy.manifests)
    for idx, name in enumerate(ps.names):
        if " ~~ " not in name:
            continue
        left, right = name.split(" ~~ ")
        if left != right:
            theta[idx] = 0.0
        elif left in manifests:
            theta[idx] = noise_variance
        elif left in endo:
            theta[idx] = endo_variance
        elif left in exo_latent:
            theta[idx] = exo_variance
    return theta


# Four latents, five observed structural variables, six manifests; contains a
# feedback loop (x3 -> eta4 -> x4 -> x3), a manifest shared by two latents
# (y2), two latents anchored on the same manifest (y4), and user covariances
# in both parts.  Every latent also has one exclusive manifest, so the
# loading pattern is identified and the model is safe to fit.
SHOWCASE_TEXT = """\
# structural part
eta3 ~ x1 + x2
eta4 ~ x3
x3 ~ eta1 + eta2 + x1 + x4
x4 ~ eta4
x5 ~ x4

# measurement part
eta1 =~ y1 + y2
eta2 =~ y2 + y3
eta3 =~ y4 + y5
eta4 =~ y4 + y6

# extra covariances
eta2 ~~ x2
y5 ~~ y6
"""

# Data-generating values for SHOWCASE_TEXT.  Structural order below is
# eta1..eta4, x1..x5.
SHOWCASE_BETA = {
    ("eta3", "x1"): 0.7,
    ("eta3", "x2"): -0.5,
    ("eta4", "x3"): 0.6,
    ("x3", "eta1"): 0.5,
    ("x3", "eta2"): 0.4,
    ("x3", "x1"): 0.3,
    ("x3", "x4"): 0.4,
    ("x4", "eta4"): 0.5,
    ("x5", "x4"): 0.8,
}
SHOWCASE_LAMBDA = {
    ("y1", "eta1"): 1.0,
    ("y2", "eta1"): 0.8,
    ("y2", "eta2"): 1.0,
    ("y3", "eta2"): 0.7,
    ("y4", "eta3"): 1.0,
    ("y4", "eta4"): 1.0,
    ("y5", "eta3"): 0.7,
    ("y6", "eta4"): 0.9,
}
_SHOWCASE_OMEGA = ("eta1", "eta2", "eta3", "eta4", "x1", "x2", "x3", "x4", "x5")
_SHOWCASE_MANIFESTS = ("y1", "y2", "y3", "y4", "y5", "y6")


def simulate_showcase(n=800, seed=20240817):
    """Simulate SHOWCASE_TEXT data by solving the structural system directly."""
    from semforge import Dataset

    rng = np.random.default_rng(seed)
    k = len(_SHOWCASE_OMEGA)
    idx = {name: i for i, name in enumerate(_SHOWCASE_OMEGA)}

    beta = np.zeros((k, k))
    for (dep, reg), value in SHOWCASE_BETA.items():
        beta[idx[dep], idx[reg]] = value

    psi = np.zeros((k, k))
    for name in ("eta1", "eta2", "x1", "x2"):
        psi[idx[name], idx[name]] = 1.0
    for name in ("eta3", "eta4", "x3", "x4", "x5"):
        psi[idx[name], idx[name]] = 0.3
    psi[idx["eta1"], idx["eta2"]] = psi[idx["eta2"], idx["eta1"]] = 0.3
    psi[idx["eta2"], idx["x2"]] = psi[idx["x2"], idx["eta2"]] = 0.2

    eps = rng.standard_normal((n, k)) @ np.linalg.cholesky(psi).T
    omega = np.linalg.solve(np.eye(k) - beta, eps.T).T

    theta = np.full((6, 6), 0.0)
    np.fill_diagonal(theta, 0.3)
    theta[4, 5] = theta[5, 4] = 0.1
    delta = rng.standard_normal((n, 6)) @ np.linalg.cholesky(theta).T

    lam = np.zeros((6, k))
    for (man, lat), value in SHOWCASE_LAMBDA.items():
        lam[_SHOWCASE_MANIFESTS.index(man), idx[lat]] = value
    manifest_block = omega @ lam.T + delta

    # deliberately scrambled column order: builds must not depend on it
    names = ["y3", "x2", "y1", "x4", "y6", "x1", "y4", "x5", "y2", "x3", "y5"]
    columns = {m: manifest_block[:, _SHOWCASE_MANIFESTS.index(m)] for m in _SHOWCASE_MANIFESTS}
    columns.update({v: omega[:, idx[v]] for v in ("x1", "x2", "x3", "x4", "x5")})
    rows = np.column_stack([columns[name] for name in names])
    return Dataset(names=tuple(names), rows=rows)


# Reference model whose full matrix layout is pinned cell by cell below.
# It packs the tricky layout rules into one graph: a feedback loop, a
# manifest loading on two latents, two latents sharing an anchor manifest,
# a residual covariance between outputs of different kinds (eta3, x5), and
# user covariances in both parts.
PATTERN_TEXT = """\
eta3 ~ x1 + x2
eta4 ~ x3
x3 ~ eta1 + eta2 + x1 + x4
x4 ~ eta4
x5 ~ x4
eta1 =~ y1 + y2 + y3
eta2 =~ y3
eta3 =~ y4 + y5
eta4 =~ y4 + y6
eta2 ~~ x2
y5 ~~ y6
"""

# Expected non-zero cells.  Keys are (row-var, col-var) for the ordered
# matrices and frozensets for the symmetric ones; anything not listed must
# classify as 'zero'.
PATTERN_B_FREE = {
    ("eta3", "x1"), ("eta3", "x2"),
    ("eta4", "x3"),
    ("x3", "eta1"), ("x3", "eta2"), ("x3", "x1"), ("x3", "x4"),
    ("x4", "eta4"),
    ("x5", "x4"),
}
PATTERN_LAMBDA_FIXED = {
    ("y1", "eta1"), ("y3", "eta2"), ("y4", "eta3"), ("y4", "eta4"),
    ("x1", "x1"), ("x2", "x2"), ("x3", "x3"), ("x4", "x4"), ("x5", "x5"),
}
PATTERN_LAMBDA_FREE = {
    ("y2", "eta1"), ("y3", "eta1"), ("y5", "eta3"), ("y6", "eta4"),
}
PATTERN_PSI_FREE = {
    frozenset(p) for p in [
        ("eta1", "eta1"), ("eta2", "eta2"), ("eta1", "eta2"),
        ("eta3", "eta3"), ("eta4", "eta4"),
        ("x3", "x3"), ("x4", "x4"), ("x5", "x5"),
        ("eta3", "x5"),
        ("eta2", "x2"),
    ]
}
PATTERN_PSI_FIXED = {
    frozenset(p) for p in [("x1", "x1"), ("x2", "x2"), ("x1", "x2")]
}
PATTERN_THETA_FREE = {
    frozenset(p) for p in [
        ("y1", "y1"), ("y2", "y2"), ("y3", "y3"),
        ("y4", "y4"), ("y5", "y5"), ("y6", "y6"),
        ("y5", "y6"),
    ]
}


def pattern_mismatches(ps):
    """Compare every cell of every matrix against the pinned layout."""
    omega = list(ps.omega_names)
    z = list(ps.z_names)
    spec = [
        (MAT_BETA, omega, omega, set(), PATTERN_B_FREE, False),
        (MAT_LAMBDA, z, omega, PATTERN_LAMBDA_FIXED, PATTERN_LAMBDA_FREE, False),
        (MAT_PSI, omega, omega, PATTERN_PSI_FIXED, PATTERN_PSI_FREE, True),
        (MAT_THETA, z, z, set(), PATTERN_THETA_FREE, True),
    ]
    bad = []
    for mat, rows, cols, fixed, free, unordered in spec:
        pat = ps.pattern(mat)
        for i, r in enumerate(rows):
            for j, c in enumerate(cols):
                key = frozenset((r, c)) if unordered else (r, c)
                want = "fixed" if key in fixed else ("free" if key in free else "zero")
                if pat[i, j] != want:
                    bad.append(f"{mat}[{r},{c}]: expected {want}, got {pat[i, j]}")
    return bad


def set3_config(**overrides):
    """The stock small-graph configuration (set 3), optionally tweaked."""
    import dataclasses

    from semforge import standard_sets

    base = standard_sets()[2]
    return dataclasses.replace(base, **overrides) if overrides else base


def make_case(seed, **overrides):
    from semforge import generate

    return generate(set3_config(**overrides), seed=seed)


def random_model_text(rng, max_statements=10):
    """Random syntactically valid model text for round-trip fuzzing."""
    pool = [f"v{i}" for i in range(12)] + ["alpha", "beta_2", "_hidden", "Z9"]
    n_statements = int(rng.integers(1, max_statements + 1))
    seen = set()
    lines = []
    for _ in range(n_statements):
        kind = rng.choice(["~", "=~", "~~", "is"])
        if kind == "is":
            group = sorted(rng.choice(pool, size=int(rng.integers(1, 4)), replace=False))
            lines.append(", ".join(group) + " is ordinal")
            continue
        lhs = str(rng.choice(pool))
        if kind == "~~":
            rhs_names = [str(rng.choice(pool))]
        else:
            size = int(rng.integers(1, 4))
            rhs_names = list(rng.choice(pool, size=size, replace=False))
        if kind == "~~":
            keys = [(kind, frozenset((lhs, rhs_names[0])))]
        else:
            keys = [(kind, lhs, name) for name in rhs_names]
        if any(key in seen for key in keys):
            continue
        seen.update(keys)
        terms = []
        for name in rhs_names:
            if rng.random() < 0.3:
                value = float(np.round(rng.uniform(-5, 5), 3))
                terms.append(f"{value}*{name}")
            else:
                terms.append(name)
        pad = " " * int(rng.integers(0, 3))
        lines.append(f"{lhs}{pad} {kind} " + " + ".join(terms))
        if rng.random() < 0.2:
            lines.append("# interlude")
        if rng.random() < 0.1:
            lines.append("")
    return "\n".join(lines)
