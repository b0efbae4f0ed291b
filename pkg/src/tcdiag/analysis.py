"""Statistical analysis: Binder crossings, finite-size-scaling collapse,
topological-negativity extraction and resampled error bars."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq, minimize

from .errors import ConfigError
from .spinmc import EstimateResult, MomentAccumulator, merge_accumulators

# Pairs of sizes closer than this are dominated by finite-size drift and get
# their crossing weight suppressed.
CLOSE_PAIR_GAP = 8
CLOSE_PAIR_PENALTY = 0.25


@dataclass
class BinderCurve:
    L: int
    p: np.ndarray
    value: np.ndarray
    error: np.ndarray

    def interpolator(self, values=None):
        return PchipInterpolator(self.p, self.value if values is None else values)


@dataclass
class CrossingResult:
    p_c: float
    error: float
    flag: str = "ok"                    # ok | no-crossing
    pair_estimates: list = field(default_factory=list)


def _pair_crossing(c1: BinderCurve, c2: BinderCurve, v1=None, v2=None):
    lo = max(c1.p.min(), c2.p.min())
    hi = min(c1.p.max(), c2.p.max())
    if not lo < hi:
        return None
    f1 = c1.interpolator(v1)
    f2 = c2.interpolator(v2)
    grid = np.linspace(lo, hi, 256)
    diff = f1(grid) - f2(grid)
    sign_change = np.nonzero(diff[:-1] * diff[1:] < 0)[0]
    if len(sign_change) == 0:
        return None
    # with several brackets keep the steepest (cleanest) intersection
    best, best_slope = None, -1.0
    for i in sign_change:
        root = brentq(lambda x: f1(x) - f2(x), grid[i], grid[i + 1])
        eps = (hi - lo) * 1e-4
        slope = abs((f1(root + eps) - f2(root + eps)) - (f1(root - eps) - f2(root - eps)))
        if slope > best_slope:
            best, best_slope = root, slope
    return best


def binder_crossing(curves: list[BinderCurve], n_bootstrap: int = 200,
                    seed: int = 0) -> CrossingResult:
    """Pooled crossing point of Binder curves for different sizes.

    Monotone cubic interpolation per curve, pairwise root finding, and an
    inverse-variance weighted pool; errors come from re-deriving the pooled
    estimate on Gaussian-resampled curves.
    """
    if len(curves) < 2:
        raise ConfigError("need at least two system sizes for a crossing")
    curves = sorted(curves, key=lambda c: c.L)
    rng = np.random.default_rng(seed)

    def pooled(resample: bool):
        vals = {}
        if resample:
            vals = {c.L: c.value + rng.standard_normal(len(c.p)) * c.error for c in curves}
        pairs = []
        for i in range(len(curves)):
            for j in range(i + 1, len(curves)):
                ci, cj = curves[i], curves[j]
                root = _pair_crossing(ci, cj, vals.get(ci.L), vals.get(cj.L))
                if root is None:
                    continue
                weight = 1.0
                if cj.L - ci.L < CLOSE_PAIR_GAP:
                    weight *= CLOSE_PAIR_PENALTY
                pairs.append((ci.L, cj.L, root, weight))
        if not pairs:
            return None, []
        roots = np.array([p[2] for p in pairs])
        weights = np.array([p[3] for p in pairs])
        return float(np.average(roots, weights=weights)), pairs

    center, pairs = pooled(resample=False)
    if center is None:
        return CrossingResult(math.nan, math.nan, flag="no-crossing")
    boots = []
    for _ in range(n_bootstrap):
        est, _ = pooled(resample=True)
        if est is not None:
            boots.append(est)
    err = float(np.std(boots, ddof=1)) if len(boots) > 10 else math.inf
    return CrossingResult(center, err, pair_estimates=pairs)


# -- finite-size scaling ------------------------------------------------------


@dataclass
class ScalingFit:
    p_c: float
    nu: float
    beta: float
    collapse_cost: float
    data_window: dict
    flag: str = "ok"                    # ok | not-converged
    starts: list = field(default_factory=list)


def _collapse_cost_one(x, y, err, sizes, k_neighbors=10):
    """Residual of each scaled point against a local quadratic fit through
    its nearest scaled neighbors from the other system sizes.

    Neighbors must bracket the point (no extrapolation), and the residual is
    normalized by the point variance plus the prediction variance of the
    local fit, so a perfect collapse costs about one per point.
    """
    n = len(x)
    if n < 5:
        return 0.0
    dxm = x[None, :] - x[:, None]
    dist = np.abs(dxm)
    dist[sizes[None, :] == sizes[:, None]] = np.inf
    k = min(k_neighbors, n - 1)
    idx = np.argsort(dist, axis=1)[:, :k]
    rows = np.arange(n)[:, None]
    dxs = dxm[rows, idx]
    valid = np.isfinite(dist[rows, idx]).all(axis=1)
    valid &= (dxs.min(axis=1) < 0) & (dxs.max(axis=1) > 0)
    ys = y[idx]
    w = 1.0 / np.maximum(err[idx], 1e-12) ** 2
    design = np.stack([np.ones_like(dxs), dxs, dxs * dxs], axis=2)
    m = np.einsum("nki,nk,nkj->nij", design, w, design)
    m += 1e-12 * np.eye(3)[None, :, :]
    rhs = np.einsum("nki,nk->ni", design, w * ys)
    try:
        cov = np.linalg.inv(m)
    except np.linalg.LinAlgError:
        return 1e12
    coef = np.einsum("nij,nj->ni", cov, rhs)
    pred = coef[:, 0]
    var_pred = cov[:, 0, 0]
    denom = np.maximum(err ** 2 + var_pred, 1e-24)
    res2 = (y - pred) ** 2 / denom
    used = int(valid.sum())
    if used == 0:
        return 1e12
    return float(res2[valid].sum()) / used


@dataclass
class CollapseData:
    """Raw curves keyed by L: values of <m^2> and B on a p grid."""
    L: int
    p: np.ndarray
    m2: np.ndarray
    m2_err: np.ndarray
    binder: np.ndarray
    binder_err: np.ndarray


def fss_collapse(datasets: list[CollapseData], p_window: tuple[float, float] | None = None,
                 max_iter: int = 400) -> ScalingFit:
    """Fit (p_c, nu, beta) by minimizing the joint collapse cost of
    B(p, L) = F_b((p - p_c) L^(1/nu)) and
    <m^2>(p, L) = L^(-2 beta/nu) F_m((p - p_c) L^(1/nu))."""
    if len(datasets) < 3:
        raise ConfigError("collapse fit needs at least three system sizes")
    ps = np.concatenate([d.p for d in datasets])
    sizes = np.concatenate([np.full(len(d.p), d.L) for d in datasets])
    m2 = np.concatenate([d.m2 for d in datasets])
    m2e = np.concatenate([d.m2_err for d in datasets])
    bb = np.concatenate([d.binder for d in datasets])
    bbe = np.concatenate([d.binder_err for d in datasets])
    if p_window is None:
        p_window = (float(ps.min()), float(ps.max()))
    sel = (ps >= p_window[0]) & (ps <= p_window[1])
    ps, sizes = ps[sel], sizes[sel]
    m2, m2e, bb, bbe = m2[sel], m2e[sel], bb[sel], bbe[sel]

    def cost(theta):
        p_c, nu, beta = theta
        if not (p_window[0] <= p_c <= p_window[1]) or nu <= 0.05 or nu > 5 or beta < -0.5:
            return 1e12
        x = (ps - p_c) * sizes ** (1.0 / nu)
        c_b = _collapse_cost_one(x, bb, bbe, sizes)
        y = m2 * sizes ** (2.0 * beta / nu)
        ye = m2e * sizes ** (2.0 * beta / nu)
        c_m = _collapse_cost_one(x, y, ye, sizes)
        return c_b + c_m

    p_mid = 0.5 * (p_window[0] + p_window[1])
    p_span = p_window[1] - p_window[0]
    starts = [(p_mid + dp * p_span, nu0, b0)
              for dp in (-0.2, 0.0, 0.2)
              for nu0 in (0.7, 1.0, 1.4)
              for b0 in (0.05, 0.125)]
    results = []
    for s in starts:
        res = minimize(cost, s, method="Nelder-Mead",
                       options={"maxiter": max_iter, "xatol": 1e-5, "fatol": 1e-8})
        results.append((res.fun, res.x, res.status == 0))
    results.sort(key=lambda t: t[0])
    best_cost, best_x, ok = results[0]
    return ScalingFit(
        p_c=float(best_x[0]), nu=float(best_x[1]), beta=float(best_x[2]),
        collapse_cost=float(best_cost),
        data_window={"p_min": p_window[0], "p_max": p_window[1],
                     "sizes": sorted({d.L for d in datasets})},
        flag="ok" if ok else "not-converged",
        starts=[(float(c), [float(v) for v in x]) for c, x, _ in results],
    )


# -- topological negativity ---------------------------------------------------


KP_REGION_NAMES = ("A", "B", "C", "AB", "BC", "AC", "ABC")


@dataclass
class NegativityResult:
    gamma: float
    error: float
    method: str
    region_values: dict
    area_law_coefficient: float | None = None


def kitaev_preskill(estimates: dict[str, EstimateResult],
                    use_seven_terms: bool = False) -> NegativityResult:
    """Topological negativity from the tripartite combination
    -gamma = E_A + E_B + E_C + E_ABC - E_AB - E_BC - E_AC, or its
    symmetric-region three-term reduction -gamma = 2 E_A - 2 E_AC + E_ABC."""
    needed = KP_REGION_NAMES if use_seven_terms else ("A", "AC", "ABC")
    missing = [k for k in needed if k not in estimates]
    if missing:
        raise ConfigError(f"region estimates missing: {missing}")
    e = {k: v.value for k, v in estimates.items()}
    s2 = {k: v.error ** 2 for k, v in estimates.items()}
    if use_seven_terms:
        gamma = -(e["A"] + e["B"] + e["C"] + e["ABC"] - e["AB"] - e["BC"] - e["AC"])
        var = sum(s2[k] for k in KP_REGION_NAMES)
        method = "kitaev-preskill-7term"
    else:
        gamma = -(2 * e["A"] - 2 * e["AC"] + e["ABC"])
        var = 4 * s2["A"] + 4 * s2["AC"] + s2["ABC"]
        method = "kitaev-preskill-3term"
    return NegativityResult(float(gamma), math.sqrt(var), method,
                            {k: (v.value, v.error) for k, v in estimates.items()})


def kitaev_preskill_from_blocks(accs: list[MomentAccumulator], order: int,
                                use_seven_terms: bool = False) -> NegativityResult:
    """Covariance-aware variant: jackknife the full region combination over
    blocks, since all regions are measured in the same chains."""
    acc = merge_accumulators(accs)
    names = KP_REGION_NAMES if use_seven_terms else ("A", "AC", "ABC")
    keys = [f"pin:{k}" for k in names]
    counts = acc.counts.astype(np.float64)
    tot_c = counts.sum()

    def gamma_of(means):
        es = {k: -math.log(means[f"pin:{k}"]) / (order - 2) for k in names}
        if use_seven_terms:
            return -(es["A"] + es["B"] + es["C"] + es["ABC"]
                     - es["AB"] - es["BC"] - es["AC"])
        return -(2 * es["A"] - 2 * es["AC"] + es["ABC"])

    tot = {k: acc.sums[k].sum() for k in keys}
    if any(v <= 0 for v in tot.values()):
        return NegativityResult(math.nan, math.inf, "kitaev-preskill-jackknife", {})
    theta = gamma_of({k: v / tot_c for k, v in tot.items()})
    loo = []
    for b in np.nonzero(counts > 0)[0]:
        cb = tot_c - counts[b]
        means = {k: (tot[k] - acc.sums[k][b]) / cb for k in keys}
        if any(v <= 0 for v in means.values()):
            continue
        loo.append(gamma_of(means))
    nb = len(loo)
    loo = np.array(loo)
    var = (nb - 1) / nb * float(np.sum((loo - loo.mean()) ** 2)) if nb > 1 else math.inf
    return NegativityResult(float(theta), math.sqrt(var), "kitaev-preskill-jackknife",
                            {k: (float(tot[f'pin:{k}'] / tot_c), 0.0) for k in names})


def fit_area_law(boundaries: np.ndarray, values: np.ndarray,
                 errors: np.ndarray) -> dict:
    """Weighted linear fit E = c |dA| + b; exposes the area-law prefactor c
    (no universality claim) and the intercept."""
    w = 1.0 / np.maximum(np.asarray(errors, dtype=float), 1e-12) ** 2
    A = np.vstack([boundaries, np.ones_like(boundaries)]).T
    W = np.diag(w)
    cov = np.linalg.inv(A.T @ W @ A)
    coef = cov @ A.T @ W @ np.asarray(values, dtype=float)
    return {"c": float(coef[0]), "intercept": float(coef[1]),
            "c_err": math.sqrt(cov[0, 0]), "intercept_err": math.sqrt(cov[1, 1])}


# -- resampling ----------------------------------------------------------------


def jackknife_mean(acc: MomentAccumulator, key: str, min_blocks: int = 10):
    """Jackknife mean and error of one accumulated observable over blocks."""
    counts = acc.counts.astype(np.float64)
    live = counts > 0
    if live.sum() < min_blocks:
        return acc.mean(key), math.inf, "too-few-blocks"
    sums = acc.sums[key]
    tot, tot_c = sums.sum(), counts.sum()
    loo = np.array([(tot - sums[b]) / (tot_c - counts[b]) for b in np.nonzero(live)[0]])
    nb = len(loo)
    var = (nb - 1) / nb * float(np.sum((loo - loo.mean()) ** 2))
    return float(tot / tot_c), math.sqrt(var), "ok"


def bootstrap_over_chains(accs: list[MomentAccumulator], fn, n_bootstrap: int = 200,
                          seed: int = 0):
    """Bootstrap a statistic of a chain set by resampling whole chains."""
    rng = np.random.default_rng(seed)
    vals = []
    n = len(accs)
    for _ in range(n_bootstrap):
        pick = [accs[i] for i in rng.integers(0, n, size=n)]
        vals.append(fn(pick))
    vals = np.array(vals, dtype=float)
    return float(np.mean(vals)), float(np.std(vals, ddof=1))


def linear_fit_r2(x: np.ndarray, y: np.ndarray, err: np.ndarray | None = None) -> dict:
    """Weighted least-squares line with the goodness measure used in the
    separation-scaling checks."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones_like(x) if err is None else 1.0 / np.maximum(np.asarray(err), 1e-12) ** 2
    A = np.vstack([x, np.ones_like(x)]).T
    W = np.diag(w)
    coef = np.linalg.solve(A.T @ W @ A, A.T @ W @ y)
    pred = A @ coef
    ybar = np.average(y, weights=w)
    ss_res = float(np.sum(w * (y - pred) ** 2))
    ss_tot = float(np.sum(w * (y - ybar) ** 2))
    return {"slope": float(coef[0]), "intercept": float(coef[1]),
            "r2": 1.0 - ss_res / ss_tot if ss_tot > 0 else math.nan}
