"""Group statistics: rank tests, permutation tests, FDR control, correlation,
and the mediation z-test, plus the per-feature screening step that feeds
classification.

Conventions: all tests are two-sided; empirical p-values use the
(1 + hits)/(r + 1) estimator so they are never exactly 0; analytic p-values
are clamped into (0, 1].
"""

from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np
from scipy.stats import chi2 as _chi2
from scipy.stats import norm as _norm
from scipy.stats import t as _t_dist

from .errors import DomainError
from .validation import as_float_matrix, as_float_series

EXACT_MWU_MAX_COMBINED_N = 12
_TINY = np.finfo(np.float64).tiny


def _clamp_p(p):
    return float(min(max(p, _TINY), 1.0))


def _rng_from(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.default_rng(seed)
    return np.random.default_rng(np.random.SeedSequence(seed))


@dataclass
class StatResult:
    statistic: float
    p_value: float
    method: str
    corrected_p: float = None
    reject: bool = None

    def __post_init__(self):
        if not 0.0 < self.p_value <= 1.0:
            raise DomainError(f"p_value must lie in (0, 1], got {self.p_value}")
        if self.corrected_p is not None and self.corrected_p < self.p_value - 1e-12:
            raise DomainError("corrected_p cannot be below the raw p_value")


def _u_statistic(a, b):
    """U for sample a: wins over b count 1, ties count 1/2."""
    diff = a[:, None] - b[None, :]
    return float(np.sum(diff > 0) + 0.5 * np.sum(diff == 0))


def mann_whitney_u(a, b):
    """Two-sided Mann-Whitney U test.

    Exact enumeration over all group assignments when the combined sample
    has at most 12 values (ties handled exactly); otherwise the normal
    approximation with tie-corrected variance, no continuity correction.
    The reported statistic is U for the first sample.
    """
    a = as_float_series(a, name="a")
    b = as_float_series(b, name="b")
    if len(a) == 0 or len(b) == 0:
        raise DomainError("both samples must be non-empty")
    n_a, n_b = len(a), len(b)
    u_obs = _u_statistic(a, b)

    if n_a + n_b <= EXACT_MWU_MAX_COMBINED_N:
        pooled = np.concatenate([a, b])
        n = n_a + n_b
        # Pairwise win scores between pooled positions, reused per assignment.
        diff = pooled[:, None] - pooled[None, :]
        score = (diff > 0).astype(np.float64) + 0.5 * (diff == 0)
        le = ge = 0
        total = comb(n, n_a)
        all_idx = frozenset(range(n))
        for subset in combinations(range(n), n_a):
            rest = list(all_idx.difference(subset))
            u = score[np.ix_(list(subset), rest)].sum()
            if u <= u_obs + 1e-9:
                le += 1
            if u >= u_obs - 1e-9:
                ge += 1
        p = min(1.0, 2.0 * min(le, ge) / total)
        return StatResult(statistic=u_obs, p_value=_clamp_p(p), method="mwu-exact")

    n = n_a + n_b
    mu = n_a * n_b / 2.0
    _, tie_counts = np.unique(np.concatenate([a, b]), return_counts=True)
    tie_term = np.sum(tie_counts.astype(np.float64) ** 3 - tie_counts)
    var = (n_a * n_b / 12.0) * ((n + 1) - tie_term / (n * (n - 1)))
    if var <= 0:
        return StatResult(statistic=u_obs, p_value=1.0, method="mwu-normal")
    z = (u_obs - mu) / np.sqrt(var)
    p = 2.0 * _norm.sf(abs(z))
    return StatResult(statistic=u_obs, p_value=_clamp_p(p), method="mwu-normal")


def chi_square_independence(table, yates=False):
    """Pearson chi-square test of independence for a 2x2 count table."""
    table = np.asarray(table, dtype=np.float64)
    if table.shape != (2, 2):
        raise DomainError(f"table must be 2x2, got {table.shape}")
    if np.any(table < 0) or not np.all(np.isfinite(table)):
        raise DomainError("counts must be finite and nonnegative")
    rows = table.sum(axis=1)
    cols = table.sum(axis=0)
    if np.any(rows == 0) or np.any(cols == 0):
        raise DomainError("every row and column marginal must be positive")
    expected = np.outer(rows, cols) / table.sum()
    dev = np.abs(table - expected)
    if yates:
        dev = np.maximum(dev - 0.5, 0.0)
    stat = float(np.sum(dev**2 / expected))
    return StatResult(statistic=stat, p_value=_clamp_p(_chi2.sf(stat, df=1)),
                      method="chi2-yates" if yates else "chi2")


def permutation_test(a, b, r=1000, seed=0, statistic="mean-diff"):
    """Two-sided permutation test, difference of group means by default.

    p = (1 + #{|T_perm| >= |T_obs|}) / (r + 1).  The pooled sample is sorted
    before resampling, so the null distribution depends only on the pooled
    multiset: swapping the group labels gives the identical p-value.
    ``statistic`` may also be a callable (a, b) -> float.
    """
    a = as_float_series(a, name="a")
    b = as_float_series(b, name="b")
    if len(a) < 2 or len(b) < 2:
        raise DomainError("both groups need >= 2 values")
    if r < 1:
        raise DomainError(f"permutation count must be >= 1, got {r}")

    if statistic == "mean-diff":
        stat = lambda x, y: float(np.mean(x) - np.mean(y))
    elif callable(statistic):
        stat = statistic
    else:
        raise DomainError(f"unknown statistic {statistic!r}")

    t_obs = stat(a, b)
    pooled = np.sort(np.concatenate([a, b]))
    n_a, n = len(a), len(a) + len(b)
    rng = _rng_from(seed)

    if statistic == "mean-diff":
        keys = rng.random((r, n))
        take = np.argpartition(keys, n_a - 1, axis=1)[:, :n_a]
        sum_a = pooled[take].sum(axis=1)
        t_perm = sum_a / n_a - (pooled.sum() - sum_a) / (n - n_a)
    else:
        t_perm = np.empty(r)
        for i in range(r):
            perm = rng.permutation(pooled)
            t_perm[i] = stat(perm[:n_a], perm[n_a:])

    hits = int(np.sum(np.abs(t_perm) >= abs(t_obs) - 1e-15))
    p = (1.0 + hits) / (r + 1.0)
    return StatResult(statistic=t_obs, p_value=_clamp_p(p), method="permutation")


def fdr_bh(p_values, alpha=0.05):
    """Benjamini-Hochberg step-up control of the false discovery rate.

    Returns a list of (reject, adjusted_p) in the input order; adjusted
    p-values are the step-up monotone minimum, capped at 1.
    """
    p = np.asarray(p_values, dtype=np.float64)
    if p.ndim != 1 or len(p) == 0:
        raise DomainError("p_values must be a non-empty 1-D collection")
    if np.any(p <= 0) or np.any(p > 1):
        raise DomainError("all p-values must lie in (0, 1]")
    m = len(p)
    order = np.argsort(p, kind="stable")
    ranked = p[order]
    ranks = np.arange(1, m + 1)

    passed = ranked <= ranks * alpha / m
    k_max = int(np.max(np.flatnonzero(passed)) + 1) if np.any(passed) else 0
    reject_sorted = ranks <= k_max

    adjusted_sorted = np.minimum.accumulate((m * ranked / ranks)[::-1])[::-1]
    adjusted_sorted = np.minimum(adjusted_sorted, 1.0)

    reject = np.empty(m, dtype=bool)
    adjusted = np.empty(m)
    reject[order] = reject_sorted
    adjusted[order] = adjusted_sorted
    return [(bool(rj), float(ap)) for rj, ap in zip(reject, adjusted)]


def _pearson_r(x, y):
    xc = x - x.mean()
    yc = y - y.mean()
    sx = np.sqrt(np.sum(xc**2))
    sy = np.sqrt(np.sum(yc**2))
    if sx == 0 or sy == 0:
        raise DomainError("zero variance makes the correlation undefined")
    return float(np.clip(np.dot(xc, yc) / (sx * sy), -1.0, 1.0))


def _r_to_p(r, df):
    if df < 1:
        raise DomainError(f"need positive degrees of freedom, got {df}")
    if abs(r) >= 1.0:
        return _TINY
    t = abs(r) * np.sqrt(df / (1.0 - r * r))
    return _clamp_p(2.0 * _t_dist.sf(t, df))


def pearson_correlation(x, y):
    """Pearson r with a two-sided t-test on n-2 degrees of freedom."""
    x = as_float_series(x, name="x")
    y = as_float_series(y, name="y")
    if len(x) != len(y):
        raise DomainError(f"lengths differ: {len(x)} vs {len(y)}")
    if len(x) < 3:
        raise DomainError("need at least 3 paired observations")
    r = _pearson_r(x, y)
    return StatResult(statistic=r, p_value=_r_to_p(r, len(x) - 2), method="pearson")


def partial_correlation(x, y, covariates):
    """Correlation of x and y after removing linear covariate effects.

    Both variables are residualized against [1, covariates] by least
    squares; the residual correlation is tested on n - 2 - k degrees of
    freedom for k covariates.
    """
    x = as_float_series(x, name="x")
    y = as_float_series(y, name="y")
    cov = as_float_matrix(covariates, name="covariates")
    n, k = cov.shape
    if len(x) != n or len(y) != n:
        raise DomainError("x, y, and covariate rows must share length")
    if n <= k + 2:
        raise DomainError(f"need n > k + 2, got n={n}, k={k}")
    design = np.column_stack([np.ones(n), cov])
    if np.linalg.matrix_rank(design) < k + 1:
        raise DomainError("covariate matrix is rank-deficient")
    rx = x - design @ np.linalg.lstsq(design, x, rcond=None)[0]
    ry = y - design @ np.linalg.lstsq(design, y, rcond=None)[0]
    r = _pearson_r(rx, ry)
    return StatResult(statistic=r, p_value=_r_to_p(r, n - 2 - k),
                      method="partial-pearson")


def sobel_test(a, se_a, b, se_b):
    """Normal-approximation z-test for the indirect effect a*b."""
    if se_a <= 0 or se_b <= 0:
        raise DomainError("standard errors must be positive")
    denom = np.sqrt(b * b * se_a * se_a + a * a * se_b * se_b)
    z = 0.0 if denom == 0 else a * b / denom
    return StatResult(statistic=float(z), p_value=_clamp_p(2.0 * _norm.sf(abs(z))),
                      method="sobel")


def format_z_p(result):
    """Render a z-style result as "z = 0.945, p = 0.345"."""
    return f"z = {result.statistic:.3f}, p = {result.p_value:.3f}"


def groupwise_feature_screen(features, groups, r=1000, alpha=0.05, seed=0):
    """Permutation test per feature column, then BH-FDR across features.

    ``groups`` must contain exactly two labels with >= 2 subjects each.
    Each feature gets its own RNG stream derived from (seed, column), so
    the screen gives identical results under any execution order.
    Returns (mask, p_values, adjusted_p) over feature columns.
    """
    X = as_float_matrix(features, name="features")
    groups = np.asarray(groups)
    if len(groups) != X.shape[0]:
        raise DomainError("one group label per subject row is required")
    labels = sorted(set(str(g) for g in groups))
    if len(labels) != 2:
        raise DomainError(f"need exactly 2 groups, got {labels}")
    in_a = np.array([str(g) == labels[0] for g in groups])
    if in_a.sum() < 2 or (~in_a).sum() < 2:
        raise DomainError("both groups need >= 2 subjects")

    p_values = np.empty(X.shape[1])
    for f in range(X.shape[1]):
        res = permutation_test(X[in_a, f], X[~in_a, f], r=r,
                               seed=np.random.SeedSequence([int(seed), f]))
        p_values[f] = res.p_value
    pairs = fdr_bh(list(p_values), alpha=alpha)
    mask = np.array([rj for rj, _ in pairs], dtype=bool)
    adjusted = np.array([ap for _, ap in pairs])
    return mask, p_values, adjusted
