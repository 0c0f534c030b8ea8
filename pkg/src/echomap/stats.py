"""Paired and unpaired significance tests used by the evaluation harness.

Exact (enumeration) modes are provided for small samples; asymptotic normal
approximations otherwise.  p-values below 1e-12 are clamped for reporting by
``format_p``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, product

import numpy as np
from scipy import stats as sps

P_FLOOR = 1e-12


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    method: str
    degenerate: bool = False
    df: int | None = None


def format_p(p: float) -> str:
    return f"< {P_FLOOR:g}" if p < P_FLOOR else f"{p:.6g}"


def paired_t(a, b) -> TestResult:
    """Two-sided paired t-test (t distribution with n-1 df)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 2:
        raise ValueError("need two equal-length 1-D samples with n >= 2")
    d = a - b
    n = len(d)
    sd = d.std(ddof=1)
    if sd == 0.0:
        # all differences identical; the test statistic is undefined unless 0
        p = 1.0 if np.all(d == 0) else 0.0
        return TestResult(0.0 if np.all(d == 0) else np.inf, p,
                          "paired_t", degenerate=True, df=n - 1)
    t = d.mean() / (sd / np.sqrt(n))
    p = 2.0 * sps.t.sf(abs(t), df=n - 1)
    return TestResult(float(t), float(p), "paired_t", df=n - 1)


def t_to_p(t: float, df: int, two_sided: bool = True) -> float:
    p = sps.t.sf(abs(t), df=df)
    return float(2.0 * p if two_sided else p)


def _signed_rank_stat(d: np.ndarray) -> tuple[float, np.ndarray]:
    ranks = sps.rankdata(np.abs(d))
    return float(ranks[d > 0].sum()), ranks


def wilcoxon_signed_rank(a, b=None, one_sided: bool = True,
                         method: str = "auto", exact_limit: int = 12) -> TestResult:
    """Wilcoxon signed-rank test on paired samples (or on differences if b is
    None).  Zero differences are dropped; tied |d| receive average ranks.

    One-sided alternative: a > b (positive differences).  Exact enumeration of
    all sign patterns is used for n <= exact_limit (or method='exact');
    otherwise a tie-corrected normal approximation with continuity correction.
    """
    d = np.asarray(a, dtype=np.float64)
    if b is not None:
        d = d - np.asarray(b, dtype=np.float64)
    d = d[d != 0]
    n = len(d)
    if n == 0:
        return TestResult(0.0, 1.0, "signed_rank_degenerate", degenerate=True)
    w, ranks = _signed_rank_stat(d)
    if method == "exact" or (method == "auto" and n <= exact_limit):
        total = 0
        at_least = 0
        for signs in product((False, True), repeat=n):
            w_perm = sum(r for s, r in zip(signs, ranks) if s)
            total += 1
            if w_perm >= w - 1e-12:
                at_least += 1
        p_one = at_least / total
        method_used = "signed_rank_exact"
    else:
        mean = ranks.sum() / 2.0
        var = np.sum(ranks ** 2) / 4.0
        if var == 0:
            return TestResult(w, 1.0, "signed_rank_degenerate", degenerate=True)
        z = (w - mean - 0.5) / np.sqrt(var)
        p_one = float(sps.norm.sf(z))
        method_used = "signed_rank_normal"
    p = p_one if one_sided else min(1.0, 2.0 * min(p_one, 1.0 - p_one))
    return TestResult(w, float(p), method_used)


def _rank_sum_u(a: np.ndarray, b: np.ndarray) -> tuple[float, np.ndarray]:
    pooled = np.concatenate([a, b])
    ranks = sps.rankdata(pooled)
    r1 = ranks[: len(a)].sum()
    u1 = r1 - len(a) * (len(a) + 1) / 2.0
    return float(u1), ranks


def ranksum(a, b, alternative: str = "two-sided",
            method: str = "auto", exact_limit: int = 10) -> TestResult:
    """Wilcoxon rank-sum / Mann-Whitney U test.

    alternative: 'two-sided', 'greater' (a tends larger) or 'less'.
    Exact enumeration over group labelings for small samples; tie-corrected
    normal approximation with continuity correction otherwise.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("both samples must be nonempty")
    n1, n2 = len(a), len(b)
    u1, ranks = _rank_sum_u(a, b)
    if method == "exact" or (method == "auto" and max(n1, n2) <= exact_limit):
        n = n1 + n2
        count_ge = count_le = total = 0
        for pick in combinations(range(n), n1):
            r1 = ranks[list(pick)].sum()
            u_perm = r1 - n1 * (n1 + 1) / 2.0
            total += 1
            if u_perm >= u1 - 1e-12:
                count_ge += 1
            if u_perm <= u1 + 1e-12:
                count_le += 1
        p_greater = count_ge / total
        p_less = count_le / total
        method_used = "ranksum_exact"
    else:
        mean = n1 * n2 / 2.0
        n = n1 + n2
        _, tie_counts = np.unique(ranks, return_counts=True)
        tie_term = np.sum(tie_counts ** 3 - tie_counts) / ((n * (n - 1)) or 1)
        var = n1 * n2 / 12.0 * (n + 1 - tie_term)
        if var <= 0:
            return TestResult(u1, 1.0, "ranksum_degenerate", degenerate=True)
        sd = np.sqrt(var)
        p_greater = float(sps.norm.sf((u1 - mean - 0.5) / sd))
        p_less = float(sps.norm.cdf((u1 - mean + 0.5) / sd))
        method_used = "ranksum_normal"
    if alternative == "greater":
        p = p_greater
    elif alternative == "less":
        p = p_less
    elif alternative == "two-sided":
        p = min(1.0, 2.0 * min(p_greater, p_less))
    else:
        raise ValueError(f"unknown alternative {alternative!r}")
    return TestResult(u1, float(p), method_used)
