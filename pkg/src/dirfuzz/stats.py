"""Rank statistics for comparing time-to-reach samples."""

from __future__ import annotations

import math
import statistics
from collections import defaultdict

TIMEOUT_FACTOR = 1.25


def _ranks(values) -> list:
    """Average ranks (1-based) with ties sharing the mean rank."""
    order = sorted(range(len(values)), key=values.__getitem__)
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        r = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = r
        i = j + 1
    return ranks


def tie_groups(values) -> list:
    counts = defaultdict(int)
    for v in values:
        counts[v] += 1
    return [c for c in counts.values() if c > 1]


def mann_whitney(a, b) -> tuple:
    """Two-sided Mann-Whitney U test, normal approximation.

    Uses the tie-corrected variance and a 0.5 continuity correction.
    Returns ``(U_a, p)``; ``p`` is 1 when the pooled sample is all ties.
    """
    a, b = list(a), list(b)
    n, m = len(a), len(b)
    if not n or not m:
        raise ValueError("samples must be non-empty")
    pooled = a + b
    ranks = _ranks(pooled)
    u = sum(ranks[:n]) - n * (n + 1) / 2
    big_n = n + m
    ties = sum(t**3 - t for t in tie_groups(pooled))
    var = n * m / 12 * ((big_n + 1) - ties / (big_n * (big_n - 1)))
    mu = n * m / 2
    if var <= 0:
        return u, 1.0
    z = max(abs(u - mu) - 0.5, 0.0) / math.sqrt(var)
    return u, min(1.0, math.erfc(z / math.sqrt(2)))


def mann_whitney_u(a, b) -> float:
    return mann_whitney(a, b)[1]


def vargha_delaney_a12(a, b) -> float:
    """Probability that a draw from ``a`` exceeds one from ``b`` (ties count half)."""
    a, b = list(a), list(b)
    if not a or not b:
        raise ValueError("samples must be non-empty")
    gt = eq = 0
    for x in a:
        for y in b:
            if x > y:
                gt += 1
            elif x == y:
                eq += 1
    return (gt + 0.5 * eq) / (len(a) * len(b))


def substitute_timeouts(ttrs, budget: float) -> list:
    return [TIMEOUT_FACTOR * budget if t is None else t for t in ttrs]


STATS_COLUMNS = [
    "fixture", "target", "baseline", "treatment",
    "median_baseline", "median_treatment", "speedup",
    "mean_baseline", "mean_treatment", "speedup_mean",
    "p_value", "a12", "n_baseline", "n_treatment",
]


def _ratio(x, y):
    return x / y if y > 0 else math.inf


def comparison_rows(ttr_rows, treatment: str) -> list:
    """Stats rows from raw TTR rows (dicts with fixture, target, scheduler, budget, ttr).

    Every scheduler other than ``treatment`` is compared against it. Â12 is
    P(baseline TTR > treatment TTR), so values above 0.5 favour the
    treatment.
    """
    samples = defaultdict(list)
    for row in ttr_rows:
        ttr = row["ttr"]
        ttr = None if ttr in (None, "") else float(ttr)
        value = TIMEOUT_FACTOR * float(row["budget"]) if ttr is None else ttr
        samples[(row["fixture"], row["target"], row["scheduler"])].append(value)
    out = []
    keys = sorted({(f, t) for f, t, _ in samples})
    for fixture, target in keys:
        treat = samples.get((fixture, target, treatment))
        if not treat:
            continue
        baselines = sorted(s for f, t, s in samples if (f, t) == (fixture, target) and s != treatment)
        for base in baselines:
            ref = samples[(fixture, target, base)]
            med_b, med_t = statistics.median(ref), statistics.median(treat)
            mean_b, mean_t = statistics.fmean(ref), statistics.fmean(treat)
            out.append({
                "fixture": fixture,
                "target": target,
                "baseline": base,
                "treatment": treatment,
                "median_baseline": med_b,
                "median_treatment": med_t,
                "speedup": _ratio(med_b, med_t),
                "mean_baseline": mean_b,
                "mean_treatment": mean_t,
                "speedup_mean": _ratio(mean_b, mean_t),
                "p_value": mann_whitney_u(ref, treat),
                "a12": vargha_delaney_a12(ref, treat),
                "n_baseline": len(ref),
                "n_treatment": len(treat),
            })
    return out
