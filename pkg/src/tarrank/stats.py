"""Model comparison statistics: one-way ANOVA, pairwise t-tests with
Bonferroni correction, Cohen's d, and the t/F distribution functions they
need (regularized incomplete beta via a continued fraction)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

from .errors import DataError, NumericError
from .evalmetrics import METRIC_NAMES, MetricsReport

_CF_MAX_ITER = 300
_CF_EPS = 1e-14
_CF_TINY = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise NumericError(
        f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})"
    )


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must be in [0, 1]")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    front = math.exp(
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log(1.0 - x)
    )
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_cdf(x: float, df: float) -> float:
    if df < 1:
        raise ValueError("df must be >= 1")
    if math.isinf(x):
        return 0.0 if x < 0 else 1.0
    if x == 0.0:
        return 0.5
    tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, df / (df + x * x))
    return 1.0 - tail if x > 0 else tail


def f_cdf(x: float, d1: float, d2: float) -> float:
    if d1 < 1 or d2 < 1:
        raise ValueError("degrees of freedom must be >= 1")
    if x < 0:
        raise ValueError("x must be >= 0")
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return 1.0
    return regularized_incomplete_beta(d1 / 2.0, d2 / 2.0, d1 * x / (d1 * x + d2))


# --- sample groups and tests --------------------------------------------------

@dataclass(frozen=True)
class SampleGroup:
    model_tag: str
    values: tuple[float, ...]

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError(f"group {self.model_tag}: values must be finite")


def _mean(xs) -> float:
    return sum(xs) / len(xs)


def _var(xs, mean: float) -> float:
    """Sample variance (n-1 denominator)."""
    return sum((x - mean) ** 2 for x in xs) / (len(xs) - 1)


@dataclass(frozen=True)
class AnovaResult:
    f_stat: float
    p: float
    df_between: int
    df_within: int
    degenerate: bool = False


def one_way_anova(groups: list[SampleGroup]) -> AnovaResult:
    if len(groups) < 2:
        raise ValueError("ANOVA needs at least 2 groups")
    for g in groups:
        if len(g.values) < 2:
            raise ValueError(f"group {g.model_tag} has fewer than 2 values")
    k = len(groups)
    n_total = sum(len(g.values) for g in groups)
    grand = sum(sum(g.values) for g in groups) / n_total
    ss_between = sum(len(g.values) * (_mean(g.values) - grand) ** 2 for g in groups)
    ss_within = sum(
        sum((x - _mean(g.values)) ** 2 for x in g.values) for g in groups
    )
    df_between, df_within = k - 1, n_total - k
    ms_between = ss_between / df_between
    ms_within = ss_within / df_within
    if ms_within == 0.0:
        if ms_between == 0.0:
            return AnovaResult(0.0, 1.0, df_between, df_within)
        return AnovaResult(math.inf, 0.0, df_between, df_within, degenerate=True)
    f_stat = ms_between / ms_within
    return AnovaResult(f_stat, 1.0 - f_cdf(f_stat, df_between, df_within), df_between, df_within)


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: int
    p: float
    degenerate: bool = False


def t_test(a: SampleGroup, b: SampleGroup, mode: str = "paired") -> TTestResult:
    if mode not in ("paired", "unpaired-pooled"):
        raise ValueError("mode must be 'paired' or 'unpaired-pooled'")
    if mode == "paired":
        if len(a.values) != len(b.values):
            raise ValueError("paired samples must have equal length")
        n = len(a.values)
        if n < 2:
            raise ValueError("paired test needs n >= 2")
        diffs = [x - y for x, y in zip(a.values, b.values)]
        md = _mean(diffs)
        sd = math.sqrt(_var(diffs, md))
        df = n - 1
        if sd == 0.0:
            if md == 0.0:
                return TTestResult(0.0, df, 1.0)
            return TTestResult(math.copysign(math.inf, md), df, 0.0, degenerate=True)
        t = md / (sd / math.sqrt(n))
    else:
        na, nb = len(a.values), len(b.values)
        if na < 2 or nb < 2:
            raise ValueError("unpaired test needs n >= 2 in both groups")
        ma, mb = _mean(a.values), _mean(b.values)
        sp2 = ((na - 1) * _var(a.values, ma) + (nb - 1) * _var(b.values, mb)) / (na + nb - 2)
        df = na + nb - 2
        if sp2 == 0.0:
            if ma == mb:
                return TTestResult(0.0, df, 1.0)
            return TTestResult(math.copysign(math.inf, ma - mb), df, 0.0, degenerate=True)
        t = (ma - mb) / math.sqrt(sp2 * (1.0 / na + 1.0 / nb))
    return TTestResult(t, df, 2.0 * (1.0 - t_cdf(abs(t), df)))


def cohens_d(a: SampleGroup, b: SampleGroup) -> float:
    """Pooled-SD standardized mean difference (classic form, also in paired
    mode). Zero pooled SD gives 0 for equal means, signed infinity otherwise."""
    na, nb = len(a.values), len(b.values)
    if na < 2 or nb < 2:
        raise ValueError("cohens_d needs n >= 2 in both groups")
    ma, mb = _mean(a.values), _mean(b.values)
    sp2 = ((na - 1) * _var(a.values, ma) + (nb - 1) * _var(b.values, mb)) / (na + nb - 2)
    if sp2 == 0.0:
        if ma == mb:
            return 0.0
        return math.copysign(math.inf, ma - mb)
    return (ma - mb) / math.sqrt(sp2)


# --- cross-model comparison ----------------------------------------------------

@dataclass(frozen=True)
class PairwiseComparison:
    model_a: str
    model_b: str
    t: float
    df: int
    p_raw: float
    p_adjusted: float
    cohens_d: float
    significant: bool


@dataclass
class StatsReport:
    metric: str
    anova: AnovaResult
    pairwise: list[PairwiseComparison]
    significance_matrix: dict[str, frozenset[str]]
    alpha: float = 0.05
    groups: dict[str, SampleGroup] = field(default_factory=dict)


def compare_models(
    reports: dict[str, MetricsReport],
    metric: str,
    mode: str = "paired",
    alpha: float = 0.05,
) -> StatsReport:
    """ANOVA across all models, then all C(k, 2) Bonferroni-adjusted pairwise
    tests. The significance matrix is only populated when the ANOVA itself is
    significant at alpha; pairwise results are always reported."""
    if metric not in METRIC_NAMES:
        raise ValueError(f"unknown metric {metric!r}; valid: {', '.join(METRIC_NAMES)}")
    if len(reports) < 2:
        raise ValueError("need at least 2 models to compare")
    tags = sorted(reports)
    topic_sets = {tag: set(reports[tag].per_topic) for tag in tags}
    reference = topic_sets[tags[0]]
    for tag in tags[1:]:
        if topic_sets[tag] != reference:
            missing = sorted(reference ^ topic_sets[tag])
            raise DataError(
                f"models {tags[0]} and {tag} cover different topics; differing: {missing}"
            )
    topic_order = sorted(reference)
    groups = {
        tag: SampleGroup(
            tag, tuple(reports[tag].per_topic[t].value(metric) for t in topic_order)
        )
        for tag in tags
    }
    anova = one_way_anova([groups[t] for t in tags])
    pairs = list(combinations(tags, 2))
    m = len(pairs)
    pairwise = []
    matrix: dict[str, set[str]] = {tag: set() for tag in tags}
    for tag_a, tag_b in pairs:
        result = t_test(groups[tag_a], groups[tag_b], mode)
        p_adjusted = min(1.0, m * result.p)
        significant = p_adjusted < alpha
        pairwise.append(
            PairwiseComparison(
                tag_a, tag_b, result.t, result.df, result.p, p_adjusted,
                cohens_d(groups[tag_a], groups[tag_b]), significant,
            )
        )
        if anova.p < alpha and significant:
            matrix[tag_a].add(tag_b)
            matrix[tag_b].add(tag_a)
    return StatsReport(
        metric, anova, pairwise,
        {tag: frozenset(others) for tag, others in matrix.items()},
        alpha, groups,
    )


def format_significance_matrix(report: StatsReport) -> str:
    """Table-1 style superscripts: each model lists the models it differs
    from significantly."""
    lines = [
        f"metric: {report.metric}  ANOVA F={report.anova.f_stat:.6g} "
        f"p={report.anova.p:.6g} (df {report.anova.df_between}, {report.anova.df_within})"
    ]
    if report.anova.p >= report.alpha:
        lines.append(f"ANOVA not significant at alpha={report.alpha}; matrix empty")
    for tag in sorted(report.significance_matrix):
        others = "".join(sorted(report.significance_matrix[tag]))
        mean = _mean(report.groups[tag].values) if tag in report.groups else float("nan")
        lines.append(f"{tag:<12} mean={mean:.4f}  ^{others or '-'}")
    return "\n".join(lines) + "\n"
