"""One-way MANOVA group test and its continuous-group regression variant.

The pipeline is: SSCP matrices ``H`` and ``E`` -> eigenvalues of ``E^{-1} H``
-> Wilks' Lambda, Pillai's Trace, Hotelling-Lawley Trace and Roy's Greatest
Root -> F approximations -> upper-tail p-values.

Two F conventions are available. ``software`` is the classical set of
transforms used by R's ``summary.manova`` (Rao's F for Wilks, Pillai's and
McKeon-free Hotelling-Lawley forms, Roy's upper bound). ``paper`` applies a
single pair of degrees of freedom ``d1 = r(g-1)``, ``d2 = n_t - g - r + 1``
to Wilks, Pillai and Hotelling-Lawley and ``(g, d2)`` to Roy.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateError, DimensionMismatch, NotPositiveDefinite, SingularError
from .numkernel import cholesky, eig_product, f_sf

CONVENTIONS = ("software", "paper")
TREATMENTS = ("categorical", "continuous")


class Statistic(enum.Enum):
    WILKS = "wilks"
    PILLAI = "pillai"
    HOTELLING_LAWLEY = "hotelling-lawley"
    ROY = "roy"

    @property
    def display(self) -> str:
        return _DISPLAY[self]

    @property
    def short(self) -> str:
        return _SHORT[self]


_DISPLAY = {
    Statistic.WILKS: "Wilks' Lambda",
    Statistic.PILLAI: "Pillai's Trace",
    Statistic.HOTELLING_LAWLEY: "Hotelling-Lawley Trace",
    Statistic.ROY: "Roy's Greatest Root",
}
_SHORT = {
    Statistic.WILKS: "Wilks",
    Statistic.PILLAI: "Pillai",
    Statistic.HOTELLING_LAWLEY: "Lawley",
    Statistic.ROY: "Roy",
}

STATISTICS = tuple(Statistic)


class GroupedDataset:
    """Per-group response matrices, one ``n_i x r`` array per group.

    ``codes`` are the numeric group values used when the group is treated
    as a continuous predictor; they default to ``1..g``. ``labels`` are
    the original group names, if any.
    """

    def __init__(self, groups: Sequence, codes: Sequence[float] | None = None,
                 labels: Sequence[str] | None = None):
        mats = [np.atleast_2d(np.asarray(y, dtype=float)) for y in groups]
        if len(mats) < 2:
            raise ValueError(f"need at least 2 groups, got {len(mats)}")
        r = mats[0].shape[1]
        if r < 2:
            raise ValueError(f"need at least 2 responses, got {r}")
        for i, m in enumerate(mats):
            if m.ndim != 2 or m.shape[1] != r:
                raise DimensionMismatch(f"group {i} has shape {m.shape}, expected (n, {r})")
            if m.shape[0] < 1:
                raise ValueError(f"group {i} is empty")
            if not np.all(np.isfinite(m)):
                raise ValueError(f"group {i} has non-finite responses")
        self.groups = mats
        self.codes = tuple(float(c) for c in (codes if codes is not None else range(1, len(mats) + 1)))
        if len(self.codes) != len(mats):
            raise DimensionMismatch(f"{len(self.codes)} codes for {len(mats)} groups")
        self.labels = tuple(labels) if labels is not None else tuple(str(i) for i in range(1, len(mats) + 1))

    @classmethod
    def from_stacked(cls, y, group_values) -> "GroupedDataset":
        """Split stacked rows by group value, groups in first-appearance order."""
        y = np.asarray(y, dtype=float)
        order: dict = {}
        for v in group_values:
            order.setdefault(v, len(order))
        idx = np.array([order[v] for v in group_values])
        groups = [y[idx == k] for k in range(len(order))]
        return cls(groups, labels=[str(v) for v in order])

    @property
    def r(self) -> int:
        return self.groups[0].shape[1]

    @property
    def g(self) -> int:
        return len(self.groups)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(m.shape[0] for m in self.groups)

    @property
    def n_t(self) -> int:
        return sum(self.sizes)

    def stacked(self) -> np.ndarray:
        return np.vstack(self.groups)

    def row_codes(self) -> np.ndarray:
        return np.repeat(self.codes, self.sizes)

    def transform(self, a, shift=None) -> "GroupedDataset":
        """Apply ``y -> y A + shift`` to every row."""
        a = np.asarray(a, dtype=float)
        shift = np.zeros(self.r) if shift is None else np.asarray(shift, dtype=float)
        return GroupedDataset([m @ a + shift for m in self.groups], self.codes, self.labels)


def group_means(d: GroupedDataset) -> list[np.ndarray]:
    return [m.mean(axis=0) for m in d.groups]


def grand_mean(d: GroupedDataset) -> np.ndarray:
    return sum(n * mu for n, mu in zip(d.sizes, group_means(d))) / d.n_t


@dataclass(frozen=True)
class SscpPair:
    h: np.ndarray
    e: np.ndarray
    q: int  # hypothesis df
    v: int  # error df


def _check_error_matrix(e: np.ndarray) -> None:
    try:
        cholesky(e)
    except NotPositiveDefinite as exc:
        raise SingularError(f"error SSCP matrix is singular: {exc}") from None


def compute_sscp(d: GroupedDataset) -> SscpPair:
    """Between-group (``H``) and within-group (``E``) SSCP matrices."""
    if d.n_t - d.g < d.r:
        raise SingularError(
            f"n_t - g = {d.n_t - d.g} is less than r = {d.r}; E cannot be nonsingular"
        )
    means = group_means(d)
    grand = sum(n * mu for n, mu in zip(d.sizes, means)) / d.n_t
    h = np.zeros((d.r, d.r))
    e = np.zeros((d.r, d.r))
    for n, mu, y in zip(d.sizes, means, d.groups):
        dev = mu - grand
        h += n * np.outer(dev, dev)
        c = y - mu
        e += c.T @ c
    h = 0.5 * (h + h.T)
    e = 0.5 * (e + e.T)
    _check_error_matrix(e)
    return SscpPair(h, e, d.g - 1, d.n_t - d.g)


@dataclass(frozen=True)
class TestStatistics:
    eigenvalues: tuple[float, ...]
    wilks: float
    pillai: float
    hotelling_lawley: float
    roy: float

    __test__ = False  # not a pytest class

    def value(self, kind: Statistic) -> float:
        return {
            Statistic.WILKS: self.wilks,
            Statistic.PILLAI: self.pillai,
            Statistic.HOTELLING_LAWLEY: self.hotelling_lawley,
            Statistic.ROY: self.roy,
        }[kind]


def stats_from_eigenvalues(eigenvalues: Sequence[float], q: int | None = None) -> TestStatistics:
    """The four statistics from the eigenvalues of ``E^{-1} H``.

    When the hypothesis df ``q`` is given, eigenvalues beyond ``min(r, q)``
    are roundoff (``H`` has rank at most ``q``) and are zeroed.
    """
    lam = sorted((float(x) for x in eigenvalues), reverse=True)
    if lam and lam[-1] < 0:
        raise ValueError(f"eigenvalues must be nonnegative, got {lam[-1]}")
    if q is not None:
        k = min(len(lam), q)
        lam = lam[:k] + [0.0] * (len(lam) - k)
    return TestStatistics(
        eigenvalues=tuple(lam),
        wilks=math.exp(-sum(math.log1p(x) for x in lam)),
        pillai=sum(x / (1.0 + x) for x in lam),
        hotelling_lawley=sum(lam),
        roy=lam[0] if lam else 0.0,
    )


@dataclass(frozen=True)
class FReport:
    kind: Statistic
    value: float
    f: float
    df1: float
    df2: float
    p: float
    convention: str


def _report(kind, value, f, df1, df2, convention) -> FReport:
    if not (df1 > 0 and df2 > 0):
        raise DegenerateError(f"{kind.display}: degrees of freedom ({df1}, {df2}) not positive")
    f = max(f, 0.0)
    return FReport(kind, value, f, df1, df2, f_sf(f, df1, df2), convention)


def f_approx_software(stats: TestStatistics, p: int, q: int, v: int) -> tuple[FReport, ...]:
    """F transforms matching R's ``summary.manova``.

    ``p`` responses, ``q`` hypothesis df, ``v`` error df.
    """
    if min(p, q, v) < 1:
        raise DegenerateError(f"p, q, v must be positive, got ({p}, {q}, {v})")
    s = min(p, q)
    m = (abs(p - q) - 1) / 2.0
    n0 = (v - p - 1) / 2.0

    denom = p * p + q * q - 5
    t = math.sqrt((p * p * q * q - 4) / denom) if denom > 0 else 1.0
    w = v + q - (p + q + 1) / 2.0
    df1_w = p * q
    df2_w = w * t - (p * q - 2) / 2.0
    # Lambda^(-1/t) - 1, accurate for Lambda near 1
    log_lambda = -sum(math.log1p(x) for x in stats.eigenvalues)
    f_w = math.expm1(-log_lambda / t) * df2_w / df1_w

    df1_p = s * (2 * m + s + 1)
    df2_p = s * (2 * n0 + s + 1)
    V = stats.pillai
    f_p = (V / (s - V)) * df2_p / df1_p if V < s else math.inf

    df1_h = s * (2 * m + s + 1)
    df2_h = 2 * (s * n0 + 1)
    f_h = (stats.hotelling_lawley / s) * df2_h / df1_h

    df1_r = max(p, q)
    df2_r = v - max(p, q) + q
    f_r = stats.roy * df2_r / df1_r

    conv = "software"
    return (
        _report(Statistic.WILKS, stats.wilks, f_w, df1_w, df2_w, conv),
        _report(Statistic.PILLAI, stats.pillai, f_p, df1_p, df2_p, conv),
        _report(Statistic.HOTELLING_LAWLEY, stats.hotelling_lawley, f_h, df1_h, df2_h, conv),
        _report(Statistic.ROY, stats.roy, f_r, df1_r, df2_r, conv),
    )


def paper_degrees(r: int, g: int, n_t: int) -> tuple[int, int, float]:
    """``(d1, d2, s)`` of the single-pair convention."""
    d1 = r * (g - 1)
    d2 = n_t - g - r + 1
    if d2 <= 0:
        raise DegenerateError(f"d2 = n_t - g - r + 1 = {d2} is not positive")
    num = r * r * (g - 1) ** 2 - 4
    den = r * r + (g - 1) ** 2 - 5
    if den <= 0 or num <= 0:
        raise DegenerateError(f"s is undefined for r={r}, g={g}")
    return d1, d2, math.sqrt(num / den)


def f_approx_paper(stats: TestStatistics, r: int, g: int, n_t: int) -> tuple[FReport, ...]:
    d1, d2, s = paper_degrees(r, g, n_t)
    log_lambda = -sum(math.log1p(x) for x in stats.eigenvalues)
    f_w = math.expm1(-log_lambda / s) * d2 / d1
    T_P = stats.pillai
    f_p = T_P / (1.0 - T_P) * d2 / d1 if T_P < 1.0 else math.inf
    f_h = stats.hotelling_lawley * d2 / d1
    f_r = stats.roy * d2 / g
    conv = "paper"
    return (
        _report(Statistic.WILKS, stats.wilks, f_w, d1, d2, conv),
        _report(Statistic.PILLAI, stats.pillai, f_p, d1, d2, conv),
        _report(Statistic.HOTELLING_LAWLEY, stats.hotelling_lawley, f_h, d1, d2, conv),
        _report(Statistic.ROY, stats.roy, f_r, g, d2, conv),
    )


@dataclass(frozen=True)
class ManovaResult:
    sscp: SscpPair
    stats: TestStatistics
    reports: tuple[FReport, ...]
    treatment: str
    convention: str

    def report(self, kind: Statistic) -> FReport:
        for rep in self.reports:
            if rep.kind is kind:
                return rep
        raise KeyError(kind)

    def p_values(self) -> tuple[float, ...]:
        return tuple(rep.p for rep in self.reports)


def _check_convention(convention: str) -> None:
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}, got {convention!r}")


def manova_test(d: GroupedDataset, convention: str = "software") -> ManovaResult:
    """Test equality of the group mean vectors (group treated as a factor)."""
    _check_convention(convention)
    sscp = compute_sscp(d)
    stats = stats_from_eigenvalues(eig_product(sscp.e, sscp.h), sscp.q)
    if convention == "software":
        reports = f_approx_software(stats, d.r, sscp.q, sscp.v)
    else:
        reports = f_approx_paper(stats, d.r, d.g, d.n_t)
    return ManovaResult(sscp, stats, reports, "categorical", convention)


def regression_sscp(d: GroupedDataset) -> SscpPair:
    """SSCP pair for the zero-slope test of ``Y = b0 + b1 * code + error``."""
    x = d.row_codes()
    y = d.stacked()
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx <= 0.0:
        raise SingularError("group codes are constant; the slope is not estimable")
    yc = y - y.mean(axis=0)
    slope = (xc @ yc) / sxx
    h = sxx * np.outer(slope, slope)
    resid = yc - np.outer(xc, slope)
    e = resid.T @ resid
    e = 0.5 * (e + e.T)
    _check_error_matrix(e)
    return SscpPair(h, e, 1, d.n_t - 2)


def regression_test(d: GroupedDataset, convention: str = "software") -> ManovaResult:
    """The analysis obtained when the group column is treated as numeric.

    This is a multivariate regression on the group codes and tests that
    all ``r`` slopes are zero, not that the group means are equal. ``H``
    has rank one, so the four statistics map to the same exact F on
    ``(r, n_t - r - 1)`` degrees of freedom under either convention.
    """
    _check_convention(convention)
    if d.n_t < 3:
        raise SingularError(f"need at least 3 rows, got {d.n_t}")
    sscp = regression_sscp(d)
    stats = stats_from_eigenvalues(eig_product(sscp.e, sscp.h), sscp.q)
    reports = f_approx_software(stats, d.r, sscp.q, sscp.v)
    if convention != "software":
        reports = tuple(
            FReport(rep.kind, rep.value, rep.f, rep.df1, rep.df2, rep.p, convention)
            for rep in reports
        )
    return ManovaResult(sscp, stats, reports, "continuous", convention)


def analyze(d: GroupedDataset, treatment: str = "categorical", convention: str = "software") -> ManovaResult:
    if treatment == "categorical":
        return manova_test(d, convention)
    if treatment == "continuous":
        return regression_test(d, convention)
    raise ValueError(f"treatment must be one of {TREATMENTS}, got {treatment!r}")
