"""Debt-flow aggregation and the repayment-duration crisis threshold.

A portfolio is a set of loans (size, duration).  Loans are grouped into
duration buckets l_1 > l_2 > ... and each bucket gets an averaged debt
N_i.  The flow of bucket i is E_i = N_i l_1 / l_i (what it costs per unit
of the longest duration), and the relative mean duration is

    T = sum E_i / sum N_i.

The flows, normalised by the smallest one, are interpolated by a monotone
cubic lambda(x) on the normalised rank x = i / count.  Given an inverse
temperature b the portfolio is in crisis when T < I_2(b)/I_1(b) with

    I_1 = integral dx / (e^{b lambda} - 1),  I_2 = integral lambda dx / (e^{b lambda} - 1),

or, when the tail of lambda is too flat for the ratio to be trusted,
T < c0 c^(-1/a) b^(-a) with a fitted from lambda near its minimum.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.interpolate import PchipInterpolator

from . import quadrature
from .errors import (DivergenceUndetermined, EmptySeries, InsufficientData, NoConvergence,
                     NonlinearWindow, NonPositiveValue, WindowOutOfRange)


@dataclass(frozen=True)
class DebtRecord:
    size: float
    duration: float  # days
    timestamp: float | None = None

    def __post_init__(self):
        if not (self.size > 0 and self.duration > 0):
            raise NonPositiveValue(f"loan size and duration must be positive: {self}")


DURATION_UNITS = {"days": 1.0, "weeks": 7.0, "months": 365.25 / 12, "years": 365.25}


@dataclass(frozen=True)
class FlowSeries:
    durations: tuple  # descending
    debts: tuple
    flows: tuple
    virtual: tuple  # True where a knot was inserted by gap filling
    window: float

    def __post_init__(self):
        if not self.durations:
            raise EmptySeries("no duration buckets")
        d = np.asarray(self.durations)
        if np.any(np.diff(d) >= 0):
            raise ValueError("durations must be strictly decreasing")

    def __len__(self):
        return len(self.durations)

    @property
    def ratios(self):
        """Per-unit flow l_1 / l_i of each bucket."""
        return tuple(self.durations[0] / l for l in self.durations)


def read_portfolio_csv(path):
    """Read a CSV with header size,duration and an optional timestamp column."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"size", "duration"} - set(reader.fieldnames or ())
        if missing:
            raise InsufficientData(f"{path}: header lacks {', '.join(sorted(missing))}")
        for row in reader:
            line = reader.line_num
            try:
                size, dur = float(row["size"]), float(row["duration"])
                ts = row.get("timestamp")
                ts = float(ts) if ts not in (None, "") else None
            except (TypeError, ValueError):
                raise InsufficientData(f"{path}: row {line}: malformed record {row}") from None
            if not (size > 0 and dur > 0):
                raise NonPositiveValue(f"{path}: row {line}: size and duration must be positive")
            out.append(DebtRecord(size, dur, ts))
    if not out:
        raise EmptySeries(f"{path}: no records")
    return out


def ingest(records, window, bucket_width=None, fill_step=None, unit="days"):
    """Bucket loans by duration and average the debt over time windows.

    ``window`` is the averaging window length in the timestamp unit.  When
    timestamps are present the bucket debt is the total size divided by
    the number of windows spanned; without timestamps everything falls
    into a single window.  ``bucket_width`` rounds durations to a grid.
    ``fill_step`` inserts virtual knots across gaps wider than the step;
    total debt and total flow are preserved exactly.  Durations given in
    ``unit`` are converted to days first.  At least three distinct
    durations are required.
    """
    if window is None or not window > 0:
        raise ValueError("an averaging window > 0 is required")
    records = list(records)
    if not records:
        raise EmptySeries("no records")
    if unit not in DURATION_UNITS:
        raise ValueError(f"unknown duration unit {unit!r}")
    scale = DURATION_UNITS[unit]
    stamps = [r.timestamp for r in records if r.timestamp is not None]
    nwin = 1
    if stamps:
        nwin = max(1, math.ceil((max(stamps) - min(stamps)) / window))
    buckets = {}
    for r in records:
        key = r.duration * scale
        if bucket_width:
            key = max(bucket_width, round(key / bucket_width) * bucket_width)
        buckets[key] = buckets.get(key, 0.0) + r.size
    durations = sorted(buckets, reverse=True)
    if len(durations) < 3:
        raise InsufficientData(f"need at least three distinct durations, got {len(durations)}")
    debts = [buckets[d] / nwin for d in durations]
    virtual = [False] * len(durations)
    if fill_step:
        durations, debts, virtual = _fill_gaps(durations, debts, fill_step)
    l1 = durations[0]
    flows = [n * l1 / l for n, l in zip(debts, durations)]
    return FlowSeries(tuple(durations), tuple(debts), tuple(flows), tuple(virtual), window)


def _fill_gaps(durations, debts, step):
    """Insert knots every ``step`` inside wide gaps.

    A virtual knot at v between l_lo < v < l_hi takes debt from both
    neighbours in the proportion that keeps sum N and sum N / l fixed.
    Each neighbour gives at most a quarter of its original debt per gap.
    """
    orig = list(debts)
    new_d = list(debts)
    out = []  # (duration, debt index or None, debt)
    for i in range(len(durations)):
        out.append([durations[i], i, None])
        if i + 1 == len(durations):
            break
        hi, lo = durations[i], durations[i + 1]
        if hi - lo <= step:
            continue
        vs = []
        v = lo + step
        while v < hi * (1 - 1e-12):
            vs.append(v)
            v += step
        if not vs:
            continue
        vs = np.array(vs)
        t = (vs - lo) / (hi - lo)
        q = orig[i + 1] + t * (orig[i] - orig[i + 1])
        share_hi = (1 / vs - 1 / lo) / (1 / hi - 1 / lo)
        d_hi = q * share_hi
        d_lo = q - d_hi
        scale = min(1.0, 0.25 * orig[i] / d_hi.sum(), 0.25 * orig[i + 1] / d_lo.sum())
        new_d[i] -= scale * d_hi.sum()
        new_d[i + 1] -= scale * d_lo.sum()
        for v, qq in sorted(zip(vs, scale * q), reverse=True):
            out.append([float(v), None, float(qq)])
    durs, vals, virt = [], [], []
    for dur, idx, q in out:
        durs.append(dur)
        vals.append(float(new_d[idx]) if idx is not None else q)
        virt.append(idx is None)
    return durs, vals, virt


def stretch_durations(series, rho):
    """Pull every duration toward the longest: l_i -> l_1 (l_i / l_1)^(1/rho).

    rho = 1 is the identity; larger rho lowers each l_1/l_i and so lowers T.
    Debts are kept; flows are recomputed.
    """
    if rho <= 0:
        raise NonPositiveValue("stretch factor must be positive")
    l1 = series.durations[0]
    durs = tuple(l1 * (l / l1) ** (1 / rho) for l in series.durations)
    flows = tuple(n * l1 / l for n, l in zip(series.debts, durs))
    return FlowSeries(durs, series.debts, flows, series.virtual, series.window)


def mean_duration(series):
    """Relative mean duration T = sum E_i / sum N_i."""
    return float(np.sum(series.flows) / np.sum(series.debts))


# ---------------------------------------------------------------- flow profile

@dataclass(frozen=True)
class FlowProfile:
    x: np.ndarray
    lam: np.ndarray
    tail_power: float  # log-log slope over the last quarter of the knots
    interp: PchipInterpolator
    tail_slope: float | None = None  # set when the tail is extended linearly

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        lo = x < self.x[0]
        hi = x > self.x[-1]
        mid = ~(lo | hi)
        out[lo] = self.lam[0]
        out[mid] = self.interp(x[mid])
        if self.tail_slope is None:
            out[hi] = self.lam[-1] * (x[hi] / self.x[-1]) ** self.tail_power
        else:
            out[hi] = self.lam[-1] + self.tail_slope * (x[hi] - self.x[-1])
        return out

    @property
    def grows(self):
        """True when lambda increases without bound past the last knot."""
        return self.tail_power > 1 or (self.tail_slope is not None and self.tail_slope > 0)


def _loglog_slope(x, y):
    lx, ly = np.log(x), np.log(y)
    return float(np.polyfit(lx, ly, 1)[0])


def _quartile(count):
    return max(2, math.ceil(count / 4))


def flow_profile(series):
    """lambda(x) through (i/count, E_i / min E) with an extension past x = 1.

    The tail exponent is the log-log slope over the last quarter of the
    knots.  Above 1 the extension is that power law; otherwise lambda is
    continued along the least-squares line of the tail knots, so a rising
    tail never grows slower than linearly.
    """
    m = len(series)
    if m < 2:
        raise InsufficientData("need at least two duration buckets")
    flows = np.asarray(series.flows, dtype=float)
    lam = flows / flows.min()
    x = np.arange(1, m + 1) / m
    q = _quartile(m)
    tail = _loglog_slope(x[-q:], lam[-q:])
    slope = None if tail > 1 else float(np.polyfit(x[-q:], lam[-q:], 1)[0])
    return FlowProfile(x, lam, tail, PchipInterpolator(x, lam, extrapolate=False), slope)


# ---------------------------------------------------------------- estimating b

@dataclass(frozen=True)
class BEstimate:
    b: float
    slope: float
    intercept: float
    window_ratio: float
    window: tuple


def _window_model_ratio(b, slope, intercept, lo, hi):
    """Weighted mean of r(x) = slope x + intercept on [lo, hi] with weight 1/(e^{b r} - 1)."""
    r_min = slope * lo + intercept

    def f(x):
        r = slope * x + intercept
        # weight rescaled by e^{b r_min} to stay in range
        w = np.exp(-b * (r - r_min)) / -np.expm1(-b * r)
        return np.vstack((w, r * w))

    val, _ = quadrature.integrate_many(f, lo, hi, abs_tol=1e-300, rel_tol=1e-12)
    return float(val[1] / val[0])


def estimate_b(series, s, a=2.0, linear_tol=0.02):
    """Inverse temperature from the short-duration window i = s .. floor(a s).

    The per-unit flows r_i = l_1/l_i are fitted by a line r = k i + c on
    the window.  Assuming bucket debts follow 1/(e^{b r} - 1), the
    window ratio sum E / sum N equals the weighted mean of r on the window,
    which in y = b x reads (1/b) integral k y w dy / integral w dy.  That
    relation is solved for b.  Integration bounds are widened by half a
    knot on each side so the integral matches the discrete sum.
    """
    if a <= 1:
        raise WindowOutOfRange("window ratio a must exceed 1")
    m = len(series)
    top = math.floor(a * s)
    if s < 1 or top > m or top - s + 1 < 3:
        raise WindowOutOfRange(f"window [{s}, {top}] does not fit in {m} buckets")
    idx = np.arange(s, top + 1)
    debts = np.asarray(series.debts)[idx - 1]
    flows = np.asarray(series.flows)[idx - 1]
    ratio = float(flows.sum() / debts.sum())
    r = flows / debts
    slope, intercept = np.polyfit(idx.astype(float), r, 1)
    resid = r - (slope * idx + intercept)
    if np.sqrt(np.mean(resid ** 2)) > linear_tol * np.mean(r):
        raise NonlinearWindow("per-unit flows are not linear on the window")
    if slope <= 0:
        raise NonlinearWindow("per-unit flows do not increase on the window")
    lo, hi = s - 0.5, top + 0.5
    r_lo = slope * lo + intercept
    if r_lo <= 0:
        raise NonlinearWindow("fitted line is not positive on the window")

    def gap(logb):
        return _window_model_ratio(math.exp(logb), slope, intercept, lo, hi) - ratio

    b_lo, b_hi = 1e-9 / r_lo, 50.0 / r_lo
    g_lo, g_hi = gap(math.log(b_lo)), gap(math.log(b_hi))
    if not (g_lo > 0 > g_hi):
        raise NoConvergence(f"window ratio {ratio:.6g} is outside the range the model can reach")
    logb = optimize.brentq(gap, math.log(b_lo), math.log(b_hi), xtol=1e-14, rtol=1e-14)
    return BEstimate(math.exp(logb), float(slope), float(intercept), ratio, (int(s), int(top)))


# ---------------------------------------------------------------- threshold

@dataclass(frozen=True)
class DurationThreshold:
    kind: str  # "integral_ratio" or "critical_Tcr"
    value: float
    tail_power: float
    alpha: float | None = None


def _bose_ratio(profile, b):
    knots = list(profile.x)

    def f(x):
        lam = profile(x)
        w = 1.0 / np.expm1(b * lam)
        return np.vstack((w, lam * w))

    head, _ = quadrature.integrate_many(f, 0.0, float(profile.x[-1]), knots, abs_tol=1e-300,
                                        rel_tol=1e-11)
    # past the last knot stop once b lambda > 60
    x1, lam1 = float(profile.x[-1]), float(profile.lam[-1])
    target = 60.0 / b
    if profile.tail_slope is None:
        x_end = x1 * max(1.0, target / lam1) ** (1 / profile.tail_power)
    else:
        x_end = x1 + max(0.0, target - lam1) / profile.tail_slope
    tail = np.zeros(2)
    if x_end > x1:
        tail, _ = quadrature.integrate_many(f, x1, x_end, abs_tol=1e-300, rel_tol=1e-11)
    i1, i2 = head + tail
    return float(i2 / i1)


# head exponents within this of 1 count as 1 (two-knot fits are exact up to rounding)
_HEAD_EPS = 1e-9


def duration_threshold(series, b):
    """Critical relative duration for a given b.

    lambda ~ x^p near the origin with p > 1 makes I_1 diverge there; then
    alpha = 1/p and T_cr = c0 c^(-1/alpha) b^(-alpha), with c the
    regularised constant and c0 the Bose integral of xi at alpha.
    Otherwise a rising tail makes both integrals converge and the
    threshold is I_2/I_1.
    """
    if not b > 0:
        raise NonPositiveValue("b must be positive")
    prof = flow_profile(series)
    q = _quartile(len(series))
    p = _loglog_slope(prof.x[:q], prof.lam[:q])
    if p > 1 + _HEAD_EPS:
        alpha = 1 / p
        c = quadrature.regularized_c(alpha).value
        c0 = quadrature.bose_integral(1.0, alpha).value
        return DurationThreshold("critical_Tcr", c0 * c ** (-1 / alpha) * b ** (-alpha),
                                 prof.tail_power, alpha)
    if prof.grows:
        return DurationThreshold("integral_ratio", _bose_ratio(prof, b), prof.tail_power)
    raise DivergenceUndetermined(
        f"flows do not rise along the tail (log-log slope {prof.tail_power:.3g}) "
        f"and the head slope {p:.3g} is not above 1")


@dataclass(frozen=True)
class CrisisVerdict:
    T: float
    threshold: float
    kind: str
    crisis: bool
    b: float
    alpha: float | None = None  # fitted exponent on the critical_Tcr route


def crisis_verdict(series, b):
    """Crisis exactly when T < threshold; T equal to the threshold is no crisis."""
    t = mean_duration(series)
    th = duration_threshold(series, b)
    return CrisisVerdict(t, th.value, th.kind, bool(t < th.value), b, th.alpha)


def plot_tables(series, points=101):
    """Rows (x, lambda(x)) on a uniform grid over the knots, and (l_i, E_i)."""
    prof = flow_profile(series)
    x = np.linspace(prof.x[0], prof.x[-1], points)
    lam_rows = [(float(a), float(v)) for a, v in zip(x, prof(x))]
    flow_rows = [(float(l), float(e)) for l, e in zip(series.durations, series.flows)]
    return lam_rows, flow_rows


def synthetic_series(b, slope, count, l1=3600.0, scale=1000.0, intercept=None):
    """Portfolio records whose per-unit flows are r_i = intercept + slope i.

    Bucket debts follow scale / (e^{b r_i} - 1), which is the model
    :func:`estimate_b` inverts.  The default intercept makes r_1 = 1.
    """
    if intercept is None:
        intercept = 1 - slope
    i = np.arange(1, count + 1)
    r = intercept + slope * i
    debts = scale / np.expm1(b * r)
    durs = l1 / r
    return [DebtRecord(float(d), float(l)) for d, l in zip(debts, durs)]
