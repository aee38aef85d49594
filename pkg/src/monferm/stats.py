"""Mergeable binned statistics and model fits for measurement-event streams."""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit


# ---------------------------------------------------------------------------
# histograms


@dataclass
class Histogram:
    """Fixed-edge 1-D histogram with exact merge semantics.

    Binning is left-closed right-open except the last bin, which is
    closed.  A sample landing exactly on an interior edge goes to the
    right bin.  Merging two histograms with equal edges adds counts.
    """

    edges: np.ndarray
    counts: np.ndarray = field(default=None)
    underflow: int = 0
    overflow: int = 0

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=float)
        if self.edges.ndim != 1 or self.edges.size < 2 or np.any(np.diff(self.edges) <= 0):
            raise ValueError("edges must be strictly increasing with >= 2 entries")
        if self.counts is None:
            self.counts = np.zeros(self.edges.size - 1, dtype=np.int64)
        else:
            self.counts = np.asarray(self.counts, dtype=np.int64)

    @property
    def total(self) -> int:
        return int(self.counts.sum() + self.underflow + self.overflow)

    def add(self, samples) -> "Histogram":
        x = np.asarray(samples, dtype=float).ravel()
        x = x[np.isfinite(x)]
        lo, hi = self.edges[0], self.edges[-1]
        self.underflow += int(np.count_nonzero(x < lo))
        self.overflow += int(np.count_nonzero(x > hi))
        x = x[(x >= lo) & (x <= hi)]
        idx = np.searchsorted(self.edges, x, side="right") - 1
        idx[idx == self.edges.size - 1] = self.edges.size - 2  # top edge closed
        np.add.at(self.counts, idx, 1)
        return self

    def merge(self, other: "Histogram") -> "Histogram":
        if not np.array_equal(self.edges, other.edges):
            raise ValueError("cannot merge histograms with different edges")
        return Histogram(
            self.edges.copy(),
            self.counts + other.counts,
            self.underflow + other.underflow,
            self.overflow + other.overflow,
        )

    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def density(self) -> np.ndarray:
        """Counts normalized so the histogram integrates to 1."""
        n = self.counts.sum()
        if n == 0:
            return np.zeros_like(self.counts, dtype=float)
        return self.counts / (n * np.diff(self.edges))


def auto_edges(samples, bins: int = 201, symmetric: bool = False) -> np.ndarray:
    """Uniform edges spanning the 0.05%-99.95% quantiles of the samples.

    With ``symmetric`` the span is mirrored about zero so the zero peak
    of entropy-change distributions sits in a single central bin.
    """
    x = np.asarray(samples, dtype=float).ravel()
    x = x[np.isfinite(x)]
    if x.size == 0:
        return np.linspace(-1.0, 1.0, bins + 1)
    lo, hi = np.quantile(x, [0.0005, 0.9995])
    if symmetric:
        span = max(abs(lo), abs(hi), 1e-12)
        lo, hi = -span, span
    if hi <= lo:
        lo, hi = lo - 1e-12, hi + 1e-12
    return np.linspace(lo, hi, bins + 1)


@dataclass
class DensityMap:
    """2-D event histogram with selectable display normalization."""

    x_edges: np.ndarray
    y_edges: np.ndarray
    counts: np.ndarray = field(default=None)

    def __post_init__(self):
        self.x_edges = np.asarray(self.x_edges, dtype=float)
        self.y_edges = np.asarray(self.y_edges, dtype=float)
        for e in (self.x_edges, self.y_edges):
            if e.ndim != 1 or e.size < 2 or np.any(np.diff(e) <= 0):
                raise ValueError("edges must be strictly increasing")
        shape = (self.x_edges.size - 1, self.y_edges.size - 1)
        if self.counts is None:
            self.counts = np.zeros(shape, dtype=np.int64)
        else:
            self.counts = np.asarray(self.counts, dtype=np.int64)

    def add(self, x, y) -> "DensityMap":
        x = np.asarray(x, dtype=float).ravel()
        y = np.asarray(y, dtype=float).ravel()
        ok = np.isfinite(x) & np.isfinite(y)
        h, _, _ = np.histogram2d(x[ok], y[ok], bins=(self.x_edges, self.y_edges))
        self.counts += h.astype(np.int64)
        return self

    def merge(self, other: "DensityMap") -> "DensityMap":
        if not (np.array_equal(self.x_edges, other.x_edges)
                and np.array_equal(self.y_edges, other.y_edges)):
            raise ValueError("cannot merge density maps with different edges")
        return DensityMap(self.x_edges, self.y_edges, self.counts + other.counts)

    def normalized(self, mode: str = "global-max") -> np.ndarray:
        c = self.counts.astype(float)
        if mode == "global-max":
            m = c.max()
            return c / m if m > 0 else c
        if mode == "per-column":
            m = c.max(axis=1, keepdims=True)
            return np.divide(c, m, out=np.zeros_like(c), where=m > 0)
        if mode == "probability":
            n = c.sum()
            return c / n if n > 0 else c
        raise ValueError(f"unknown normalization mode {mode!r}")


# ---------------------------------------------------------------------------
# streaming moments


@dataclass
class MomentAccumulator:
    """Mergeable raw power sums; central moments are derived on demand."""

    n: int = 0
    s1: float = 0.0
    s2: float = 0.0
    s3: float = 0.0
    s4: float = 0.0

    def add(self, samples) -> "MomentAccumulator":
        x = np.asarray(samples, dtype=float).ravel()
        x = x[np.isfinite(x)]
        self.n += x.size
        self.s1 += float(np.sum(x))
        self.s2 += float(np.sum(x**2))
        self.s3 += float(np.sum(x**3))
        self.s4 += float(np.sum(x**4))
        return self

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        return MomentAccumulator(
            self.n + other.n, self.s1 + other.s1, self.s2 + other.s2,
            self.s3 + other.s3, self.s4 + other.s4,
        )

    def summary(self) -> dict:
        if self.n == 0:
            return {"count": 0, "mean": None, "var": None, "skewness": None,
                    "excess_kurtosis": None}
        n = self.n
        mu = self.s1 / n
        m2 = self.s2 / n - mu**2
        m3 = self.s3 / n - 3 * mu * self.s2 / n + 2 * mu**3
        m4 = (self.s4 / n - 4 * mu * self.s3 / n
              + 6 * mu**2 * self.s2 / n - 3 * mu**4)
        var = max(m2, 0.0)
        skew = m3 / var**1.5 if var > 0 else 0.0
        kurt = m4 / var**2 - 3.0 if var > 0 else 0.0
        return {"count": n, "mean": mu, "var": var, "skewness": skew,
                "excess_kurtosis": kurt}


# ---------------------------------------------------------------------------
# site taxonomy and the single-site entropy-drop bound


def site_groups(L: int) -> dict:
    """Named site groups (0-based): boundary shells at offsets 0/5/15 from
    the subsystem edges, plus the two deep-bulk centers."""
    if L % 2 != 0 or L < 4:
        raise ValueError("L must be even and >= 4")
    h = L // 2
    groups = {
        "boundary": [0, h - 1, h, L - 1],
        "near_boundary": [5, h - 6, h + 5, L - 6],
        "mid": [15, h - 16, h + 15, L - 16],
        "bulk": [L // 4, 3 * L // 4],
    }
    return {k: sorted(set(v)) for k, v in groups.items()}


def max_entropy_drop(n: float) -> float:
    """Largest possible single-measurement entropy decrease (<= 0, nats).

    A single affected particle contributes at most its own entanglement:
    the binary entropy of its occupation for n >= 1/2, saturating at
    ln 2 below half filling where the particle can straddle the cut.
    """
    n = float(np.clip(n, 0.0, 1.0))
    if n < 0.5:
        return -np.log(2.0)
    n = min(n, 1.0 - 1e-12)
    if n >= 1.0 - 1e-12:
        return 0.0
    return n * np.log(n) + (1 - n) * np.log(1 - n)


# ---------------------------------------------------------------------------
# balance statistics


def _jackknife(partials: np.ndarray, statistic) -> tuple:
    """Leave-one-trajectory-out estimate and standard error.

    ``partials`` has one row per trajectory; ``statistic`` maps the
    column-wise totals to a scalar.
    """
    m = partials.shape[0]
    totals = partials.sum(axis=0)
    theta = statistic(totals)
    if m < 2:
        return theta, np.inf
    loo = np.array([statistic(totals - row) for row in partials])
    se = np.sqrt((m - 1) / m * np.sum((loo - loo.mean()) ** 2))
    return theta, se


def balance_statistics(trajectory_partials) -> dict:
    """Stationarity balance between measurement and in-between entropy flow.

    ``trajectory_partials`` is an iterable of per-trajectory tuples
    (n_rate_events, sum_rate, n_events, sum_ds_meas, sum_tau).  Returns
    the mean in-between rate, the mean measurement change divided by the
    mean waiting time, their jackknife errors, and the residual sum.
    """
    p = np.asarray(list(trajectory_partials), dtype=float)
    if p.ndim != 2 or p.shape[1] != 5:
        raise ValueError("expected rows (n_rate, sum_rate, n_ev, sum_ds, sum_tau)")
    if p[:, 2].sum() < 100:
        raise ValueError("need at least 100 events for balance statistics")

    mean_rate, se_rate = _jackknife(p, lambda t: t[1] / t[0])
    mean_ratio, se_ratio = _jackknife(p, lambda t: t[3] / t[4])
    residual, se_residual = _jackknife(p, lambda t: t[1] / t[0] + t[3] / t[4])
    return {
        "mean_rate_between": mean_rate,
        "se_rate_between": se_rate,
        "mean_ds_meas_over_tau": mean_ratio,
        "se_ds_meas_over_tau": se_ratio,
        "residual": residual,
        "se_residual": se_residual,
        "n_trajectories": int(p.shape[0]),
        "n_events": int(p[:, 2].sum()),
    }


# ---------------------------------------------------------------------------
# saturation and mutual-information profiles


def saturation_curve(t_grid: np.ndarray, ee_series: np.ndarray) -> dict:
    """Trajectory-averaged S(t) with standard errors."""
    ee = np.asarray(ee_series, dtype=float)
    if ee.ndim != 2 or ee.shape[0] < 10:
        raise ValueError("need a (n_traj, n_times) array with >= 10 trajectories")
    mean = ee.mean(axis=0)
    se = ee.std(axis=0, ddof=1) / np.sqrt(ee.shape[0])
    return {"t": np.asarray(t_grid, dtype=float), "mean": mean, "se": se}


def window_slope(t: np.ndarray, mean_s: np.ndarray) -> tuple:
    """OLS slope of the mean entropy curve and its standard error."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(mean_s, dtype=float)
    if t.size < 3:
        raise ValueError("need at least 3 points for a slope estimate")
    a = np.vstack([t - t.mean(), np.ones_like(t)]).T
    coef, res, _, _ = np.linalg.lstsq(a, y, rcond=None)
    dof = t.size - 2
    sigma2 = (res[0] if res.size else np.sum((y - a @ coef) ** 2)) / dof
    se = np.sqrt(sigma2 / np.sum((t - t.mean()) ** 2))
    return float(coef[0]), float(se)


def mutual_information_profile(snapshots, region, sites) -> dict:
    """Average I(d) between the region and each probe site over snapshots."""
    from .gaussian import mutual_information

    region = np.asarray(region, dtype=int)
    values = {}
    for d_mat in snapshots:
        for r in sites:
            i_val, dist = mutual_information(d_mat, region, int(r))
            values.setdefault(dist, []).append(i_val)
    dists = np.array(sorted(values))
    mean = np.array([np.mean(values[d]) for d in dists])
    se = np.array([
        np.std(values[d], ddof=1) / np.sqrt(len(values[d])) if len(values[d]) > 1 else np.inf
        for d in dists
    ])
    return {"distance": dists, "mean": mean, "se": se}


# ---------------------------------------------------------------------------
# fits


@dataclass
class FitResult:
    model: str
    params: dict
    residual_norm: float
    n_samples: int

    def as_dict(self) -> dict:
        return {"model": self.model, "params": self.params,
                "residual_norm": self.residual_norm, "n_samples": self.n_samples}


def _hist_fit_data(hist: Histogram):
    dens = hist.density()
    mask = hist.counts > 0
    if mask.sum() < 10:
        raise ValueError("need at least 10 populated bins to fit")
    x = hist.centers()[mask]
    y = np.log(dens[mask])
    # Poisson counts: var(log density) ~ 1/count
    sigma = 1.0 / np.sqrt(hist.counts[mask])
    return x, y, sigma, int(hist.counts[mask].sum())


def fit_distribution(hist: Histogram, model: str = "gaussian") -> FitResult:
    """Weighted least squares on the log density of a histogram.

    Models: ``gaussian`` c*exp(-(x-mu)^2 / (2 sigma^2)); the
    Gaussian-to-exponential interpolation ``gauss_exp_interp``
    c*exp(-x^2/(a|x| + b)) with a, b > 0; and ``exponential_tail``
    c*exp(-|x - mu|/s).
    """
    x, y, sigma, n = _hist_fit_data(hist)
    w = hist.counts[hist.counts > 0].astype(float)
    mu0 = float(np.average(x, weights=w))
    sd0 = float(np.sqrt(np.average((x - mu0) ** 2, weights=w))) or 1.0

    if model == "gaussian":
        def f(x, logc, mu, sd):
            return logc - (x - mu) ** 2 / (2 * sd**2)
        p0 = [y.max(), mu0, sd0]
        bounds = ([-np.inf, -np.inf, 1e-300], [np.inf, np.inf, np.inf])
        names = ["logc", "mu", "sigma"]
    elif model == "gauss_exp_interp":
        def f(x, logc, a, b):
            return logc - x**2 / (a * np.abs(x) + b)
        p0 = [y.max(), 1e-6 * sd0, 2 * sd0**2]
        bounds = ([-np.inf, 1e-300, 1e-300], [np.inf, np.inf, np.inf])
        names = ["logc", "a", "b"]
    elif model == "exponential_tail":
        def f(x, logc, mu, s):
            return logc - np.abs(x - mu) / s
        p0 = [y.max(), mu0, sd0]
        bounds = ([-np.inf, -np.inf, 1e-300], [np.inf, np.inf, np.inf])
        names = ["logc", "mu", "s"]
    else:
        raise ValueError(f"unknown model {model!r}")

    popt, _ = curve_fit(f, x, y, p0=p0, sigma=sigma, bounds=bounds, maxfev=20000)
    resid = float(np.sqrt(np.mean((y - f(x, *popt)) ** 2)))
    return FitResult(model, dict(zip(names, popt)), resid, n)


def fit_decay(distance, value, model: str = "power_law") -> FitResult:
    """Log-space linear regression of a decay profile.

    ``power_law`` regresses ln y on ln d (returns the exponent);
    ``exponential`` regresses ln y on d (returns the rate).  Nonpositive
    values are excluded; the exclusion count is reported in params.
    """
    d = np.asarray(distance, dtype=float)
    y = np.asarray(value, dtype=float)
    keep = y > 0
    excluded = int(np.count_nonzero(~keep))
    d, y = d[keep], y[keep]
    if d.size < 5:
        raise ValueError("need at least 5 positive points")
    ly = np.log(y)
    if model == "power_law":
        slope, intercept = np.polyfit(np.log(d), ly, 1)
        pred = slope * np.log(d) + intercept
        params = {"exponent": float(slope), "log_amplitude": float(intercept)}
    elif model == "exponential":
        slope, intercept = np.polyfit(d, ly, 1)
        pred = slope * d + intercept
        params = {"rate": float(-slope), "log_amplitude": float(intercept)}
    else:
        raise ValueError(f"unknown model {model!r}")
    params["excluded_nonpositive"] = excluded
    resid = float(np.sqrt(np.mean((ly - pred) ** 2)))
    return FitResult(model, params, resid, int(d.size))
