"""Temporal correlation functions of the measurement record.

For a self-polarised run the transverse amplitude at cycle N is

    x_N = sin(alpha) cos(phi N) exp(-(N-1) alpha^2 / 4)          (phi = omega t_f)

and the joint distribution of the polarising outcome mu and the outcome
lambda N cycles later is

    p(mu, lambda) = (1 + mu lambda x_N) / 4,      mu, lambda in {+1, -1}.

Correlators are normalised to +-1 outcome values (the raw +-1/2 readout
eigenvalues would carry an extra factor 1/4):

    target-spin correlator   C_Ix(N)  = x_N
    readout correlator       C_Sz(N)  = sin(alpha) x_N
                                      = sin^2(alpha) cos(phi N) e^{-(N-1) alpha^2/4}

Empirical estimators: `empirical_corr` is the stationary time-average
over one long record (appropriate for the classical random-phase
experiment); `ensemble_corr` correlates the first measurement of each run
with the one N cycles later, averaged over runs, which is the estimator
that converges to C_Sz for the quantum protocol — a single outcome-
averaged record is not stationary (the polarisation decays), so the two
estimators are *not* interchangeable.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError

__all__ = [
    "CorrelationSeries",
    "joint_distribution",
    "corr_Ix",
    "corr_Ix_normalized",
    "corr_Sz",
    "empirical_corr",
    "ensemble_corr",
    "relative_entropy",
    "entropy_Sz_Ix",
]


@dataclass
class CorrelationSeries:
    """Correlation values on a set of integer lags, with standard errors.

    kind labels the estimator/model that produced the values
    ('Sz', 'Ix', 'empirical', ...).  CSV layout: lag,value,stderr,kind.
    """

    lags: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    kind: str = "empirical"
    meta: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.lags = np.asarray(self.lags, dtype=int)
        self.values = np.asarray(self.values, dtype=float)
        self.stderr = np.asarray(self.stderr, dtype=float)
        if not (self.lags.shape == self.values.shape == self.stderr.shape):
            raise InvalidArgumentError("lags, values and stderr must have equal shapes")

    def value_at(self, lag: int) -> tuple[float, float]:
        """(value, stderr) at an exact lag; KeyError if absent."""
        idx = np.nonzero(self.lags == lag)[0]
        if idx.size == 0:
            raise KeyError(f"lag {lag} not present")
        i = int(idx[0])
        return float(self.values[i]), float(self.stderr[i])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lag", "value", "stderr", "kind"])
            for lag, v, s in zip(self.lags, self.values, self.stderr):
                w.writerow([int(lag), repr(float(v)), repr(float(s)), self.kind])

    @classmethod
    def from_csv(cls, path) -> "CorrelationSeries":
        lags, vals, errs, kind = [], [], [], "empirical"
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                lags.append(int(row["lag"]))
                vals.append(float(row["value"]))
                errs.append(float(row["stderr"]))
                kind = row["kind"]
        return cls(np.array(lags), np.array(vals), np.array(errs), kind=kind)


def joint_distribution(x_n: float) -> np.ndarray:
    """2x2 joint distribution of (initial outcome mu, lag-N outcome lambda).

    Index 0 means +1, index 1 means -1:
    p[0,0] = p[1,1] = (1 + x_n)/4,  p[0,1] = p[1,0] = (1 - x_n)/4.
    """
    if abs(x_n) > 1.0 + 1e-12:
        raise InvalidArgumentError(f"|x_n| must not exceed 1, got {x_n}")
    same = (1.0 + x_n) / 4.0
    diff = (1.0 - x_n) / 4.0
    return np.array([[same, diff], [diff, same]])


def _lag_array(max_lag: int) -> np.ndarray:
    if max_lag < 1:
        raise InvalidArgumentError("max_lag must be >= 1")
    return np.arange(1, max_lag + 1)


def corr_Ix(alpha: float, phi: float, max_lag: int) -> CorrelationSeries:
    """Model target-spin correlator C_Ix(N) = x_N for N = 1..max_lag."""
    n = _lag_array(max_lag)
    vals = np.sin(alpha) * np.cos(phi * n) * np.exp(-(n - 1) * alpha**2 / 4.0)
    return CorrelationSeries(n, vals, np.zeros_like(vals), kind="Ix-model")


def corr_Ix_normalized(alpha: float, phi: float, max_lag: int, undo_decay: bool = False) -> CorrelationSeries:
    """C_Ix scaled to unit initial amplitude, optionally with decay removed.

    Without decay removal: cos(phi N) e^{-(N-1) alpha^2/4}; with it the
    pure precession cos(phi N), the form whose two-time combinations reach
    the Leggett-Garg maximum 3/2.
    """
    n = _lag_array(max_lag)
    vals = np.cos(phi * n)
    if not undo_decay:
        vals = vals * np.exp(-(n - 1) * alpha**2 / 4.0)
    return CorrelationSeries(n, vals, np.zeros_like(vals), kind="Ix-normalized")


def corr_Sz(alpha: float, phi: float, max_lag: int) -> CorrelationSeries:
    """Model readout correlator C_Sz(N) = sin^2(alpha) cos(phi N) e^{-(N-1) alpha^2/4}."""
    n = _lag_array(max_lag)
    vals = np.sin(alpha) ** 2 * np.cos(phi * n) * np.exp(-(n - 1) * alpha**2 / 4.0)
    return CorrelationSeries(n, vals, np.zeros_like(vals), kind="Sz-model")


def empirical_corr(series, max_lag: int) -> CorrelationSeries:
    """Time-averaged product estimator over one record:

        C(N) = (1 / (k - N)) sum_i s_i s_{i+N},   i = 0 .. k-N-1

    stderr is the sample standard error of the lag-N products (treats the
    products as uncorrelated, which is adequate for the weakly correlated
    records this is applied to).  Only meaningful for (approximately)
    stationary records such as the classical random-phase experiment.
    """
    s = np.asarray(series, dtype=float).ravel()
    k = s.size
    if max_lag >= k:
        raise InvalidArgumentError(f"max_lag {max_lag} must be smaller than the record length {k}")
    lags = _lag_array(max_lag)
    vals = np.empty(lags.size)
    errs = np.empty(lags.size)
    for j, n in enumerate(lags):
        prod = s[:-n] * s[n:]
        vals[j] = prod.mean()
        errs[j] = prod.std(ddof=1) / math.sqrt(prod.size) if prod.size > 1 else np.inf
    return CorrelationSeries(lags, vals, errs, kind="empirical")


def ensemble_corr(records: np.ndarray, max_lag: int | None = None) -> CorrelationSeries:
    """Across-run estimator: C(N) = mean_r [ s_{r,0} * s_{r,N} ].

    `records` has shape (runs, length); column 0 is the reference
    measurement of each run (the polarising measurement for self-polarised
    data).  stderr is the standard error over runs.
    """
    m = np.atleast_2d(np.asarray(records, dtype=float))
    runs, length = m.shape
    if runs < 2:
        raise InvalidArgumentError("need at least 2 runs for an ensemble estimate")
    if max_lag is None:
        max_lag = length - 1
    if not (1 <= max_lag <= length - 1):
        raise InvalidArgumentError(f"max_lag must be in [1, {length - 1}], got {max_lag}")
    lags = _lag_array(max_lag)
    prod = m[:, :1] * m[:, 1 : max_lag + 1]
    vals = prod.mean(axis=0)
    errs = prod.std(axis=0, ddof=1) / math.sqrt(runs)
    return CorrelationSeries(lags, vals, errs, kind="ensemble")


def relative_entropy(p, q) -> float:
    """Kullback-Leibler divergence sum_i p_i ln(p_i / q_i) (natural log).

    Both arguments must be probability vectors of equal length (entries
    >= 0, summing to 1 within 1e-9).  Terms with p_i = 0 contribute 0;
    a q_i = 0 with p_i > 0 means disjoint support and raises
    InvalidArgumentError.  Always >= 0, and 0 exactly when p == q.
    """
    p = np.asarray(p, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    if p.shape != q.shape:
        raise InvalidArgumentError("p and q must have the same length")
    for name, v in (("p", p), ("q", q)):
        if np.any(v < -1e-12):
            raise InvalidArgumentError(f"{name} has negative entries")
        if abs(v.sum() - 1.0) > 1e-9:
            raise InvalidArgumentError(f"{name} must sum to 1, got {v.sum()}")
    pm = p > 0
    if np.any(pm & (q <= 0)):
        raise InvalidArgumentError("q vanishes where p does not (disjoint support)")
    return float(np.sum(p[pm] * np.log(p[pm] / q[pm])))


def entropy_Sz_Ix(alpha: float, phi: float, lag: int = 1) -> float:
    """Information distance between weak and projective readout statistics.

    Compares the lag-N weak readout distribution
    P = ((1 + x_N sin(alpha))/2, (1 - x_N sin(alpha))/2), with
    x_N = sin(alpha) cos(phi N) e^{-(N-1) alpha^2/4}, against the ideal
    projective reference Q = ((1 + cos(phi N))/2, (1 - cos(phi N))/2).
    Approaches 0 as alpha -> pi/2 at N = 1 (weak readout becomes
    projective); at phi = 0 the reference is deterministic while the weak
    distribution is not, which violates the support precondition of
    `relative_entropy` and raises InvalidArgumentError.
    """
    if lag < 1:
        raise InvalidArgumentError("lag must be >= 1")
    x_n = np.sin(alpha) * np.cos(phi * lag) * np.exp(-(lag - 1) * alpha**2 / 4.0)
    zeta = x_n * np.sin(alpha)
    ref = np.cos(phi * lag)
    p = np.array([(1.0 + zeta) / 2.0, (1.0 - zeta) / 2.0])
    q = np.array([(1.0 + ref) / 2.0, (1.0 - ref) / 2.0])
    return relative_entropy(p, q)
