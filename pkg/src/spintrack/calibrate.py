"""Least-squares calibration and correlation reconstruction.

The analysis chain for a photon record is

    fit_na_nb            bright/dark levels from the rotation-sweep trace
    reconstruct_Sz_corr  photon products -> readout correlation C_Sz(N)
    fit_alpha            measurement strength from the C_Sz model
    reconstruct_Ix_corr  divide out sin^2(alpha) (and optionally the
                         measurement-induced decay) -> target correlation

All fits are derivative-free (bounded Brent for the scalar ones,
Nelder-Mead for the joint ones); the objectives are smooth and tiny, so
this is simpler and just as accurate as gradient-based solvers here.
Parameter uncertainties come from the Gauss-Newton approximation at the
optimum.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .correlation import CorrelationSeries
from .errors import (
    AmplificationError,
    DegenerateContrastError,
    FitFailureError,
    InvalidArgumentError,
)
from .readout import ModulationTrace, PhotonTrace, ReadoutModel

__all__ = [
    "FitResult",
    "fit_na_nb",
    "reconstruct_Sz_corr",
    "fit_alpha",
    "fit_decay",
    "fit_alpha_modulated",
    "reconstruct_Ix_corr",
    "corr_Sz_model",
]


@dataclass
class FitResult:
    """Outcome of one least-squares fit.

    params/stderr are name -> value maps; `residual` is the final
    (weighted) sum of squares over `n_points` data points.  `boundary`
    flags an estimate that ran into its search bound — treat the value
    with suspicion.
    """

    params: dict
    stderr: dict
    residual: float
    n_points: int
    success: bool = True
    boundary: bool = False
    message: str = ""
    meta: dict = field(default_factory=dict, repr=False)

    def __getitem__(self, name: str) -> float:
        return self.params[name]

    def as_dict(self) -> dict:
        return {
            "params": self.params,
            "stderr": self.stderr,
            "residual": self.residual,
            "n_points": self.n_points,
            "success": self.success,
            "boundary": self.boundary,
            "message": self.message,
            "meta": self.meta,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.as_dict(), fh, sort_keys=True, indent=1)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> "FitResult":
        with open(path) as fh:
            d = json.load(fh)
        return cls(**d)


def corr_Sz_model(alpha: float, phi: float, lags) -> np.ndarray:
    """Readout-correlation model sin^2(a) cos(phi N) e^{-(N-1) a^2 / 4}."""
    n = np.asarray(lags, dtype=float)
    return np.sin(alpha) ** 2 * np.cos(phi * n) * np.exp(-(n - 1) * alpha**2 / 4.0)


# ---------------------------------------------------------------------------
# photon-level calibration


def _angle_groups(angles_deg, counts):
    """Per-angle sample means and standard errors of a sweep record."""
    angles_deg = np.asarray(angles_deg, dtype=float)
    counts = np.asarray(counts, dtype=float)
    if angles_deg.shape != counts.shape:
        raise InvalidArgumentError("angles and counts must have equal length")
    uniq = np.unique(angles_deg)
    if uniq.size < 4:
        raise InvalidArgumentError("need at least 4 distinct sweep angles to fit 3 parameters")
    means = np.empty(uniq.size)
    errs = np.empty(uniq.size)
    for i, ang in enumerate(uniq):
        grp = counts[angles_deg == ang]
        if grp.size < 2:
            raise InvalidArgumentError(f"angle {ang} deg has fewer than 2 samples")
        means[i] = grp.mean()
        errs[i] = grp.std(ddof=1) / np.sqrt(grp.size)
    # floor the errors so a noiseless synthetic sweep degrades to an
    # unweighted fit instead of dividing by zero
    errs = np.maximum(errs, 1e-9 * max(1.0, np.abs(means).max()))
    return uniq, means, errs


def fit_na_nb(trace, counts=None, phi0_bounds=(-0.5, 0.5), xatol=1e-10) -> FitResult:
    """Recover (n_a, n_b, phi_0) from a rotation-sweep photon record.

    `trace` is a ModulationTrace, or an array of angles (degrees) with
    `counts` given separately.  The per-angle means follow

        n(k) = a + b sin^2(phi_k/2 + phi_0),  a = (n_a+n_b)/2, b = (n_a-n_b)/2

    which is linear in (a, b) at fixed phi_0; the fit profiles the
    weighted linear solution over phi_0 with a bounded scalar search.
    Raises DegenerateContrastError when the recovered contrast is not
    positive by at least 3 standard errors.
    """
    if isinstance(trace, ModulationTrace):
        angles_deg, counts = trace.angles_deg, trace.counts
    else:
        angles_deg = trace
        if counts is None:
            raise InvalidArgumentError("pass a ModulationTrace or (angles, counts)")
    xs, m, se = _angle_groups(angles_deg, counts)
    w = 1.0 / se**2
    half = np.deg2rad(xs) / 2.0

    def solve(phi0):
        design = np.column_stack([np.ones_like(half), np.sin(half + phi0) ** 2])
        lhs = design.T @ (w[:, None] * design)
        coef = np.linalg.solve(lhs, design.T @ (w * m))
        r = m - design @ coef
        return float(r @ (w * r)), coef, lhs

    opt = minimize_scalar(lambda p: solve(p)[0], bounds=phi0_bounds, method="bounded",
                          options={"xatol": xatol})
    if not opt.success:
        raise FitFailureError(f"phi_0 search failed: {opt.message}")
    phi0 = float(opt.x)
    residual, (a, b), lhs = solve(phi0)

    cov = np.linalg.inv(lhs)  # weights are inverse variances, so no residual scale
    var_a, var_b, cov_ab = cov[0, 0], cov[1, 1], cov[0, 1]
    contrast = 2.0 * b
    contrast_se = 2.0 * np.sqrt(var_b)
    if contrast < 3.0 * contrast_se:
        raise DegenerateContrastError(
            f"contrast {contrast:.3g} below noise (3 sigma = {3 * contrast_se:.3g})")

    # profile curvature for the phi_0 uncertainty (delta-chi-square = 1)
    h = 1e-4
    curv = (solve(phi0 + h)[0] - 2 * residual + solve(phi0 - h)[0]) / h**2
    phi0_se = float(np.sqrt(2.0 / curv)) if curv > 0 else float("inf")

    boundary = min(phi0 - phi0_bounds[0], phi0_bounds[1] - phi0) < 10 * xatol
    return FitResult(
        params={"n_a": float(a + b), "n_b": float(a - b), "phi_0": phi0},
        stderr={
            "n_a": float(np.sqrt(var_a + var_b + 2 * cov_ab)),
            "n_b": float(np.sqrt(var_a + var_b - 2 * cov_ab)),
            "phi_0": phi0_se,
        },
        residual=residual,
        n_points=int(xs.size),
        success=bool(opt.success),
        boundary=bool(boundary),
        message="phi_0 estimate at search bound" if boundary else "",
    )


# ---------------------------------------------------------------------------
# correlation reconstruction


def reconstruct_Sz_corr(
    trace: PhotonTrace,
    model: ReadoutModel,
    max_lag: int | None = None,
    estimator: str = "auto",
) -> CorrelationSeries:
    """Centered, contrast-normalised readout correlation from photons:

        C_Sz(N) = 4 (C_n(N) - n_av^2) / (n_a - n_b)^2

    estimator 'ensemble' takes lag-from-start products across runs (the
    right estimator for polarised quantum runs, whose reference is the
    polarising measurement in column 0); 'time-average' pools the lag-N
    products inside each run (for stationary records, i.e. the classical
    experiments).  'auto' picks by the trace kind.  Standard errors are
    those of the product means scaled by 4/(n_a - n_b)^2; calibration
    uncertainty is not propagated.
    """
    contrast = model.contrast
    if contrast <= 0:
        raise DegenerateContrastError("n_a must exceed n_b to normalise the correlation")
    if estimator == "auto":
        estimator = "ensemble" if trace.kind == "quantum" else "time-average"
    counts = trace.counts.astype(float)
    runs, length = counts.shape
    scale = 4.0 / contrast**2
    offset = model.n_av**2

    if estimator == "ensemble":
        if trace.first_lag != 0:
            raise InvalidArgumentError(
                "ensemble estimator needs the reference measurement in column 0 "
                "(self-polarised records)")
        if runs < 2:
            raise InvalidArgumentError("need at least 2 runs for the ensemble estimator")
        top = length - 1
        if max_lag is None:
            max_lag = top
        if not (1 <= max_lag <= top):
            raise InvalidArgumentError(f"max_lag must be in [1, {top}], got {max_lag}")
        prod = counts[:, :1] * counts[:, 1 : max_lag + 1]
        vals = scale * (prod.mean(axis=0) - offset)
        errs = scale * prod.std(axis=0, ddof=1) / np.sqrt(runs)
        lags = np.arange(1, max_lag + 1)
    elif estimator == "time-average":
        top = length - 1
        if max_lag is None:
            max_lag = min(top, length // 2)
        if not (1 <= max_lag <= top):
            raise InvalidArgumentError(f"max_lag must be in [1, {top}], got {max_lag}")
        lags = np.arange(1, max_lag + 1)
        vals = np.empty(max_lag)
        errs = np.empty(max_lag)
        for j, n in enumerate(lags):
            prod = (counts[:, :-n] * counts[:, n:]).ravel()
            vals[j] = scale * (prod.mean() - offset)
            errs[j] = scale * prod.std(ddof=1) / np.sqrt(prod.size)
    else:
        raise InvalidArgumentError(f"unknown estimator {estimator!r}")

    return CorrelationSeries(
        lags, vals, errs, kind="Sz-reconstructed",
        meta={"estimator": estimator, "n_a": model.n_a, "n_b": model.n_b},
    )


def reconstruct_Ix_corr(
    series: CorrelationSeries,
    alpha: float,
    undo_decay: bool = False,
    max_gain: float = 1e3,
) -> CorrelationSeries:
    """Target-spin correlation from the readout one: divide by sin^2(alpha),
    optionally also undo the per-cycle decay e^{-(N-1) alpha^2/4}.

    Values and standard errors are scaled identically (the lag-N gain is
    e^{(N-1) alpha^2/4} / sin^2(alpha)); if any lag's gain exceeds
    `max_gain` the reconstruction would mostly amplify noise and an
    AmplificationError is raised.
    """
    s2 = np.sin(alpha) ** 2
    if s2 < 1e-6:
        raise AmplificationError(f"sin^2(alpha) = {s2:.2e} is too small to divide out")
    gain = np.full(series.lags.shape, 1.0 / s2)
    if undo_decay:
        gain *= np.exp((series.lags - 1) * alpha**2 / 4.0)
    worst = float(gain.max())
    if worst > max_gain:
        raise AmplificationError(
            f"lag {series.lags[int(gain.argmax())]} gain {worst:.3g} exceeds max_gain {max_gain:.3g}")
    meta = dict(series.meta, alpha=alpha, undo_decay=undo_decay)
    return CorrelationSeries(series.lags, series.values * gain, series.stderr * gain,
                             kind="Ix-reconstructed", meta=meta)


# ---------------------------------------------------------------------------
# measurement-strength fits


def _weights(series: CorrelationSeries) -> np.ndarray:
    se = series.stderr
    if np.all(se > 0) and np.all(np.isfinite(se)):
        return 1.0 / se**2
    return np.ones_like(series.values)


def fit_alpha(
    series: CorrelationSeries,
    phi: float,
    weighting: str = "full",
    boxcar_fraction: float = 1.0 / 3.0,
    bounds: tuple = (1e-3, np.pi / 2 - 1e-3),
    xatol: float = 1e-12,
) -> FitResult:
    """Measurement strength from a readout correlation series.

    Minimises sum_N w_N (C(N) - corr_Sz_model(alpha, phi, N))^2 with
    w = 1/stderr^2 when the series carries errors.  weighting='boxcar'
    does a two-pass fit: after a full-window pass, lags beyond
    boxcar_fraction of the fitted 1/e decay length 4/alpha^2 are dropped
    and the fit repeated — tail lags are pure noise once the signal has
    decayed, and cutting them reduces the bias they induce.
    """
    if weighting not in ("full", "boxcar"):
        raise InvalidArgumentError(f"weighting must be 'full' or 'boxcar', got {weighting!r}")
    lags = series.lags
    if lags.size < 2:
        raise InvalidArgumentError("need at least 2 lags to fit alpha")
    if np.any(lags < 1):
        raise InvalidArgumentError("alpha fit expects lags >= 1")
    values = series.values
    w_full = _weights(series)

    def run_pass(sel):
        n, v, w = lags[sel], values[sel], w_full[sel]

        def sse(a):
            return float(np.sum(w * (v - corr_Sz_model(a, phi, n)) ** 2))

        opt = minimize_scalar(sse, bounds=bounds, method="bounded", options={"xatol": xatol})
        if not opt.success or not np.isfinite(opt.fun):
            raise FitFailureError(f"alpha search failed: {opt.message}")
        return float(opt.x), float(opt.fun), n, v, w

    sel = np.ones(lags.size, dtype=bool)
    a_hat, residual, n, v, w = run_pass(sel)
    window = None
    if weighting == "boxcar":
        window = boxcar_fraction * 4.0 / a_hat**2
        sel = lags <= max(window, lags[0] + 1)  # keep at least two early lags
        if sel.sum() < 2:
            sel = np.argsort(lags)[:2]
        a_hat, residual, n, v, w = run_pass(sel)

    # Gauss-Newton stderr from the analytic model derivative
    damp = np.exp(-(n - 1) * a_hat**2 / 4.0)
    dm = (np.sin(2 * a_hat) - np.sin(a_hat) ** 2 * (n - 1) * a_hat / 2.0) * np.cos(phi * n) * damp
    fisher = float(np.sum(w * dm**2))
    if np.all(w == 1.0):
        dof = max(n.size - 1, 1)
        fisher /= residual / dof if residual > 0 else 1.0
    a_se = 1.0 / np.sqrt(fisher) if fisher > 0 else float("inf")

    boundary = min(a_hat - bounds[0], bounds[1] - a_hat) < 1e-6
    return FitResult(
        params={"alpha": a_hat},
        stderr={"alpha": a_se},
        residual=residual,
        n_points=int(n.size),
        boundary=bool(boundary),
        message="alpha estimate at search bound" if boundary else "",
        meta={"weighting": weighting, "window": window, "phi": phi},
    )


def fit_decay(
    lags,
    values,
    phi: float,
    stderr=None,
    amp0: float | None = None,
    gamma0: float = 0.01,
) -> FitResult:
    """Damped-oscillation fit  A cos(phi N) e^{-Gamma (N-1)}  over lags N.

    Works on any mean-signal or correlation series (arrays, not
    CorrelationSeries, so run-averaged zeta paths can be fitted too).
    Unweighted unless `stderr` is given.
    """
    n = np.asarray(lags, dtype=float)
    v = np.asarray(values, dtype=float)
    if n.shape != v.shape or n.size < 3:
        raise InvalidArgumentError("need matching lags/values with at least 3 points")
    w = np.ones_like(v) if stderr is None else 1.0 / np.asarray(stderr, dtype=float) ** 2
    if amp0 is None:
        amp0 = float(np.abs(v).max())

    def sse(p):
        amp, gam = p
        return float(np.sum(w * (v - amp * np.cos(phi * n) * np.exp(-gam * (n - 1))) ** 2))

    opt = minimize(sse, x0=[amp0, gamma0], method="Nelder-Mead",
                   options={"xatol": 1e-13, "fatol": 1e-15, "maxfev": 20000})
    if not opt.success:
        raise FitFailureError(f"decay fit did not converge: {opt.message}")
    amp, gam = map(float, opt.x)

    env = np.cos(phi * n) * np.exp(-gam * (n - 1))
    jac = np.column_stack([env, -amp * (n - 1) * env])
    fisher = jac.T @ (w[:, None] * jac)
    if stderr is None:
        dof = max(n.size - 2, 1)
        fisher = fisher / (opt.fun / dof) if opt.fun > 0 else fisher
    try:
        cov = np.linalg.inv(fisher)
        errs = np.sqrt(np.maximum(np.diag(cov), 0.0))
    except np.linalg.LinAlgError:
        errs = np.full(2, np.inf)
    return FitResult(
        params={"amplitude": amp, "gamma": gam},
        stderr={"amplitude": float(errs[0]), "gamma": float(errs[1])},
        residual=float(opt.fun),
        n_points=int(n.size),
        success=bool(opt.success),
        meta={"phi": phi},
    )


def _modulated_signal(length: int, alpha: float, phi_s: float) -> np.ndarray:
    """Deterministic spin signal of the phase-modulated classical drive."""
    k = np.arange(length)
    return np.sin(0.5 * np.pi * np.sin(2 * np.pi * k / 8.0)
                  + alpha * np.cos(k * phi_s * np.pi / 4.0))


def fit_alpha_modulated(
    trace: PhotonTrace,
    phi_s: float = 1.0,
    x0: tuple | None = None,
) -> FitResult:
    """Joint (n_a, n_b, alpha) fit on a phase-modulated classical record.

    The modulation pattern is deterministic and shared by every run, so
    the per-position mean photon count follows

        <n_i> = n_av + ((n_a - n_b)/2) m_i(alpha)

    with m_i the modulated spin signal; fitting the mean path pins all
    three parameters at once, unlike the random-phase record whose means
    are flat.  (The within-run autocorrelation is nearly alpha-blind
    here: the alpha term shares the carrier's period, so lag products de-
    pend on it only at second order.)  phi_s is the sequence-phase
    parameter of the modulation pattern.  Weighted by the per-position
    standard errors of the mean.
    """
    counts = trace.counts.astype(float)
    runs, length = counts.shape
    if runs < 2:
        raise InvalidArgumentError("need at least 2 runs to estimate the mean path")
    mean_path = counts.mean(axis=0)
    se = counts.std(axis=0, ddof=1) / np.sqrt(runs)
    se = np.maximum(se, 1e-9 * max(1.0, np.abs(mean_path).max()))
    w = 1.0 / se**2

    def sse(p):
        n_a, n_b, alpha = p
        model = 0.5 * (n_a + n_b) + 0.5 * (n_a - n_b) * _modulated_signal(length, alpha, phi_s)
        return float(np.sum(w * (mean_path - model) ** 2))

    if x0 is None:
        spread = max(counts.std(), 1.0)
        x0 = (mean_path.mean() + spread, max(mean_path.mean() - spread, 0.0), 0.3)
    opt = minimize(sse, x0=list(x0), method="Nelder-Mead",
                   options={"xatol": 1e-8, "fatol": 1e-10, "maxfev": 40000})
    if not opt.success:
        raise FitFailureError(f"modulated calibration fit did not converge: {opt.message}")
    n_a, n_b, alpha = map(float, opt.x)
    if n_a - n_b <= 0:
        raise DegenerateContrastError("modulated fit found no positive bright/dark contrast")

    # Gauss-Newton covariance at the optimum
    m = _modulated_signal(length, abs(alpha), phi_s)
    k = np.arange(length)
    dm = np.cos(0.5 * np.pi * np.sin(2 * np.pi * k / 8.0)
                + abs(alpha) * np.cos(k * phi_s * np.pi / 4.0)) * np.cos(k * phi_s * np.pi / 4.0)
    jac = np.column_stack([0.5 * (1.0 + m), 0.5 * (1.0 - m), 0.5 * (n_a - n_b) * dm])
    try:
        cov = np.linalg.inv(jac.T @ (w[:, None] * jac))
        errs = np.sqrt(np.maximum(np.diag(cov), 0.0))
    except np.linalg.LinAlgError:
        errs = np.full(3, np.inf)
    return FitResult(
        params={"n_a": n_a, "n_b": n_b, "alpha": abs(alpha)},
        stderr={"n_a": float(errs[0]), "n_b": float(errs[1]), "alpha": float(errs[2])},
        residual=float(opt.fun),
        n_points=int(length),
        success=bool(opt.success),
        meta={"phi_s": phi_s},
    )
