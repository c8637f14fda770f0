"""Leggett-Garg functional and classical-probability consistency oracles.

The temporal test works on a lag-indexed correlation series C(N):

    LG(tau) = 2 C(tau) - C(2 tau)

is bounded by 1 for any macrorealistic (classical, non-invasively
measurable) process, while a coherently precessing spin reaches 1.5 at
phase pi/3 per lag.  Violation is declared at 3 standard errors above 1.

The oracles operate on joint distributions of three +-1 variables on one
probability space (axis order (xi, phi, theta), index 0 <-> value +1):
any such joint satisfies both strong additivity and the pairwise
marginal inequality P(xi+, phi+) + P(phi-, theta+) >= P(xi+, theta+) —
which is why a violation in the temporal data rules such a joint out.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .correlation import CorrelationSeries
from .errors import InvalidArgumentError

__all__ = [
    "LgSeries",
    "lg_function",
    "lg_theory",
    "wigner_despagnat_check",
    "strong_additivity_check",
    "DESPAGNAT_A",
    "DESPAGNAT_B",
]

VIOLATION_SIGMAS = 3.0


@dataclass
class LgSeries:
    """LG(tau) over a set of integer lags, with the 3-sigma violation flags."""

    taus: np.ndarray
    lg: np.ndarray
    stderr: np.ndarray
    violated: np.ndarray
    meta: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.taus = np.asarray(self.taus, dtype=int)
        self.lg = np.asarray(self.lg, dtype=float)
        self.stderr = np.asarray(self.stderr, dtype=float)
        self.violated = np.asarray(self.violated, dtype=bool)
        if not (self.taus.shape == self.lg.shape == self.stderr.shape == self.violated.shape):
            raise InvalidArgumentError("taus, lg, stderr and violated must have equal shapes")

    @property
    def max_lg(self) -> float:
        return float(self.lg.max())

    @property
    def violations(self) -> np.ndarray:
        """Indices (into taus) where the bound is broken at 3 sigma."""
        return np.nonzero(self.violated)[0]

    @property
    def any_violation(self) -> bool:
        return bool(self.violated.any())

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["tau_index", "lg", "stderr", "violated"])
            for t, v, s, flag in zip(self.taus, self.lg, self.stderr, self.violated):
                w.writerow([int(t), repr(float(v)), repr(float(s)), int(flag)])

    @classmethod
    def from_csv(cls, path) -> "LgSeries":
        taus, lg, se, vio = [], [], [], []
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                taus.append(int(row["tau_index"]))
                lg.append(float(row["lg"]))
                se.append(float(row["stderr"]))
                vio.append(bool(int(row["violated"])))
        return cls(np.array(taus), np.array(lg), np.array(se), np.array(vio))


def lg_function(series: CorrelationSeries) -> LgSeries:
    """Evaluate LG(tau) = 2 C(tau) - C(2 tau) wherever both lags exist.

    Lags whose doubled partner is missing are dropped (no extrapolation).
    stderr adds in quadrature, sqrt(4 se_tau^2 + se_2tau^2); the flag is
    lg - 3 stderr > 1, so an analytic series (zero errors) is flagged
    exactly where it exceeds the bound.
    """
    have = {int(lag): i for i, lag in enumerate(series.lags)}
    taus, lg, se = [], [], []
    for tau, i in sorted(have.items()):
        j = have.get(2 * tau)
        if j is None or tau < 1:
            continue
        taus.append(tau)
        lg.append(2.0 * series.values[i] - series.values[j])
        se.append(np.sqrt(4.0 * series.stderr[i] ** 2 + series.stderr[j] ** 2))
    if not taus:
        raise InvalidArgumentError("no lag tau with 2*tau also present in the series")
    taus = np.array(taus)
    lg = np.array(lg)
    se = np.array(se)
    violated = lg - VIOLATION_SIGMAS * se > 1.0
    return LgSeries(taus, lg, se, violated, meta={"source_kind": series.kind})


def lg_theory(phi: float, taus, amplitude: float = 1.0) -> LgSeries:
    """Analytic LG for an undamped cosine correlation A cos(phi N).

    The unit-amplitude maximum over continuous phase is 1.5 at
    phi*tau = pi/3; any A < 2/3 stays below the bound everywhere, which
    is why the sin^2(alpha) normalisation step decides the verdict.
    """
    taus = np.asarray(taus, dtype=int)
    if np.any(taus < 1):
        raise InvalidArgumentError("taus must be >= 1")
    lg = amplitude * (2.0 * np.cos(phi * taus) - np.cos(2.0 * phi * taus))
    se = np.zeros_like(lg)
    return LgSeries(taus, lg, se, lg > 1.0, meta={"phi": phi, "amplitude": amplitude})


# ---------------------------------------------------------------------------
# three-variable classical oracles

# canonical event masks of the marginal inequality, axis order (xi, phi, theta)
_IDX = np.indices((2, 2, 2))
DESPAGNAT_A = (_IDX[0] == 0) & (_IDX[1] == 0)   # {xi = +1, phi = +1}
DESPAGNAT_B = (_IDX[1] == 1) & (_IDX[2] == 0)   # {phi = -1, theta = +1}


def _check_joint(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (2, 2, 2):
        raise InvalidArgumentError(f"joint must have shape (2, 2, 2), got {p.shape}")
    if np.any(p < -1e-12):
        raise InvalidArgumentError("joint has negative entries")
    if abs(p.sum() - 1.0) > 1e-9:
        raise InvalidArgumentError(f"joint must sum to 1, got {p.sum()}")
    return p


def wigner_despagnat_check(p) -> tuple[float, float, bool]:
    """Pairwise-marginal inequality for three +-1 variables on one space.

    Returns (lhs, rhs, holds) for

        P(xi=+1, phi=+1) + P(phi=-1, theta=+1) >= P(xi=+1, theta=+1).

    lhs - rhs equals the probability of the two atoms (+,+,-) and
    (-,-,+), so `holds` is true for every valid joint; the 1e-12 slack
    only absorbs float rounding of the sums.
    """
    p = _check_joint(p)
    lhs = float(p[0, 0, :].sum() + p[:, 1, 0].sum())
    rhs = float(p[0, :, 0].sum())
    return lhs, rhs, bool(lhs + 1e-12 >= rhs)


def strong_additivity_check(p, set_a=None, set_b=None, tol: float = 1e-12) -> bool:
    """Verify P(A) + P(B) = P(A and B) + P(A or B) on an atom measure.

    `p` is a (2,2,2) probability table; the sets are boolean masks over
    it (default: the canonical pair above, which is disjoint, so the
    identity degenerates to plain additivity).  This is the measure-
    theoretic fact behind `wigner_despagnat_check`: apply it to the
    canonical sets and drop the non-shared atoms to get the inequality.
    """
    p = _check_joint(p)
    a = DESPAGNAT_A if set_a is None else np.asarray(set_a, dtype=bool)
    b = DESPAGNAT_B if set_b is None else np.asarray(set_b, dtype=bool)
    if a.shape != p.shape or b.shape != p.shape:
        raise InvalidArgumentError("set masks must have the joint's shape")
    lhs = p[a].sum() + p[b].sum()
    rhs = p[a & b].sum() + p[a | b].sum()
    return bool(abs(lhs - rhs) <= tol)
