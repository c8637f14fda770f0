"""Photon-counting readout models and experiment drivers.

Photon number conventions
-------------------------
``n_a`` and ``n_b`` are the mean photon counts of one *measurement* with
the sensor in the bright (+1) and dark (-1) state.  Two sampling modes
reflect how measurements are composed of repeated optical readouts:

* trace readout (`sample_readout`): the sensor is projected once per
  cycle and then read repeatedly without disturbing it, so the count is a
  single Poisson draw with mean n_a or n_b conditioned on the outcome —
  the record is bimodal, which is what carries the correlation signal;
* calibration readout (`modulation_trace`): every one of the
  ``repetitions`` readouts re-prepares and re-rotates the sensor, so one
  measurement sums `repetitions` independent projection+Poisson draws.
  The mean is unchanged but the bright/dark mixture variance shrinks by
  1/repetitions, which is what makes the photon-level calibration of
  (n_a, n_b) converge.

The mean count under sensor rotation by angle phi_k is

    n(k) = (n_a + n_b)/2 + (n_a - n_b)/2 * sin^2(phi_k/2 + phi_0)

with a small instrumental offset phi_0.

Charge state: a fraction 1 - p_minus of the measurement pulses leaves the
sensor in its neutral charge state, drawn independently per pulse.  Those
measurements exert no back-action, contribute no spin signal, and emit
photons at a dark-like level (`nv0_mean`, default n_b).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from . import engine
from .errors import InvalidArgumentError
from .protocol import ProtocolConfig

__all__ = [
    "ReadoutModel",
    "ChargeModel",
    "PhotonTrace",
    "ModulationTrace",
    "sample_readout",
    "modulation_trace",
    "run_quantum_experiment",
    "run_classical_experiment",
    "DEFAULT_ANGLES_DEG",
]

#: sensor rotation angles of the calibration sweep, degrees
DEFAULT_ANGLES_DEG = tuple(range(0, 361, 30))
DEFAULT_SAMPLES_PER_ANGLE = 50
DEFAULT_ANCHOR_ANGLE = 90
DEFAULT_ANCHOR_SAMPLES = 500


@dataclass
class ReadoutModel:
    """Bright/dark photon statistics of the sensor readout."""

    n_a: float
    n_b: float
    phi_0: float = 0.0
    repetitions: int = 200

    def __post_init__(self):
        if self.n_b < 0 or self.n_a < self.n_b:
            # n_a == n_b is allowed so the degenerate-contrast path can be
            # exercised end to end; reconstruction rejects it downstream.
            raise InvalidArgumentError("need n_a >= n_b >= 0")
        if self.repetitions < 1:
            raise InvalidArgumentError("repetitions must be >= 1")

    @property
    def n_av(self) -> float:
        return (self.n_a + self.n_b) / 2.0

    @property
    def contrast(self) -> float:
        return self.n_a - self.n_b

    def mean_count(self, angle_deg) -> np.ndarray:
        """Mean count n(k) for sensor rotation angle(s) in degrees."""
        half = np.deg2rad(np.asarray(angle_deg, dtype=float)) / 2.0
        return self.n_av + 0.5 * self.contrast * np.sin(half + self.phi_0) ** 2

    def to_dict(self) -> dict:
        return {"n_a": self.n_a, "n_b": self.n_b, "phi_0": self.phi_0,
                "repetitions": self.repetitions}


@dataclass
class ChargeModel:
    """Per-pulse charge statistics: probability p_minus of the active state."""

    p_minus: float
    nv0_mean: float | None = None  # photon level of neutral measurements; None -> dark level

    def __post_init__(self):
        if not (0.0 <= self.p_minus <= 1.0):
            raise InvalidArgumentError(f"p_minus must lie in [0, 1], got {self.p_minus}")
        if self.nv0_mean is not None and self.nv0_mean < 0:
            raise InvalidArgumentError("nv0_mean must be non-negative")

    def to_dict(self) -> dict:
        return {"p_minus": self.p_minus, "nv0_mean": self.nv0_mean}


@dataclass
class PhotonTrace:
    """Photon counts of a multi-run experiment, shape (runs, length).

    `first_lag` is the lag carried by column 0 (0 when column 0 is the
    polarising measurement of each run, 1 when records start at cycle 1).
    CSV layout: a '# {json meta}' header line, then index,count rows in
    row-major order.
    """

    counts: np.ndarray
    kind: str
    first_lag: int = 0
    meta: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.counts = np.atleast_2d(np.asarray(self.counts, dtype=np.int64))

    @property
    def runs(self) -> int:
        return self.counts.shape[0]

    @property
    def length(self) -> int:
        return self.counts.shape[1]

    @property
    def n_measurements(self) -> int:
        return int(self.counts.size)

    def flat(self) -> np.ndarray:
        return self.counts.ravel()

    def to_csv(self, path) -> None:
        header = {"kind": self.kind, "runs": self.runs, "length": self.length,
                  "first_lag": self.first_lag, "meta": self.meta}
        with open(path, "w", newline="") as fh:
            fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
            w = csv.writer(fh)
            w.writerow(["index", "count"])
            for i, cval in enumerate(self.counts.ravel()):
                w.writerow([i, int(cval)])

    @classmethod
    def from_csv(cls, path) -> "PhotonTrace":
        with open(path, newline="") as fh:
            first = fh.readline()
            if not first.startswith("#"):
                raise InvalidArgumentError(f"{path}: missing JSON header line")
            header = json.loads(first[1:].strip())
            counts = [int(row["count"]) for row in csv.DictReader(fh)]
        arr = np.array(counts, dtype=np.int64).reshape(header["runs"], header["length"])
        return cls(arr, kind=header["kind"], first_lag=header.get("first_lag", 0),
                   meta=header.get("meta", {}))


@dataclass
class ModulationTrace:
    """Calibration sweep samples: one row per measurement (angle, count)."""

    angles_deg: np.ndarray
    counts: np.ndarray
    meta: dict = field(default_factory=dict, repr=False)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("# " + json.dumps({"meta": self.meta}, sort_keys=True) + "\n")
            w = csv.writer(fh)
            w.writerow(["angle_deg", "count"])
            for a, cval in zip(self.angles_deg, self.counts):
                w.writerow([repr(float(a)), int(cval)])

    @classmethod
    def from_csv(cls, path) -> "ModulationTrace":
        angles, counts = [], []
        with open(path, newline="") as fh:
            first = fh.readline()
            meta = json.loads(first[1:].strip()).get("meta", {}) if first.startswith("#") else {}
            if not first.startswith("#"):
                fh.seek(0)
            for row in csv.DictReader(fh):
                angles.append(float(row["angle_deg"]))
                counts.append(int(row["count"]))
        return cls(np.array(angles), np.array(counts, dtype=np.int64), meta=meta)


def sample_readout(outcomes, model: ReadoutModel, rng: np.random.Generator) -> np.ndarray:
    """Trace-readout photon counts for +-1 outcomes (single projection each)."""
    out = np.asarray(outcomes)
    if not np.all(np.isin(out, (-1, 1))):
        raise InvalidArgumentError("outcomes must be +-1")
    lam = np.where(out == 1, model.n_a, model.n_b)
    return rng.poisson(lam).astype(np.int64)


def modulation_trace(
    model: ReadoutModel,
    rng: np.random.Generator,
    angles_deg=DEFAULT_ANGLES_DEG,
    samples_per_angle: int = DEFAULT_SAMPLES_PER_ANGLE,
    anchor_angle: float = DEFAULT_ANCHOR_ANGLE,
    anchor_samples: int = DEFAULT_ANCHOR_SAMPLES,
) -> ModulationTrace:
    """Simulate the calibration sweep over sensor rotation angles.

    Each angle is sampled `samples_per_angle` times (`anchor_samples` at
    the anchor angle); each measurement sums `model.repetitions`
    independently re-prepared readouts, see the module docstring.  The
    per-readout bright probability at angle phi is
    (1 + sin^2(phi/2 + phi_0)) / 2.
    """
    all_angles, all_counts = [], []
    reps = model.repetitions
    for ang in angles_deg:
        n = anchor_samples if ang == anchor_angle else samples_per_angle
        p_bright = 0.5 * (1.0 + np.sin(np.deg2rad(ang) / 2.0 + model.phi_0) ** 2)
        bright = rng.random((n, reps)) < p_bright
        lam = np.where(bright, model.n_a / reps, model.n_b / reps)
        counts = rng.poisson(lam).sum(axis=1)
        all_angles.append(np.full(n, float(ang)))
        all_counts.append(counts)
    return ModulationTrace(
        angles_deg=np.concatenate(all_angles),
        counts=np.concatenate(all_counts).astype(np.int64),
        meta={"model": model.to_dict(), "samples_per_angle": samples_per_angle,
              "anchor_angle": anchor_angle, "anchor_samples": anchor_samples},
    )


def run_quantum_experiment(
    config: ProtocolConfig,
    model: ReadoutModel,
    runs: int,
    seed: int,
    charge: ChargeModel | None = None,
    workers: int = 1,
) -> PhotonTrace:
    """Simulate the full photon record of a multi-run protocol experiment."""
    p_minus = 1.0 if charge is None else charge.p_minus
    nv0 = None if charge is None else charge.nv0_mean
    batch = engine.simulate_runs(
        config, runs, seed,
        p_minus=p_minus, bright=model.n_a, dark=model.n_b, nv0_mean=nv0,
        workers=workers,
    )
    meta = {
        "seed": seed,
        "protocol": {"alpha": config.alpha, "phi": config.phi,
                     "cycles": config.cycles, "prepolarized": config.prepolarized},
        "readout": model.to_dict(),
        "charge": None if charge is None else charge.to_dict(),
    }
    return PhotonTrace(batch.counts, kind="quantum", first_lag=batch.first_lag, meta=meta)


def run_classical_experiment(
    alpha: float,
    theta_step: float,
    measurements_per_run: int,
    model: ReadoutModel,
    runs: int,
    seed: int,
    modulated: bool = False,
    phi_s: float = 1.0,
    workers: int = 1,
) -> PhotonTrace:
    """Simulate the classical control experiment's photon record.

    theta_step is the field phase advance per measurement (omega * t_s).
    See `spintrack.engine.classical_runs` for the signal model.
    """
    batch = engine.classical_runs(
        alpha, theta_step, measurements_per_run, runs, seed,
        modulated=modulated, phi_s=phi_s,
        bright=model.n_a, dark=model.n_b, workers=workers,
    )
    meta = {
        "seed": seed,
        "classical": {"alpha": alpha, "theta_step": theta_step,
                      "measurements_per_run": measurements_per_run,
                      "modulated": modulated, "phi_s": phi_s},
        "readout": model.to_dict(),
    }
    kind = "classical-modulated" if modulated else "classical"
    return PhotonTrace(batch.counts, kind=kind, first_lag=0, meta=meta)
