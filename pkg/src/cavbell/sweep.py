"""Parameter sweeps producing tabular series, plus the microwave-cavity preset.

Column schemas
--------------
fidelity-sweep   x, fidelity
success-sweep    x, success_prob, detection_prob (only with a detector efficiency)
epsilon-sweep    epsilon, fidelity   (or log_one_minus_epsilon, epsilon, fidelity)
montecarlo       <variable>, trials, mean_runs, mean_runs_se, success_rate, ...
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Iterable

import numpy as np
from scipy.optimize import brentq

from . import protocol
from .geometry import CavityMode, PathParams, central_time
from .montecarlo import ProtocolParams, simulate_trials, summarize

log = logging.getLogger(__name__)

VARIABLES = ("x", "epsilon", "log_one_minus_epsilon", "D", "n_photons")


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    start: float
    stop: float
    steps: int
    fixed: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.variable not in VARIABLES:
            raise ValueError(f"unknown sweep variable {self.variable!r}; choose from {VARIABLES}")
        if int(self.steps) != self.steps or self.steps < 2:
            raise ValueError("steps must be an integer >= 2")
        if not (math.isfinite(self.start) and math.isfinite(self.stop)) or not self.start < self.stop:
            raise ValueError("need finite start < stop")

    def grid(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, int(self.steps))


Row = dict[str, float]


def sweep_fidelity(spec: SweepSpec) -> list[Row]:
    return [{"x": float(x), "fidelity": protocol.ideal_fidelity(x)} for x in spec.grid()]


def sweep_success(spec: SweepSpec) -> list[Row]:
    d = spec.fixed.get("D")
    rows = []
    for x in spec.grid():
        row = {"x": float(x), "success_prob": protocol.success_probability(x)}
        if d is not None:
            p = row["success_prob"]
            row["detection_prob"] = protocol.detection_all_works_probability(d, x) if p > 0 else 0.0
        rows.append(row)
    return rows


def sweep_epsilon(spec: SweepSpec, x: float | None = None) -> list[Row]:
    """Asymmetric fidelity against epsilon, or against ln(1 - epsilon).

    For the log variant the grid is uniform in ln(1 - epsilon) when the
    variable is ``log_one_minus_epsilon``; epsilon grids with points at or
    beyond 1 have those rows dropped.
    """
    x = spec.fixed.get("x", 0.5) if x is None else x
    rows = []
    if spec.variable == "log_one_minus_epsilon":
        for lg in spec.grid():
            eps = -math.expm1(lg)
            rows.append({"log_one_minus_epsilon": float(lg), "epsilon": eps, "fidelity": protocol.asymmetric_fidelity(x, eps)})
        return rows
    log_abscissa = bool(spec.fixed.get("log_abscissa", False))
    dropped = 0
    for eps in spec.grid():
        eps = float(eps)
        if log_abscissa:
            if eps >= 1.0:
                dropped += 1
                continue
            rows.append({"log_one_minus_epsilon": math.log1p(-eps), "epsilon": eps, "fidelity": protocol.asymmetric_fidelity(x, eps)})
        else:
            rows.append({"epsilon": eps, "fidelity": protocol.asymmetric_fidelity(x, eps)})
    if dropped:
        log.warning("dropped %d rows with epsilon >= 1 (ln(1 - epsilon) undefined)", dropped)
    return rows


def sweep_photons(spec: SweepSpec, x: float | None = None) -> list[Row]:
    """Multi-photon repetition: fidelity to the beam-splitter state for n = start..stop."""
    x = spec.fixed.get("x", 0.5) if x is None else x
    lo, hi = int(math.ceil(spec.start)), int(math.floor(spec.stop))
    cutoff = int(spec.fixed.get("cutoff", hi + 2))
    rows = []
    for n in range(max(lo, 0), hi + 1):
        state = protocol.repeated_success_state(n, x, cutoff)
        target = protocol.beamsplitter_target(n, cutoff)
        rows.append({
            "n_photons": float(n),
            "fidelity": abs(np.vdot(target.amps, state.amps)) ** 2,
            "null_run_overlap": protocol.null_run_nonreset_check(n, x, cutoff),
        })
    return rows


def epsilon_argmax(x: float, lo: float = -0.5, hi: float = 0.5, step: float = 1e-4) -> float:
    grid = np.linspace(lo, hi, int(round((hi - lo) / step)) + 1)
    f = np.array([protocol.asymmetric_fidelity(x, e) for e in grid])
    return float(grid[int(np.argmax(f))])


def sweep_operating_window(fidelity_floor: float, prob_floor: float, xtol: float = 1e-12) -> tuple[float, float] | None:
    """Largest x-interval in [0, pi/2] with fidelity >= floor and success probability >= floor.

    On [0, pi/2] the fidelity falls monotonically from 1 to 1/2 and the
    success probability rises from 0 to 1, so each floor cuts at one root.
    Returns None when the window is empty.
    """
    if not (math.isfinite(fidelity_floor) and math.isfinite(prob_floor)):
        raise ValueError("floors must be finite")
    top = math.pi / 2
    if fidelity_floor > 1.0 or prob_floor > 1.0:
        return None
    if fidelity_floor <= protocol.ideal_fidelity(top):
        x_max = top
    else:
        x_max = brentq(lambda x: protocol.ideal_fidelity(x) - fidelity_floor, 0.0, top, xtol=xtol)
    if prob_floor <= 0.0:
        x_min = 0.0
    else:
        x_min = brentq(lambda x: protocol.success_probability(x) - prob_floor, 0.0, top, xtol=xtol)
    if x_min > x_max:
        return None
    return x_min, x_max


def sweep_montecarlo(spec: SweepSpec, trials: int, seed: int, workers: int = 1) -> list[Row]:
    """Monte Carlo summary per abscissa; point i uses RNG streams (seed, i, trial)."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    field_of = {"x": "x", "epsilon": "epsilon", "D": "detector_eff"}
    if spec.variable not in field_of:
        raise ValueError(f"montecarlo sweeps vary one of {sorted(field_of)}")
    base = ProtocolParams(**{**spec.fixed, "seed": seed})
    rows = []
    for i, value in enumerate(spec.grid()):
        params = replace(base, **{field_of[spec.variable]: float(value)})
        summary = summarize(simulate_trials(params, trials, point=i, workers=workers))
        rows.append({spec.variable: float(value), **montecarlo_columns(params, summary)})
    return rows


def montecarlo_columns(params: ProtocolParams, summary) -> Row:
    row = summary.as_row()
    p = protocol.success_probability(params.x, params.epsilon)
    if p > 0:
        row["expected_runs_ideal"] = 1.0 / p
        row["detection_prob_formula"] = params.detector_eff ** (1.0 / p)
        row["failure_free_exact"] = p * params.detector_eff / (1.0 - (1.0 - p) * params.detector_eff)
    return row


# presets -----------------------------------------------------------------

@dataclass(frozen=True)
class ParisPreset:
    """Rydberg-atom / microwave-cavity parameters; SI units."""

    g0: float = 1.48e5
    v: float = 500.0
    w0: float = 5.97e-3
    wavelength: float = 5.87e-3
    detector_eff: float = 0.40
    cavity_lifetime: float = 1e-3
    beam_radius: float = 0.25e-3
    # assumed collimator and cavity spacings; not fixed by the source data
    D0: float = 0.05
    D1: float = 0.05
    # mirror separation multiplier; g0 scales as L^(-3/2)
    cavity_scale: float = 1.0

    @property
    def mode(self) -> CavityMode:
        return CavityMode(self.w0, self.wavelength)

    @property
    def g0_scaled(self) -> float:
        return self.g0 * self.cavity_scale**-1.5

    @property
    def tau_central(self) -> float:
        return central_time(self.mode, self.v)

    @property
    def pulse_area(self) -> float:
        return self.g0_scaled * self.tau_central

    @property
    def angular_radius(self) -> float:
        return self.beam_radius / self.D1

    def worst_case_path(self) -> PathParams:
        r, a = self.beam_radius, self.angular_radius
        return PathParams(r, r, a, a, self.v, self.D0, self.D1)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d.update(
            g0_scaled=self.g0_scaled,
            tau_central=self.tau_central,
            pulse_area=self.pulse_area,
            angular_radius=self.angular_radius,
            lifetime_over_traversal=self.cavity_lifetime / self.tau_central,
            assumptions="D0 and D1 are assumed values (D0 = D1); the epsilon estimate depends on them",
        )
        return d


def preset_paris(cavity_scale: float = 1.0) -> ParisPreset:
    if not cavity_scale > 0:
        raise ValueError("cavity_scale must be positive")
    return ParisPreset(cavity_scale=cavity_scale)


# output ------------------------------------------------------------------

def to_csv(rows: Iterable[Row]) -> str:
    rows = list(rows)
    buf = io.StringIO()
    if not rows:
        return ""
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: _fmt(v) for k, v in row.items()})
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def to_json(rows: Any) -> str:
    return json.dumps(rows, indent=2, allow_nan=True) + "\n"
