"""Repeated runs until success, with an imperfect atom detector.

Each trial owns a PCG64 stream seeded from ``(seed, point, trial)`` so
results do not depend on how trials are spread over worker processes.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from .protocol import (
    RunBranches,
    amplitude_damp,
    beamsplitter_target,
    single_run,
    single_run_mixed,
    vacuum,
)
from .qstate import DensityMatrix, StateVector, fidelity_mixed, fidelity_pure

RUN_DURATION = 20e-6
CAVITY_LIFETIME = 1e-3
DAMP_WAIT = 1e-3


class FailurePolicy(str, enum.Enum):
    HALT_AND_DAMP = "halt-and-damp"
    CONTINUE_MIXED = "continue-mixed"


class Outcome(str, enum.Enum):
    SUCCESS = "success"
    DETECTION_FAILURE = "detection-failure"
    EXHAUSTED = "exhausted"


@dataclass(frozen=True)
class ProtocolParams:
    x: float
    epsilon: float = 0.0
    detector_eff: float = 1.0
    cutoff: int = 2
    max_runs: int = 1000
    seed: int = 0
    failure_policy: FailurePolicy = FailurePolicy.HALT_AND_DAMP
    run_duration: float = RUN_DURATION
    damp_wait: float = DAMP_WAIT
    cavity_lifetime: float = CAVITY_LIFETIME
    # stop with DETECTION_FAILURE once this many failures happened; None = never
    max_failures: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "failure_policy", FailurePolicy(self.failure_policy))
        for name in ("x", "epsilon", "run_duration", "damp_wait", "cavity_lifetime"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if not 0.0 <= self.detector_eff <= 1.0:
            raise ValueError(f"detector_eff must lie in [0, 1], got {self.detector_eff}")
        if self.cutoff < 2:
            raise ValueError("cutoff must be >= 2 for the single-photon protocol")
        if self.max_runs < 1:
            raise ValueError("max_runs must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.run_duration < 0 or self.damp_wait < 0 or self.cavity_lifetime <= 0:
            raise ValueError("durations must be non-negative and the cavity lifetime positive")
        if self.max_failures is not None and self.max_failures < 0:
            raise ValueError("max_failures must be >= 0")

    @property
    def x_b(self) -> float:
        return self.x * (1.0 - self.epsilon)

    @property
    def decay_fraction(self) -> float:
        return -math.expm1(-self.damp_wait / self.cavity_lifetime)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["failure_policy"] = self.failure_policy.value
        return d


@dataclass
class TrialRecord:
    runs_used: int
    outcome: Outcome
    final_state: StateVector | DensityMatrix | None
    elapsed_model_time: float
    detection_failures: int = 0
    # Bell fidelity of the final state; NaN unless the trial succeeded
    fidelity: float = math.nan
    # largest non-vacuum population left after any dissipation wait
    max_residual: float = 0.0

    def to_json(self, include_state: bool = True) -> dict[str, Any]:
        row: dict[str, Any] = {
            "runs_used": self.runs_used,
            "outcome": self.outcome.value,
            "elapsed_model_time": self.elapsed_model_time,
            "detection_failures": self.detection_failures,
            "fidelity": None if math.isnan(self.fidelity) else self.fidelity,
            "max_residual": self.max_residual,
        }
        if include_state:
            row["final_state"] = state_to_json(self.final_state)
        return row


def state_to_json(state: StateVector | DensityMatrix | None) -> dict[str, Any] | None:
    if state is None:
        return None
    d = state.dims
    out: dict[str, Any] = {"cutoff_a": d.cutoff_a, "cutoff_b": d.cutoff_b, "with_atom": d.with_atom}
    if isinstance(state, StateVector):
        out["kind"] = "state_vector"
        out["amps"] = [[float(a.real), float(a.imag)] for a in state.amps]
    else:
        out["kind"] = "density_matrix"
        out["entries"] = [[[float(a.real), float(a.imag)] for a in row] for row in state.entries]
    return out


def _key(state: StateVector | DensityMatrix) -> tuple:
    arr = state.amps if isinstance(state, StateVector) else state.entries
    return (type(state).__name__, state.dims, arr.tobytes())


def _needs_room(state: StateVector | DensityMatrix) -> bool:
    d = state.dims
    if isinstance(state, StateVector):
        t = np.abs(state.tensor) ** 2
    else:
        t = np.real(np.diag(state.entries)).reshape(d.shape)
    return max(t[-1, :].max(), t[:, -1].max()) > 1e-24


def _grow(state):
    d = state.dims
    return state.embed(type(d)(d.cutoff_a + 1, d.cutoff_b + 1, with_atom=False))


def _bell_fidelity(state) -> float:
    target = beamsplitter_target(1, state.dims.cutoff_a)
    if state.dims.cutoff_b != state.dims.cutoff_a:
        return math.nan
    if isinstance(state, StateVector):
        return fidelity_pure(target, state)
    return fidelity_mixed(state, target)


class _Cache:
    """Memoizes run branches per cavity state; null runs keep returning to vacuum."""

    def __init__(self, params: ProtocolParams):
        self.params = params
        self.vacuum = vacuum(params.cutoff)
        self.branches: dict[tuple, RunBranches] = {}
        self.damped: dict[tuple, tuple[float, DensityMatrix]] = {}
        self.fidelity: dict[tuple, float] = {}

    def prepare(self, state):
        """Grow the Fock space until the top levels are empty."""
        if state is self.vacuum:
            return state
        while _needs_room(state):
            state = _grow(state)
        return state

    def bell_fidelity(self, state) -> float:
        key = _key(state)
        f = self.fidelity.get(key)
        if f is None:
            f = self.fidelity[key] = _bell_fidelity(state)
        return f

    def run(self, state) -> RunBranches:
        key = _key(state)
        br = self.branches.get(key)
        if br is None:
            p = self.params
            if isinstance(state, StateVector):
                br = single_run(state, p.x, p.x_b)
            else:
                br = single_run_mixed(state, p.x, p.x_b)
            self.branches[key] = br
        return br

    def damp(self, state, br: RunBranches) -> tuple[float, DensityMatrix]:
        key = _key(state)
        hit = self.damped.get(key)
        if hit is None:
            rho = amplitude_damp(br.unmeasured, self.params.decay_fraction)
            hit = (1.0 - rho.population(0, 0), rho)
            self.damped[key] = hit
        return hit


def run_until_success(params: ProtocolParams, rng: np.random.Generator, cache: _Cache | None = None) -> TrialRecord:
    """Send atoms one at a time until a detected ground-state atom, or give up.

    Every run draws two uniforms in a fixed order: measurement branch first,
    then whether the detector registered the atom.
    """
    cache = cache or _Cache(params)
    state: StateVector | DensityMatrix = cache.vacuum
    runs = failures = 0
    elapsed = 0.0
    residual = 0.0
    while runs < params.max_runs:
        state = cache.prepare(state)
        runs += 1
        elapsed += params.run_duration
        br = cache.run(state)
        ground = rng.random() < br.prob_ground
        detected = rng.random() < params.detector_eff
        if detected:
            if ground:
                final = br.post_ground
                return TrialRecord(runs, Outcome.SUCCESS, final, elapsed, failures, cache.bell_fidelity(final), residual)
            state = br.post_excited
            continue
        failures += 1
        if params.max_failures is not None and failures > params.max_failures:
            return TrialRecord(runs, Outcome.DETECTION_FAILURE, br.unmeasured, elapsed, failures, math.nan, residual)
        if params.failure_policy is FailurePolicy.HALT_AND_DAMP:
            left, _ = cache.damp(state, br)
            residual = max(residual, left)
            elapsed += params.damp_wait
            state = cache.vacuum
        else:
            state = br.unmeasured
    return TrialRecord(runs, Outcome.EXHAUSTED, state, elapsed, failures, math.nan, residual)


def trial_rng(seed: int, trial: int, point: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, point, trial])))


def _chunk(params: ProtocolParams, point: int, start: int, stop: int) -> list[TrialRecord]:
    cache = _Cache(params)
    return [run_until_success(params, trial_rng(params.seed, t, point), cache) for t in range(start, stop)]


def simulate_trials(params: ProtocolParams, trials: int, point: int = 0, workers: int = 1) -> list[TrialRecord]:
    """Run independent trials; the output is identical for any ``workers``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if workers <= 1 or trials < 2 * workers:
        return _chunk(params, point, 0, trials)
    bounds = np.linspace(0, trials, workers + 1).astype(int)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(_chunk, *zip(*[(params, point, int(a), int(b)) for a, b in zip(bounds, bounds[1:])]))
        return [rec for part in parts for rec in part]


@dataclass
class TrialSummary:
    trials: int
    mean_runs: float
    mean_runs_se: float
    success_rate: float
    success_rate_se: float
    failure_free_fraction: float
    failure_free_se: float
    mean_elapsed: float
    mean_elapsed_se: float
    mean_fidelity: float
    exhausted: int = 0
    extra: dict[str, float] = field(default_factory=dict)

    def as_row(self) -> dict[str, float]:
        row = {k: v for k, v in asdict(self).items() if k != "extra"}
        row.update(self.extra)
        return row


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    n = values.size
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    return mean, se


def summarize(records: list[TrialRecord]) -> TrialSummary:
    n = len(records)
    runs = np.array([r.runs_used for r in records], dtype=float)
    ok = np.array([r.outcome is Outcome.SUCCESS for r in records])
    clean = ok & np.array([r.detection_failures == 0 for r in records])
    elapsed = np.array([r.elapsed_model_time for r in records])
    fids = np.array([r.fidelity for r in records if r.outcome is Outcome.SUCCESS])

    def binom(mask):
        p = float(mask.mean())
        return p, math.sqrt(p * (1.0 - p) / n)

    mean_runs, runs_se = _mean_se(runs)
    mean_el, el_se = _mean_se(elapsed)
    sr, sr_se = binom(ok)
    ff, ff_se = binom(clean)
    return TrialSummary(
        trials=n,
        mean_runs=mean_runs,
        mean_runs_se=runs_se,
        success_rate=sr,
        success_rate_se=sr_se,
        failure_free_fraction=ff,
        failure_free_se=ff_se,
        mean_elapsed=mean_el,
        mean_elapsed_se=el_se,
        mean_fidelity=float(fids.mean()) if fids.size else math.nan,
        exhausted=int(sum(r.outcome is Outcome.EXHAUSTED for r in records)),
    )
