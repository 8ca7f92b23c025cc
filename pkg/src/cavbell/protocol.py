"""One atom transit through both cavities and the closed forms built on it.

A *run* prepares the atom in ``|e>``, lets it interact with cavity A
(pulse area ``x_a``) and then cavity B (``x_b``), and measures it. Ground
means a photon was left behind and the run succeeded; excited is a null
run. With asymmetry ``epsilon`` the second pulse area is ``x * (1 - epsilon)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, cos, isfinite, sin

import numpy as np

from .jcdynamics import Cavity, jc_propagate, propagate_density
from .qstate import (
    AtomOutcome,
    CutoffError,
    DensityMatrix,
    SpaceDims,
    StateVector,
    ZeroProbabilityBranch,
    adjoin_atom,
    fidelity_pure,
    make_basis_state,
    partial_trace_atom,
    project_atom,
)


@dataclass(frozen=True, eq=False)
class RunBranches:
    """Both measurement outcomes of one run.

    A post-state is ``None`` only when its branch has probability zero.
    ``unmeasured`` is the cavity state if the detector misses the atom.
    """

    prob_excited: float
    post_excited: StateVector | DensityMatrix | None
    prob_ground: float
    post_ground: StateVector | DensityMatrix | None
    unmeasured: DensityMatrix


def _branch(psi: StateVector, outcome: AtomOutcome):
    try:
        return project_atom(psi, outcome)
    except ZeroProbabilityBranch:
        return 0.0, None


def single_run(cavity_state: StateVector, x_a: float, x_b: float) -> RunBranches:
    if cavity_state.dims.with_atom:
        raise ValueError("single_run takes a cavity-only state")
    psi = adjoin_atom(cavity_state, AtomOutcome.EXCITED)
    psi = jc_propagate(psi, Cavity.A, x_a)
    psi = jc_propagate(psi, Cavity.B, x_b)
    pe, post_e = _branch(psi, AtomOutcome.EXCITED)
    pg, post_g = _branch(psi, AtomOutcome.GROUND)
    return RunBranches(pe, post_e, pg, post_g, partial_trace_atom(psi))


def single_run_mixed(rho: DensityMatrix, x_a: float, x_b: float) -> RunBranches:
    """Density-matrix version of ``single_run`` for a mixed cavity state."""
    if rho.dims.with_atom:
        raise ValueError("single_run_mixed takes a cavity-only density matrix")
    full = rho.dims.full()
    n = rho.dims.size
    big = np.zeros((2, n, 2, n), dtype=complex)
    big[1, :, 1, :] = rho.entries
    r = DensityMatrix(full, big.reshape(2 * n, 2 * n))
    r = propagate_density(r, Cavity.A, x_a)
    r = propagate_density(r, Cavity.B, x_b)
    blocks = r.entries.reshape(2, n, 2, n)
    out = {}
    for outcome in AtomOutcome:
        block = blocks[int(outcome), :, int(outcome), :]
        p = float(np.trace(block).real)
        out[outcome] = (p, DensityMatrix(rho.dims, block / p) if p > 0.0 else None)
    return RunBranches(
        out[AtomOutcome.EXCITED][0],
        out[AtomOutcome.EXCITED][1],
        out[AtomOutcome.GROUND][0],
        out[AtomOutcome.GROUND][1],
        partial_trace_atom(r),
    )


def vacuum(cutoff: int = 2) -> StateVector:
    return make_basis_state(SpaceDims.square(cutoff, with_atom=False), 0, 0)


# closed forms -----------------------------------------------------------

def ideal_fidelity(x: float) -> float:
    c = cos(x)
    return 0.5 + c / (c * c + 1.0)


def success_probability(x: float, epsilon: float = 0.0) -> float:
    """Probability that the atom leaves in ``|g>`` from vacuum: 1 - cos^2(x) cos^2(x(1-eps))."""
    if epsilon == 0.0:
        return 1.0 - cos(x) ** 4
    return 1.0 - (cos(x) * cos(x * (1.0 - epsilon))) ** 2


def asymmetric_fidelity(x: float, epsilon: float) -> float:
    """Bell-state fidelity after a successful run with pulse areas x and x(1 - epsilon)."""
    c, s = cos(x), sin(x)
    s2 = sin(x * (1.0 - epsilon))
    den = c * c * s2 * s2 + s * s
    if den == 0.0:
        if x == 0.0:
            r = 1.0 - epsilon
            return 0.5 + r / (r * r + 1.0)
        raise ZeroProbabilityBranch(AtomOutcome.GROUND, 0.0)
    return 0.5 + c * s * s2 / den


def small_area_expansions(x: float) -> tuple[float, float]:
    """Leading small-x behaviour of (fidelity, success probability)."""
    return 1.0 - x**4 / 16.0, 2.0 * x * x


def expected_runs(x: float) -> float:
    p = success_probability(x)
    if p <= 0.0:
        raise ZeroProbabilityBranch(AtomOutcome.GROUND, p)
    return 1.0 / p


def detection_all_works_probability(detector_eff: float, x: float) -> float:
    """D ** (1 / P_success): the detector assumed to fire on every one of the mean number of runs."""
    if not 0.0 <= detector_eff <= 1.0:
        raise ValueError(f"detector efficiency must lie in [0, 1], got {detector_eff!r}")
    return detector_eff ** expected_runs(x)


def failure_free_probability(detector_eff: float, x: float) -> float:
    """Exact probability that the first success comes before any detection failure.

    Averages D**N over the geometric run count N instead of evaluating
    D at the mean; always >= ``detection_all_works_probability``.
    """
    if not 0.0 <= detector_eff <= 1.0:
        raise ValueError(f"detector efficiency must lie in [0, 1], got {detector_eff!r}")
    p = success_probability(x)
    if p <= 0.0:
        raise ZeroProbabilityBranch(AtomOutcome.GROUND, p)
    return p * detector_eff / (1.0 - (1.0 - p) * detector_eff)


# multi-photon extension -------------------------------------------------

def beamsplitter_target(n: int, cutoff: int | None = None) -> StateVector:
    """Normalized (a_A^dag + a_B^dag)^n |0,0>: amplitude on |k, n-k> is sqrt(C(n, k))."""
    if n < 0:
        raise ValueError("photon number must be >= 0")
    cutoff = max(n, 1) if cutoff is None else cutoff
    if cutoff < n:
        raise CutoffError(f"cutoff {cutoff} cannot hold {n} photons")
    dims = SpaceDims.square(cutoff, with_atom=False)
    amps = np.zeros(dims.shape, dtype=complex)
    for k in range(n + 1):
        amps[k, n - k] = np.sqrt(comb(n, k))
    return StateVector(dims, amps).normalized()


def repeated_success_state(n: int, x: float, cutoff: int | None = None, epsilon: float = 0.0) -> StateVector:
    """Cavity state after ``n`` consecutive successful runs from vacuum."""
    if n < 0:
        raise ValueError("photon number must be >= 0")
    cutoff = max(n + 1, 2) if cutoff is None else cutoff
    if cutoff < n + 1:
        raise CutoffError(f"cutoff {cutoff} < n + 1 = {n + 1}")
    state = vacuum(cutoff)
    for _ in range(n):
        br = single_run(state, x, x * (1.0 - epsilon))
        if br.post_ground is None:
            raise ZeroProbabilityBranch(AtomOutcome.GROUND, 0.0)
        state = br.post_ground
    return state


def null_run_nonreset_check(n: int, x: float, cutoff: int | None = None) -> float:
    """Fidelity between the cavity state after ``n`` successes and the state after one more null run.

    Equals 1 when a null run leaves the cavities untouched.
    """
    cutoff = max(n + 1, 2) if cutoff is None else cutoff
    before = repeated_success_state(n, x, cutoff)
    br = single_run(before, x, x)
    if br.post_excited is None:
        raise ZeroProbabilityBranch(AtomOutcome.EXCITED, 0.0)
    return fidelity_pure(before, br.post_excited)


# dissipation ------------------------------------------------------------

def damping_kraus(cutoff: int, decay_fraction: float) -> np.ndarray:
    """Kraus operators K_k (stacked on axis 0) of single-mode amplitude damping.

    <n-k| K_k |n> = sqrt(C(n, k) (1-gamma)^(n-k) gamma^k).
    """
    g = float(decay_fraction)
    if not 0.0 <= g <= 1.0:
        raise ValueError(f"decay fraction must lie in [0, 1], got {decay_fraction!r}")
    d = cutoff + 1
    ks = np.zeros((d, d, d))
    for k in range(d):
        for n in range(k, d):
            ks[k, n - k, n] = np.sqrt(comb(n, k) * (1.0 - g) ** (n - k) * g**k)
    return ks


def amplitude_damp(rho: DensityMatrix, decay_fraction: float | tuple[float, float]) -> DensityMatrix:
    """Independent amplitude damping of both cavity modes."""
    if rho.dims.with_atom:
        raise ValueError("amplitude_damp acts on cavity-only density matrices")
    ga, gb = (decay_fraction, decay_fraction) if np.isscalar(decay_fraction) else decay_fraction
    dims = rho.dims
    r = rho.entries.reshape(dims.shape * 2)
    ka = damping_kraus(dims.cutoff_a, ga)
    kb = damping_kraus(dims.cutoff_b, gb)
    r = np.einsum("jxa,abcd,jyc->xbyd", ka, r, ka)
    r = np.einsum("jxb,abcd,jyd->axcy", kb, r, kb)
    return DensityMatrix(dims, r.reshape(dims.size, dims.size))
