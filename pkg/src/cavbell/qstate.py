"""Dense state vectors and density matrices for one two-level atom and two cavity modes.

Basis ordering is part of the public contract: the atom index is slowest
(``g`` = 0, ``e`` = 1), then the photon number of cavity A, then cavity B.
Cavity-only spaces drop the atom factor and keep the (n_A, n_B) order.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

NORM_TOL = 1e-12
EIG_TOL = 1e-10


class CutoffError(IndexError):
    """A Fock label or a propagated amplitude does not fit in the truncated space."""


class ZeroProbabilityBranch(ValueError):
    """The requested measurement branch has zero probability, so no post-state exists."""

    def __init__(self, outcome: "AtomOutcome", prob: float):
        super().__init__(f"branch {outcome.name} has probability {prob:.3g}")
        self.outcome = outcome
        self.prob = prob


class AtomOutcome(enum.IntEnum):
    GROUND = 0
    EXCITED = 1

    @classmethod
    def parse(cls, value: "AtomOutcome | int | str") -> "AtomOutcome":
        if isinstance(value, str):
            key = value.strip().lower()
            if key in ("g", "ground"):
                return cls.GROUND
            if key in ("e", "excited"):
                return cls.EXCITED
            raise ValueError(f"unknown atom state {value!r}")
        return cls(int(value))

    @property
    def label(self) -> str:
        return "ge"[self.value]


@dataclass(frozen=True)
class SpaceDims:
    """Truncation of the atom (x) cavity A (x) cavity B space.

    Fock levels run from 0 to the cutoff inclusive. ``with_atom=False``
    describes the cavity-only space left after the atom is measured or
    traced out.
    """

    cutoff_a: int
    cutoff_b: int
    with_atom: bool = True

    def __post_init__(self):
        for name in ("cutoff_a", "cutoff_b"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be an integer >= 1, got {value!r}")

    @classmethod
    def square(cls, cutoff: int, with_atom: bool = True) -> "SpaceDims":
        return cls(cutoff, cutoff, with_atom)

    @property
    def shape(self) -> tuple[int, ...]:
        cav = (self.cutoff_a + 1, self.cutoff_b + 1)
        return (2, *cav) if self.with_atom else cav

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    def cavity(self) -> "SpaceDims":
        return SpaceDims(self.cutoff_a, self.cutoff_b, with_atom=False)

    def full(self) -> "SpaceDims":
        return SpaceDims(self.cutoff_a, self.cutoff_b, with_atom=True)

    def labels(self) -> list[str]:
        if self.with_atom:
            return [
                f"{AtomOutcome(a).label},{na},{nb}"
                for a in range(2)
                for na in range(self.cutoff_a + 1)
                for nb in range(self.cutoff_b + 1)
            ]
        return [f"{na},{nb}" for na in range(self.cutoff_a + 1) for nb in range(self.cutoff_b + 1)]


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=complex)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class StateVector:
    dims: SpaceDims
    amps: np.ndarray

    def __post_init__(self):
        amps = _frozen(self.amps).reshape(-1)
        if amps.size != self.dims.size:
            raise ValueError(f"expected {self.dims.size} amplitudes, got {amps.size}")
        if not np.all(np.isfinite(amps)):
            raise ValueError("state amplitudes must be finite")
        object.__setattr__(self, "amps", amps)

    @property
    def tensor(self) -> np.ndarray:
        """Amplitudes viewed with one axis per subsystem."""
        return self.amps.reshape(self.dims.shape)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def normalized(self) -> "StateVector":
        n = self.norm
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(self.dims, self.amps / n)

    def projector(self) -> "DensityMatrix":
        return DensityMatrix(self.dims, np.outer(self.amps, self.amps.conj()))

    def amplitude(self, *label) -> complex:
        return complex(self.tensor[_index(self.dims, label)])

    def embed(self, dims: SpaceDims) -> "StateVector":
        """Zero-pad into a space with larger (or equal) cutoffs."""
        if dims.with_atom != self.dims.with_atom:
            raise ValueError("cannot embed across atom/cavity-only spaces")
        if dims.cutoff_a < self.dims.cutoff_a or dims.cutoff_b < self.dims.cutoff_b:
            raise CutoffError("embedding target is smaller than the source space")
        out = np.zeros(dims.shape, dtype=complex)
        out[tuple(slice(0, n) for n in self.dims.shape)] = self.tensor
        return StateVector(dims, out)

    def dump(self) -> str:
        return "".join(
            f"{lab} {float(a.real)!r} {float(a.imag)!r}\n" for lab, a in zip(self.dims.labels(), self.amps)
        )


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    dims: SpaceDims
    entries: np.ndarray

    def __post_init__(self):
        m = _frozen(self.entries)
        n = self.dims.size
        if m.shape != (n, n):
            raise ValueError(f"expected a {n}x{n} matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("density matrix entries must be finite")
        object.__setattr__(self, "entries", m)

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries).real)

    @property
    def purity(self) -> float:
        return float(np.real(np.vdot(self.entries, self.entries)))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    def is_valid(self, tol: float = NORM_TOL) -> bool:
        m = self.entries
        return (
            np.max(np.abs(m - m.conj().T), initial=0.0) <= tol
            and abs(self.trace - 1.0) <= tol
            and self.eigenvalues().min() >= -EIG_TOL
        )

    def population(self, *label) -> float:
        idx = np.ravel_multi_index(_index(self.dims, label), self.dims.shape)
        return float(self.entries[idx, idx].real)

    def embed(self, dims: SpaceDims) -> "DensityMatrix":
        if dims.with_atom != self.dims.with_atom:
            raise ValueError("cannot embed across atom/cavity-only spaces")
        if dims.cutoff_a < self.dims.cutoff_a or dims.cutoff_b < self.dims.cutoff_b:
            raise CutoffError("embedding target is smaller than the source space")
        src = self.entries.reshape(self.dims.shape * 2)
        out = np.zeros(dims.shape * 2, dtype=complex)
        out[tuple(slice(0, n) for n in self.dims.shape * 2)] = src
        return DensityMatrix(dims, out.reshape(dims.size, dims.size))


def _index(dims: SpaceDims, label) -> tuple[int, ...]:
    if dims.with_atom:
        if len(label) != 3:
            raise ValueError("full-space labels are (atom, n_a, n_b)")
        atom = AtomOutcome.parse(label[0])
        na, nb = label[1], label[2]
        idx = (int(atom), na, nb)
    else:
        if len(label) != 2:
            raise ValueError("cavity-only labels are (n_a, n_b)")
        na, nb = label
        idx = (na, nb)
    if not (0 <= na <= dims.cutoff_a and 0 <= nb <= dims.cutoff_b):
        raise CutoffError(f"Fock label ({na}, {nb}) outside cutoffs ({dims.cutoff_a}, {dims.cutoff_b})")
    return idx


def make_basis_state(dims: SpaceDims, *label) -> StateVector:
    """Unit vector on one basis ket.

    ``make_basis_state(dims, "e", 0, 0)`` for the full space, or
    ``make_basis_state(dims.cavity(), 1, 0)`` for cavities only.
    """
    amps = np.zeros(dims.shape, dtype=complex)
    amps[_index(dims, label)] = 1.0
    return StateVector(dims, amps)


def cavity_state(cutoff: int, coeffs: dict[tuple[int, int], complex], normalize: bool = True) -> StateVector:
    """Build a cavity-only state from a ``{(n_a, n_b): amplitude}`` mapping."""
    dims = SpaceDims.square(cutoff, with_atom=False)
    amps = np.zeros(dims.shape, dtype=complex)
    for label, c in coeffs.items():
        amps[_index(dims, label)] = c
    psi = StateVector(dims, amps)
    return psi.normalized() if normalize else psi


def bell_plus(cutoff: int = 1) -> StateVector:
    """(|0,1> + |1,0>)/sqrt(2) in a cavity-only space."""
    return cavity_state(cutoff, {(0, 1): 1.0, (1, 0): 1.0})


def adjoin_atom(cav: StateVector, atom: AtomOutcome | str = AtomOutcome.EXCITED) -> StateVector:
    if cav.dims.with_atom:
        raise ValueError("state already contains the atom")
    full = np.zeros((2, *cav.dims.shape), dtype=complex)
    full[int(AtomOutcome.parse(atom))] = cav.tensor
    return StateVector(cav.dims.full(), full)


def _check_same(a_dims: SpaceDims, b_dims: SpaceDims):
    if a_dims != b_dims:
        raise ValueError(f"dimension mismatch: {a_dims} vs {b_dims}")


def inner_product(a: StateVector, b: StateVector) -> complex:
    """<a|b>, conjugating the first argument."""
    _check_same(a.dims, b.dims)
    return complex(np.vdot(a.amps, b.amps))


def fidelity_pure(a: StateVector, b: StateVector) -> float:
    return abs(inner_product(a, b)) ** 2


def project_atom(psi: StateVector, outcome: AtomOutcome | str) -> tuple[float, StateVector]:
    """Projectively measure the atom.

    Returns the outcome probability and the normalized cavity-only
    post-measurement state. Raises ZeroProbabilityBranch when the branch
    cannot occur.
    """
    if not psi.dims.with_atom:
        raise ValueError("state has no atom to measure")
    outcome = AtomOutcome.parse(outcome)
    block = psi.tensor[int(outcome)]
    prob = float(np.real(np.vdot(block, block)))
    if prob == 0.0:
        raise ZeroProbabilityBranch(outcome, prob)
    return prob, StateVector(psi.dims.cavity(), block / np.sqrt(prob))


def partial_trace_atom(state: StateVector | DensityMatrix) -> DensityMatrix:
    """Reduced cavity density matrix after tracing out the atom."""
    if not state.dims.with_atom:
        raise ValueError("state has no atom to trace out")
    cav = state.dims.cavity()
    n = cav.size
    if isinstance(state, StateVector):
        blocks = state.amps.reshape(2, n)
        rho = blocks.T @ blocks.conj()
    else:
        r = state.entries.reshape(2, n, 2, n)
        rho = r[0, :, 0, :] + r[1, :, 1, :]
    return DensityMatrix(cav, rho)


def fidelity_mixed(rho: DensityMatrix, target: StateVector) -> float:
    """<target|rho|target>."""
    _check_same(rho.dims, target.dims)
    return float(np.real(np.vdot(target.amps, rho.entries @ target.amps)))
