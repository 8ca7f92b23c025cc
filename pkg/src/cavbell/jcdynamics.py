"""Resonant Jaynes-Cummings propagation of the atom with one of the two cavities.

Everything is expressed through the pulse area ``x = g0 * tau``: the
propagator is ``exp(-i x H)`` with ``H = a^dag |g><e| + a |e><g|`` acting on
the selected cavity. ``jc_propagate`` applies the exact 2x2 rotation inside
each excitation sector; ``expm_propagate`` exponentiates the dense
Hamiltonian and exists to check it.
"""

from __future__ import annotations

import enum

import numpy as np
import scipy.linalg

from .qstate import CutoffError, DensityMatrix, SpaceDims, StateVector

# amplitude threshold on |e, n = cutoff> of the selected cavity
TRUNCATION_TOL = 1e-12


class Cavity(enum.Enum):
    A = "A"
    B = "B"

    @classmethod
    def parse(cls, value: "Cavity | str") -> "Cavity":
        return value if isinstance(value, Cavity) else cls(str(value).upper())

    @property
    def axis(self) -> int:
        # axis within the (atom, n_a, n_b) tensor
        return 1 if self is Cavity.A else 2


def _cutoff(dims: SpaceDims, cavity: Cavity) -> int:
    return dims.cutoff_a if cavity is Cavity.A else dims.cutoff_b


def _check_dims(dims: SpaceDims):
    if not dims.with_atom:
        raise ValueError("propagation needs the atom in the state space")


def _guard(tensor: np.ndarray, dims: SpaceDims, cavity: Cavity, extra_axes: int = 0):
    """Refuse to propagate if |e, n = cutoff> carries amplitude (a^dag would leave the space)."""
    top = np.moveaxis(tensor[1], cavity.axis - 1, 0)[_cutoff(dims, cavity)]
    worst = float(np.max(np.abs(top), initial=0.0))
    if worst > TRUNCATION_TOL:
        raise CutoffError(
            f"cavity {cavity.value} cutoff {_cutoff(dims, cavity)} too small: "
            f"|e, n={_cutoff(dims, cavity)}> carries amplitude {worst:.3g}"
        )


def _rotate(tensor: np.ndarray, dims: SpaceDims, cavity: Cavity, x: float) -> np.ndarray:
    """Apply exp(-i x H) along the leading (atom, n_a, n_b) axes of ``tensor``.

    Trailing axes are batch axes, which is how density matrices go through.
    """
    out = np.array(tensor, dtype=complex, copy=True)
    # bring the selected cavity axis next to the atom axis
    e = np.moveaxis(out[1], cavity.axis - 1, 0)
    g = np.moveaxis(out[0], cavity.axis - 1, 0)
    src_e = e.copy()
    src_g = g.copy()
    for n in range(_cutoff(dims, cavity)):
        phase = x * np.sqrt(n + 1)
        c, s = np.cos(phase), np.sin(phase)
        e[n] = c * src_e[n] - 1j * s * src_g[n + 1]
        g[n + 1] = c * src_g[n + 1] - 1j * s * src_e[n]
    return out


def jc_propagate(psi: StateVector, cavity: Cavity | str, x: float) -> StateVector:
    cavity = Cavity.parse(cavity)
    _check_dims(psi.dims)
    if not np.isfinite(x):
        raise ValueError(f"pulse area must be finite, got {x!r}")
    _guard(psi.tensor, psi.dims, cavity)
    return StateVector(psi.dims, _rotate(psi.tensor, psi.dims, cavity, float(x)))


def propagate_density(rho: DensityMatrix, cavity: Cavity | str, x: float) -> DensityMatrix:
    """U rho U^dag with the same closed-form rotation as ``jc_propagate``."""
    cavity = Cavity.parse(cavity)
    dims = rho.dims
    _check_dims(dims)
    if not np.isfinite(x):
        raise ValueError(f"pulse area must be finite, got {x!r}")
    n = dims.size
    diag = np.sqrt(np.clip(np.real(np.diag(rho.entries)), 0.0, None)).reshape(dims.shape)
    _guard(diag, dims, cavity)
    left = _rotate(rho.entries.reshape(*dims.shape, n), dims, cavity, x).reshape(n, n)
    # U (U rho)^dag = U rho^dag U^dag = (U rho U^dag)^dag
    both = _rotate(left.conj().T.reshape(*dims.shape, n), dims, cavity, x).reshape(n, n)
    return DensityMatrix(dims, both.conj().T)


def build_hamiltonian(dims: SpaceDims, cavity: Cavity | str) -> np.ndarray:
    """Dense H = a^dag|g><e| + a|e><g| for one cavity, in units of hbar*g0*u."""
    cavity = Cavity.parse(cavity)
    _check_dims(dims)
    h = np.zeros((dims.size, dims.size))
    for na in range(dims.cutoff_a + 1):
        for nb in range(dims.cutoff_b + 1):
            if cavity is Cavity.A:
                if na == dims.cutoff_a:
                    continue
                target, amp = (0, na + 1, nb), np.sqrt(na + 1)
            else:
                if nb == dims.cutoff_b:
                    continue
                target, amp = (0, na, nb + 1), np.sqrt(nb + 1)
            i = np.ravel_multi_index((1, na, nb), dims.shape)
            j = np.ravel_multi_index(target, dims.shape)
            h[j, i] = h[i, j] = amp
    return h


def excitation_number(dims: SpaceDims) -> np.ndarray:
    """Diagonal of N = n_A + n_B + |e><e| in the fixed basis."""
    atom, na, nb = np.indices(dims.shape)
    return (atom + na + nb).reshape(-1)


def expm_propagate(psi: StateVector, cavity: Cavity | str, x: float) -> StateVector:
    cavity = Cavity.parse(cavity)
    _check_dims(psi.dims)
    if not np.isfinite(x):
        raise ValueError(f"pulse area must be finite, got {x!r}")
    _guard(psi.tensor, psi.dims, cavity)
    u = scipy.linalg.expm(-1j * float(x) * build_hamiltonian(psi.dims, cavity))
    return StateVector(psi.dims, u @ psi.amps)
