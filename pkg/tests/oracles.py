"""Brute-force reference constructions, independent of the package internals.

Everything here is built from Kronecker products of textbook operators in
the (atom, n_A, n_B) ordering with |g> = index 0 and |e> = index 1.
"""

from math import comb, factorial

import numpy as np
import scipy.linalg


def destroy(cutoff):
    return np.diag(np.sqrt(np.arange(1, cutoff + 1)), k=1).astype(complex)


SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)  # |g><e|


def full_ops(cutoff_a, cutoff_b):
    ia, ib = np.eye(cutoff_a + 1), np.eye(cutoff_b + 1)
    a = np.kron(np.eye(2), np.kron(destroy(cutoff_a), ib))
    b = np.kron(np.eye(2), np.kron(ia, destroy(cutoff_b)))
    sm = np.kron(SIGMA_MINUS, np.kron(ia, ib))
    return a, b, sm


def jc_hamiltonian(cutoff_a, cutoff_b, cavity):
    a, b, sm = full_ops(cutoff_a, cutoff_b)
    op = a if cavity == "A" else b
    h = op.conj().T @ sm + op @ sm.conj().T
    return h


def propagate(psi, cutoff_a, cutoff_b, cavity, x):
    u = scipy.linalg.expm(-1j * x * jc_hamiltonian(cutoff_a, cutoff_b, cavity))
    return u @ psi


def ket(cutoff_a, cutoff_b, atom, na, nb):
    v = np.zeros(2 * (cutoff_a + 1) * (cutoff_b + 1), dtype=complex)
    v[(atom * (cutoff_a + 1) + na) * (cutoff_b + 1) + nb] = 1
    return v


def binomial_bs_state(n, cutoff):
    """(a_A^dag + a_B^dag)^n |00> expanded term by term, then normalized."""
    out = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
    for k in range(n + 1):
        # a^dag^k |0> = sqrt(k!) |k>
        out[k, n - k] += comb(n, k) * np.sqrt(factorial(k) * factorial(n - k))
    out = out.reshape(-1)
    return out / np.linalg.norm(out)


def damping_by_dilation(rho_mode, cutoff, gamma):
    """Single-mode amplitude damping via a beam splitter onto a vacuum environment mode."""
    d = cutoff + 1
    a = np.kron(destroy(cutoff), np.eye(d))
    e = np.kron(np.eye(d), destroy(cutoff))
    theta = np.arctan2(np.sqrt(gamma), np.sqrt(1 - gamma))
    u = scipy.linalg.expm(theta * (a.conj().T @ e - a @ e.conj().T))
    env0 = np.zeros((d, d))
    env0[0, 0] = 1
    big = u @ np.kron(rho_mode, env0) @ u.conj().T
    return np.einsum("ajbj->ab", big.reshape(d, d, d, d))


def random_state(rng, size):
    v = rng.normal(size=size) + 1j * rng.normal(size=size)
    return v / np.linalg.norm(v)
