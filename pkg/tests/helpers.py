"""Independent dense constructions used as oracles."""

from functools import reduce

import numpy as np

PAULI = [
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
]


def pauli_on(site, axis, n):
    return reduce(np.kron, [PAULI[axis] if k == site else np.eye(2) for k in range(n)])


def expm_herm(H):
    w, V = np.linalg.eigh(H)
    return (V * np.exp(-1j * w)) @ V.conj().T


def shift_matrix(dim):
    X = np.zeros((dim, dim))
    for d in range(dim):
        X[(d + 1) % dim, d] = 1.0
    return X


def dense_hamiltonian(dim, A, B, r, rho, V=None, target=0):
    psi_i = np.ones(dim) / np.sqrt(dim)
    f = np.zeros(dim)
    f[target] = 1.0
    H = A * (np.eye(dim) - np.outer(psi_i, psi_i)) + B * (np.eye(dim) - np.outer(f, f)) - r * rho
    if V is not None:
        H = H + V
    return H


def random_unit(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_rho(rng, dim, rank):
    F = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = F @ F.conj().T
    return rho / np.trace(rho).real
