"""Complex linear-algebra kernel.

Dense Hermitian eigendecomposition and exponentials serve as the reference
path; the Lanczos propagator and the low-rank exact exponential are the fast
paths used by the layered dynamics. All operators here are Hermitian.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np

from .config import CAPS, TOL


class NonHermitianError(ValueError):
    """Raised when an operator that should be Hermitian is not."""

    def __init__(self, deviation: float):
        super().__init__(f"operator is not Hermitian: relative deviation {deviation:.3e}")
        self.deviation = deviation


class KrylovConvergenceError(RuntimeError):
    def __init__(self, residual: float, max_dim: int):
        super().__init__(
            f"Krylov propagator did not converge within dimension {max_dim} "
            f"(residual estimate {residual:.3e})"
        )
        self.residual = residual
        self.max_dim = max_dim


def hermitian_deviation(M: np.ndarray) -> float:
    norm = np.linalg.norm(M)
    if norm == 0.0:
        return 0.0
    return float(np.linalg.norm(M - M.conj().T) / norm)


def hermitian_eigendecompose(M: np.ndarray, tol: float = TOL.hermitian):
    """Eigendecomposition of a Hermitian matrix.

    Returns:
        (eigenvalues ascending, eigenvectors as orthonormal columns)
    """
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    dev = hermitian_deviation(M)
    if dev > tol:
        raise NonHermitianError(dev)
    return np.linalg.eigh(M)


def dense_unitary_exp(H: np.ndarray, cap: int = CAPS.dense_exp) -> np.ndarray:
    """U = exp(-iH) through the eigenbasis of H."""
    H = np.asarray(H)
    if H.shape[0] > cap:
        raise ValueError(
            f"dimension {H.shape[0]} exceeds dense cap {cap}; use the Krylov path"
        )
    w, V = hermitian_eigendecompose(H)
    return (V * np.exp(-1j * w)) @ V.conj().T


# --- structured operator pieces --------------------------------------------

_AXES = {"x": 0, "y": 1, "z": 2}


def apply_pauli(vecs: np.ndarray, site: int, axis: Union[int, str], n_qubits: int) -> np.ndarray:
    """Apply sigma^axis on qubit ``site`` to a vector or a block of column vectors.

    Qubit 0 is the most significant bit of the basis index.
    """
    if isinstance(axis, str):
        axis = _AXES[axis]
    vecs = np.asarray(vecs)
    tail = vecs.shape[1:]
    t = vecs.reshape((2 ** site, 2, 2 ** (n_qubits - site - 1)) + tail)
    if axis == 2:
        out = t.astype(complex, copy=True)
        out[:, 1] *= -1
    else:
        out = t[:, ::-1].astype(complex, copy=True)
        if axis == 1:
            out[:, 0] *= -1j
            out[:, 1] *= 1j
    return out.reshape(vecs.shape)


def shift(vecs: np.ndarray, k: int = 1) -> np.ndarray:
    """Cyclic shift X^k with X|d> = |d+1 mod D>, along axis 0."""
    return np.roll(vecs, k, axis=0)


@dataclass(frozen=True)
class PauliSum:
    """Weight-one Pauli sum: sum_i sum_mu coefficients[i, mu] sigma_i^mu."""

    coefficients: np.ndarray  # shape (n_qubits, 3), real

    @property
    def n_qubits(self) -> int:
        return self.coefficients.shape[0]

    def matvec(self, v: np.ndarray) -> np.ndarray:
        n = self.n_qubits
        out = np.zeros(v.shape, dtype=complex)
        for i in range(n):
            for mu in range(3):
                c = self.coefficients[i, mu]
                if c != 0.0:
                    out += c * apply_pauli(v, i, mu, n)
        return out

    def to_dense(self) -> np.ndarray:
        dim = 2 ** self.n_qubits
        return self.matvec(np.eye(dim, dtype=complex))


@dataclass(frozen=True)
class CirculantShift:
    """strength * (X + X^dagger) on a D-level system."""

    strength: float
    dim: int

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self.strength * (shift(v, 1) + shift(v, -1))

    def to_dense(self) -> np.ndarray:
        return self.matvec(np.eye(self.dim, dtype=complex))


ExtraTerm = Optional[Union[PauliSum, CirculantShift]]


@dataclass(frozen=True)
class StructuredHamiltonian:
    """identity * I + sum_k weights[k] |v_k><v_k| + extra.

    ``vectors`` holds the rank-one directions as columns, shape (dim, k).
    """

    dim: int
    identity: float = 0.0
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    vectors: Optional[np.ndarray] = None
    extra: ExtraTerm = None

    def __post_init__(self):
        if self.vectors is None:
            object.__setattr__(self, "vectors", np.zeros((self.dim, 0), dtype=complex))
        if self.vectors.shape != (self.dim, len(self.weights)):
            raise ValueError(
                f"rank-one block has shape {self.vectors.shape}, "
                f"expected ({self.dim}, {len(self.weights)})"
            )

    def matvec(self, v: np.ndarray, include_identity: bool = True) -> np.ndarray:
        """H v for a vector or a (dim, m) block."""
        out = self.identity * v if include_identity else np.zeros(v.shape, dtype=complex)
        if len(self.weights):
            coeff = self.vectors.conj().T @ v
            if v.ndim == 1:
                out = out + self.vectors @ (self.weights * coeff)
            else:
                out = out + self.vectors @ (self.weights[:, None] * coeff)
        if self.extra is not None:
            out = out + self.extra.matvec(v)
        return out

    def to_dense(self) -> np.ndarray:
        M = self.identity * np.eye(self.dim, dtype=complex)
        if len(self.weights):
            M = M + (self.vectors * self.weights) @ self.vectors.conj().T
        if self.extra is not None:
            M = M + self.extra.to_dense()
        return M

    def norm_bound(self) -> float:
        """Upper bound on the spectral radius of H - identity*I."""
        bound = float(np.sum(np.abs(self.weights) * np.sum(np.abs(self.vectors) ** 2, axis=0)))
        if isinstance(self.extra, PauliSum):
            bound += float(np.sum(np.abs(self.extra.coefficients)))
        elif isinstance(self.extra, CirculantShift):
            bound += 2.0 * abs(self.extra.strength)
        return bound


# --- Lanczos propagator -----------------------------------------------------

def _tridiag_exp_first_column(alpha: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """exp(-iT) e_1 for a stack of real symmetric tridiagonal matrices.

    alpha: (m, M) diagonals, beta: (m-1, M) off-diagonals. Returns (m, M).
    """
    m, M = alpha.shape
    T = np.zeros((M, m, m))
    idx = np.arange(m)
    T[:, idx, idx] = alpha.T
    if m > 1:
        T[:, idx[:-1], idx[1:]] = beta.T
        T[:, idx[1:], idx[:-1]] = beta.T
    w, U = np.linalg.eigh(T)
    y = np.einsum("bij,bj->bi", U, np.exp(-1j * w) * U[:, 0, :])
    return y.T


def lanczos_expm_block(
    matvec: Callable[[np.ndarray], np.ndarray],
    V0: np.ndarray,
    tol: float = TOL.krylov_tol,
    max_dim: int = TOL.krylov_max_dim,
    reorthogonalize: bool = True,
) -> np.ndarray:
    """Columnwise exp(-iH_j) v_j for a block of start vectors.

    ``matvec`` maps a (dim, M) block to its image and may apply a different
    Hermitian operator to each column. Iteration stops once every column's
    residual estimate beta_m |e_m^T exp(-iT_m) e_1| ||v|| is below ``tol``.
    """
    V0 = np.asarray(V0, dtype=complex)
    single = V0.ndim == 1
    if single:
        V0 = V0[:, None]
    dim, M = V0.shape
    norms = np.linalg.norm(V0, axis=0)
    safe = np.where(norms > 0, norms, 1.0)
    Q = [V0 / safe]
    alphas, betas = [], []
    breakdown = 1e-12
    err = np.inf
    for j in range(min(max_dim, dim)):
        w = matvec(Q[j])
        a = np.real(np.sum(Q[j].conj() * w, axis=0))
        w = w - a * Q[j]
        if j > 0:
            w = w - betas[-1] * Q[j - 1]
        if reorthogonalize:
            for q in Q:
                w = w - q * np.sum(q.conj() * w, axis=0)
        b = np.linalg.norm(w, axis=0)
        alphas.append(a)
        y = _tridiag_exp_first_column(np.array(alphas), np.array(betas).reshape(len(betas), M))
        err_cols = b * np.abs(y[-1]) * norms
        err = float(np.max(err_cols)) if M else 0.0
        if err < tol or j == dim - 1:
            out = np.einsum("jdm,jm->dm", np.array(Q), y) * norms
            return out[:, 0] if single else out
        dead = b <= breakdown
        b_safe = np.where(dead, 1.0, b)
        q_next = np.where(dead, 0.0, w / b_safe)
        betas.append(np.where(dead, 0.0, b))
        Q.append(q_next)
    raise KrylovConvergenceError(err, max_dim)


def krylov_exp_apply(
    H: StructuredHamiltonian,
    v: np.ndarray,
    tol: float = TOL.krylov_tol,
    max_dim: int = TOL.krylov_max_dim,
) -> np.ndarray:
    """exp(-iH) v (or columnwise on a block) using only products with H."""
    if not 0.0 < tol <= 1e-4:
        raise ValueError(f"tol must lie in (0, 1e-4], got {tol}")
    out = lanczos_expm_block(lambda x: H.matvec(x, include_identity=False), v, tol, max_dim)
    return np.exp(-1j * H.identity) * out


def lowrank_exp_apply(H: StructuredHamiltonian, V: np.ndarray) -> np.ndarray:
    """Exact exp(-iH) applied to a vector or block when H has no extra term.

    H acts as identity*I on the orthogonal complement of its rank-one
    directions, so the exponential reduces to a small dense one on their span.
    """
    if H.extra is not None:
        raise ValueError("lowrank_exp_apply needs an operator without an extra term")
    phase = np.exp(-1j * H.identity)
    if not len(H.weights):
        return phase * V
    Qb, _ = np.linalg.qr(H.vectors)
    G = Qb.conj().T @ H.vectors
    small = (G * H.weights) @ G.conj().T
    small = 0.5 * (small + small.conj().T)
    Us = dense_unitary_exp(small, cap=max(CAPS.dense_exp, small.shape[0]))
    coeff = Qb.conj().T @ V
    return phase * (V + Qb @ ((Us - np.eye(Us.shape[0])) @ coeff))


# --- density matrices -------------------------------------------------------

@dataclass(frozen=True)
class DensityRep:
    """Density matrix, either dense or factored as sum_k p_k |phi_k><phi_k|.

    Factored vectors are orthonormal columns of ``vectors``. ``discarded``
    accumulates eigenvalue mass removed by rank truncation.
    """

    matrix: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None
    vectors: Optional[np.ndarray] = None
    discarded: float = 0.0

    @classmethod
    def dense(cls, matrix: np.ndarray) -> "DensityRep":
        return cls(matrix=np.asarray(matrix, dtype=complex))

    @classmethod
    def factored(cls, weights, vectors) -> "DensityRep":
        return cls(weights=np.asarray(weights, dtype=float),
                   vectors=np.asarray(vectors, dtype=complex))

    @classmethod
    def pure(cls, psi: np.ndarray, factored: bool = True) -> "DensityRep":
        psi = np.asarray(psi, dtype=complex)
        if factored:
            return cls.factored([1.0], psi[:, None])
        return cls.dense(np.outer(psi, psi.conj()))

    @classmethod
    def from_factor_matrix(cls, F: np.ndarray, discarded: float = 0.0) -> "DensityRep":
        """Orthonormal factored form of rho = F F^dagger."""
        dim, m = F.shape
        if m >= dim:
            w, V = np.linalg.eigh(F @ F.conj().T)
            w, V = w[::-1], V[:, ::-1]
        else:
            U, s, _ = np.linalg.svd(F, full_matrices=False)
            w, V = s ** 2, U
        keep = w > 0
        return cls(weights=w[keep], vectors=V[:, keep], discarded=discarded)

    @property
    def is_factored(self) -> bool:
        return self.matrix is None

    @property
    def dim(self) -> int:
        return self.vectors.shape[0] if self.is_factored else self.matrix.shape[0]

    @property
    def rank(self) -> int:
        if self.is_factored:
            return len(self.weights)
        return int(np.sum(np.linalg.eigvalsh(self.matrix) > TOL.positivity))

    def to_dense(self) -> np.ndarray:
        if not self.is_factored:
            return self.matrix
        return (self.vectors * self.weights) @ self.vectors.conj().T

    def trace(self) -> float:
        if self.is_factored:
            return float(np.sum(self.weights))
        return float(np.real(np.trace(self.matrix)))

    def eigen(self):
        """(weights descending, orthonormal vectors) of the represented matrix."""
        if self.is_factored:
            order = np.argsort(-self.weights, kind="stable")
            return self.weights[order], self.vectors[:, order]
        w, V = np.linalg.eigh(0.5 * (self.matrix + self.matrix.conj().T))
        return w[::-1], V[:, ::-1]

    def expectation(self, vecs: np.ndarray) -> np.ndarray:
        """<v|rho|v> for a vector or each column of a block."""
        if self.is_factored:
            amp = self.vectors.conj().T @ vecs
            w = self.weights if vecs.ndim == 1 else self.weights[:, None]
            return np.real(np.sum(w * np.abs(amp) ** 2, axis=0))
        return np.real(np.sum(vecs.conj() * (self.matrix @ vecs), axis=0))

    def with_discarded(self, extra: float) -> "DensityRep":
        return replace(self, discarded=self.discarded + extra)


def validate_density(rho: DensityRep, tol: float = TOL.trace) -> None:
    tr = rho.trace()
    if abs(tr - 1.0) > tol:
        raise ValueError(f"density matrix trace {tr!r} differs from 1")
    if rho.is_factored:
        if np.any(rho.weights < -TOL.positivity):
            raise ValueError("negative weight in factored density matrix")
        gram = rho.vectors.conj().T @ rho.vectors
        if np.linalg.norm(gram - np.eye(gram.shape[0])) > 1e-8:
            raise ValueError("factored density vectors are not orthonormal")
    else:
        dev = hermitian_deviation(rho.matrix)
        if dev > TOL.hermitian:
            raise NonHermitianError(dev)
        if np.linalg.eigvalsh(rho.matrix)[0] < -TOL.positivity:
            raise ValueError("density matrix has a negative eigenvalue")


UnitaryAction = Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]


def _as_action(U: UnitaryAction) -> Callable[[np.ndarray], np.ndarray]:
    if callable(U):
        return U
    return lambda X: U @ X


def conjugate_density(U: UnitaryAction, rho: DensityRep) -> DensityRep:
    """U rho U^dagger; ``U`` is a matrix or a function applying U to column blocks."""
    act = _as_action(U)
    if rho.is_factored:
        return replace(rho, vectors=act(rho.vectors))
    half = act(rho.matrix)  # U rho
    out = act(half.conj().T).conj().T  # (U (U rho)^dagger)^dagger = U rho U^dagger
    return replace(rho, matrix=0.5 * (out + out.conj().T))


def truncate_rank(rho: DensityRep, budget: float = TOL.truncation_budget) -> DensityRep:
    """Drop the smallest eigenvalues while their total mass stays within ``budget``.

    The result is factored and renormalized; the trace distance to the input
    equals the discarded mass.
    """
    if not 0.0 < budget < 1.0:
        raise ValueError(f"budget must lie in (0, 1), got {budget}")
    w, V = rho.eigen()
    w = np.clip(w, 0.0, None)
    total = float(np.sum(w))
    tail = np.cumsum(w[::-1])[::-1]  # tail[k] = mass of w[k:]
    drop = tail <= budget * total
    keep = int(np.argmax(drop)) if np.any(drop) else len(w)
    keep = max(keep, 1)
    lost = float(np.sum(w[keep:]))
    kept_w = w[:keep] / np.sum(w[:keep])
    return DensityRep(weights=kept_w, vectors=V[:, :keep], discarded=rho.discarded + lost / total)
