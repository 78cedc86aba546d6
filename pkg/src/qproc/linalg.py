"""Dense complex linear algebra used throughout the package.

Matrices are plain ``numpy`` complex arrays. The helpers here add the
validation the rest of the code relies on (Hermiticity, unitarity, finite
entries) on top of LAPACK routines exposed by numpy.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

HERMITIAN_TOL = 1e-10
UNITARY_TOL = 1e-9
POSITIVITY_FLOOR = -1e-9
LOG_BRANCH_TOL = 1e-9
LOG_CONDITION_LIMIT = 1e8


class LinalgError(ValueError):
    """Raised when an input violates a precondition of a kernel routine."""


class LogBranchError(LinalgError):
    """Principal logarithm is undefined or numerically unreliable."""

    code = "log-branch-failure"


def as_matrix(m, *, square: bool = False) -> np.ndarray:
    """Return ``m`` as a finite 2-d complex array."""
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2:
        raise LinalgError(f"expected a 2-d matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise LinalgError("matrix has non-finite entries")
    if square and arr.shape[0] != arr.shape[1]:
        raise LinalgError(f"expected a square matrix, got shape {arr.shape}")
    return arr


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def hermiticity_error(m: np.ndarray) -> float:
    m = np.asarray(m)
    return float(np.max(np.abs(m - dagger(m)))) if m.size else 0.0


def is_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return hermiticity_error(m) <= tol


def is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return float(np.max(np.abs(dagger(u) @ u - np.eye(u.shape[0])))) <= tol


def check_density(rho, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate a (possibly sub-normalized) density matrix and return it."""
    rho = as_matrix(rho, square=True)
    if not is_hermitian(rho, tol):
        raise LinalgError("density matrix is not Hermitian")
    tr = np.trace(rho)
    if abs(tr.imag) > tol or tr.real < -tol or tr.real > 1 + tol:
        raise LinalgError(f"density matrix trace {tr} outside [0, 1]")
    if np.linalg.eigvalsh(rho)[0] < POSITIVITY_FLOOR:
        raise LinalgError("density matrix has a negative eigenvalue")
    return rho


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def projector(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).ravel()
    return np.outer(psi, psi.conj())


def kron(a, b) -> np.ndarray:
    """Kronecker product ``a (x) b``."""
    return np.kron(as_matrix(a), as_matrix(b))


def kron_all(*mats) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, as_matrix(m))
    return out


def _check_dims(n: int, dims: Sequence[int]) -> list[int]:
    dims = [int(d) for d in dims]
    if any(d < 1 for d in dims) or int(np.prod(dims)) != n:
        raise LinalgError(f"subsystem dims {dims} do not multiply to {n}")
    return dims


def partial_trace(rho, dims: Sequence[int], keep: Sequence[int] | set[int]) -> np.ndarray:
    """Trace out every subsystem not listed in ``keep``.

    Subsystems are ordered as in ``dims`` (first factor is the most
    significant index). An empty ``keep`` returns the full trace as a 1x1
    matrix.
    """
    rho = as_matrix(rho, square=True)
    dims = _check_dims(rho.shape[0], dims)
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise LinalgError(f"keep indices {keep} out of range for {len(dims)} subsystems")
    n = len(dims)
    traced = [k for k in range(n) if k not in keep]
    t = rho.reshape(dims + dims)
    # trace pairs from the highest axis down so earlier axis numbers stay valid
    for ax in sorted(traced, reverse=True):
        cur = t.ndim // 2
        t = np.trace(t, axis1=ax, axis2=ax + cur)
    d = int(np.prod([dims[k] for k in keep])) if keep else 1
    return t.reshape(d, d)


def partial_transpose(rho, dims: Sequence[int] = (2, 2), subsystem: int = 1) -> np.ndarray:
    """Transpose the indices of one factor of a bipartite operator."""
    rho = as_matrix(rho, square=True)
    dims = _check_dims(rho.shape[0], dims)
    if len(dims) != 2 or subsystem not in (0, 1):
        raise LinalgError("partial_transpose expects a bipartite operator and subsystem 0 or 1")
    da, db = dims
    t = rho.reshape(da, db, da, db)
    if subsystem == 0:
        t = t.transpose(2, 1, 0, 3)
    else:
        t = t.transpose(0, 3, 2, 1)
    return t.reshape(da * db, da * db)


def eig_hermitian(m, tol: float = HERMITIAN_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix, eigenvalues ascending."""
    m = as_matrix(m, square=True)
    if not is_hermitian(m, tol):
        raise LinalgError("eig_hermitian requires a Hermitian matrix")
    return np.linalg.eigh(0.5 * (m + dagger(m)))


def matrix_exp_hermitian_generator(h, t: float) -> np.ndarray:
    """Return ``exp(-i h t)`` for Hermitian ``h`` via its spectral decomposition."""
    w, v = eig_hermitian(h)
    return (v * np.exp(-1j * w * t)) @ dagger(v)


def matrix_log_principal(m) -> np.ndarray:
    """Principal matrix logarithm of a diagonalizable matrix.

    Raises:
        LogBranchError: an eigenvalue is zero or sits on the negative real
            axis, or the eigenvector matrix is too ill-conditioned to trust.
    """
    m = as_matrix(m, square=True)
    w, v = np.linalg.eig(m)
    cond = np.linalg.cond(v)
    if not np.isfinite(cond) or cond > LOG_CONDITION_LIMIT:
        raise LogBranchError(f"eigenvector matrix condition number {cond:.3g} exceeds limit")
    on_cut = (np.abs(w.imag) <= LOG_BRANCH_TOL) & (w.real <= LOG_BRANCH_TOL)
    if np.any(on_cut):
        raise LogBranchError(f"eigenvalue(s) {w[on_cut]} on the branch cut")
    return (v * np.log(w)) @ np.linalg.inv(v)


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return 0.5 * (g + dagger(g))


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary from the QR decomposition of a Ginibre matrix."""
    g = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(g)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ dagger(g)
    return rho / np.trace(rho).real
