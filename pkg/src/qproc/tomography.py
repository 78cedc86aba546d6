"""Process tomography of a two-qubit channel through its transfer operators.

A linear process is fixed by the operators ``R[i', i]`` such that a pure
input ``sum_i c_i |i>`` is mapped to ``sum_{i,i'} c_i conj(c_i') R[i', i]``.
Sixteen inputs whose coefficient matrix ``M`` is invertible determine all of
them. Indices follow ``i = 2*i1 + i2`` for the computational basis and
``q = 4*i' + i`` (zero based) for the stacked operators.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .linalg import (
    LinalgError,
    LogBranchError,
    as_matrix,
    check_density,
    dagger,
    hermiticity_error,
    is_unitary,
    matrix_log_principal,
)

N_BASIS = 4
N_DESIGN = N_BASIS**2
SINGULAR_CONDITION = 1e12

PAULI = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)
PAULI_LABELS = ("I", "X", "Y", "Z")
# A_q = sigma_{q1} (x) sigma_{q2}, q = 4*q1 + q2
PAULI_BASIS = np.array([np.kron(PAULI[q // 4], PAULI[q % 4]) for q in range(16)])

SINGLE_QUBIT_INPUTS = np.array(
    [[1, 0], [0, 1], [1 / np.sqrt(2), 1 / np.sqrt(2)], [1 / np.sqrt(2), 1j / np.sqrt(2)]],
    dtype=complex,
)


class DesignSingularError(LinalgError):
    code = "design-singular"


class NonLoggableChannelError(LinalgError):
    code = "non-loggable-channel"


@dataclass(frozen=True)
class InputDesign:
    vectors: np.ndarray  # (16, 4) coefficient vectors c^(k)
    labels: tuple[str, ...]
    product: bool

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=complex)
        if v.shape != (N_DESIGN, N_BASIS):
            raise ValueError(f"design needs {N_DESIGN} vectors of length {N_BASIS}")
        if np.max(np.abs(np.linalg.norm(v, axis=1) - 1)) > 1e-12:
            raise ValueError("design vectors must be normalized")

    @property
    def n_basis(self) -> int:
        return N_BASIS

    def projectors(self) -> np.ndarray:
        return np.einsum("ki,kj->kij", self.vectors, self.vectors.conj())


def product_input_design() -> InputDesign:
    """The 16 product inputs ``|psi_a>|psi_b>`` with ``psi`` in {0, 1, +, +i}.

    Ordered by ``k = 4*(a-1) + (b-1)``.
    """
    names = ("0", "1", "+", "+i")
    vecs, labels = [], []
    for a in range(4):
        for b in range(4):
            vecs.append(np.kron(SINGLE_QUBIT_INPUTS[a], SINGLE_QUBIT_INPUTS[b]))
            labels.append(f"|{names[a]}>|{names[b]}>")
    return InputDesign(np.array(vecs), tuple(labels), product=True)


def reference_input_design() -> InputDesign:
    """The delta-based design, ``k = 4*k1 + k2``; some members are entangled."""
    vecs, labels = [], []
    s = 1 / np.sqrt(2)
    for k1 in range(N_BASIS):
        for k2 in range(N_BASIS):
            c = np.zeros(N_BASIS, dtype=complex)
            if k1 > k2:
                c[k1], c[k2] = s, s
                labels.append(f"(|{k1}>+|{k2}>)/sqrt2")
            elif k1 == k2:
                c[k1] = 1
                labels.append(f"|{k1}>")
            else:
                c[k1], c[k2] = s, 1j * s
                labels.append(f"(|{k1}>+i|{k2}>)/sqrt2")
            vecs.append(c)
    return InputDesign(np.array(vecs), tuple(labels), product=False)


@dataclass(frozen=True)
class MMatrix:
    matrix: np.ndarray
    condition_number: float


def build_m_matrix(design: InputDesign) -> MMatrix:
    """``M[k, q] = c_i^(k) conj(c_i'^(k))`` with ``q = 4*i' + i``."""
    c = design.vectors
    m = np.einsum("ki,kj->kji", c, c.conj()).reshape(N_DESIGN, N_DESIGN)
    cond = float(np.linalg.cond(m))
    if not np.isfinite(cond) or cond > SINGULAR_CONDITION:
        raise DesignSingularError(f"design matrix is singular (condition number {cond:.3g})")
    return MMatrix(m, cond)


@dataclass
class TransferOperators:
    """``ops[i', i]`` holds ``R_{i'i}`` as an ``out_dim x out_dim`` matrix."""

    ops: np.ndarray

    def __post_init__(self):
        self.ops = np.asarray(self.ops, dtype=complex)
        if self.ops.ndim != 4 or self.ops.shape[:2] != (N_BASIS, N_BASIS) or self.ops.shape[2] != self.ops.shape[3]:
            raise ValueError(f"transfer operators must have shape (4, 4, d, d), got {self.ops.shape}")

    @property
    def out_dim(self) -> int:
        return self.ops.shape[2]

    def __getitem__(self, key: tuple[int, int]) -> np.ndarray:
        return self.ops[key]

    def stacked(self) -> np.ndarray:
        """Operators in ``q = 4*i' + i`` order, shape ``(16, d, d)``."""
        return self.ops.reshape(N_DESIGN, self.out_dim, self.out_dim)

    def trace_matrix(self) -> np.ndarray:
        """``T[i', i] = Tr R_{i'i}``; input ``c`` leaves with trace ``sum c_i conj(c_i') T[i', i]``."""
        return np.einsum("abjj->ab", self.ops)

    def egrid(self) -> np.ndarray:
        """``E[n, m] = <j'|R_{i'i}|j>`` with ``n = 4*i + j`` and ``m = 4*i' + j'``."""
        if self.out_dim != N_BASIS:
            raise ValueError("egrid is defined for 4-dimensional outputs")
        # ops[i', i, j', j] -> grid[i, j, i', j']
        return self.ops.transpose(1, 3, 0, 2).reshape(N_DESIGN, N_DESIGN)

    def __add__(self, other: "TransferOperators") -> "TransferOperators":
        return TransferOperators(self.ops + other.ops)

    def __mul__(self, s: float) -> "TransferOperators":
        return TransferOperators(self.ops * s)

    __rmul__ = __mul__

    def to_dict(self) -> dict:
        entries = []
        for ip in range(N_BASIS):
            for i in range(N_BASIS):
                r = self.ops[ip, i]
                entries.append({
                    "key": f"R_{ip}{i}",
                    "i_prime": ip,
                    "i": i,
                    "entries": [[float(z.real), float(z.imag)] for z in r.ravel()],
                })
        return {"out_dim": self.out_dim, "operators": entries}

    @classmethod
    def from_dict(cls, data: dict) -> "TransferOperators":
        d = int(data["out_dim"])
        ops = np.zeros((N_BASIS, N_BASIS, d, d), dtype=complex)
        items = data["operators"]
        if len(items) != N_DESIGN:
            raise ValueError(f"expected {N_DESIGN} operators, got {len(items)}")
        seen = set()
        for item in items:
            ip, i = int(item["i_prime"]), int(item["i"])
            flat = np.array([complex(re, im) for re, im in item["entries"]])
            if flat.size != d * d:
                raise ValueError(f"operator R_{ip}{i} has {flat.size} entries, expected {d * d}")
            ops[ip, i] = flat.reshape(d, d)
            seen.add((ip, i))
        if len(seen) != N_DESIGN:
            raise ValueError("duplicate or missing operator indices")
        return cls(ops)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path: str | Path) -> "TransferOperators":
        return cls.from_dict(json.loads(Path(path).read_text()))


def wootters_coefficients(rho) -> np.ndarray:
    """``lambda_q = Tr[rho A_q] / 4`` for the 16 two-qubit Pauli products."""
    rho = as_matrix(rho, square=True)
    if rho.shape != (4, 4):
        raise ValueError("expected a 4x4 two-qubit operator")
    # Tr[rho A] = sum_{ab} rho[a, b] A[b, a]
    return np.einsum("ab,qba->q", rho, PAULI_BASIS) / 4


def reconstruct_from_coefficients(lambdas) -> np.ndarray:
    lam = np.asarray(lambdas)
    if lam.shape != (16,):
        raise ValueError("expected 16 coefficients")
    return np.einsum("q,qab->ab", lam, PAULI_BASIS)


def _local_eigenbasis(q: int) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and eigenvector columns of a single-qubit Pauli factor."""
    if q == 0:
        return np.array([1.0, 1.0]), np.eye(2, dtype=complex)
    return np.linalg.eigh(PAULI[q])


_LOCAL = [_local_eigenbasis(q) for q in range(4)]


def simulate_pauli_measurements(rho, shots_per_observable: int, rng=None) -> np.ndarray:
    """Estimate the Pauli coefficients from independent single-qubit readouts.

    For every ``A_q`` (``q >= 1``) each qubit is measured in the eigenbasis
    of its factor; the four joint outcomes are drawn from a multinomial
    distribution and the product of the two local eigenvalues is averaged.
    Sub-normalized inputs are treated as post-selected: outcome frequencies
    are normalized by the trace and rescaled by it. ``shots == 0`` returns the
    exact coefficients. ``rng`` may be a Generator or an integer seed.
    """
    rho = check_density(rho, tol=1e-8)
    if rho.shape != (4, 4):
        raise ValueError("expected a 4x4 two-qubit density matrix")
    if shots_per_observable < 0:
        raise ValueError("shots must be non-negative")
    if shots_per_observable == 0:
        return wootters_coefficients(rho)
    rng = np.random.default_rng(rng)
    tr = float(np.trace(rho).real)
    lam = np.zeros(16, dtype=complex)
    lam[0] = tr / 4
    if tr <= 0:
        return lam
    for q in range(1, 16):
        (w1, v1), (w2, v2) = _LOCAL[q // 4], _LOCAL[q % 4]
        basis = np.kron(v1, v2)
        probs = np.real(np.einsum("ak,ab,bk->k", basis.conj(), rho, basis)) / tr
        probs = np.clip(probs, 0, None)
        counts = rng.multinomial(shots_per_observable, probs / probs.sum())
        outcome = np.kron(w1, w2)
        lam[q] = tr * float(counts @ outcome) / shots_per_observable / 4
    return lam


def recover_transfer_operators(outputs, m: MMatrix) -> TransferOperators:
    """Solve ``M R = rho_out`` entrywise for the stacked transfer operators."""
    outs = np.asarray(outputs, dtype=complex)
    if outs.ndim != 3 or outs.shape[0] != N_DESIGN or outs.shape[1] != outs.shape[2]:
        raise ValueError("expected 16 square output matrices")
    d = outs.shape[1]
    if not np.isfinite(m.condition_number) or m.condition_number > SINGULAR_CONDITION:
        raise DesignSingularError("design matrix is singular")
    r = np.linalg.solve(m.matrix, outs.reshape(N_DESIGN, d * d))
    return TransferOperators(r.reshape(N_BASIS, N_BASIS, d, d))


def transfer_operators_of_unitary(u) -> TransferOperators:
    """``R_{i'i} = u |i><i'| u^dag``."""
    u = as_matrix(u, square=True)
    if u.shape != (4, 4) or not is_unitary(u):
        raise LinalgError("expected a 4x4 unitary")
    return TransferOperators(np.einsum("ai,bk->kiab", u, u.conj()))


def transfer_operators_of_kraus(kraus) -> TransferOperators:
    """Transfer operators of the channel ``rho -> sum_k K rho K^dag``."""
    ks = np.asarray(kraus, dtype=complex)
    return TransferOperators(np.einsum("nai,nbk->kiab", ks, ks.conj()))


def depolarizing_transfer_operators() -> TransferOperators:
    ops = np.zeros((4, 4, 4, 4), dtype=complex)
    for i in range(4):
        ops[i, i] = np.eye(4) / 4
    return TransferOperators(ops)


def apply_process(r: TransferOperators, rho_in) -> np.ndarray:
    """``rho_out = sum_{i,i'} <i|rho_in|i'> R_{i'i}`` (linear in ``rho_in``)."""
    rho_in = as_matrix(rho_in, square=True)
    if rho_in.shape != (N_BASIS, N_BASIS):
        raise ValueError("expected a 4x4 input operator")
    return np.einsum("ik,kiab->ab", rho_in, r.ops)


def apply_process_pure(r: TransferOperators, psi) -> np.ndarray:
    """Output for pure input(s); ``psi`` may carry leading batch axes."""
    psi = np.asarray(psi, dtype=complex)
    return np.einsum("...i,...k,kiab->...ab", psi, psi.conj(), r.ops)


@dataclass
class ValidationReport:
    trace_deviation: float
    hermiticity_deviation: float
    min_output_eigenvalue: float
    per_input_trace_deficit: list[float] = field(default_factory=list)


def validate_transfer_operators(r: TransferOperators, design: InputDesign | None = None) -> ValidationReport:
    """Diagnose trace, Hermitian pairing and positivity of ``r``.

    Nothing is rejected; leakage shows up as trace deviation.
    """
    design = product_input_design() if design is None else design
    t = r.trace_matrix()
    tr_dev = float(np.max(np.abs(t - np.eye(N_BASIS))))
    herm_dev = float(np.max(np.abs(r.ops - dagger(r.ops).transpose(1, 0, 2, 3))))
    outs = apply_process_pure(r, design.vectors)
    min_eig = float(np.min([np.linalg.eigvalsh(0.5 * (o + dagger(o)))[0] for o in outs]))
    deficits = [float(1 - np.trace(o).real) for o in outs]
    return ValidationReport(tr_dev, herm_dev, min_eig, deficits)


def project_to_physical(rho, trace: float | None = None) -> np.ndarray:
    """Clip negative eigenvalues and renormalize to ``trace`` (default: input trace)."""
    rho = as_matrix(rho, square=True)
    rho = 0.5 * (rho + dagger(rho))
    target = float(np.trace(rho).real) if trace is None else trace
    w, v = np.linalg.eigh(rho)
    w = np.clip(w, 0, None)
    if w.sum() <= 0:
        return np.zeros_like(rho)
    return (v * (w * target / w.sum())) @ dagger(v)


def superoperator(r: TransferOperators) -> np.ndarray:
    """Matrix of the process acting on row-major vectorized operators.

    ``S[4*j + j', 4*i + i'] = <j|R_{i'i}|j'>`` so that
    ``vec(E(rho)) = S @ vec(rho)`` and composition is matrix product.
    """
    if r.out_dim != N_BASIS:
        raise ValueError("superoperator requires 4-dimensional outputs")
    # column for |i><i'| is vec(R_{i'i})
    return r.ops.transpose(1, 0, 2, 3).reshape(N_DESIGN, N_DESIGN).T


def transfer_operators_of_superoperator(s) -> TransferOperators:
    s = as_matrix(s, square=True)
    if s.shape != (N_DESIGN, N_DESIGN):
        raise ValueError("expected a 16x16 superoperator")
    return TransferOperators(s.T.reshape(N_BASIS, N_BASIS, N_BASIS, N_BASIS).transpose(1, 0, 2, 3))


def estimate_liouvillian(r: TransferOperators, t: float) -> np.ndarray:
    """Generator ``L`` with ``exp(L t)`` equal to the measured process."""
    if t <= 0:
        raise ValueError("t must be positive")
    try:
        return matrix_log_principal(superoperator(r)) / t
    except LogBranchError as exc:
        raise NonLoggableChannelError(str(exc)) from exc
