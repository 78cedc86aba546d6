"""Gate quality figures computed from transfer operators.

Fidelity and purity have closed forms that are quadratic in the input
amplitudes, so they are evaluated exactly from fourth moments of the input
ensemble. Quantum degree and entanglement capability require searches over
product inputs and are found with multi-start Nelder-Mead.
"""

from __future__ import annotations

import cmath
import itertools
import math
import logging
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import minimize

from .linalg import LinalgError, as_matrix, dagger, is_unitary, partial_transpose
from .tomography import TransferOperators, apply_process_pure

log = logging.getLogger(__name__)

CHSH_THRESHOLD = (2 + 3 * np.sqrt(2)) / 8
PHI_PLUS = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)

# (E|c_i|^4, E|c_i|^2|c_j|^2) for normalized inputs in four dimensions.
# "haar": unitarily invariant pure states. "real_amplitude": magnitudes from
# the uniform real sphere with independent uniform phases on each component.
ENSEMBLE_MOMENTS = {
    "haar": (1 / 10, 1 / 20),
    "real_amplitude": (1 / 8, 1 / 24),
}


def _moments(ensemble: str) -> tuple[float, float]:
    try:
        return ENSEMBLE_MOMENTS[ensemble]
    except KeyError:
        raise ValueError(f"unknown ensemble {ensemble!r}; choose from {sorted(ENSEMBLE_MOMENTS)}") from None


def _check_gate(u) -> np.ndarray:
    u = as_matrix(u, square=True)
    if u.shape != (4, 4) or not is_unitary(u):
        raise LinalgError("ideal gate must be a 4x4 unitary")
    return u


def fidelity_elements(r: TransferOperators, u) -> np.ndarray:
    """``F[i', i, j', j] = <j'| U^dag R_{i'i} U |j>``."""
    u = _check_gate(u)
    if r.out_dim != 4:
        raise ValueError("fidelity needs 4-dimensional outputs")
    return np.einsum("ax,kiab,by->kixy", u.conj(), r.ops, u)


def gate_fidelity(r: TransferOperators, u, ensemble: str = "haar") -> float:
    """Input-averaged overlap of the actual output with the ideal output ``U|psi>``."""
    w_diag, w_off = _moments(ensemble)
    f = fidelity_elements(r, u)
    total = 0j
    for i in range(4):
        total += w_diag * f[i, i, i, i]
    for i, j in itertools.permutations(range(4), 2):
        total += w_off * (f[i, i, j, j] + f[j, i, i, j])
    return float(total.real)


def gate_purity(r: TransferOperators, ensemble: str = "haar") -> float:
    """Input-averaged ``Tr[rho_out^2]``."""
    w_diag, w_off = _moments(ensemble)
    ops = r.ops

    def tr(a, b):
        return np.sum(a * b.T)

    total = 0j
    for i in range(4):
        total += w_diag * tr(ops[i, i], ops[i, i])
    for i, j in itertools.permutations(range(4), 2):
        total += w_off * (tr(ops[i, i], ops[j, j]) + tr(ops[j, i], ops[i, j]))
    return float(total.real)


def sample_inputs(n: int, rng: np.random.Generator, ensemble: str = "haar") -> np.ndarray:
    """Random normalized 4-component inputs, shape ``(n, 4)``."""
    if ensemble == "haar":
        z = rng.normal(size=(n, 4)) + 1j * rng.normal(size=(n, 4))
    elif ensemble == "real_amplitude":
        z = rng.normal(size=(n, 4)) * np.exp(2j * np.pi * rng.random(size=(n, 4)))
    else:
        _moments(ensemble)
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def _montecarlo(integrand, samples: int, seed, ensemble: str, chunk: int = 20000) -> tuple[float, float]:
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    values = []
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        values.append(integrand(sample_inputs(n, rng, ensemble)))
        done += n
    v = np.concatenate(values)
    stderr = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0
    return float(v.mean()), stderr


def gate_fidelity_montecarlo(r: TransferOperators, u, samples: int = 100_000, seed=0,
                             ensemble: str = "haar") -> tuple[float, float]:
    """Sampled estimate of the fidelity average; returns ``(mean, stderr)``."""
    u = _check_gate(u)

    def integrand(psi):
        out = apply_process_pure(r, psi)
        ideal = psi @ u.T
        return np.einsum("na,nab,nb->n", ideal.conj(), out, ideal).real

    return _montecarlo(integrand, samples, seed, ensemble)


def gate_purity_montecarlo(r: TransferOperators, samples: int = 100_000, seed=0,
                           ensemble: str = "haar") -> tuple[float, float]:
    def integrand(psi):
        out = apply_process_pure(r, psi)
        return np.einsum("nab,nba->n", out, out).real

    return _montecarlo(integrand, samples, seed, ensemble)


@dataclass(frozen=True)
class ProductStateParams:
    theta1: float
    phi1: float
    theta2: float
    phi2: float

    def state(self) -> np.ndarray:
        return np.kron(qubit_state(self.theta1, self.phi1), qubit_state(self.theta2, self.phi2))

    def canonical(self) -> "ProductStateParams":
        """Same state (up to global phase) with ``theta in [0, pi]``, ``phi in [0, 2 pi)``."""
        t1, p1 = _canonical_angles(self.theta1, self.phi1)
        t2, p2 = _canonical_angles(self.theta2, self.phi2)
        return ProductStateParams(t1, p1, t2, p2)


def qubit_state(theta: float, phi: float) -> np.ndarray:
    return np.array([math.cos(theta / 2), cmath.exp(1j * phi) * math.sin(theta / 2)])


def _product_state(x) -> np.ndarray:
    a0, a1 = math.cos(x[0] / 2), cmath.exp(1j * x[1]) * math.sin(x[0] / 2)
    b0, b1 = math.cos(x[2] / 2), cmath.exp(1j * x[3]) * math.sin(x[2] / 2)
    return np.array([a0 * b0, a0 * b1, a1 * b0, a1 * b1])


def _canonical_angles(theta: float, phi: float) -> tuple[float, float]:
    theta = float(np.mod(theta, 2 * np.pi))
    if theta > np.pi:
        theta = 2 * np.pi - theta
        phi = phi + np.pi
    phi = float(np.mod(phi, 2 * np.pi))
    # mod of a tiny negative number rounds up to exactly 2 pi
    return theta, 0.0 if phi >= 2 * np.pi else phi


@dataclass(frozen=True)
class MaxEntangledParams:
    """Z-Y-Z Euler angles of the local unitaries applied to ``|Phi+>``."""

    alpha1: float = 0.0
    beta1: float = 0.0
    gamma1: float = 0.0
    alpha2: float = 0.0
    beta2: float = 0.0
    gamma2: float = 0.0


def euler_unitary(alpha: float, beta: float, gamma: float) -> np.ndarray:
    """``Rz(alpha) Ry(beta) Rz(gamma)`` with ``Rz(a) = diag(e^{-ia/2}, e^{ia/2})``."""
    c, s = math.cos(beta / 2), math.sin(beta / 2)
    plus, minus = cmath.exp(0.5j * (alpha + gamma)), cmath.exp(0.5j * (alpha - gamma))
    return np.array([[c / plus, -s / minus], [s * minus, c * plus]])


def _me_state(angles) -> np.ndarray:
    # (U1 (x) U2)|Phi+> has amplitudes (U1 U2^T)[a, b] / sqrt(2)
    u1 = euler_unitary(angles[0], angles[1], angles[2])
    u2 = euler_unitary(angles[3], angles[4], angles[5])
    return (u1 @ u2.T).ravel() / math.sqrt(2)


def max_entangled_state(p: MaxEntangledParams) -> np.ndarray:
    return _me_state((p.alpha1, p.beta1, p.gamma1, p.alpha2, p.beta2, p.gamma2))


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 32
    tol: float = 1e-8
    seed: int = 0
    max_iter: int = 20000
    grid_points: int = 5


@dataclass(frozen=True)
class QuantumDegreeResult:
    value: float
    argmax_input: ProductStateParams
    argmax_me: MaxEntangledParams
    converged: bool


@dataclass(frozen=True)
class EntanglementCapabilityResult:
    value: float
    argmin_input: ProductStateParams
    converged: bool


def _output_fn(r: TransferOperators):
    d = r.out_dim
    flat = r.ops.reshape(16, d * d)

    def output(x) -> np.ndarray:
        psi = _product_state(x)
        return (np.outer(psi.conj(), psi).ravel() @ flat).reshape(d, d)

    return output


def _multistart(fun, starts: np.ndarray, opt: OptimizerConfig):
    best_x, best_f, any_ok = None, np.inf, False
    for x0 in starts:
        res = minimize(fun, x0, method="Nelder-Mead",
                       options={"xatol": 1e-9, "fatol": opt.tol, "maxiter": opt.max_iter,
                                "maxfev": opt.max_iter, "adaptive": True})
        any_ok |= bool(res.success)
        if res.fun < best_f:
            best_x, best_f = np.asarray(res.x), float(res.fun)
    return best_x, best_f, any_ok


def _input_grid(points: int) -> np.ndarray:
    thetas = np.linspace(0, np.pi, points)
    phis = np.linspace(0, 2 * np.pi, points, endpoint=False)
    return np.array(list(itertools.product(thetas, phis, thetas, phis)))


def _cross_check(fun, best_x, best_f, grid_of, opt: OptimizerConfig):
    """Evaluate ``fun`` on a coarse grid; polish from the grid winner if it beats the search."""
    grid = grid_of(best_x)
    values = np.array([fun(x) for x in grid])
    k = int(np.argmin(values))
    if values[k] < best_f - opt.tol:
        log.warning("coarse grid beat multi-start optimum (%.3g < %.3g); polishing", values[k], best_f)
        x, f, _ = _multistart(fun, grid[k:k + 1], opt)
        if f < best_f:
            best_x, best_f = x, f
        return best_x, best_f, False
    return best_x, best_f, True


def quantum_degree(r: TransferOperators, opt: OptimizerConfig = OptimizerConfig()) -> QuantumDegreeResult:
    """Largest overlap of a product-input output with a maximally entangled state."""
    output = _output_fn(r)

    def neg_overlap(x):
        me = _me_state(x[4:])
        return -float(np.real(me.conj() @ output(x) @ me))

    rng = np.random.default_rng(opt.seed)
    starts = rng.uniform(0, 2 * np.pi, size=(opt.restarts, 10))
    x, f, ok = _multistart(neg_overlap, starts, opt)

    def grid_of(best):
        g = _input_grid(opt.grid_points)
        return np.hstack([g, np.tile(best[4:], (len(g), 1))])

    x, f, grid_ok = _cross_check(neg_overlap, x, f, grid_of, opt)
    return QuantumDegreeResult(-f, ProductStateParams(*x[:4]).canonical(),
                               MaxEntangledParams(*x[4:]), ok and grid_ok)


def entanglement_capability(r: TransferOperators,
                            opt: OptimizerConfig = OptimizerConfig()) -> EntanglementCapabilityResult:
    """Smallest partial-transpose eigenvalue over outputs of product inputs."""
    if r.out_dim != 4:
        raise ValueError("entanglement capability needs 4-dimensional outputs")
    output = _output_fn(r)

    def min_pt_eig(x):
        rho = output(x)
        return float(np.linalg.eigvalsh(partial_transpose(0.5 * (rho + dagger(rho))))[0])

    rng = np.random.default_rng(opt.seed)
    starts = rng.uniform(0, 2 * np.pi, size=(opt.restarts, 4))
    x, f, ok = _multistart(min_pt_eig, starts, opt)
    x, f, grid_ok = _cross_check(min_pt_eig, x, f, lambda _: _input_grid(opt.grid_points), opt)
    return EntanglementCapabilityResult(f, ProductStateParams(*x).canonical(), ok and grid_ok)


def chsh_violation_check(q: float) -> bool:
    """Whether an overlap ``q`` with a maximally entangled state implies CHSH violation."""
    if not 0 <= q <= 1 + 1e-9:
        raise ValueError("q must lie in [0, 1]")
    return bool(q > CHSH_THRESHOLD)


def max_leakage(r: TransferOperators) -> float:
    """Largest trace deficit ``1 - Tr rho_out`` over all pure inputs."""
    t = r.trace_matrix()
    t = 0.5 * (t + dagger(t))
    return float(max(0.0, 1.0 - np.linalg.eigvalsh(t)[0]))


@dataclass(frozen=True)
class GateMetrics:
    fidelity: float
    purity: float
    quantum_degree: float
    entanglement_capability: float
    max_leakage: float
    optimizer_converged: bool = True

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "GateMetrics":
        return cls(**{k: data[k] for k in cls.__dataclass_fields__})


def compute_all_metrics(r: TransferOperators, u_ideal,
                        opt: OptimizerConfig = OptimizerConfig()) -> GateMetrics:
    q = quantum_degree(r, opt)
    e = entanglement_capability(r, opt)
    return GateMetrics(
        fidelity=gate_fidelity(r, u_ideal),
        purity=gate_purity(r),
        quantum_degree=q.value,
        entanglement_capability=e.value,
        max_leakage=max_leakage(r),
        optimizer_converged=q.converged and e.converged,
    )
