import numpy as np
import pytest

from qproc.linalg import random_unitary


def random_kraus(rng, rank=None, dim=4):
    """Kraus operators of a random channel, from a Haar isometry dim -> dim*rank."""
    rank = int(rng.integers(1, dim + 1)) if rank is None else rank
    v = random_unitary(dim * rank, rng)[:, :dim]
    return v.reshape(rank, dim, dim)


def apply_kraus(kraus, rho):
    return sum(k @ rho @ k.conj().T for k in kraus)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if "test_acceptance" not in rep.nodeid or rep.when != "call":
                continue
            detail = dict(rep.user_properties).get("detail", "")
            name = rep.nodeid.split("::")[-1]
            lines.append((name, "PASS" if outcome == "passed" else "FAIL", detail))
    if lines:
        terminalreporter.section("acceptance criteria")
        for name, status, detail in sorted(lines):
            terminalreporter.write_line(f"{status}  {name}  {detail}")


def lindblad_superoperator(h, jumps):
    """Row-major vectorized generator: vec(A rho B) = (A kron B^T) vec(rho)."""
    eye = np.eye(h.shape[0])
    gen = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for l in jumps:
        ll = l.conj().T @ l
        gen += np.kron(l, l.conj()) - 0.5 * np.kron(ll, eye) - 0.5 * np.kron(eye, ll.T)
    return gen


def random_lindbladian(rng, scale=0.3):
    h = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    h = scale * (h + h.conj().T) / 2
    jumps = [scale * (rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))) for _ in range(2)]
    return lindblad_superoperator(h, jumps)
