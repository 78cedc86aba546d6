import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.special import eval_genlaguerre

from qproc.iontrap import (
    EP,
    GATE_UNITARY,
    E,
    G,
    HilbertLayout,
    IonTrapParams,
    PulseStep,
    build_hamiltonian,
    calibrate_pulse,
    displacement_factor,
    embed_qubits,
    gate_propagator,
    gate_sequence,
    pulse_duration,
    reduced_output,
    run_gate_sequence,
    simulate_process,
    step_propagators,
)
from qproc.linalg import is_hermitian, is_unitary
from qproc.metrics import gate_fidelity, gate_purity
from qproc.tomography import reference_input_design, transfer_operators_of_unitary

IDEAL_EGRID = transfer_operators_of_unitary(GATE_UNITARY).egrid()


def displacement_oracle(alpha, m, n):
    """<m| exp(alpha a^dag - alpha* a) |n> from the Laguerre closed form."""
    x = abs(alpha) ** 2
    if m >= n:
        return (math.sqrt(math.factorial(n) / math.factorial(m)) * alpha ** (m - n)
                * math.exp(-x / 2) * eval_genlaguerre(n, m - n, x))
    return (math.sqrt(math.factorial(m) / math.factorial(n)) * (-np.conj(alpha)) ** (n - m)
            * math.exp(-x / 2) * eval_genlaguerre(m, n - m, x))


def max_deviation(p):
    return float(np.max(np.abs(simulate_process(p).transfer.egrid() - IDEAL_EGRID)))


# --- displacement factors ---------------------------------------------------------

def test_displacement_zero_eta_is_identity():
    assert_allclose(displacement_factor(0.0, 6), np.eye(6), atol=1e-15)


@pytest.mark.parametrize("eta", [0.1, 0.5, 0.9])
@pytest.mark.parametrize("sign", [1, -1])
def test_displacement_matches_laguerre(eta, sign):
    d = displacement_factor(eta, 8, sign)
    alpha = -1j * sign * eta
    oracle = np.array([[displacement_oracle(alpha, m, n) for n in range(8)] for m in range(8)])
    assert np.max(np.abs(d - oracle)) < 1e-10


def test_displacement_first_sideband_element():
    eta = 0.5
    assert displacement_factor(eta, 6)[1, 0] == pytest.approx(-1j * eta * np.exp(-eta**2 / 2), abs=1e-12)


def test_displacement_crop_is_stable():
    assert np.max(np.abs(displacement_factor(0.9, 8, pad=16) - displacement_factor(0.9, 8, pad=32))) < 1e-10


def test_displacement_rejects_bad_args():
    with pytest.raises(ValueError):
        displacement_factor(0.5, 1)
    with pytest.raises(ValueError):
        displacement_factor(0.5, 4, sign=2)


# --- Hamiltonian and pulses --------------------------------------------------------

def test_free_hamiltonian_diagonal():
    p = IonTrapParams(n_max=3)
    lay = HilbertLayout(3)
    h = build_hamiltonian(p)
    assert np.count_nonzero(h - np.diag(np.diag(h))) == 0
    assert h[lay.index(E, G, 1, 2), lay.index(E, G, 1, 2)] == pytest.approx(1 + 1 + 2 * np.sqrt(3))
    assert h[lay.index(G, EP, 0, 0), lay.index(G, EP, 0, 0)] == pytest.approx(1)


@pytest.mark.parametrize("step", gate_sequence(IonTrapParams()))
def test_pulse_hamiltonian_hermitian(step):
    assert is_hermitian(build_hamiltonian(IonTrapParams(n_max=4), step))


def test_red_sideband_coupling_element():
    p = IonTrapParams(n_max=4)
    lay = HilbertLayout(4)
    h = build_hamiltonian(p, gate_sequence(p)[0])
    expected = 0.5 * p.omega1 * displacement_oracle(-1j * p.eta_cm, 0, 1) * displacement_oracle(-1j * p.eta_r, 0, 0)
    assert h[lay.index(E, G, 0, 0), lay.index(G, G, 1, 0)] == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(-0.5j * p.omega1 * p.eta_cm * np.exp(-(p.eta_cm**2 + p.eta_r**2) / 2))


def test_wrong_transition_rejected():
    with pytest.raises(ValueError):
        build_hamiltonian(IonTrapParams(n_max=3), PulseStep(1, "g-e'", np.pi, 0.1))
    with pytest.raises(ValueError):
        PulseStep(3, "g-e", np.pi, 0.1)


def test_pulse_duration_value():
    assert pulse_duration(PulseStep(1, "g-e", np.pi, 0.1), IonTrapParams()) == pytest.approx(80.6777, abs=1e-4)
    assert pulse_duration(PulseStep(2, "g-e'", 2 * np.pi, 0.1), IonTrapParams()) == pytest.approx(161.3554, abs=1e-4)


@pytest.mark.parametrize("params", [
    {"invalid": "nu", "nu": 0},
    {"invalid": "omega1", "omega1": -0.1},
    {"invalid": "n_max", "n_max": 1},
    {"invalid": "eta_cm", "eta_cm": -0.5},
])
def test_params_validation(params):
    params = dict(params)
    params.pop("invalid")
    with pytest.raises(ValueError):
        IonTrapParams(**params)


# --- calibration ----------------------------------------------------------------

@pytest.mark.parametrize("omega, max_shift", [(0.002, 1e-4), (0.02, 2e-2)])
def test_calibration_close_to_analytic(omega, max_shift):
    p = IonTrapParams(omega1=omega, omega2=omega, n_max=5)
    for step in gate_sequence(p):
        cal = calibrate_pulse(step, p)
        assert cal.converged
        assert abs(cal.duration / cal.analytic - 1) < max_shift
        assert cal.transfer > 0.99


def test_calibrated_durations_used():
    p = IonTrapParams(omega1=0.05, omega2=0.05, n_max=5, calibrate=True)
    durations = [step.duration for step, _ in step_propagators(p)]
    assert durations[0] == pytest.approx(calibrate_pulse(gate_sequence(p)[0], p).duration)
    assert durations[0] == pytest.approx(durations[2])


# --- propagation and phases ---------------------------------------------------------

SLOW = IonTrapParams(omega1=0.002, omega2=0.002, n_max=5)


def test_pi_pulse_maps_excited_to_phonon():
    lay = HilbertLayout(5)
    (_, u1), _, _ = step_propagators(SLOW)
    out = u1[:, lay.index(E, G, 0, 0)]
    assert out[lay.index(G, G, 1, 0)] == pytest.approx(1, abs=2e-2)


def test_two_pi_pulse_phases():
    lay = HilbertLayout(5)
    _, (_, u2), _ = step_propagators(SLOW)
    assert u2[lay.index(G, G, 1, 0), lay.index(G, G, 1, 0)] == pytest.approx(-1, abs=2e-2)
    assert u2[lay.index(G, E, 1, 0), lay.index(G, E, 1, 0)] == pytest.approx(1, abs=2e-2)


def test_gate_propagator_unitary():
    assert is_unitary(gate_propagator(IonTrapParams(n_max=4)))


def test_computational_states_at_small_rabi_frequency():
    p = IonTrapParams(omega1=0.02, omega2=0.02, n_max=5)
    lay = HilbertLayout(5)
    amps = []
    for i in range(4):
        basis = np.zeros(4)
        basis[i] = 1
        amps.append(run_gate_sequence(basis, p)[lay.qubit_index(i)])
    assert all(abs(a) ** 2 > 0.999 for a in amps)
    assert amps[3] == pytest.approx(-1, abs=0.05)
    assert amps[2] == pytest.approx(1, abs=0.05)
    assert amps[0] * amps[3] / (amps[1] * amps[2]) == pytest.approx(-1, abs=0.1)


def test_norm_conserved():
    p = IonTrapParams(omega1=0.2, omega2=0.2)
    psi = np.array([1, 1j, -1, 0.5]) / np.linalg.norm([1, 1j, -1, 0.5])
    assert np.linalg.norm(run_gate_sequence(psi, p)) == pytest.approx(1, abs=1e-10)


def test_embed_rejects_wrong_size():
    with pytest.raises(ValueError):
        embed_qubits(np.ones(3), HilbertLayout(3))


# --- reduction and leakage -----------------------------------------------------------

def test_reduced_output_full_leakage_from_auxiliary_level():
    lay = HilbertLayout(3)
    full = np.zeros(lay.total, dtype=complex)
    full[lay.index(G, EP, 0, 0)] = 1
    rho4, leak = reduced_output(full, lay)
    assert leak == pytest.approx(1)
    assert np.allclose(rho4, 0)


def test_reduced_output_entangled_with_motion_is_mixed():
    p = IonTrapParams(omega1=0.5, omega2=0.5)
    lay = HilbertLayout(p.n_max)
    rho4, leak = reduced_output(run_gate_sequence(np.ones(4) / 2, p), lay)
    assert 0 <= leak <= 1
    assert np.trace(rho4 @ rho4).real < (1 - leak) ** 2 - 1e-3


@pytest.mark.parametrize("omega", [0.05, 0.5])
def test_leakage_in_range(omega):
    res = simulate_process(IonTrapParams(omega1=omega, omega2=omega))
    assert all(-1e-12 <= x <= 1 for x in res.leakage)


# --- process-level behaviour -------------------------------------------------------------

def test_truncation_converged_at_default():
    p = IonTrapParams(omega1=0.1, omega2=0.1)
    e7 = simulate_process(p).transfer.egrid()
    e9 = simulate_process(p.replace(n_max=9)).transfer.egrid()
    assert np.max(np.abs(e7 - e9)) < 1e-6


def test_quality_degrades_with_rabi_frequency():
    fid, pur = [], []
    for w in (0.05, 0.1, 0.2, 0.5):
        r = simulate_process(IonTrapParams(omega1=w, omega2=w)).transfer
        fid.append(gate_fidelity(r, GATE_UNITARY))
        pur.append(gate_purity(r))
    assert all(a > b for a, b in zip(fid, fid[1:]))
    assert all(a > b for a, b in zip(pur, pur[1:]))


def test_deviation_shrinks_linearly_with_rabi_frequency():
    slow = max_deviation(IonTrapParams(omega1=0.001, omega2=0.001, n_max=5))
    fast = max_deviation(IonTrapParams(omega1=0.002, omega2=0.002, n_max=5))
    assert fast / slow == pytest.approx(2, rel=0.1)
    assert max_deviation(IonTrapParams(omega1=0.0015, omega2=0.0015, n_max=5)) < 1e-2


def test_simulate_rejects_entangled_design():
    with pytest.raises(ValueError):
        simulate_process(IonTrapParams(n_max=3), design=reference_input_design())


def test_simulate_shots_reproducible():
    p = IonTrapParams(n_max=4)
    a = simulate_process(p, shots=500, seed=9).transfer.ops
    b = simulate_process(p, shots=500, seed=9).transfer.ops
    c = simulate_process(p, shots=500, seed=10).transfer.ops
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
