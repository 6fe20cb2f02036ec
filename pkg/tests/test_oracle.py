import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from transmon_engine import model, oracle
from transmon_engine.errors import AmbiguityError, PreconditionError, TruncationError
from transmon_engine.model import Knobs
from transmon_engine.oracle import FockTruncation

from conftest import random_density_matrix, random_knobs

TWO_PI = model.TWO_PI


def _unchecked(params, **fields):
    """Copy of params with fields set past validation (for g = 0 style limits)."""
    p = params.replace()
    for name, value in fields.items():
        object.__setattr__(p, name, value)
    return p


def _random_hermitian(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return a + a.conj().T


def gibbs(gap, temperature):
    w = np.exp(-gap / temperature)
    return np.diag([w, 1.0]).astype(complex) / (1.0 + w)


# -- vectorisation ------------------------------------------------------------

def test_vec_convention(rng):
    a, b, rho = (_random_hermitian(rng, 3) for _ in range(3))
    lhs = oracle.vec(a @ rho @ b)
    rhs = np.kron(b.T, a) @ oracle.vec(rho)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)
    np.testing.assert_array_equal(oracle.unvec(oracle.vec(rho)), rho)


def test_unvec_rejects_non_square():
    with pytest.raises(PreconditionError):
        oracle.unvec(np.zeros(5))


def test_dissipator_action(rng):
    op = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    rho = _random_hermitian(rng, 3)
    expected = op @ rho @ op.conj().T - 0.5 * (op.conj().T @ op @ rho + rho @ op.conj().T @ op)
    np.testing.assert_allclose(oracle.apply(oracle.dissipator(op), rho), expected, atol=1e-12)


# -- qubit Liouvillian --------------------------------------------------------

def test_trace_preservation(table1, rng):
    for knobs in random_knobs(table1, rng, 10):
        gen = oracle.qubit_liouvillian(table1, knobs)
        scale = np.linalg.norm(gen, 2)
        for _ in range(100):
            rho = _random_hermitian(rng, 2)
            assert abs(np.trace(oracle.apply(gen, rho))) <= 1e-12 * scale


def test_no_dissipation_diagonal_hamiltonian():
    gen = oracle.liouvillian(np.diag([0.7, -0.7]).astype(complex))
    np.testing.assert_array_equal(oracle.apply(gen, np.diag([0.3, 0.7]).astype(complex)), np.zeros((2, 2)))


@pytest.mark.parametrize("omega", np.linspace(TWO_PI * 100e6, TWO_PI * 1000e6, 5))
def test_undriven_kernel_is_gibbs(table1, omega):
    rho = oracle.steady_state_nullspace(oracle.qubit_liouvillian(table1, Knobs(omega, 0.0)))
    assert model.trace_distance(rho, gibbs(omega, table1.temperature_freq)) < 1e-12


def test_degenerate_kernel_raises():
    gen = oracle.liouvillian(np.diag([0.5, -0.5]).astype(complex))
    with pytest.raises(AmbiguityError) as info:
        oracle.steady_state_nullspace(gen)
    assert len(info.value.smallest_singular_values) == 2


@settings(max_examples=50, deadline=None)
@given(st.floats(TWO_PI * 100e6, TWO_PI * 1000e6), st.floats(TWO_PI * 0.2e6, TWO_PI * 2e6))
def test_nullspace_is_density_matrix(omega, drive):
    rho = oracle.steady_state_nullspace(oracle.qubit_liouvillian(model.table1_parameters(), Knobs(omega, drive)))
    model.check_density_matrix(rho)


def test_nullspace_matches_propagation(table1, rng):
    start = np.diag([0.0, 1.0]).astype(complex)
    for knobs in random_knobs(table1, rng, 100):
        gen = oracle.qubit_liouvillian(table1, knobs)
        dt = 0.1 / np.linalg.norm(gen, 2)
        rates = model.thermal_rates(table1, knobs.omega_t)
        steady = oracle.steady_state_nullspace(gen)
        long_run = oracle.propagate(gen, start, 40.0 / rates.gamma_minus, dt)
        assert model.trace_distance(steady, long_run) < 1e-8
        short_run = oracle.propagate(gen, start, 20.0 / rates.gamma_minus, dt)
        assert model.trace_distance(steady, short_run) < 1e-6


def test_propagation_stays_physical(table1, rng):
    for knobs in random_knobs(table1, rng, 20):
        gen = oracle.qubit_liouvillian(table1, knobs)
        dt = 0.1 / np.linalg.norm(gen, 2)
        rho0 = random_density_matrix(rng)
        for t in (0.0, 50 * dt, 5000 * dt, 1e-6):
            rho = oracle.propagate(gen, rho0, t, dt)
            assert np.max(np.abs(rho - rho.conj().T)) < 1e-9
            assert abs(np.trace(rho) - 1) < 1e-9
            assert np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() > -1e-9


def test_rk4_matches_exact_exponential(table1):
    knobs = Knobs(TWO_PI * 300e6, TWO_PI * 1.5e6)
    gen = oracle.qubit_liouvillian(table1, knobs)
    # global RK4 error ~ (t / dt) (dt ||L||)^5 / 120
    dt = 0.005 / np.linalg.norm(gen, 2)
    rho0 = np.diag([1.0, 0.0]).astype(complex)
    t = 2e-8
    assert model.trace_distance(oracle.propagate(gen, rho0, t, dt),
                                oracle.scipy_expm_propagate(gen, rho0, t)) < 1e-8
    assert oracle.step_doubling_difference(gen, rho0, t, dt) < 1e-8


def test_propagate_rejects_large_step(table1):
    gen = oracle.qubit_liouvillian(table1, Knobs(TWO_PI * 300e6, TWO_PI * 1e6))
    with pytest.raises(PreconditionError):
        oracle.propagate(gen, np.eye(2) / 2, 1e-6, 1.0 / np.linalg.norm(gen, 2))
    with pytest.raises(PreconditionError):
        oracle.propagate(gen, np.eye(2) / 2, -1.0, 1e-12)


def test_analytic_distinguishes_gamma_conventions(table1):
    knobs = Knobs(TWO_PI * 100e6, TWO_PI * 1e6)
    analytic = model.steady_state_analytic(table1, knobs)
    net = oracle.steady_state_nullspace(oracle.qubit_liouvillian(table1, knobs))
    decay = oracle.steady_state_nullspace(oracle.qubit_liouvillian(
        table1.replace(gamma_convention=model.GammaConvention.DECAY), knobs))
    assert model.trace_distance(analytic, net) < 1e-12
    assert model.trace_distance(analytic, decay) > 1e-6


# -- cavity and joint model ---------------------------------------------------

def test_fock_truncation_validation():
    assert FockTruncation(3).levels == 4
    for bad in (0, -1, 2.5):
        with pytest.raises(PreconditionError):
            FockTruncation(bad)


def test_initial_truncation(table1):
    assert oracle.initial_truncation(table1, Knobs(TWO_PI * 500e6, TWO_PI * 2e6)).n_max == 70
    assert oracle.initial_truncation(table1, Knobs(TWO_PI * 500e6, TWO_PI * 0.2e6)).n_max == 7


def test_driven_cavity_is_coherent(table1):
    cold = table1.replace(temperature_freq=model.KB_OVER_HBAR * 1e-3)
    drive = TWO_PI * 0.5e6
    trunc = FockTruncation(20)
    rho = oracle.steady_state_nullspace(oracle.cavity_liouvillian(cold, drive, trunc))
    a = oracle.annihilation(trunc.levels)
    alpha = model.cavity_amplitude(cold, drive)
    assert abs(np.trace(rho @ a) - alpha) < 1e-6
    assert abs(np.trace(rho @ a.conj().T @ a) - abs(alpha) ** 2) < 1e-6


def test_uncoupled_joint_state_factorises(table1):
    p = _unchecked(table1, g_over_hbar=0.0)
    knobs = Knobs(TWO_PI * 400e6, TWO_PI * 0.3e6)
    rho, trunc = oracle.joint_steady_state(p, knobs)
    qubit = oracle.reduced_qubit_state(rho, trunc)
    cavity = oracle.reduced_cavity_state(rho, trunc)
    assert model.trace_distance(qubit, gibbs(knobs.omega_t, p.temperature_freq)) < 1e-10
    assert np.max(np.abs(rho - np.kron(qubit, cavity))) < 1e-10


def test_partial_traces():
    trunc = FockTruncation(3)
    qubit = np.array([[0.6, 0.1 - 0.2j], [0.1 + 0.2j, 0.4]])
    cavity = np.diag([0.4, 0.3, 0.2, 0.1]).astype(complex)
    np.testing.assert_allclose(oracle.reduced_qubit_state(np.kron(qubit, cavity), trunc), qubit, atol=1e-15)
    np.testing.assert_allclose(oracle.reduced_cavity_state(np.kron(qubit, cavity), trunc), cavity, atol=1e-15)
    mixed = np.eye(8) / 8
    np.testing.assert_allclose(oracle.reduced_qubit_state(mixed, trunc), np.eye(2) / 2, atol=1e-15)
    with pytest.raises(PreconditionError):
        oracle.reduced_qubit_state(np.eye(6) / 6, trunc)


def test_joint_trace_preservation(table1, rng):
    trunc = FockTruncation(4)
    gen = oracle.joint_liouvillian(table1, Knobs(TWO_PI * 500e6, TWO_PI * 0.2e6), trunc)
    scale = np.linalg.norm(gen, 2)
    for _ in range(100):
        assert abs(np.trace(oracle.apply(gen, _random_hermitian(rng, 10)))) <= 1e-12 * scale


def test_truncation_rejected_when_tail_too_heavy(table1):
    knobs = Knobs(TWO_PI * 500e6, TWO_PI * 1e6)
    with pytest.raises(TruncationError):
        oracle.joint_steady_state(table1, knobs, trunc=FockTruncation(2))
    with pytest.raises(TruncationError):
        oracle.joint_steady_state(table1, knobs, max_levels=8)


def test_small_coupling_reduces_to_closed_form(table1):
    knobs = Knobs(TWO_PI * 550e6, TWO_PI * 0.2e6)
    distances = []
    for divisor in (1, 2, 4, 8, 100):
        p = table1.replace(g_over_hbar=table1.g_over_hbar / divisor)
        rho, trunc = oracle.joint_steady_state(p, knobs)
        assert oracle.reduced_cavity_state(rho, trunc)[-1, -1].real < oracle.TAIL_POPULATION_MAX
        distances.append(model.trace_distance(oracle.reduced_qubit_state(rho, trunc),
                                              model.steady_state_analytic(p, knobs)))
    assert distances[-1] < 1e-3
    assert all(b < a for a, b in zip(distances[:4], distances[1:4]))
