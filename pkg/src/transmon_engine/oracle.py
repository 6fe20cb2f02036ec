"""Independent Lindblad machinery used to verify the closed forms.

Superoperators act on column-stacked density matrices:
vec(A rho B) = (B^T kron A) vec(rho), with ``vec(X) = X.reshape(-1, order="F")``.
Joint qubit-cavity operators are ordered qubit (x) cavity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import model
from .errors import AmbiguityError, PreconditionError, ToleranceError, TruncationError
from .model import EngineParameters, Knobs

KERNEL_GAP_MIN = 1e-8
RESIDUAL_RTOL = 1e-10
TAIL_POPULATION_MAX = 1e-6
# dense SVD of a (2 levels)^2 square matrix; 32 levels is about 270 MB
MAX_CAVITY_LEVELS = 32


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    d = math.isqrt(v.size)
    if d * d != v.size:
        raise PreconditionError(f"vector of length {v.size} is not a vectorised square matrix")
    return v.reshape((d, d), order="F")


def dissipator(op: np.ndarray) -> np.ndarray:
    """Superoperator of D[A] rho = A rho A^+ - (A^+ A rho + rho A^+ A) / 2."""
    d = op.shape[0]
    eye = np.eye(d)
    ada = op.conj().T @ op
    return np.kron(op.conj(), op) - 0.5 * np.kron(eye, ada) - 0.5 * np.kron(ada.T, eye)


def liouvillian(hamiltonian: np.ndarray, collapse: list[tuple[float, np.ndarray]] = ()) -> np.ndarray:
    """Dense Lindblad generator -i[H, .] + sum_k rate_k D[A_k]."""
    d = hamiltonian.shape[0]
    eye = np.eye(d)
    gen = -1j * (np.kron(eye, hamiltonian) - np.kron(hamiltonian.T, eye))
    for rate, op in collapse:
        if rate:
            gen = gen + rate * dissipator(op)
    return gen


def apply(generator: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return unvec(generator @ vec(rho))


def qubit_liouvillian(params: EngineParameters, knobs: Knobs) -> np.ndarray:
    """4x4 generator of the reduced qubit master equation at a knob point.

    The relaxation and excitation rates come from ``model.thermal_rates`` and
    therefore follow ``params.gamma_convention``.
    """
    h = model.effective_hamiltonian(params, knobs)
    rates = model.thermal_rates(params, float(params.thermal_gap_frequency(knobs.omega_t)))
    return liouvillian(h, [(rates.gamma_minus, model.SIGMA_MINUS),
                           (rates.gamma_plus, model.SIGMA_PLUS)])


def steady_state_nullspace(generator: np.ndarray) -> np.ndarray:
    """Unique density matrix annihilated by ``generator``.

    Uses the right singular vector of the smallest singular value. Raises
    AmbiguityError when the second-smallest singular value is not separated
    from zero (relative to the largest) by ``KERNEL_GAP_MIN``.
    """
    _, s, vh = np.linalg.svd(generator)
    if s[-2] <= KERNEL_GAP_MIN * s[0]:
        raise AmbiguityError(
            f"Liouvillian kernel is not one-dimensional: smallest singular values "
            f"{s[-1]:.3e}, {s[-2]:.3e} (largest {s[0]:.3e})",
            smallest_singular_values=(float(s[-1]), float(s[-2])))
    rho = unvec(vh[-1].conj())
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    residual = np.linalg.norm(generator @ vec(rho))
    if residual > RESIDUAL_RTOL * s[0]:
        raise ToleranceError("null-space residual too large",
                             {"residual": float(residual), "norm": float(s[0])})
    return rho


def rk4_step_matrix(generator: np.ndarray, dt: float) -> np.ndarray:
    """One classical RK4 step for a constant linear generator, as a matrix."""
    a = dt * generator
    eye = np.eye(a.shape[0], dtype=complex)
    a2 = a @ a
    return eye + a + a2 / 2 + a2 @ a / 6 + a2 @ a2 / 24


def propagate(generator: np.ndarray, rho0: np.ndarray, t_final: float, dt: float) -> np.ndarray:
    """Integrate d rho/dt = L[rho] with fixed-step RK4 up to ``t_final``.

    The step is shortened to t_final / ceil(t_final / dt) so the run lands on
    t_final exactly. Because the generator is constant, n RK4 steps equal the
    n-th power of the single-step matrix, which is what gets evaluated.
    """
    if t_final < 0:
        raise PreconditionError("t_final must be >= 0")
    rho0 = np.asarray(rho0, dtype=complex)
    if t_final == 0:
        return rho0.copy()
    norm = np.linalg.norm(generator, 2)
    if dt <= 0 or dt * norm > 0.1 * (1 + 1e-12):
        raise PreconditionError(f"dt = {dt:.3e} exceeds 0.1/||L|| = {0.1 / norm if norm else math.inf:.3e}")
    n_steps = math.ceil(t_final / dt)
    step = rk4_step_matrix(generator, t_final / n_steps)
    out = unvec(np.linalg.matrix_power(step, n_steps) @ vec(rho0))
    return out


def step_doubling_difference(generator, rho0, t_final: float, dt: float) -> float:
    """Max-abs change of the propagated endpoint when the step is halved."""
    coarse = propagate(generator, rho0, t_final, dt)
    fine = propagate(generator, rho0, t_final, dt / 2)
    return float(np.max(np.abs(coarse - fine)))


@dataclass(frozen=True)
class FockTruncation:
    n_max: int

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise PreconditionError(f"n_max must be an integer >= 1, got {self.n_max!r}")

    @property
    def levels(self) -> int:
        return self.n_max + 1


def annihilation(levels: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, levels)), 1).astype(complex)


def joint_hamiltonian(params: EngineParameters, knobs: Knobs, trunc: FockTruncation) -> np.ndarray:
    """Rotating-frame qubit-cavity Hamiltonian with Jaynes-Cummings coupling and pump."""
    a = annihilation(trunc.levels)
    ad = a.conj().T
    ic = np.eye(trunc.levels)
    delta = float(params.detuning(knobs.omega_t))
    return (0.5 * delta * np.kron(model.SIGMA_Z, ic)
            + params.cavity_detuning * np.kron(model.IDENTITY, ad @ a)
            + params.g_over_hbar * (np.kron(model.SIGMA_PLUS, a) + np.kron(model.SIGMA_MINUS, ad))
            + knobs.drive * np.kron(model.IDENTITY, a + ad))


def joint_liouvillian(params: EngineParameters, knobs: Knobs, trunc: FockTruncation) -> np.ndarray:
    """Generator of the full qubit + cavity master equation (dimension 2(n_max+1))."""
    rates = model.thermal_rates(params, float(params.thermal_gap_frequency(knobs.omega_t)))
    ic = np.eye(trunc.levels)
    a = np.kron(model.IDENTITY, annihilation(trunc.levels))
    return liouvillian(joint_hamiltonian(params, knobs, trunc), [
        (rates.k_minus, a),
        (rates.k_plus, a.conj().T),
        (rates.gamma_minus, np.kron(model.SIGMA_MINUS, ic)),
        (rates.gamma_plus, np.kron(model.SIGMA_PLUS, ic)),
    ])


def reduced_qubit_state(joint_rho: np.ndarray, trunc: FockTruncation) -> np.ndarray:
    """Partial trace over the cavity."""
    dim = 2 * trunc.levels
    if joint_rho.shape != (dim, dim):
        raise PreconditionError(f"joint state has shape {joint_rho.shape}, expected {(dim, dim)}")
    return np.einsum("ajbj->ab", joint_rho.reshape(2, trunc.levels, 2, trunc.levels))


def reduced_cavity_state(joint_rho: np.ndarray, trunc: FockTruncation) -> np.ndarray:
    dim = 2 * trunc.levels
    if joint_rho.shape != (dim, dim):
        raise PreconditionError(f"joint state has shape {joint_rho.shape}, expected {(dim, dim)}")
    return np.einsum("jajb->ab", joint_rho.reshape(2, trunc.levels, 2, trunc.levels))


def initial_truncation(params: EngineParameters, knobs: Knobs) -> FockTruncation:
    alpha = abs(model.cavity_amplitude(params, knobs.drive))
    return FockTruncation(math.ceil(4 * alpha**2 + 6))


def joint_steady_state(params: EngineParameters, knobs: Knobs,
                       trunc: FockTruncation | None = None,
                       max_levels: int = MAX_CAVITY_LEVELS) -> tuple[np.ndarray, FockTruncation]:
    """Joint steady state with an accepted Fock truncation.

    Without an explicit ``trunc`` the cutoff starts at ceil(4|<a>|^2 + 6) and
    doubles until the population of the top Fock level is below
    ``TAIL_POPULATION_MAX``. Raises TruncationError if that needs more than
    ``max_levels`` levels, or if an explicit ``trunc`` fails the bound.
    """
    explicit = trunc is not None
    trunc = trunc or initial_truncation(params, knobs)
    while True:
        if trunc.levels > max_levels:
            raise TruncationError(
                f"truncation needs more than {max_levels} cavity levels (n_max={trunc.n_max})")
        rho = steady_state_nullspace(joint_liouvillian(params, knobs, trunc))
        tail = reduced_cavity_state(rho, trunc)[-1, -1].real
        if tail < TAIL_POPULATION_MAX:
            return rho, trunc
        if explicit:
            raise TruncationError(
                f"population {tail:.3e} at n_max={trunc.n_max} exceeds {TAIL_POPULATION_MAX:g}")
        trunc = FockTruncation(2 * trunc.n_max)


def cavity_liouvillian(params: EngineParameters, drive: float, trunc: FockTruncation) -> np.ndarray:
    """Driven, damped cavity alone (no qubit)."""
    a = annihilation(trunc.levels)
    ad = a.conj().T
    h = params.cavity_detuning * ad @ a + drive * (a + ad)
    k_minus = params.kappa_cpw
    k_plus = k_minus * math.exp(-params.omega_cpw / params.temperature_freq)
    return liouvillian(h, [(k_minus, a), (k_plus, ad)])


def mean_field_hamiltonian(params: EngineParameters, knobs: Knobs,
                           trunc: FockTruncation | None = None) -> np.ndarray:
    """Qubit Hamiltonian obtained by averaging the joint Hamiltonian over the cavity.

    The cavity state is the numerically solved steady state of the bare driven
    cavity, so this does not use the closed-form amplitude. The identity part
    (cavity energy) is removed.
    """
    trunc = trunc or initial_truncation(params, knobs)
    rho_c = steady_state_nullspace(cavity_liouvillian(params, knobs.drive, trunc))
    h_joint = joint_hamiltonian(params, knobs, trunc)
    h = np.einsum("ajbk,kj->ab",
                  h_joint.reshape(2, trunc.levels, 2, trunc.levels), rho_c)
    return h - 0.5 * np.trace(h) * model.IDENTITY


def scipy_expm_propagate(generator: np.ndarray, rho0: np.ndarray, t: float) -> np.ndarray:
    """Exact propagation exp(L t) rho0, for cross-checking the RK4 route."""
    return unvec(scipy.linalg.expm(generator * t) @ vec(rho0))
