"""Closed-form physics of the driven transmon working substance.

Internal units: hbar = k_B = 1, every frequency, rate and energy is an angular
frequency in rad/s. Qubit matrices use the ordered basis (|e>, |g>), so a
density matrix reads [[rho_ee, rho_eg], [rho_ge, rho_gg]] and
sigma_z = diag(1, -1), sigma_+ = |e><g|.

Functions whose names end in ``_batch`` broadcast over arrays of knob values
and return stacks of 2x2 matrices with shape ``(..., 2, 2)``.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.special import expit

from .errors import ConfigError, DomainError, SingularityError

TWO_PI = 2.0 * math.pi
# CODATA k_B and hbar as quoted to 10 digits (not hbar = h / 2pi at full precision)
KB_OVER_HBAR = 1.380649e-23 / 1.054571817e-34  # rad s^-1 K^-1

IDENTITY = np.eye(2, dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_PLUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
SIGMA_MINUS = SIGMA_PLUS.T.copy()

# tolerances of the QubitDensityMatrix invariants
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-12
SUM_RULE_TOL = 1e-14


class FreqInterpretation(str, enum.Enum):
    """How the omega knob values are read."""

    DETUNING = "detuning"  # knob value is omega_T - omega_pump
    LAB_FRAME = "lab_frame"  # knob value is the bare qubit frequency omega_T


class ThermalGap(str, enum.Enum):
    """Which qubit gap enters the Boltzmann and tanh factors."""

    ROTATING_FRAME = "rotating_frame"
    LAB_FRAME = "lab_frame"


class GammaConvention(str, enum.Enum):
    """Meaning of the single tabulated qubit rate."""

    NET = "net"  # Gamma = Gamma^- - Gamma^+
    DECAY = "decay"  # Gamma = Gamma^-


class CoherencePhase(str, enum.Enum):
    """Overall sign of the closed-form coherence.

    LINDBLAD is the sign that solves the reduced master equation with the
    mean-field Hamiltonian used here; AS_PRINTED flips it and exists only to
    document that variant in convention reports.
    """

    LINDBLAD = "lindblad"
    AS_PRINTED = "as_printed"


@dataclass(frozen=True)
class EngineParameters:
    omega_cpw: float
    omega_pump: float
    g_over_hbar: float
    temperature_freq: float
    gamma_minus_net: float
    kappa_cpw: float
    omega_knob_range: tuple[float, float]
    drive_knob_range: tuple[float, float]
    freq_interpretation: FreqInterpretation = FreqInterpretation.DETUNING
    thermal_gap: ThermalGap = ThermalGap.ROTATING_FRAME
    gamma_convention: GammaConvention = GammaConvention.NET
    coherence_phase: CoherencePhase = CoherencePhase.LINDBLAD

    def __post_init__(self):
        for name in ("omega_cpw", "omega_pump", "g_over_hbar", "temperature_freq",
                     "gamma_minus_net", "kappa_cpw"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(f"must be finite and > 0, got {value!r}", key=name)
        for name in ("omega_knob_range", "drive_knob_range"):
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi) and 0 < lo < hi):
                raise ConfigError(f"must satisfy 0 < low < high, got {(lo, hi)!r}", key=name)
            object.__setattr__(self, name, (float(lo), float(hi)))
        for name, kind in (("freq_interpretation", FreqInterpretation),
                           ("thermal_gap", ThermalGap),
                           ("gamma_convention", GammaConvention),
                           ("coherence_phase", CoherencePhase)):
            try:
                object.__setattr__(self, name, kind(getattr(self, name)))
            except ValueError:
                choices = ", ".join(m.value for m in kind)
                raise ConfigError(f"expected one of {choices}", key=name) from None

    def replace(self, **changes) -> EngineParameters:
        return dataclasses.replace(self, **changes)

    @property
    def cavity_detuning(self) -> float:
        """omega_CPW - omega, the cavity detuning from the pump."""
        return self.omega_cpw - self.omega_pump

    def detuning(self, omega_t):
        """Rotating-frame qubit gap omega_T - omega for a knob value."""
        if self.freq_interpretation is FreqInterpretation.DETUNING:
            return omega_t
        return np.asarray(omega_t) - self.omega_pump

    def thermal_gap_frequency(self, omega_t):
        """Gap entering the thermal factors; must be strictly positive."""
        delta = self.detuning(omega_t)
        if self.thermal_gap is ThermalGap.ROTATING_FRAME:
            gap = delta
        else:
            gap = self.omega_pump + delta
        if np.any(np.asarray(gap) <= 0) or not np.all(np.isfinite(gap)):
            raise DomainError(
                f"thermal gap must be positive (thermal_gap={self.thermal_gap.value}, "
                f"freq_interpretation={self.freq_interpretation.value}); "
                f"min gap = {np.min(gap):.6g} rad/s")
        return gap

    def in_window(self, knobs: Knobs, rtol: float = 1e-12) -> bool:
        (w0, w1), (e0, e1) = self.omega_knob_range, self.drive_knob_range
        slack_w, slack_e = rtol * abs(w1), rtol * abs(e1)
        return (w0 - slack_w <= knobs.omega_t <= w1 + slack_w
                and e0 - slack_e <= knobs.drive <= e1 + slack_e)

    def check_in_window(self, knobs: Knobs) -> None:
        if not self.in_window(knobs):
            raise DomainError(
                f"knob point (omega_t={knobs.omega_t!r}, drive={knobs.drive!r}) lies outside "
                f"the window omega {self.omega_knob_range}, drive {self.drive_knob_range}")


@dataclass(frozen=True)
class Knobs:
    omega_t: float
    drive: float


@dataclass(frozen=True)
class RateSet:
    gamma_minus: float
    gamma_plus: float
    k_minus: float
    k_plus: float


# Raw-table keys. Frequencies are f = omega / 2pi; g and E_d are quoted as
# g / (2 pi hbar) and E_d / (2 pi hbar); the temperature is in millikelvin.
_RAW_SCALES = {
    "f_cpw_ghz": ("omega_cpw", TWO_PI * 1e9),
    "f_pump_ghz": ("omega_pump", TWO_PI * 1e9),
    "g_over_2pi_hbar_mhz": ("g_over_hbar", TWO_PI * 1e6),
    "temperature_mk": ("temperature_freq", KB_OVER_HBAR * 1e-3),
    "gamma_over_2pi_mhz": ("gamma_minus_net", TWO_PI * 1e6),
    "kappa_over_2pi_mhz": ("kappa_cpw", TWO_PI * 1e6),
    "omega0_over_2pi_mhz": ("omega0", TWO_PI * 1e6),
    "omega1_max_over_2pi_mhz": ("omega1_max", TWO_PI * 1e6),
    "e0_over_2pi_hbar_mhz": ("e0", TWO_PI * 1e6),
    "e1_max_over_2pi_hbar_mhz": ("e1_max", TWO_PI * 1e6),
}
RAW_KEYS = tuple(_RAW_SCALES)
CONVENTION_KEYS = ("freq_interpretation", "thermal_gap", "gamma_convention", "coherence_phase")

TABLE_1 = {
    "f_cpw_ghz": 4.94,
    "f_pump_ghz": 4.94,
    "g_over_2pi_hbar_mhz": 120.0,
    "temperature_mk": 30.0,
    "gamma_over_2pi_mhz": 2.0,
    "kappa_over_2pi_mhz": 1.0,
    "omega0_over_2pi_mhz": 100.0,
    "omega1_max_over_2pi_mhz": 1000.0,
    "e0_over_2pi_hbar_mhz": 0.2,
    "e1_max_over_2pi_hbar_mhz": 2.0,
}


def to_internal_units(raw_table: Mapping[str, object]) -> EngineParameters:
    """Convert a table of lab-unit entries to :class:`EngineParameters`.

    Every key of ``RAW_KEYS`` is required; the convention keys are optional.
    Unknown keys are rejected so that a typo cannot silently fall back to a
    default.
    """
    unknown = sorted(set(raw_table) - set(RAW_KEYS) - set(CONVENTION_KEYS))
    if unknown:
        raise ConfigError("unknown key", key=unknown[0])
    converted = {}
    for key, (field, scale) in _RAW_SCALES.items():
        if key not in raw_table:
            raise ConfigError("missing required key", key=key)
        value = raw_table[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", key=key)
        if not (math.isfinite(value) and value > 0):
            raise ConfigError(f"must be finite and > 0, got {value!r}", key=key)
        converted[field] = float(value) * scale
    conventions = {k: raw_table[k] for k in CONVENTION_KEYS if k in raw_table}
    try:
        return EngineParameters(
            omega_cpw=converted["omega_cpw"],
            omega_pump=converted["omega_pump"],
            g_over_hbar=converted["g_over_hbar"],
            temperature_freq=converted["temperature_freq"],
            gamma_minus_net=converted["gamma_minus_net"],
            kappa_cpw=converted["kappa_cpw"],
            omega_knob_range=(converted["omega0"], converted["omega1_max"]),
            drive_knob_range=(converted["e0"], converted["e1_max"]),
            **conventions,
        )
    except ConfigError as exc:
        # re-key range errors onto the raw names the user actually wrote
        raw_names = {"omega_knob_range": "omega0_over_2pi_mhz/omega1_max_over_2pi_mhz",
                     "drive_knob_range": "e0_over_2pi_hbar_mhz/e1_max_over_2pi_hbar_mhz"}
        if exc.key in raw_names:
            raise ConfigError("low end must be below high end", key=raw_names[exc.key]) from None
        raise


def table1_parameters(**conventions) -> EngineParameters:
    return to_internal_units({**TABLE_1, **conventions})


def thermal_rates(params: EngineParameters, omega_t_gap: float) -> RateSet:
    """Qubit and cavity rates obeying detailed balance at the bath temperature.

    Under ``GammaConvention.NET`` the tabulated rate is the net decay
    Gamma^- - Gamma^+, so Gamma^- + Gamma^+ = Gamma / tanh(gap / 2T).
    The cavity decay K^- is kappa_CPW in both conventions.
    """
    if not omega_t_gap > 0:
        raise DomainError(f"qubit gap must be positive, got {omega_t_gap!r}")
    x = omega_t_gap / params.temperature_freq
    boltzmann = math.exp(-x)
    if params.gamma_convention is GammaConvention.NET:
        gamma_minus = params.gamma_minus_net / -math.expm1(-x)
    else:
        gamma_minus = params.gamma_minus_net
    k_minus = params.kappa_cpw
    return RateSet(
        gamma_minus=gamma_minus,
        gamma_plus=gamma_minus * boltzmann,
        k_minus=k_minus,
        k_plus=k_minus * math.exp(-params.omega_cpw / params.temperature_freq),
    )


def cavity_amplitude(params: EngineParameters, drive):
    """Coherent cavity amplitude <a> sustained by a pump of amplitude ``drive``."""
    if np.any(np.asarray(drive) < 0):
        raise DomainError("drive amplitude must be >= 0")
    denominator = 0.5j * params.kappa_cpw - params.cavity_detuning
    if denominator == 0:
        raise SingularityError("cavity amplitude is singular: kappa = 0 at resonance")
    return drive / denominator


def effective_hamiltonian_batch(params: EngineParameters, omega_t, drive) -> np.ndarray:
    delta = np.asarray(params.detuning(omega_t), dtype=float)
    coupling = params.g_over_hbar * cavity_amplitude(params, np.asarray(drive, dtype=float))
    delta, coupling = np.broadcast_arrays(delta, coupling)
    h = np.empty(delta.shape + (2, 2), dtype=complex)
    h[..., 0, 0] = 0.5 * delta
    h[..., 1, 1] = -0.5 * delta
    h[..., 0, 1] = coupling
    h[..., 1, 0] = np.conj(coupling)
    return h


def effective_hamiltonian(params: EngineParameters, knobs: Knobs) -> np.ndarray:
    """Mean-field qubit Hamiltonian (delta/2) sz + g(<a> s+ + <a>* s-) as a 2x2 array."""
    return effective_hamiltonian_batch(params, knobs.omega_t, knobs.drive)


def drive_derivative_hamiltonian(params: EngineParameters) -> np.ndarray:
    """dH/d(drive); constant because <a> is linear in the drive."""
    coupling = params.g_over_hbar * cavity_amplitude(params, 1.0)
    return coupling * SIGMA_PLUS + np.conj(coupling) * SIGMA_MINUS


OMEGA_DERIVATIVE_HAMILTONIAN = 0.5 * SIGMA_Z


def _steady_state_elements(params: EngineParameters, omega_t, drive):
    omega_t = np.asarray(omega_t, dtype=float)
    drive = np.asarray(drive, dtype=float)
    delta = params.detuning(omega_t)
    x = params.thermal_gap_frequency(omega_t) / params.temperature_freq
    th = np.tanh(0.5 * x)
    gamma_eff = params.gamma_minus_net / th
    coupling = params.g_over_hbar * cavity_amplitude(params, drive)

    pump = params.g_over_hbar**2 * drive**2 / (
        0.25 * params.kappa_cpw**2 + params.cavity_detuning**2)
    relax = 0.25 * gamma_eff**2 + delta**2
    denominator = 2.0 * pump + relax
    rho_ee = (pump + expit(-x) * relax) / denominator
    rho_gg = (pump + expit(x) * relax) / denominator

    sign = -1.0 if params.coherence_phase is CoherencePhase.LINDBLAD else 1.0
    rho_eg = sign * 0.5 * (1j * gamma_eff + 2.0 * delta) * coupling * th / denominator

    drift = np.max(np.abs(rho_ee + rho_gg - 1.0))
    if drift > SUM_RULE_TOL:
        raise ArithmeticError(f"population sum rule violated by {drift:.3g}")
    return rho_ee, rho_eg, rho_gg


def steady_state_batch(params: EngineParameters, omega_t, drive) -> np.ndarray:
    rho_ee, rho_eg, rho_gg = _steady_state_elements(params, omega_t, drive)
    rho_ee, rho_eg, rho_gg = np.broadcast_arrays(rho_ee, rho_eg, rho_gg)
    rho = np.empty(rho_ee.shape + (2, 2), dtype=complex)
    rho[..., 0, 0] = rho_ee
    rho[..., 1, 1] = rho_gg
    rho[..., 0, 1] = rho_eg
    rho[..., 1, 0] = np.conj(rho_eg)
    return rho


def steady_state_analytic(params: EngineParameters, knobs: Knobs) -> np.ndarray:
    """Stationary qubit state from the closed-form matrix elements.

    The thermal factors use ``params.thermal_gap`` and the effective relaxation
    rate is Gamma / tanh(gap / 2T). Raises DomainError for a nonpositive gap.
    """
    return steady_state_batch(params, knobs.omega_t, knobs.drive)


def check_density_matrix(rho: np.ndarray) -> None:
    """Raise ValueError unless ``rho`` is a Hermitian, unit-trace, PSD qubit state."""
    rho = np.asarray(rho)
    if rho.shape[-2:] != (2, 2):
        raise ValueError(f"expected 2x2 matrices, got shape {rho.shape}")
    herm = np.max(np.abs(rho - np.conj(np.swapaxes(rho, -1, -2))))
    if herm > HERMITIAN_TOL:
        raise ValueError(f"not Hermitian (deviation {herm:.3g})")
    trace = np.max(np.abs(np.trace(rho, axis1=-2, axis2=-1) - 1.0))
    if trace > TRACE_TOL:
        raise ValueError(f"trace differs from 1 by {trace:.3g}")
    det = np.min(rho[..., 0, 0].real * rho[..., 1, 1].real - np.abs(rho[..., 0, 1]) ** 2)
    if det < -PSD_TOL or np.min(rho[..., 0, 0].real) < -PSD_TOL or np.min(rho[..., 1, 1].real) < -PSD_TOL:
        raise ValueError("not positive semidefinite")


def bloch_vector(rho: np.ndarray) -> np.ndarray:
    """(x, y, z) with x = 2 Re rho_eg, y = -2 Im rho_eg, z = rho_ee - rho_gg.

    With this convention rho = (I + x sx + y sy + z sz) / 2. Accepts stacks.
    """
    rho = np.asarray(rho)
    eg = rho[..., 0, 1]
    return np.stack([2.0 * eg.real, -2.0 * eg.imag, (rho[..., 0, 0] - rho[..., 1, 1]).real], axis=-1)


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Half the trace norm of a - b for Hermitian matrices."""
    diff = np.asarray(a) - np.asarray(b)
    diff = 0.5 * (diff + diff.conj().T)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(diff))))
