"""Thermodynamic functionals along quasi-static strokes.

Sign convention: work and heat are positive when energy flows into the qubit;
the work extracted over a cycle is minus the summed work.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import entr

from . import model
from .errors import ConfigError
from .model import EngineParameters, Knobs
from .quadrature import QUAD_RTOL, positive_part_integral, simpson_refined

# central-difference step as a fraction of the stroke span (one Richardson level)
FD_REL_STEP = 1e-4
DEGENERACY_RTOL = 1e-12
CROSSING_RTOL = 1e-6


class Knob(str, enum.Enum):
    OMEGA_T = "omega_t"
    DRIVE = "drive"


@dataclass(frozen=True)
class StrokeSpec:
    which_knob: Knob
    fixed_value: float
    start: float
    end: float
    n_points: int = 100

    def __post_init__(self):
        object.__setattr__(self, "which_knob", Knob(self.which_knob))
        if self.n_points < 2:
            raise ConfigError("n_points must be >= 2", key="n_points")

    @property
    def degenerate(self) -> bool:
        return self.start == self.end

    @property
    def span(self) -> float:
        return abs(self.end - self.start)

    def knob_arrays(self, lam):
        lam = np.asarray(lam, dtype=float)
        fixed = np.full_like(lam, self.fixed_value)
        if self.which_knob is Knob.OMEGA_T:
            return lam, fixed
        return fixed, lam

    def knobs_at(self, lam: float) -> Knobs:
        if self.which_knob is Knob.OMEGA_T:
            return Knobs(omega_t=float(lam), drive=self.fixed_value)
        return Knobs(omega_t=self.fixed_value, drive=float(lam))

    @property
    def start_knobs(self) -> Knobs:
        return self.knobs_at(self.start)

    @property
    def end_knobs(self) -> Knobs:
        return self.knobs_at(self.end)


@dataclass(frozen=True)
class StrokeEnergetics:
    work: float
    heat: float
    positive_heat: float
    passive_heat: float | None = None
    ergotropy_change: float | None = None


@dataclass(frozen=True)
class CycleEnergetics:
    per_stroke: tuple[StrokeEnergetics, ...]
    total_work: float
    total_heat: float
    q_plus: float
    efficiency: float | None
    total_passive_heat: float | None = None
    total_ergotropy_change: float | None = None


def _trace_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,...ji->...", a, b).real


def von_neumann_entropy(rho: np.ndarray):
    """Entropy in nats, from the Bloch-vector length r as the binary entropy of (1 +- r)/2."""
    r = np.minimum(np.linalg.norm(model.bloch_vector(rho), axis=-1), 1.0)
    s = entr(0.5 * (1.0 + r)) + entr(0.5 * (1.0 - r))
    return float(s) if np.ndim(s) == 0 else s


def passive_state(rho: np.ndarray, hamiltonian: np.ndarray) -> np.ndarray:
    """Lowest-energy state unitarily reachable from ``rho``.

    The spectrum of ``rho`` is placed on the eigenbasis of ``hamiltonian`` with
    the largest population on the ground level. When the Hamiltonian is
    degenerate the sigma_z eigenbasis is used, ordered by descending <sigma_z>.
    Accepts stacks of matrices.
    """
    rho = np.asarray(rho)
    hamiltonian = np.asarray(hamiltonian)
    energies, vectors = np.linalg.eigh(hamiltonian)
    populations = np.linalg.eigvalsh(rho)[..., ::-1]
    scale = np.max(np.abs(energies), axis=-1)
    degenerate = (energies[..., -1] - energies[..., 0]) <= DEGENERACY_RTOL * scale
    if np.any(degenerate):
        vectors = np.where(degenerate[..., None, None], np.eye(2), vectors)
    return np.einsum("...ik,...k,...jk->...ij", vectors, populations, vectors.conj())


def ergotropy(rho: np.ndarray, hamiltonian: np.ndarray):
    """tr(rho H) - tr(pi H), the unitarily extractable energy."""
    value = _trace_product(rho, hamiltonian) - _trace_product(passive_state(rho, hamiltonian), hamiltonian)
    return float(value) if np.ndim(value) == 0 else value


def internal_energy(params: EngineParameters, knobs: Knobs) -> float:
    return float(_trace_product(model.steady_state_analytic(params, knobs),
                                model.effective_hamiltonian(params, knobs)))


# -- stroke integrands -------------------------------------------------------

def _fd(fun, lam, h):
    """Central difference at steps h and h/2 combined by one Richardson level."""
    wide = (fun(lam + h) - fun(lam - h)) / (2 * h)
    narrow = (fun(lam + 0.5 * h) - fun(lam - 0.5 * h)) / h
    return (4.0 * narrow - wide) / 3.0


class _StrokeFunctions:
    """Steady state, Hamiltonian and their derivatives along one stroke."""

    def __init__(self, params: EngineParameters, stroke: StrokeSpec):
        self.params = params
        self.stroke = stroke
        self.h = FD_REL_STEP * stroke.span
        if stroke.which_knob is Knob.OMEGA_T:
            self.dham = model.OMEGA_DERIVATIVE_HAMILTONIAN
        else:
            self.dham = model.drive_derivative_hamiltonian(params)

    def rho(self, lam):
        return model.steady_state_batch(self.params, *self.stroke.knob_arrays(lam))

    def ham(self, lam):
        return model.effective_hamiltonian_batch(self.params, *self.stroke.knob_arrays(lam))

    def passive(self, lam):
        return passive_state(self.rho(lam), self.ham(lam))

    def excess(self, lam):
        return self.rho(lam) - self.passive(lam)

    def work_density(self, lam):
        return _trace_product(self.rho(lam), self.dham)

    def heat_density(self, lam):
        return _trace_product(_fd(self.rho, lam, self.h), self.ham(lam))

    def passive_heat_density(self, lam):
        return _trace_product(_fd(self.passive, lam, self.h), self.ham(lam))

    def ergotropy_density(self, lam):
        return _trace_product(_fd(self.excess, lam, self.h), self.ham(lam))

    def heat_increment_density(self, u):
        """Heat per unit progress u = |lambda - start| (positive = into the qubit)."""
        s = math.copysign(1.0, self.stroke.end - self.stroke.start)
        return s * self.heat_density(self.stroke.start + s * u)


def rho_derivative(params: EngineParameters, stroke: StrokeSpec, lam, h: float | None = None):
    """d rho_ss / d lambda along ``stroke`` by Richardson-corrected central differences."""
    funcs = _StrokeFunctions(params, stroke)
    return _fd(funcs.rho, np.asarray(lam, dtype=float), funcs.h if h is None else h)


def stroke_work(params: EngineParameters, stroke: StrokeSpec, rtol: float = QUAD_RTOL) -> float:
    """Integral of tr(rho_ss dH/d lambda) along the stroke."""
    if stroke.degenerate:
        return 0.0
    f = _StrokeFunctions(params, stroke)
    return simpson_refined(f.work_density, stroke.start, stroke.end, stroke.n_points, rtol=rtol)


def stroke_heat(params: EngineParameters, stroke: StrokeSpec, rtol: float = QUAD_RTOL) -> float:
    """Integral of tr((d rho_ss / d lambda) H) along the stroke."""
    if stroke.degenerate:
        return 0.0
    f = _StrokeFunctions(params, stroke)
    return simpson_refined(f.heat_density, stroke.start, stroke.end, stroke.n_points, rtol=rtol)


def stroke_positive_heat(params: EngineParameters, stroke: StrokeSpec, rtol: float = QUAD_RTOL) -> float:
    """Heat absorbed by the qubit, counting only the steps where it flows in.

    The clip acts on the heat increment q d lambda, so on a stroke that runs
    towards smaller knob values the negative-q parts are the absorbing ones.
    """
    if stroke.degenerate:
        return 0.0
    f = _StrokeFunctions(params, stroke)
    return positive_part_integral(f.heat_increment_density, 0.0, stroke.span, stroke.n_points, rtol=rtol)


def _crossing_points(f: _StrokeFunctions, stroke: StrokeSpec) -> list[float]:
    """Interior points where the Hamiltonian gap or the state's Bloch length nearly vanishes."""
    lam = np.linspace(stroke.start, stroke.end, max(stroke.n_points, 3))
    ham = f.ham(lam)
    energies = np.linalg.eigvalsh(ham)
    hgap = (energies[:, 1] - energies[:, 0]) / np.max(np.abs(energies))
    r = np.linalg.norm(model.bloch_vector(f.rho(lam)), axis=-1)
    points = []
    for series, evaluate in ((hgap, lambda t: float(np.diff(np.linalg.eigvalsh(f.ham(np.array([t]))[0])))),
                             (r, lambda t: float(np.linalg.norm(model.bloch_vector(f.rho(np.array([t]))[0]))))):
        for i in range(1, len(lam) - 1):
            if series[i] <= series[i - 1] and series[i] <= series[i + 1] and series[i] < CROSSING_RTOL:
                lo, hi = sorted((lam[i - 1], lam[i + 1]))
                points.append(float(minimize_scalar(evaluate, bounds=(lo, hi), method="bounded",
                                                    options={"xatol": 1e-12 * stroke.span}).x))
    return sorted(points, reverse=bool(stroke.end < stroke.start))


def _split_integral(density, stroke: StrokeSpec, splits: list[float], rtol: float,
                    atol: float = 0.0) -> float:
    edges = [stroke.start, *splits, stroke.end]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        n = max(5, math.ceil(stroke.n_points * abs(b - a) / stroke.span))
        total += simpson_refined(density, a, b, n, rtol=rtol, atol=atol)
    return total


def stroke_passive_decomposition(params: EngineParameters, stroke: StrokeSpec,
                                 rtol: float = QUAD_RTOL) -> tuple[float, float]:
    """(passive heat, ergotropy change) along the stroke.

    Their sum is the stroke heat up to quadrature error; each is integrated
    from its own integrand. The ergotropy change is often orders of magnitude
    below the passive heat, so its tolerance is relative to the passive heat.
    Points where the passive-state ordering can swap split the range.
    """
    if stroke.degenerate:
        return 0.0, 0.0
    f = _StrokeFunctions(params, stroke)
    splits = _crossing_points(f, stroke)
    passive_heat = _split_integral(f.passive_heat_density, stroke, splits, rtol)
    return passive_heat, _split_integral(f.ergotropy_density, stroke, splits, rtol,
                                         atol=rtol * abs(passive_heat))


def stroke_energetics(params: EngineParameters, stroke: StrokeSpec, decompose: bool = True,
                      rtol: float = QUAD_RTOL) -> StrokeEnergetics:
    passive_heat = ergotropy_change = None
    if decompose:
        passive_heat, ergotropy_change = stroke_passive_decomposition(params, stroke, rtol)
    return StrokeEnergetics(
        work=stroke_work(params, stroke, rtol),
        heat=stroke_heat(params, stroke, rtol),
        positive_heat=stroke_positive_heat(params, stroke, rtol),
        passive_heat=passive_heat,
        ergotropy_change=ergotropy_change,
    )


def _same_point(a: Knobs, b: Knobs, rtol: float = 1e-12) -> bool:
    return (math.isclose(a.omega_t, b.omega_t, rel_tol=rtol, abs_tol=0.0)
            and math.isclose(a.drive, b.drive, rel_tol=rtol, abs_tol=0.0))


def check_closed_loop(strokes: Sequence[StrokeSpec]) -> None:
    for i, stroke in enumerate(strokes):
        following = strokes[(i + 1) % len(strokes)]
        if not _same_point(stroke.end_knobs, following.start_knobs):
            raise ConfigError(
                f"open loop: stroke {i + 1} ends at {stroke.end_knobs} but stroke "
                f"{(i + 1) % len(strokes) + 1} starts at {following.start_knobs}", key="cycle")


def cycle_energetics(params: EngineParameters, strokes: Sequence[StrokeSpec],
                     decompose: bool = True, rtol: float = QUAD_RTOL) -> CycleEnergetics:
    """Aggregate the strokes of a closed cycle; efficiency is -sum(W) / Q_+.

    The efficiency is None when no heat flows into the qubit.
    """
    if len(strokes) != 4:
        raise ConfigError(f"a cycle has four strokes, got {len(strokes)}", key="cycle")
    check_closed_loop(strokes)
    per_stroke = tuple(stroke_energetics(params, s, decompose, rtol) for s in strokes)
    total_work = math.fsum(s.work for s in per_stroke)
    q_plus = math.fsum(s.positive_heat for s in per_stroke)
    return CycleEnergetics(
        per_stroke=per_stroke,
        total_work=total_work,
        total_heat=math.fsum(s.heat for s in per_stroke),
        q_plus=q_plus,
        efficiency=-total_work / q_plus if q_plus > 0 else None,
        total_passive_heat=math.fsum(s.passive_heat for s in per_stroke) if decompose else None,
        total_ergotropy_change=math.fsum(s.ergotropy_change for s in per_stroke) if decompose else None,
    )
