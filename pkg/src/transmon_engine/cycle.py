"""Four-stroke cycle construction and grid sweeps over the knob plane.

Every grid node is computed by a standalone node function, so a single node
can be recomputed and compared bit-for-bit with the stored sweep value, and
the sweep result does not depend on evaluation order or on the worker count.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from . import model, thermo
from .errors import ConfigError, EmptyResultError, EngineError
from .model import CoherencePhase, EngineParameters, FreqInterpretation, Knobs, ThermalGap
from .thermo import Knob, StrokeSpec

DEFAULT_RESOLUTION = 50
DEFAULT_POINTS_PER_STROKE = 100

OK = "ok"
DEGENERATE = "degenerate_cycle"
NO_HEAT_IN = "nonpositive_q_plus"


@dataclass(frozen=True)
class CycleSpec:
    omega0: float
    omega1: float
    e0: float
    e1: float
    points_per_stroke: int = DEFAULT_POINTS_PER_STROKE

    def __post_init__(self):
        if not (self.omega0 <= self.omega1 and self.e0 <= self.e1):
            raise ConfigError(f"need omega0 <= omega1 and e0 <= e1, got {self}", key="cycle")
        if self.points_per_stroke < 2:
            raise ConfigError("must be >= 2", key="points_per_stroke")

    def strokes(self) -> tuple[StrokeSpec, ...]:
        n = self.points_per_stroke
        return (
            StrokeSpec(Knob.OMEGA_T, self.e0, self.omega0, self.omega1, n),
            StrokeSpec(Knob.DRIVE, self.omega1, self.e0, self.e1, n),
            StrokeSpec(Knob.OMEGA_T, self.e1, self.omega1, self.omega0, n),
            StrokeSpec(Knob.DRIVE, self.omega0, self.e1, self.e0, n),
        )

    @property
    def degenerate(self) -> bool:
        return self.omega0 == self.omega1 and self.e0 == self.e1


def build_cycle(params: EngineParameters, omega1: float, e1: float,
                points_per_stroke: int = DEFAULT_POINTS_PER_STROKE):
    """Cycle from the fixed lower corner (omega0, E0) of the window to (omega1, e1).

    Returns the CycleSpec and its strokes in the order: omega up at E0, drive up
    at omega1, omega down at e1, drive down at omega0.
    """
    (omega0, _), (e0, _) = params.omega_knob_range, params.drive_knob_range
    params.check_in_window(Knobs(omega1, e1))
    spec = CycleSpec(omega0, float(omega1), e0, float(e1), int(points_per_stroke))
    strokes = spec.strokes()
    thermo.check_closed_loop(strokes)
    return spec, strokes


@dataclass
class SurfaceGrid:
    """Scalar field on a rectangular grid; values[i, j] sits at (omega_axis[i], drive_axis[j]).

    Absent nodes hold NaN and a reason code other than "ok".
    """
    omega_axis: np.ndarray
    drive_axis: np.ndarray
    values: np.ndarray
    quantity_label: str
    reasons: np.ndarray = field(default=None)

    def __post_init__(self):
        self.omega_axis = np.asarray(self.omega_axis, dtype=float)
        self.drive_axis = np.asarray(self.drive_axis, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        for name, axis in (("omega_axis", self.omega_axis), ("drive_axis", self.drive_axis)):
            if axis.ndim != 1 or axis.size < 1 or np.any(np.diff(axis) <= 0):
                raise ValueError(f"{name} must be a non-empty, strictly increasing 1-D array")
        shape = (self.omega_axis.size, self.drive_axis.size)
        if self.values.shape != shape:
            raise ValueError(f"values have shape {self.values.shape}, axes imply {shape}")
        if self.reasons is None:
            self.reasons = np.where(np.isnan(self.values), "absent", OK).astype(object)
        self.reasons = np.asarray(self.reasons, dtype=object)
        if self.reasons.shape != shape:
            raise ValueError("reasons must match the values shape")

    @property
    def present(self) -> np.ndarray:
        return ~np.isnan(self.values)

    def rows(self):
        """Long-form (omega, drive, value or None, reason) tuples, omega-major."""
        for (i, w), (j, e) in itertools.product(enumerate(self.omega_axis), enumerate(self.drive_axis)):
            v = self.values[i, j]
            yield float(w), float(e), None if np.isnan(v) else float(v), str(self.reasons[i, j])


def window_axes(params: EngineParameters, resolution: int):
    """Linearly spaced omega and drive axes spanning the knob window."""
    if int(resolution) != resolution or resolution < 2:
        raise ConfigError(f"must be an integer >= 2, got {resolution!r}", key="resolution")
    return (np.linspace(*params.omega_knob_range, int(resolution)),
            np.linspace(*params.drive_knob_range, int(resolution)))


# -- state surfaces -----------------------------------------------------------

def _entropy(rho):
    return thermo.von_neumann_entropy(rho)


def _population(rho):
    return float(rho[0, 0].real)


def _coherence(rho):
    return float(abs(rho[0, 1]))


STATE_QUANTITIES = {
    "entropy": _entropy,
    "rho_ee": _population,
    "abs_rho_eg": _coherence,
}


def state_node(params: EngineParameters, quantity: str, omega_t: float, drive: float) -> float:
    """One node of a state surface, from the closed-form steady state at that point."""
    rho = model.steady_state_analytic(params, Knobs(float(omega_t), float(drive)))
    return STATE_QUANTITIES[quantity](rho)


def _state_surface(params, quantity, resolution, omega_axis, drive_axis) -> SurfaceGrid:
    default_w, default_e = window_axes(params, resolution)
    w = default_w if omega_axis is None else omega_axis
    e = default_e if drive_axis is None else drive_axis
    values = np.array([[state_node(params, quantity, wi, ej) for ej in e] for wi in w])
    return SurfaceGrid(w, e, values, quantity)


def entropy_surface(params: EngineParameters, grid_resolution: int = DEFAULT_RESOLUTION,
                    omega_axis=None, drive_axis=None) -> SurfaceGrid:
    """Von Neumann entropy (nats) of the steady state on a grid over the window.

    Either axis can be overridden, e.g. to include drive = 0.
    """
    return _state_surface(params, "entropy", grid_resolution, omega_axis, drive_axis)


def state_surfaces(params: EngineParameters, grid_resolution: int = DEFAULT_RESOLUTION,
                   omega_axis=None, drive_axis=None) -> tuple[SurfaceGrid, SurfaceGrid]:
    """Excited population and coherence magnitude |rho_eg| on the grid."""
    return (_state_surface(params, "rho_ee", grid_resolution, omega_axis, drive_axis),
            _state_surface(params, "abs_rho_eg", grid_resolution, omega_axis, drive_axis))


# -- efficiency ---------------------------------------------------------------

def efficiency_node(params: EngineParameters, omega1: float, e1: float,
                    points_per_stroke: int = DEFAULT_POINTS_PER_STROKE) -> tuple[float, str]:
    """(eta, reason) for the cycle with upper corner (omega1, e1); eta is NaN when absent."""
    try:
        spec, strokes = build_cycle(params, omega1, e1, points_per_stroke)
        if spec.degenerate:
            return float("nan"), DEGENERATE
        result = thermo.cycle_energetics(params, strokes, decompose=False)
    except (EngineError, ArithmeticError) as exc:
        return float("nan"), f"error:{type(exc).__name__}"
    if result.efficiency is None:
        return float("nan"), NO_HEAT_IN
    return result.efficiency, OK


def _efficiency_task(args, params, points_per_stroke):
    return efficiency_node(params, args[0], args[1], points_per_stroke)


def efficiency_map(params: EngineParameters, sweep_resolution: int = DEFAULT_RESOLUTION,
                   points_per_stroke: int = DEFAULT_POINTS_PER_STROKE, workers: int = 1,
                   omega_axis=None, drive_axis=None) -> SurfaceGrid:
    """Cycle efficiency for every upper corner (omega1, E1) of a grid over the window.

    The lower corner is fixed at the window minimum. Failing nodes are stored
    as NaN with a reason code instead of aborting the sweep. ``workers > 1``
    spreads nodes over processes; results are placed by index, so the output
    is the same for any worker count.
    """
    default_w, default_e = window_axes(params, sweep_resolution)
    w = default_w if omega_axis is None else np.asarray(omega_axis, dtype=float)
    e = default_e if drive_axis is None else np.asarray(drive_axis, dtype=float)
    nodes = list(itertools.product(w.tolist(), e.tolist()))
    task = partial(_efficiency_task, params=params, points_per_stroke=points_per_stroke)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(task, nodes, chunksize=max(1, len(nodes) // (8 * workers))))
    else:
        results = [task(node) for node in nodes]
    values = np.array([r[0] for r in results]).reshape(w.size, e.size)
    reasons = np.array([r[1] for r in results], dtype=object).reshape(w.size, e.size)
    return SurfaceGrid(w, e, values, "efficiency", reasons)


def find_max_efficiency(grid: SurfaceGrid) -> tuple[float, float, float]:
    """(omega1, e1, eta) of the largest present value.

    Ties go to the smallest omega1, then the smallest e1 (first in omega-major order).
    """
    if not np.any(grid.present):
        raise EmptyResultError(f"no present values in the {grid.quantity_label} grid")
    flat = np.where(grid.present, grid.values, -np.inf).ravel()
    i, j = np.unravel_index(int(np.argmax(flat)), grid.values.shape)
    return float(grid.omega_axis[i]), float(grid.drive_axis[j]), float(grid.values[i, j])


def conventions_report(params: EngineParameters, sweep_resolution: int = DEFAULT_RESOLUTION,
                       points_per_stroke: int = DEFAULT_POINTS_PER_STROKE, workers: int = 1,
                       phases=(CoherencePhase.LINDBLAD,)) -> list[dict]:
    """Maximum efficiency under every frequency-interpretation / thermal-gap pairing.

    One row per combination (times the requested coherence phases) with the
    location of the maximum, the efficiency at the upper window corner and the
    count of absent nodes per reason.
    """
    rows = []
    for freq, gap, phase in itertools.product(FreqInterpretation, ThermalGap, phases):
        p = params.replace(freq_interpretation=freq, thermal_gap=gap,
                           coherence_phase=CoherencePhase(phase))
        grid = efficiency_map(p, sweep_resolution, points_per_stroke, workers)
        reasons, counts = np.unique(grid.reasons.astype(str), return_counts=True)
        row = {
            "freq_interpretation": freq.value,
            "thermal_gap": gap.value,
            "coherence_phase": CoherencePhase(phase).value,
            "present_nodes": int(np.sum(grid.present)),
            "reasons": {str(r): int(c) for r, c in zip(reasons, counts)},
            "corner_eta": None if np.isnan(grid.values[-1, -1]) else float(grid.values[-1, -1]),
            "max_eta": None, "omega1_at_max": None, "e1_at_max": None, "max_at_corner": False,
        }
        if np.any(grid.present):
            w1, e1, eta = find_max_efficiency(grid)
            row.update(max_eta=eta, omega1_at_max=w1, e1_at_max=e1,
                       max_at_corner=bool(w1 == grid.omega_axis[-1] and e1 == grid.drive_axis[-1]))
        rows.append(row)
    return rows
