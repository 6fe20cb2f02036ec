import numpy as np
import pytest

from transmon_engine import model

ACCEPTANCE = pytest.StashKey[dict]()

MHZ = model.TWO_PI * 1e6


def pytest_configure(config):
    config.stash[ACCEPTANCE] = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(ACCEPTANCE, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        ok, title, detail = results[number]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}: {detail}")


@pytest.fixture
def acceptance(request):
    """Record a criterion result for the terminal summary, then assert it."""
    log = request.config.stash[ACCEPTANCE]

    def record(number: int, title: str, ok: bool, detail: str):
        log[number] = (bool(ok), title, detail)
        assert ok, f"criterion {number} ({title}) failed: {detail}"

    return record


@pytest.fixture(scope="session")
def table1():
    return model.table1_parameters()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_knobs(params, rng, n):
    omega = rng.uniform(*params.omega_knob_range, n)
    drive = rng.uniform(*params.drive_knob_range, n)
    return [model.Knobs(float(w), float(e)) for w, e in zip(omega, drive)]


def random_density_matrix(rng):
    """Random full-rank qubit state: Bloch vector uniform in direction, length in [0, 1)."""
    v = rng.normal(size=3)
    v *= rng.uniform(0.0, 1.0) / np.linalg.norm(v)
    return 0.5 * (model.IDENTITY + v[0] * model.SIGMA_X + v[1] * model.SIGMA_Y + v[2] * model.SIGMA_Z)


def random_hamiltonian(rng, scale=1.0):
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    return scale * 0.5 * (a + a.conj().T)


def _rotation_unitaries(r_hat, targets):
    """SU(2) matrices rotating the Bloch direction r_hat onto each target direction (Rodrigues)."""
    axis = np.cross(r_hat, targets)
    sin = np.linalg.norm(axis, axis=-1)
    cos = targets @ r_hat
    angle = np.arctan2(sin, cos)
    # antiparallel targets: any axis orthogonal to r_hat works
    fallback = np.cross(r_hat, [1.0, 0.0, 0.0] if abs(r_hat[0]) < 0.9 else [0.0, 1.0, 0.0])
    axis = np.where(sin[:, None] > 1e-12, axis / np.maximum(sin, 1e-300)[:, None],
                    fallback / np.linalg.norm(fallback))
    paulis = np.stack([model.SIGMA_X, model.SIGMA_Y, model.SIGMA_Z])
    generator = np.einsum("nk,kij->nij", axis, paulis)
    return (np.cos(angle / 2)[:, None, None] * model.IDENTITY
            - 1j * np.sin(angle / 2)[:, None, None] * generator)


def brute_force_min_energy(rho, hamiltonian, n_theta=41, n_phi=80):
    """Lowest tr(U rho U^+ H) over qubit unitaries U.

    A unitary acts on the Bloch vector as a rotation, so U is parametrised by
    the direction it sends the Bloch vector to: a (theta, phi) grid, then a
    local polish of the best grid point. Each candidate energy is evaluated
    from the rotated density matrix itself.
    """
    from scipy.optimize import minimize

    r = model.bloch_vector(rho)
    length = np.linalg.norm(r)
    if length < 1e-15:
        return float(np.trace(rho @ hamiltonian).real)
    r_hat = r / length

    def energies(theta, phi):
        targets = np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=-1)
        u = _rotation_unitaries(r_hat, targets.reshape(-1, 3))
        rotated = u @ rho @ u.conj().transpose(0, 2, 1)
        return np.einsum("nij,ji->n", rotated, hamiltonian).real

    theta, phi = np.meshgrid(np.linspace(0, np.pi, n_theta), np.linspace(0, 2 * np.pi, n_phi, endpoint=False))
    grid = energies(theta.ravel(), phi.ravel())
    best = int(np.argmin(grid))
    start = np.array([theta.ravel()[best], phi.ravel()[best]])
    polished = minimize(lambda x: energies(np.array([x[0]]), np.array([x[1]]))[0], start,
                        method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-14})
    return float(min(grid[best], polished.fun))
