"""Coordinate grids, DAF kinetic matrices, potential surfaces and the
2-D grid Hamiltonian with its exact-diagonalization / classical-propagation
oracle.

Everything here works in Hartree atomic units internally; grids remember
the unit they were specified in so reports can convert back.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.hermite import hermval

from .constants import (
    AU_PER_FS,
    BOHR_PER_ANGSTROM,
    ANGSTROM_PER_BOHR,
    DEG_PER_RAD,
    RAD_PER_DEG,
    HARTREE_PER_KCALMOL,
    KCALMOL_PER_HARTREE,
    HBAR,
)
from .schedule import SimulationSchedule, TimeTrace

_UNIT_TO_INTERNAL = {
    "bohr": 1.0,
    "angstrom": BOHR_PER_ANGSTROM,
    "rad": 1.0,
    "deg": RAD_PER_DEG,
}
_INTERNAL_TO_UNIT = {
    "bohr": 1.0,
    "angstrom": ANGSTROM_PER_BOHR,
    "rad": 1.0,
    "deg": DEG_PER_RAD,
}

_ENERGY_TO_HARTREE = {
    "hartree": 1.0,
    "kcalmol": HARTREE_PER_KCALMOL,
}


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid1D:
    """Uniform coordinate grid with a power-of-two point count.

    ``points`` are stored in atomic units (bohr or radians); ``unit`` is the
    unit the grid was declared in.
    """

    points: np.ndarray
    unit: str

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("grid needs at least two points")
        if not _is_power_of_two(pts.size):
            raise ValueError(f"grid size {pts.size} is not a power of two")
        steps = np.diff(pts)
        if np.any(steps <= 0):
            raise ValueError("grid points must be strictly increasing")
        scale = max(abs(pts[0]), abs(pts[-1]))
        if np.max(np.abs(steps - steps[0])) > 1e-12 * scale:
            raise ValueError("grid points must be uniformly spaced")

    @property
    def n(self) -> int:
        return self.points.size

    @property
    def qubits(self) -> int:
        return int(round(math.log2(self.n)))

    @property
    def spacing(self) -> float:
        return float(self.points[1] - self.points[0])

    def points_in(self, unit: str) -> np.ndarray:
        return self.points * _INTERNAL_TO_UNIT[unit]


def build_grid(n: int, extent, unit: str = "bohr") -> Grid1D:
    """Uniform n-point grid (n a power of two) over a symmetric span.

    ``extent`` is either the total span of the grid (a positive scalar,
    producing points centred on zero with spacing extent/(n-1)) or an
    explicit (lo, hi) range.
    """
    if not _is_power_of_two(n) or n < 2:
        raise ValueError(f"grid size must be a power of two >= 2, got {n}")
    if unit not in _UNIT_TO_INTERNAL:
        raise ValueError(f"unknown grid unit {unit!r}")
    if np.isscalar(extent):
        if extent <= 0:
            raise ValueError("grid extent must be positive")
        span = float(extent)
        center = 0.0
    else:
        lo, hi = float(extent[0]), float(extent[1])
        if hi <= lo:
            raise ValueError("grid range must be increasing")
        span = hi - lo
        center = (lo + hi) / 2.0
    # (i - (n-1)/2) * dx keeps mirrored points exactly opposite in floating
    # point, which downstream symmetry checks at 1e-12 rely on.
    dx = span / (n - 1) * _UNIT_TO_INTERNAL[unit]
    pts = (np.arange(n) - (n - 1) / 2.0) * dx + center * _UNIT_TO_INTERNAL[unit]
    return Grid1D(points=pts, unit=unit)


@dataclass(frozen=True)
class DafKineticSpec:
    """Parameters of the banded-Toeplitz kinetic-energy approximation.

    ``sigma_factor`` sets the Gaussian width as a multiple of the grid
    spacing; ``m_daf`` is the (even) truncation order of the Hermite sum.
    """

    mass: float
    m_daf: int = 20
    sigma_factor: float = 1.5
    hbar: float = HBAR

    def __post_init__(self):
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if self.m_daf < 2 or self.m_daf % 2 != 0:
            raise ValueError("m_daf must be even and >= 2")
        if self.sigma_factor <= 0:
            raise ValueError("sigma_factor must be positive")

    def sigma(self, spacing: float) -> float:
        return self.sigma_factor * spacing


def daf_kinetic(grid: Grid1D, spec: DafKineticSpec) -> np.ndarray:
    """Kinetic-energy matrix for a uniform grid.

    Entries depend only on |x_i - x_l| (symmetric Toeplitz): a Gaussian
    envelope times an even-order Hermite sum, scaled by the grid spacing so
    the matrix acts as a quadrature of -hbar^2/(2m) d^2/dx^2.
    """
    dx = grid.spacing
    sigma = spec.sigma(dx)
    offsets = np.arange(grid.n) * dx
    arg = offsets / (math.sqrt(2.0) * sigma)

    n_terms = spec.m_daf // 2 + 1
    total = np.zeros_like(arg)
    for k in range(n_terms):
        order = 2 * k + 2
        coeffs = np.zeros(order + 1)
        coeffs[order] = 1.0
        total += (-0.25) ** k / math.factorial(k) * hermval(arg, coeffs)

    pref = -spec.hbar**2 / (4.0 * spec.mass * sigma**3 * math.sqrt(2.0 * math.pi))
    band = dx * pref * np.exp(-(offsets**2) / (2.0 * sigma**2)) * total

    idx = np.abs(np.subtract.outer(np.arange(grid.n), np.arange(grid.n)))
    return band[idx]


@dataclass
class PotentialSurface:
    """Potential values V(x1_i, x2_j) on the product grid, row-major in x1."""

    values: np.ndarray
    unit: str = "hartree"
    symmetric: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("potential surface must be a 2-D array")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("potential surface contains non-finite values")
        if self.symmetric:
            err = self.inversion_error()
            if err > 1e-12 * max(1.0, float(np.max(np.abs(self.values)))):
                raise ValueError(f"surface marked symmetric violates inversion by {err:.3e}")

    def inversion_error(self) -> float:
        """Max deviation from V(x1, x2) == V(-x1, -x2)."""
        return float(np.max(np.abs(self.values - self.values[::-1, ::-1])))

    def in_hartree(self) -> np.ndarray:
        return self.values * _ENERGY_TO_HARTREE[self.unit]

    @property
    def shape(self):
        return self.values.shape


def synthetic_pes(
    grid1: Grid1D,
    grid2: Grid1D,
    well_depth: float = 30.0,
    barrier: float = 6.0,
    stiffness: float = 20.0,
    coupling: float = 2.0,
    unit: str = "kcalmol",
) -> PotentialSurface:
    """Parameterized stand-in surface: a double well along x1, a harmonic
    torsional restoring term along x2 and an even-even gating coupling.

    All four parameters are energies (default kcal/mol): ``well_depth`` is
    the rise of the double-well arm at the grid edge above the minima,
    ``barrier`` the central hump above the minima, ``stiffness`` the
    torsional energy at the angular edge and ``coupling`` the gating energy
    at the corner of the grid. Every term is even in each coordinate, so the
    surface is mirror-symmetric along both axes (and hence inversion
    symmetric).
    """
    if barrier <= 0 or well_depth <= 0 or stiffness < 0 or coupling < 0:
        raise ValueError("well_depth and barrier must be positive, couplings nonnegative")
    x = grid1.points / np.max(np.abs(grid1.points))
    t = grid2.points / np.max(np.abs(grid2.points))

    # Quartic a*x^4 + b*x^2 with barrier B above the minima and edge rise D:
    # a = (sqrt(B) + sqrt(D))^2, b = -2 sqrt(B) (sqrt(B) + sqrt(D)).
    root = math.sqrt(barrier) + math.sqrt(well_depth)
    a = root**2
    b = -2.0 * math.sqrt(barrier) * root
    v1 = a * x**4 + b * x**2
    v1 -= v1.min()
    v2 = stiffness * t**2

    vals = v1[:, None] + v2[None, :] + coupling * np.outer(x**2, t**2)
    if not np.all(np.isfinite(vals)):
        raise ValueError("synthetic surface parameters produce non-finite values")
    return PotentialSurface(values=vals, unit=unit, symmetric=True)


def save_pes(surface: PotentialSurface, path) -> None:
    """Write a surface in the plain-text v1 format (header + row-major values)."""
    n1, n2 = surface.shape
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"pes v1 {n1} {n2} {surface.unit} {1 if surface.symmetric else 0}\n")
        for row in surface.values:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


class PesFormatError(ValueError):
    """Raised when a surface file cannot be parsed or fails validation."""


def load_pes(path) -> PotentialSurface:
    """Read a surface file, validating shape and the declared symmetry flag."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        body = fh.read().split()
    if len(header) != 6 or header[0] != "pes" or header[1] != "v1":
        raise PesFormatError(f"{path}: expected header 'pes v1 <n1> <n2> <unit> <sym>'")
    try:
        n1, n2 = int(header[2]), int(header[3])
        unit = header[4]
        sym = bool(int(header[5]))
        values = np.array([float(v) for v in body])
    except ValueError as exc:
        raise PesFormatError(f"{path}: {exc}") from exc
    if unit not in _ENERGY_TO_HARTREE:
        raise PesFormatError(f"{path}: unknown energy unit {unit!r}")
    if not (_is_power_of_two(n1) and _is_power_of_two(n2)):
        raise PesFormatError(f"{path}: grid shape {n1}x{n2} is not power-of-two")
    if values.size != n1 * n2:
        raise PesFormatError(f"{path}: expected {n1 * n2} values, found {values.size}")
    values = values.reshape(n1, n2)
    if sym:
        err = float(np.max(np.abs(values - values[::-1, ::-1])))
        if err > 1e-9 * max(1.0, float(np.max(np.abs(values)))):
            raise PesFormatError(f"{path}: symmetric flag set but inversion violated by {err:.3e}")
    return PotentialSurface(values=values, unit=unit, symmetric=sym)


@dataclass
class NuclearHamiltonian2D:
    """Dense (n1*n2) x (n1*n2) grid Hamiltonian, x1-major ordering."""

    matrix: np.ndarray
    grid1: Grid1D
    grid2: Grid1D
    unit: str = "hartree"

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        n = self.grid1.n * self.grid2.n
        if self.matrix.shape != (n, n):
            raise ValueError("Hamiltonian shape does not match grids")
        scale = max(1.0, float(np.max(np.abs(self.matrix))))
        if np.max(np.abs(self.matrix - self.matrix.T)) > 1e-12 * scale:
            raise ValueError("2-D Hamiltonian is not symmetric")


def assemble_h2d(k1: np.ndarray, k2: np.ndarray, surface: PotentialSurface,
                 grid1: Grid1D, grid2: Grid1D) -> NuclearHamiltonian2D:
    """H = K1 (x) I + I (x) K2 + diag(V), with V flattened x1-major."""
    n1, n2 = k1.shape[0], k2.shape[0]
    if surface.shape != (n1, n2):
        raise ValueError(f"surface shape {surface.shape} does not match kinetic blocks ({n1},{n2})")
    h = np.kron(k1, np.eye(n2)) + np.kron(np.eye(n1), k2)
    h[np.diag_indices_from(h)] += surface.in_hartree().ravel()
    return NuclearHamiltonian2D(matrix=h, grid1=grid1, grid2=grid2)


@dataclass
class EnergyLadderExact:
    """Eigen-decomposition of a grid Hamiltonian (ascending, orthonormal)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def relative(self) -> np.ndarray:
        return self.eigenvalues - self.eigenvalues[0]


def exact_eigensolve(h: np.ndarray) -> EnergyLadderExact:
    """Dense Hermitian eigensolve; errors out on non-Hermitian input."""
    h = np.asarray(h)
    scale = max(1.0, float(np.max(np.abs(h))))
    if np.max(np.abs(h - h.conj().T)) > 1e-10 * scale:
        raise ValueError("matrix is not Hermitian")
    vals, vecs = np.linalg.eigh(h)
    return EnergyLadderExact(eigenvalues=vals, eigenvectors=vecs)


def classical_propagate(h: np.ndarray, psi0: np.ndarray,
                        schedule: SimulationSchedule,
                        provenance: dict | None = None) -> TimeTrace:
    """Grid-point densities |<x| exp(-iHt) |psi0>|^2 over the schedule.

    Computed through the spectral expansion of H (in Hartree) so long
    propagations stay exact.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    norm = np.linalg.norm(psi0)
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"initial state norm {norm} is not 1")
    ladder = exact_eigensolve(h)
    coeff = ladder.eigenvectors.conj().T @ psi0
    phases = np.exp(-1j * np.outer(ladder.eigenvalues, schedule.times_au()) / HBAR)
    psi_t = ladder.eigenvectors @ (phases * coeff[:, None])
    return TimeTrace(
        densities=np.abs(psi_t) ** 2,
        schedule=schedule,
        provenance=provenance or {},
    )
