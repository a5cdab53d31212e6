"""Sampling schedules and measured time traces shared across modules."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constants import AU_PER_FS


@dataclass(frozen=True)
class SimulationSchedule:
    """Uniform sampling grid in time.

    ``n_steps`` is the number of propagation steps, so a trace holds
    ``n_steps + 1`` samples including t = 0. The frequency-axis constants
    follow the half-spectrum convention used throughout: bin width
    1/(2T) and maximum frequency 1/(2 dt).
    """

    dt_fs: float
    total_fs: float

    def __post_init__(self):
        if self.dt_fs <= 0 or self.total_fs <= 0:
            raise ValueError("schedule times must be positive")
        if self.n_steps < 1:
            raise ValueError("schedule shorter than one step")

    @property
    def n_steps(self) -> int:
        return int(round(self.total_fs / self.dt_fs))

    @property
    def d_omega_thz(self) -> float:
        """Frequency bin width, 1/(2T) with T = n_steps * dt, in THz."""
        return 1e3 / (2.0 * self.n_steps * self.dt_fs)

    @property
    def omega_max_thz(self) -> float:
        """Nyquist frequency 1/(2 dt) in THz."""
        return 500.0 / self.dt_fs

    def times_fs(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt_fs

    def times_au(self) -> np.ndarray:
        return self.times_fs() * AU_PER_FS


@dataclass
class TimeTrace:
    """Grid-point densities rho(x, x; t_k) over a sampling schedule.

    ``densities`` has shape (n_points, n_steps + 1); one column per time
    sample, summing to one up to shot noise.
    """

    densities: np.ndarray
    schedule: SimulationSchedule
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.densities = np.asarray(self.densities, dtype=float)
        if self.densities.ndim != 2:
            raise ValueError("densities must be a (points, times) array")
        if self.densities.shape[1] != self.schedule.n_steps + 1:
            raise ValueError(
                f"densities have {self.densities.shape[1]} time samples, "
                f"schedule expects {self.schedule.n_steps + 1}"
            )

    @property
    def n_points(self) -> int:
        return self.densities.shape[0]

    def max_normalization_error(self) -> float:
        return float(np.max(np.abs(self.densities.sum(axis=0) - 1.0)))

    def check_normalization(self, tol: float):
        err = self.max_normalization_error()
        if err > tol:
            raise ValueError(f"trace normalization off by {err:.3e} (tol {tol:.3e})")
