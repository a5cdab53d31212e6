"""Schmidt decomposition of states and potential propagators into 1-D
channels, and assembly of the effective 1-D Hamiltonians the distributed
workers propagate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import AU_PER_FS, HBAR
from .grid import PotentialSurface


class ChannelExtractionError(ValueError):
    """A channel factor cannot be turned into an effective potential."""


def _phase_fix(left: np.ndarray, right: np.ndarray):
    """Make the first significant component of the left vector real positive.

    The compensating phase goes into the right vector so the product is
    unchanged; output is deterministic for a deterministic input.
    """
    idx = np.argmax(np.abs(left) > 1e-12 * np.max(np.abs(left)))
    phase = left[idx] / abs(left[idx])
    return left / phase, right * phase


@dataclass
class SchmidtWavepacket:
    """Rank-eta bipartite factorization psi = sum_a w_a L[:,a] R[:,a]^T."""

    left_vectors: np.ndarray
    right_vectors: np.ndarray
    weights: np.ndarray

    @property
    def rank(self) -> int:
        return self.weights.size

    def reconstruct(self) -> np.ndarray:
        return (self.left_vectors * self.weights) @ self.right_vectors.T

    def orthonormality_error(self) -> float:
        eyel = self.left_vectors.conj().T @ self.left_vectors
        eyer = self.right_vectors.conj().T @ self.right_vectors
        eye = np.eye(self.rank)
        return float(max(np.max(np.abs(eyel - eye)), np.max(np.abs(eyer - eye))))


def schmidt_decompose(psi: np.ndarray, tol: float = 1e-12) -> SchmidtWavepacket:
    """Bipartite factorization of a normalized 2-D state.

    The rank is the smallest count whose discarded weight satisfies
    sum of squares <= tol^2; the reconstruction error is then <= tol.
    """
    psi = np.asarray(psi, dtype=complex)
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"state norm {norm} is not 1")
    u, s, vh = np.linalg.svd(psi, full_matrices=False)
    tail = np.sqrt(np.cumsum(s[::-1] ** 2))[::-1]
    keep = int(np.sum(tail > tol))
    keep = max(keep, 1)
    left = u[:, :keep].copy()
    right = vh[:keep, :].T.copy()
    for a in range(keep):
        left[:, a], right[:, a] = _phase_fix(left[:, a], right[:, a])
    return SchmidtWavepacket(left_vectors=left, right_vectors=right, weights=s[:keep].copy())


def extract_effective_potential(factor: np.ndarray, dt_au: float):
    """Split a channel factor into a real log-amplitude and an effective
    potential: factor = exp(log_amp) * exp(-i V_eff dt / 2 hbar).

    Phases are unwrapped along the grid; a channel whose phase needs a
    2-pi correction across a near-zero node is rejected, since the branch
    there is not determined by the data.
    """
    factor = np.asarray(factor, dtype=complex)
    mags = np.abs(factor)
    if np.any(mags <= 1e-14):
        raise ChannelExtractionError("channel factor has a (near-)zero entry")
    theta_raw = np.angle(factor)
    theta = np.unwrap(theta_raw)
    corrections = theta - theta_raw
    nodes = mags < 1e-6 * np.max(mags)
    jump_at = np.flatnonzero(np.abs(np.diff(corrections)) > 1e-9)
    for i in jump_at:
        if nodes[i] or nodes[i + 1]:
            raise ChannelExtractionError("phase unwrap crosses a near-zero node")
    log_amp = np.log(mags)
    v_eff = -(2.0 * HBAR / dt_au) * theta
    return log_amp, v_eff


@dataclass
class PotentialChannelSet:
    """Channels of the half-step potential propagator exp(-i V dt / 2 hbar).

    Singular weights are absorbed symmetrically (sqrt into each factor), so
    the propagator is sum_b factors1[:, b] (x) factors2[:, b]. Effective
    potentials and log-amplitudes are extracted per channel and dimension.
    """

    factors1: np.ndarray
    factors2: np.ndarray
    singular_values: np.ndarray
    dt_fs: float
    tol: float
    log_amp1: np.ndarray = field(init=False)
    log_amp2: np.ndarray = field(init=False)
    v_eff1: np.ndarray = field(init=False)
    v_eff2: np.ndarray = field(init=False)

    def __post_init__(self):
        dt_au = self.dt_fs * AU_PER_FS
        cols = []
        for fac in (self.factors1, self.factors2):
            la = np.empty(fac.shape, dtype=float)
            ve = np.empty(fac.shape, dtype=float)
            for b in range(self.rank):
                la[:, b], ve[:, b] = extract_effective_potential(fac[:, b], dt_au)
            cols.append((la, ve))
        self.log_amp1, self.v_eff1 = cols[0]
        self.log_amp2, self.v_eff2 = cols[1]

    @property
    def rank(self) -> int:
        return self.singular_values.size

    @property
    def dt_au(self) -> float:
        return self.dt_fs * AU_PER_FS

    def reconstruct(self) -> np.ndarray:
        return self.factors1 @ self.factors2.T

    def log_amp_max_deviation(self) -> float:
        """How far the factors are from unit modulus (0 for a separable V)."""
        return float(max(np.max(np.abs(self.log_amp1)), np.max(np.abs(self.log_amp2))))

    def factors(self, dim: int) -> np.ndarray:
        return self.factors1 if dim == 1 else self.factors2

    def v_eff(self, dim: int) -> np.ndarray:
        return self.v_eff1 if dim == 1 else self.v_eff2

    def to_json_dict(self) -> dict:
        return {
            "rank": self.rank,
            "dt_fs": self.dt_fs,
            "tol": self.tol,
            "singular_values": self.singular_values.tolist(),
            "log_amp_max_deviation": self.log_amp_max_deviation(),
            "factors1": {"re": self.factors1.real.tolist(), "im": self.factors1.imag.tolist()},
            "factors2": {"re": self.factors2.real.tolist(), "im": self.factors2.imag.tolist()},
            "v_eff1": self.v_eff1.tolist(),
            "v_eff2": self.v_eff2.tolist(),
        }


def factor_potential_propagator(surface: PotentialSurface, dt_fs: float,
                                tol: float = 1e-12) -> PotentialChannelSet:
    """Schmidt-decompose the elementwise propagator exp(-i V dt / 2 hbar).

    The channel count is the numerical Schmidt rank at ``tol`` (absolute
    Frobenius truncation error).
    """
    if dt_fs <= 0:
        raise ValueError("dt must be positive")
    v = surface.in_hartree()
    w = np.exp(-1j * v * (dt_fs * AU_PER_FS) / (2.0 * HBAR))
    u, s, vh = np.linalg.svd(w, full_matrices=False)
    tail = np.sqrt(np.cumsum(s[::-1] ** 2))[::-1]
    keep = max(int(np.sum(tail > tol)), 1)
    f1 = u[:, :keep] * np.sqrt(s[:keep])
    f2 = (vh[:keep, :].T) * np.sqrt(s[:keep])
    # When the propagator is mirror symmetric along an axis, its singular
    # vectors live in the even-parity subspace; projecting removes the
    # parity noise that weak channels pick up from the SVD (their vectors
    # are only determined to ~eps * s_max / s_b otherwise).
    if np.max(np.abs(w - w[::-1, :])) <= 1e-13:
        f1 = 0.5 * (f1 + f1[::-1, :])
    if np.max(np.abs(w - w[:, ::-1])) <= 1e-13:
        f2 = 0.5 * (f2 + f2[::-1, :])
    for b in range(keep):
        f1[:, b], f2[:, b] = _phase_fix(f1[:, b], f2[:, b])
    return PotentialChannelSet(
        factors1=f1, factors2=f2, singular_values=s[:keep].copy(),
        dt_fs=dt_fs, tol=tol,
    )


@dataclass
class EffectiveHamiltonian:
    """1-D Hamiltonian K + diag((V_gamma + V_beta)/2) for one channel pair."""

    matrix: np.ndarray
    dim: int
    gamma: int
    beta: int

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        scale = max(1.0, float(np.max(np.abs(self.matrix))))
        if np.max(np.abs(self.matrix - self.matrix.T)) > 1e-12 * scale:
            raise ValueError("effective Hamiltonian is not symmetric")

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def label(self) -> str:
        return f"x{self.dim}[g{self.gamma};b{self.beta}]"


def build_effective_hamiltonian(kinetic: np.ndarray, v_gamma: np.ndarray,
                                v_beta: np.ndarray, dim: int = 1,
                                gamma: int = 0, beta: int = 0) -> EffectiveHamiltonian:
    v_gamma = np.asarray(v_gamma, dtype=float)
    v_beta = np.asarray(v_beta, dtype=float)
    if v_gamma.shape != v_beta.shape or v_gamma.size != kinetic.shape[0]:
        raise ValueError("potential vectors do not match the kinetic matrix")
    h = kinetic.copy()
    h[np.diag_indices_from(h)] += 0.5 * (v_gamma + v_beta)
    return EffectiveHamiltonian(matrix=h, dim=dim, gamma=gamma, beta=beta)


def effective_family(channels: PotentialChannelSet, kinetic: np.ndarray,
                     dim: int) -> list[EffectiveHamiltonian]:
    """The full (gamma, beta) cross product of effective Hamiltonians for
    one dimension, gamma indexing the second half-step channel."""
    veff = channels.v_eff(dim)
    return [
        build_effective_hamiltonian(kinetic, veff[:, g], veff[:, b], dim=dim, gamma=g, beta=b)
        for g in range(channels.rank)
        for b in range(channels.rank)
    ]


def propagate_mps_step(wavepacket: SchmidtWavepacket, channels: PotentialChannelSet,
                       kinetic_propagators, renormalize: bool = True) -> np.ndarray:
    """One split-operator step through the channel decomposition.

    Applies, per dimension, second-half channel x kinetic propagator x
    first-half channel to every Schmidt vector and sums the (alpha, beta,
    gamma) cross product. Equals a dense symmetric-split step up to the
    channel truncation error. Returns the dense propagated state.
    """
    kp1, kp2 = kinetic_propagators
    n1, n2 = wavepacket.left_vectors.shape[0], wavepacket.right_vectors.shape[0]
    if channels.factors1.shape[0] != n1 or channels.factors2.shape[0] != n2:
        raise ValueError("channel set does not match wavepacket grids")
    if kp1.shape != (n1, n1) or kp2.shape != (n2, n2):
        raise ValueError("kinetic propagators do not match wavepacket grids")

    # stream[j][x, alpha, beta, gamma]: V_gamma * (Kprop @ (V_beta * phi_alpha))
    streams = []
    for vecs, fac, kp in (
        (wavepacket.left_vectors, channels.factors1, kp1),
        (wavepacket.right_vectors, channels.factors2, kp2),
    ):
        mid = np.einsum("xb,xa->xab", fac, vecs)
        n = vecs.shape[0]
        mid = (kp @ mid.reshape(n, -1)).reshape(n, vecs.shape[1], channels.rank)
        streams.append(np.einsum("xg,xab->xabg", fac, mid))

    out = np.einsum("a,iabg,jabg->ij", wavepacket.weights.astype(complex),
                    streams[0], streams[1])
    if renormalize:
        out = out / np.linalg.norm(out)
    return out
