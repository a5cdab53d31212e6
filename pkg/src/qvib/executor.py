"""Ideal statevector execution of compiled circuits, shot sampling, an
optional two-qubit depolarizing channel, and a deterministic scheduler that
fans independent jobs over a simulated pool of quantum workers.

Results are a pure function of (jobs, circuits, global seed): per-job seeds
are derived by hashing the job key, so worker count and completion order
never change the merged output.
"""

from __future__ import annotations

import hashlib
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .gates import CNOT, Circuit, apply_gate

MAX_STATEVECTOR_WIDTH = 12
MAX_DENSITY_WIDTH = 6


@dataclass
class Statevector:
    amplitudes: np.ndarray
    width: int

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (2 ** self.width,):
            raise ValueError("amplitude count does not match width")
        norm = np.linalg.norm(self.amplitudes)
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"statevector norm {norm} is not 1")

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def simulate(circuit: Circuit, initial: Statevector | None = None) -> Statevector:
    """Exact statevector of the gate sequence applied to |0...0> (or to a
    supplied initial state)."""
    if circuit.width > MAX_STATEVECTOR_WIDTH:
        raise ValueError(f"circuit width {circuit.width} over the desk-scale limit")
    if initial is None:
        state = np.zeros(2 ** circuit.width, dtype=complex)
        state[0] = 1.0
    else:
        if initial.width != circuit.width:
            raise ValueError("initial state width mismatch")
        state = initial.amplitudes.copy()
    for gate in circuit.gates:
        state = apply_gate(state, gate, circuit.width)
    return Statevector(amplitudes=state, width=circuit.width)


@dataclass
class ShotHistogram:
    counts: np.ndarray
    shots: int

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if int(self.counts.sum()) != self.shots:
            raise ValueError("histogram counts do not sum to shots")

    def frequencies(self) -> np.ndarray:
        return self.counts / self.shots


def sample(state: Statevector, shots: int, seed: int) -> ShotHistogram:
    """Multinomial draw from |amplitudes|^2; identical inputs give identical
    histograms."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    probs = state.probabilities()
    probs = probs / probs.sum()
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(shots, probs)
    return ShotHistogram(counts=counts, shots=shots)


@dataclass(frozen=True)
class NoiseModel:
    """Two-qubit depolarizing channel applied after every CNOT.

    Single-qubit gate errors are neglected (they are an order of magnitude
    smaller on the hardware this emulates).
    """

    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("depolarizing probability must be within [0, 1]")


def _dense_operator(gate, width: int) -> np.ndarray:
    dim = 2 ** width
    op = np.zeros((dim, dim), dtype=complex)
    for k in range(dim):
        basis = np.zeros(dim, dtype=complex)
        basis[k] = 1.0
        op[:, k] = apply_gate(basis, gate, width)
    return op


def _pair_permutation(width: int, q_hi: int, q_lo: int) -> np.ndarray:
    """Basis permutation moving the (q_hi, q_lo) pair to the two most
    significant positions."""
    rest = [q for q in range(width - 1, -1, -1) if q not in (q_hi, q_lo)]
    perm = np.empty(2 ** width, dtype=np.int64)
    for k in range(2 ** width):
        b_hi = (k >> q_hi) & 1
        b_lo = (k >> q_lo) & 1
        packed = (b_hi << 1) | b_lo
        for q in rest:
            packed = (packed << 1) | ((k >> q) & 1)
        perm[packed] = k
    return perm


def apply_noise(circuit: Circuit, model: NoiseModel,
                initial: Statevector | None = None) -> np.ndarray:
    """Density-matrix execution with depolarizing noise after each CNOT;
    returns the measurement probabilities."""
    if circuit.width > MAX_DENSITY_WIDTH:
        raise ValueError(f"width {circuit.width} over the density-matrix limit")
    dim = 2 ** circuit.width
    if initial is None:
        psi = np.zeros(dim, dtype=complex)
        psi[0] = 1.0
    else:
        psi = initial.amplitudes
    rho = np.outer(psi, psi.conj())
    for gate in circuit.gates:
        op = _dense_operator(gate, circuit.width)
        rho = op @ rho @ op.conj().T
        if gate.kind == CNOT and model.p > 0.0:
            pair = gate.qubits
            perm = _pair_permutation(circuit.width, pair[0], pair[1])
            rest_dim = 2 ** (circuit.width - 2)
            rp = rho[np.ix_(perm, perm)].reshape(4, rest_dim, 4, rest_dim)
            reduced = np.einsum("aras->rs", rp)
            mixed = np.einsum("ab,rs->arbs", np.eye(4) / 4.0, reduced)
            rp = (1.0 - model.p) * rp + model.p * mixed
            inv = np.argsort(perm)
            rho = rp.reshape(dim, dim)[np.ix_(inv, inv)]
    return np.real(np.diag(rho)).copy()


@dataclass(frozen=True)
class JobSpec:
    """One unit of work: a (Hamiltonian, block, initial state, time point)
    circuit execution. Equal specs always produce identical results."""

    hamiltonian: str
    block: str
    dim: int
    gamma: int
    beta: int
    initial_state: int
    time_index: int
    shots: int

    @property
    def key(self) -> str:
        return (
            f"x{self.dim}:{self.block}:g{self.gamma}b{self.beta}"
            f":chi{self.initial_state}:k{self.time_index:04d}"
        )


def derive_seed(global_seed: int, key: str) -> int:
    digest = hashlib.sha256(f"{global_seed}:{key}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass
class JobResult:
    key: str
    seed: int
    shots: int
    probabilities: list | None = None
    counts: list | None = None
    error: str | None = None
    wall_time: float = 0.0

    def to_record(self) -> dict:
        rec = {"key": self.key, "seed": self.seed, "shots": self.shots,
               "wall_time": self.wall_time}
        if self.counts is not None:
            rec["counts"] = self.counts
        if self.probabilities is not None:
            rec["probabilities"] = self.probabilities
        if self.error is not None:
            rec["error"] = self.error
        return rec


def canonical_record(record: dict) -> dict:
    """Volatile fields (wall time) stripped for byte-stable comparison."""
    return {k: v for k, v in record.items() if k != "wall_time"}


def run_job(job: JobSpec, circuit: Circuit, global_seed: int,
            statevector: bool = False, noise: NoiseModel | None = None) -> JobResult:
    seed = derive_seed(global_seed, job.key)
    start = time.perf_counter()
    if noise is not None and noise.p > 0.0:
        probs = apply_noise(circuit, noise)
        state = None
    else:
        state = simulate(circuit)
        probs = state.probabilities()
    if statevector:
        result = JobResult(key=job.key, seed=seed, shots=0,
                           probabilities=np.round(probs, 15).tolist())
    else:
        if state is not None:
            hist = sample(state, job.shots, seed)
            counts = hist.counts
        else:
            rng = np.random.default_rng(seed)
            counts = rng.multinomial(job.shots, probs / probs.sum())
        result = JobResult(key=job.key, seed=seed, shots=job.shots,
                           counts=[int(c) for c in counts])
    result.wall_time = time.perf_counter() - start
    return result


def run_schedule(jobs, circuit_provider, workers: int = 1, global_seed: int = 0,
                 statevector: bool = False, noise: NoiseModel | None = None,
                 fault_hook=None, skip_keys=()) -> dict:
    """Execute every job exactly once on a bounded worker pool.

    ``circuit_provider(job)`` must be a pure function returning th e circuit
    for a job. The merged result map depends only on (jobs, circuits, global
    seed); worker count and completion order do not affect it. A failing job
    is retried once, then reported failed without touching its siblings.
    """
    keys = [j.key for j in jobs]
    if len(set(keys)) != len(keys):
        raise ValueError("job keys are not unique")
    skip = set(skip_keys)
    pending = [j for j in jobs if j.key not in skip]

    def attempt(job: JobSpec) -> JobResult:
        last = None
        for trial in range(2):
            try:
                if fault_hook is not None:
                    fault_hook(job.key, trial)
                return run_job(job, circuit_provider(job), global_seed,
                               statevector=statevector, noise=noise)
            except Exception as exc:  # noqa: BLE001 - reported per job
                last = exc
        return JobResult(key=job.key, seed=derive_seed(global_seed, job.key),
                         shots=job.shots, error=str(last))

    results = {}
    if workers <= 1:
        for job in pending:
            results[job.key] = attempt(job)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for res in pool.map(attempt, pending):
                results[res.key] = res
    return results
