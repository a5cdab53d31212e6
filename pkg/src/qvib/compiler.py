"""Unitary-to-circuit compilation over the {Rz, sqrt-X, H, CNOT} gate set.

Three constructions, all verified against a dense reference simulator:

* 2-qubit targets go through the Cartan double-coset decomposition
  (magic-basis form, following quant-ph/0308033): a fixed 3-CNOT interior
  with single-qubit dressing, so every compiled evolution shares one gate
  layout and only rotation angles change between time points.
* Block-diagonal 3-qubit targets diag(U0, U1) factor into
  (I x U) diag(D, D+) (I x V) by eigendecomposition of U0 U1+; U and V are
  KAK-compiled and the diagonal costs exactly 4 CNOTs and 4 Rz.
* A single Hadamard on the top qubit maps shuffled-basis dynamics onto
  grid-point measurements, and shuffled-basis delta states are prepared
  with single-qubit gates only.

In the 2-qubit matrices below the most significant bit is qubit 1.
"""

from __future__ import annotations

import hashlib
import math

import numpy as np
import scipy.linalg

from .gates import (
    Circuit,
    Gate,
    circuit_unitary,
    cnot,
    hadamard,
    phase_aligned_distance,
    rz,
    sx,
)

ATOL = 1e-10


class CompileError(RuntimeError):
    pass


# Magic basis: columns are Bell states up to phases; conjugation by it maps
# SU(2) x SU(2) onto SO(4).
_MAGIC = np.array(
    [[1, 1j, 0, 0],
     [0, 0, 1j, 1],
     [0, 0, 1j, -1],
     [1, -1j, 0, 0]]
) / math.sqrt(2.0)
_MAGIC_DAG = _MAGIC.conj().T

_SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)
# control = qubit 0 (lsb), target = qubit 1
_CNOT_C0T1 = np.array([[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]], dtype=complex)
# control = qubit 1 (msb), target = qubit 0
_CNOT_C1T0 = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def _require_unitary(mat: np.ndarray, dim: int, what: str):
    mat = np.asarray(mat, dtype=complex)
    if mat.shape != (dim, dim):
        raise CompileError(f"{what} must be {dim}x{dim}")
    if np.max(np.abs(mat.conj().T @ mat - np.eye(dim))) > ATOL:
        raise CompileError(f"{what} is not unitary within {ATOL}")
    return mat


def _rz_matrix(theta: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]])


def _ry_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    return np.array([[c, -s], [s, c]], dtype=complex)


# ---------------------------------------------------------------------------
# single-qubit lowering
# ---------------------------------------------------------------------------

def zyz_angles(u: np.ndarray):
    """Euler angles with u ~ Rz(phi) Ry(theta) Rz(lam) up to global phase."""
    u = np.asarray(u, dtype=complex)
    det = scipy.linalg.det(u)
    su = u / np.sqrt(det)
    theta = 2.0 * math.atan2(abs(su[1, 0]), abs(su[0, 0]))
    if abs(su[1, 0]) < 1e-12:
        phi = 2.0 * np.angle(su[1, 1])
        lam = 0.0
    elif abs(su[0, 0]) < 1e-12:
        phi = 2.0 * np.angle(su[1, 0])
        lam = 0.0
    else:
        phi = np.angle(su[1, 1]) + np.angle(su[1, 0])
        lam = np.angle(su[1, 1]) - np.angle(su[1, 0])
    return theta, phi, lam


def _wrap_angle(theta: float) -> float:
    return math.remainder(theta, 2.0 * math.pi)


def one_qubit_gates(u: np.ndarray, qubit: int) -> list:
    """Lower a 1-qubit unitary to Rz / sqrt-X gates (up to global phase).

    Identity collapses to nothing, pure z-rotations to one Rz, everything
    else to the five-gate Rz sx Rz sx Rz pattern with zero rotations
    dropped.
    """
    u = np.asarray(u, dtype=complex)
    if phase_aligned_distance(u, np.eye(2)) < 1e-12:
        return []
    theta, phi, lam = zyz_angles(u)
    if abs(u[0, 1]) < 1e-14 and abs(u[1, 0]) < 1e-14:
        angle = _wrap_angle(np.angle(u[1, 1]) - np.angle(u[0, 0]))
        return [rz(angle, qubit)] if abs(angle) > 1e-14 else []
    ops = []
    lam_w, mid_w, phi_w = _wrap_angle(lam), _wrap_angle(theta + math.pi), _wrap_angle(phi + math.pi)
    if abs(lam_w) > 1e-14:
        ops.append(rz(lam_w, qubit))
    ops.append(sx(qubit))
    if abs(mid_w) > 1e-14:
        ops.append(rz(mid_w, qubit))
    ops.append(sx(qubit))
    if abs(phi_w) > 1e-14:
        ops.append(rz(phi_w, qubit))
    return ops


# ---------------------------------------------------------------------------
# simultaneous diagonalization helpers
# ---------------------------------------------------------------------------

def _canonical_basis(cols: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis of span(cols), via pivoted QR of the
    projector (depends only on the subspace, not the incoming basis)."""
    proj = cols @ cols.conj().T
    q, _, _ = scipy.linalg.qr(proj, pivoting=True)
    basis = q[:, : cols.shape[1]]
    if np.max(np.abs(cols.imag)) == 0.0 and np.max(np.abs(basis.imag)) > 0:
        basis = basis.real
    return basis


def _sign_fix_columns(mat: np.ndarray) -> np.ndarray:
    out = mat.copy()
    for k in range(out.shape[1]):
        j = int(np.argmax(np.abs(out[:, k])))
        if out[j, k].real < 0:
            out[:, k] = -out[:, k]
    return out


def _cluster(values: np.ndarray, tol: float):
    order = np.argsort(values, kind="stable")
    groups = []
    current = [order[0]]
    for idx in order[1:]:
        if values[idx] - values[current[-1]] <= tol:
            current.append(idx)
        else:
            groups.append(current)
            current = [idx]
    groups.append(current)
    return groups


def _simdiag_symmetric_unitary(m: np.ndarray, tol: float = 1e-8):
    """Real orthogonal p and complex eigenvalues d with p^T m p = diag(d),
    for a complex symmetric unitary m (its real and imaginary parts commute).
    """
    x = 0.5 * (m.real + m.real.T)
    y = 0.5 * (m.imag + m.imag.T)
    xvals, xvecs = np.linalg.eigh(x)
    p = np.zeros_like(xvecs)
    eig = np.zeros(m.shape[0], dtype=complex)
    pos = 0
    for group in _cluster(xvals, tol):
        basis = xvecs[:, group]
        if len(group) > 1:
            sub = basis.T @ y @ basis
            yvals, rot = np.linalg.eigh(0.5 * (sub + sub.T))
            basis = basis @ rot
            for j, idx in enumerate(range(pos, pos + len(group))):
                eig[idx] = xvals[group[0]] + 1j * yvals[j]
        else:
            eig[pos] = xvals[group[0]] + 1j * float(basis[:, 0] @ y @ basis[:, 0])
        p[:, pos: pos + len(group)] = basis
        pos += len(group)
    p = _sign_fix_columns(p)
    if np.linalg.det(p) < 0:
        p[:, -1] = -p[:, -1]
        eig = eig.copy()
    return p, eig


def _match_columns(p: np.ndarray, d: np.ndarray, d_ref: np.ndarray):
    """Permute (p, d) so d lines up with d_ref entry by entry."""
    remaining = list(range(d.size))
    perm = []
    for target in d_ref:
        j = min(remaining, key=lambda k: abs(d[k] - target))
        if abs(d[j] - target) > 1e-6:
            raise CompileError("spectra do not match in coset extraction")
        perm.append(j)
        remaining.remove(j)
    p2 = p[:, perm]
    if np.linalg.det(p2) < 0:
        p2 = p2.copy()
        p2[:, -1] = -p2[:, -1]
    return p2, d[perm]


def _su2su2_from_tensor(u4: np.ndarray):
    """Split u4 = A (x) B (A on the msb qubit) into its SU(2) factors."""
    c1, c2 = u4[0:2, 0:2], u4[0:2, 2:4]
    c3, c4 = u4[2:4, 0:2], u4[2:4, 2:4]
    a1 = np.sqrt(complex((c1 @ c4.conj().T)[0, 0]))
    a2 = np.sqrt(complex(-(c2 @ c3.conj().T)[0, 0]))
    if not np.isclose(a1 * np.conj(a2), (c1 @ c2.conj().T)[0, 0], atol=1e-8):
        a2 = -a2
    a = np.array([[a1, a2], [-np.conj(a2), np.conj(a1)]])
    b = c2 / a[0, 1] if abs(a[0, 0]) < 1e-6 else c1 / a[0, 0]
    return a, b


def _extract_su2su2_prefactors(u: np.ndarray, v: np.ndarray):
    """Find A, B, C, D in SU(2) with (A x B) v (C x D) = u, for u, v in the
    same magic-basis double coset (same gamma spectrum)."""
    mu = _MAGIC_DAG @ u @ _MAGIC
    mv = _MAGIC_DAG @ v @ _MAGIC
    gu = mu @ mu.T
    gv = mv @ mv.T
    p, du = _simdiag_symmetric_unitary(gu)
    q, dv = _simdiag_symmetric_unitary(gv)
    q, _ = _match_columns(q, dv, du)
    g = p @ q.T
    h = mv.conj().T @ q @ p.T @ mu
    if np.max(np.abs(h.imag)) > 1e-6:
        raise CompileError("coset extraction produced a non-real transfer matrix")
    h = h.real
    ab = _MAGIC @ g @ _MAGIC_DAG
    cd = _MAGIC @ h @ _MAGIC_DAG
    a, b = _su2su2_from_tensor(ab)
    c, d = _su2su2_from_tensor(cd)
    return a, b, c, d


# ---------------------------------------------------------------------------
# two-qubit KAK compilation
# ---------------------------------------------------------------------------

def _interior_matrix(alpha: float, beta: float, delta: float) -> np.ndarray:
    """Dense matrix of the fixed 3-CNOT interior followed by a SWAP."""
    m = _CNOT_C0T1.copy()
    m = np.kron(_rz_matrix(delta), _ry_matrix(beta)) @ m
    m = _CNOT_C1T0 @ m
    m = np.kron(np.eye(2), _ry_matrix(alpha)) @ m
    m = _CNOT_C0T1 @ m
    return _SWAP @ m


def _interior_gates(alpha: float, beta: float, delta: float) -> list:
    ops = [cnot(0, 1)]
    ops += one_qubit_gates(_rz_matrix(delta), 1)
    ops += one_qubit_gates(_ry_matrix(beta), 0)
    ops.append(cnot(1, 0))
    ops += one_qubit_gates(_ry_matrix(alpha), 0)
    ops.append(cnot(0, 1))
    return ops


def kak_compile(target: np.ndarray, tol: float = 1e-9) -> Circuit:
    """Compile a 4x4 unitary into at most three CNOTs plus Rz/sqrt-X layers.

    The layout is fixed (three CNOTs with parameterized single-qubit
    dressing); only angles depend on the target. Equivalence up to global
    phase is verified against the dense reference before returning.
    """
    target = _require_unitary(target, 4, "kak target")
    su4 = target / scipy.linalg.det(target) ** 0.25
    swap_u = np.exp(1j * math.pi / 4.0) * (_SWAP @ su4)
    mu = _MAGIC_DAG @ swap_u @ _MAGIC
    _, gamma_eigs = _simdiag_symmetric_unitary(mu @ mu.T)
    angles = np.sort(np.angle(gamma_eigs))

    last_err = None
    for (i, j, k) in ((0, 1, 2), (0, 2, 1), (1, 2, 0), (0, 1, 3), (0, 3, 1), (2, 3, 0)):
        x, y, z = angles[i], angles[j], angles[k]
        alpha, beta, delta = (x + y) / 2.0, (x + z) / 2.0, (z + y) / 2.0
        try:
            v = _interior_matrix(alpha, beta, delta)
            a, b, c, d = _extract_su2su2_prefactors(swap_u, v)
        except CompileError as exc:
            last_err = exc
            continue
        ops = []
        ops += one_qubit_gates(c, 1)
        ops += one_qubit_gates(d, 0)
        ops += _interior_gates(alpha, beta, delta)
        ops += one_qubit_gates(a, 0)
        ops += one_qubit_gates(b, 1)
        circ = Circuit(width=2, gates=ops, metadata={"target_sha": unitary_checksum(target)})
        err = phase_aligned_distance(circuit_unitary(circ), target)
        if err <= tol:
            circ.metadata["distance"] = err
            return circ
        last_err = CompileError(f"kak verification failed at {err:.3e}")
    raise CompileError(f"kak compilation failed: {last_err}")


# ---------------------------------------------------------------------------
# block-diagonal 3-qubit compilation
# ---------------------------------------------------------------------------

class BlockUnitaryFactorization:
    """diag(U0, U1) = (I x U) diag(D, D+) (I x V) with D unit-modulus."""

    def __init__(self, u: np.ndarray, d: np.ndarray, v: np.ndarray):
        self.u = u
        self.d = d
        self.v = v

    def reconstruction_errors(self, u0: np.ndarray, u1: np.ndarray):
        dm = np.diag(self.d)
        return (
            float(np.linalg.norm(self.u @ dm @ self.v - u0)),
            float(np.linalg.norm(self.u @ dm.conj() @ self.v - u1)),
        )


def _canonical_eig_unitary(m: np.ndarray, cluster_tol: float = 1e-9):
    """Deterministic unitary eigendecomposition of a unitary matrix via a
    complex Schur form, with degenerate clusters re-based canonically."""
    t, qmat = scipy.linalg.schur(m, output="complex")
    eigs = np.diag(t).copy()
    order = np.argsort(np.round(np.angle(eigs), 12), kind="stable")
    qmat = qmat[:, order]
    eigs = eigs[order]
    angles = np.angle(eigs)
    pos = 0
    groups = _cluster(angles, cluster_tol)
    for group in groups:
        k = len(group)
        if k > 1:
            basis = _canonical_basis(qmat[:, pos: pos + k])
            qmat[:, pos: pos + k] = basis
        pos += k
    # per-column phase fix: largest component real positive
    for col in range(qmat.shape[1]):
        idx = int(np.argmax(np.abs(qmat[:, col])))
        phase = qmat[idx, col] / abs(qmat[idx, col])
        qmat[:, col] = qmat[:, col] / phase
    return eigs, qmat


def svd_block_factor(u0: np.ndarray, u1: np.ndarray) -> BlockUnitaryFactorization:
    """Factor the two blocks through the eigendecomposition of U0 U1+.

    D takes the principal square root of each eigenvalue of U0 U1+ (branch
    on (-pi, pi]); eigenvectors are ordered and phase-fixed deterministically
    so identical inputs give identical factors.
    """
    u0 = _require_unitary(u0, 4, "upper block")
    u1 = _require_unitary(u1, 4, "lower block")
    m = u0 @ u1.conj().T
    eigs, u = _canonical_eig_unitary(m)
    d = np.exp(0.5j * np.angle(eigs))
    v = (np.conj(d)[:, None]) * (u.conj().T @ u0)
    fact = BlockUnitaryFactorization(u=u, d=d, v=v)
    e0, e1 = fact.reconstruction_errors(u0, u1)
    if max(e0, e1) > 1e-9:
        raise CompileError(f"block factorization residuals {e0:.2e}, {e1:.2e}")
    return fact


def compile_diagonal(d: np.ndarray, tol: float = 1e-9) -> Circuit:
    """Exactly four CNOTs and four Rz realizing diag(D, D+) on three qubits.

    The Rz rotations sit on the top (block) qubit; CNOT controls walk the
    two lower qubits in Gray-code order so each rotation addresses one
    parity component of the phase profile.
    """
    d = np.asarray(d, dtype=complex)
    if d.shape == (4, 4):
        if np.max(np.abs(d - np.diag(np.diag(d)))) > ATOL:
            raise CompileError("diagonal compile needs a diagonal matrix")
        d = np.diag(d)
    if d.shape != (4,):
        raise CompileError("diagonal compile needs four phases")
    if np.max(np.abs(np.abs(d) - 1.0)) > ATOL:
        raise CompileError("diagonal entries must have unit modulus")
    phi = np.angle(d)
    c0 = (phi[0] + phi[1] + phi[2] + phi[3]) / 4.0
    c1 = (phi[0] - phi[1] + phi[2] - phi[3]) / 4.0
    c2 = (phi[0] + phi[1] - phi[2] - phi[3]) / 4.0
    c3 = (phi[0] - phi[1] - phi[2] + phi[3]) / 4.0
    gates = [
        rz(-2.0 * c0, 2), cnot(0, 2),
        rz(-2.0 * c1, 2), cnot(1, 2),
        rz(-2.0 * c3, 2), cnot(0, 2),
        rz(-2.0 * c2, 2), cnot(1, 2),
    ]
    circ = Circuit(width=3, gates=gates, metadata={"kind": "diagonal"})
    target = np.zeros((8, 8), dtype=complex)
    target[:4, :4] = np.diag(d)
    target[4:, 4:] = np.diag(np.conj(d))
    err = phase_aligned_distance(circuit_unitary(circ), target)
    if err > tol:
        raise CompileError(f"diagonal synthesis off by {err:.3e}")
    circ.metadata["distance"] = err
    return circ


def _embed_two_qubit(circ2: Circuit) -> list:
    """Lift gates on qubits (0, 1) into a 3-qubit circuit unchanged."""
    return list(circ2.gates)


def compile_block_diagonal(u0: np.ndarray, u1: np.ndarray, tol: float = 1e-8) -> Circuit:
    """Circuit for diag(U0, U1): KAK(V), the diagonal core, KAK(U).

    The top qubit selects the block and is touched only by the diagonal
    core (and by the readout Hadamard appended separately); at most
    3 + 4 + 3 CNOTs.
    """
    fact = svd_block_factor(u0, u1)
    v_circ = kak_compile(fact.v)
    u_circ = kak_compile(fact.u)
    d_circ = compile_diagonal(fact.d)
    gates = _embed_two_qubit(v_circ) + list(d_circ.gates) + _embed_two_qubit(u_circ)
    circ = Circuit(width=3, gates=gates, metadata={
        "kind": "block_diagonal",
        "target_sha": unitary_checksum(np.block([
            [u0, np.zeros((4, 4))], [np.zeros((4, 4)), u1]])),
    })
    target = np.zeros((8, 8), dtype=complex)
    target[:4, :4] = u0
    target[4:, 4:] = u1
    err = phase_aligned_distance(circuit_unitary(circ), target)
    if err > tol:
        raise CompileError(f"block-diagonal compile off by {err:.3e}")
    circ.metadata["distance"] = err
    return circ


def append_grid_basis_map(circ: Circuit) -> Circuit:
    """One Hadamard on the block qubit so measured bitstrings read out grid
    states one to one."""
    if circ.width != 3:
        raise CompileError("grid basis map applies to 3-qubit circuits")
    out = Circuit(circ.width, list(circ.gates), dict(circ.metadata))
    out.append(hadamard(2))
    return out


class PreparationError(ValueError):
    """Requested initial state needs entangling gates in the chosen basis."""


def prepare_delta_state(grid_index: int, basis: str = "shuffled", width: int = 3) -> Circuit:
    """Single-qubit circuit preparing a delta state at one grid point.

    For the 3-qubit register this works in the shuffled basis, where every
    grid delta is a product state: |->(x)|g> for the first half of the grid
    and |+>(x)|n-1-g> for the second. The transformed-grid basis would need
    entangling gates and is rejected. For a 2-qubit block register the
    delta states are block-local computational states.
    """
    n = 2 ** width
    if not 0 <= grid_index < n:
        raise ValueError(f"grid index {grid_index} outside 0..{n - 1}")
    if basis not in ("shuffled", "transformed"):
        raise ValueError(f"unknown basis {basis!r}")
    gates = []
    if width == 2:
        for q in range(2):
            if (grid_index >> q) & 1:
                gates += [sx(q), sx(q)]
        return Circuit(width=2, gates=gates, metadata={"prep": grid_index, "basis": basis})
    if width != 3:
        raise ValueError("delta preparation supports widths 2 and 3")
    if basis == "transformed":
        raise PreparationError(
            "grid delta states are entangled in the transformed basis; "
            "use the shuffled basis for product-state preparation"
        )
    half = n // 2
    if grid_index < half:
        low_bits = grid_index
        top = "minus"
    else:
        low_bits = n - 1 - grid_index
        top = "plus"
    for q in range(2):
        if (low_bits >> q) & 1:
            gates += [sx(q), sx(q)]
    gates.append(hadamard(2))
    if top == "minus":
        gates.append(rz(math.pi, 2))
    return Circuit(width=3, gates=gates, metadata={"prep": grid_index, "basis": basis})


def unitary_checksum(mat: np.ndarray) -> str:
    """Stable short fingerprint of a target unitary for circuit metadata."""
    data = np.ascontiguousarray(np.round(np.asarray(mat, dtype=complex), 12))
    return hashlib.sha256(data.tobytes()).hexdigest()[:16]
