"""Block diagonalization of mirror-symmetric 1-D Hamiltonians and the
bases used for state preparation and measurement mapping.

A grid Hamiltonian whose kinetic part is symmetric Toeplitz and whose
potential is mirror symmetric splits into two independent half-size blocks
under the parity transform built here. Three bases appear downstream:

* computational: the bitstrings a circuit measures;
* transformed grid: even/odd parity combinations of grid states, in which
  the Hamiltonian is block diagonal;
* shuffled: the transformed basis with the lower (odd) block reversed, so
  that a single Hadamard on the top qubit maps measurements one-to-one
  onto grid points and delta states become product states.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .channels import EffectiveHamiltonian


def mirror_signs(n: int) -> np.ndarray:
    """Parity signs per transformed index: +1 for the even (upper) half."""
    signs = np.ones(n, dtype=int)
    signs[n // 2:] = -1
    return signs


def givens_matrix(n: int) -> np.ndarray:
    """Orthogonal parity transform G with G^2 = I.

    Row i pairs grid point i with its mirror n-1-i: plus combinations in
    the upper half, minus combinations in the lower half.
    """
    if n % 2 != 0:
        raise ValueError("parity transform needs an even grid size")
    g = np.zeros((n, n))
    inv = 1.0 / np.sqrt(2.0)
    for i in range(n // 2):
        g[i, i] = inv
        g[i, n - 1 - i] = inv
    for i in range(n // 2, n):
        g[i, n - 1 - i] = inv
        g[i, i] = -inv
    return g


@dataclass
class BlockDecomposition:
    """Parity-transformed Hamiltonian and its two diagonal blocks."""

    h_tilde: np.ndarray
    upper: np.ndarray
    lower: np.ndarray
    offdiag_residual: float
    signs: np.ndarray


def givens_transform(h) -> BlockDecomposition:
    """Similarity-transform a Hamiltonian into (near-)block-diagonal form.

    Accepts an EffectiveHamiltonian or a plain symmetric matrix. The
    off-diagonal residual is zero exactly when the potential part is
    mirror symmetric.
    """
    mat = h.matrix if isinstance(h, EffectiveHamiltonian) else np.asarray(h, dtype=float)
    n = mat.shape[0]
    if n % 2 != 0:
        raise ValueError("block diagonalization needs an even dimension")
    g = givens_matrix(n)
    ht = g @ mat @ g
    half = n // 2
    upper = ht[:half, :half].copy()
    lower = ht[half:, half:].copy()
    residual = float(max(np.max(np.abs(ht[:half, half:])), np.max(np.abs(ht[half:, :half]))))
    return BlockDecomposition(h_tilde=ht, upper=upper, lower=lower,
                              offdiag_residual=residual, signs=mirror_signs(n))


def offdiag_from_potentials(v_gamma: np.ndarray, v_beta: np.ndarray) -> np.ndarray:
    """Expected upper-right off-diagonal block, entry (i, l).

    Nonzero only on the anti-diagonal l = n/2 - 1 - i mirror slot, where it
    equals a quarter of the summed mirror asymmetries of the two channel
    potentials.
    """
    n = v_gamma.size
    half = n // 2
    block = np.zeros((half, half))
    for i in range(half):
        m = n - 1 - i
        block[i, m - half] = 0.25 * ((v_gamma[m] - v_gamma[i]) + (v_beta[m] - v_beta[i]))
    return block


def block_spectra(dec: BlockDecomposition, residual_threshold: float = 1e-9):
    """Eigenvalues of the two blocks; refuses non-decoupled input."""
    if dec.offdiag_residual > residual_threshold:
        raise ValueError(
            f"off-diagonal residual {dec.offdiag_residual:.3e} exceeds "
            f"{residual_threshold:.3e}; blocks are not independent"
        )
    return np.linalg.eigvalsh(dec.upper), np.linalg.eigvalsh(dec.lower)


@dataclass
class BasisTable:
    """Rows mapping computational bitstrings to grid-state combinations.

    ``givens[k]`` and ``shuffled[k]`` hold the coefficients of grid states
    |x^g> in the k-th basis vector. The shuffled rows follow the sign
    convention with the larger grid index positive, which is what makes the
    single-Hadamard readout land on +|x^g|.
    """

    n: int
    bitstrings: list
    givens: np.ndarray
    shuffled: np.ndarray

    def readout_permutation(self) -> np.ndarray:
        """perm[k] = grid point measured as bitstring k after the in-circuit
        Hadamard on the top qubit."""
        half = self.n // 2
        hadamard_top = np.zeros((self.n, self.n))
        inv = 1.0 / np.sqrt(2.0)
        for k in range(self.n):
            hadamard_top[k % half, k] = inv
            hadamard_top[k % half + half, k] = inv if k < half else -inv
        r = hadamard_top.T @ self.shuffled
        perm = np.full(self.n, -1, dtype=int)
        for k in range(self.n):
            hits = np.flatnonzero(np.abs(np.abs(r[k]) - 1.0) < 1e-12)
            if hits.size != 1 or not np.allclose(np.delete(r[k], hits[0]), 0.0, atol=1e-12):
                raise ValueError("shuffled basis does not give a one-to-one grid readout")
            perm[k] = hits[0]
        return perm


def shuffled_basis_map(n: int) -> BasisTable:
    """Basis table for a half-block (n=4) or full (n=8) register.

    The shuffled basis differs from the transformed grid basis exactly by
    reversing the order of the lower-block states.
    """
    if n not in (4, 8):
        raise ValueError(f"basis tables are defined for n in (4, 8), got {n}")
    half = n // 2
    inv = 1.0 / np.sqrt(2.0)
    givens = np.zeros((n, n))
    for k in range(half):
        givens[k, k] = inv
        givens[k, n - 1 - k] = inv
    for k in range(half, n):
        givens[k, k] = inv
        givens[k, n - 1 - k] = -inv
    shuffled = givens.copy()
    shuffled[half:] = givens[half:][::-1]
    width = n.bit_length() - 1
    bitstrings = [format(k, f"0{width}b") for k in range(n)]
    return BasisTable(n=n, bitstrings=bitstrings, givens=givens, shuffled=shuffled)


def hadamard_grid_readout(counts: np.ndarray, table: BasisTable) -> np.ndarray:
    """Relabel measured bitstring counts onto grid points.

    The compiler appends the basis-mapping Hadamard in-circuit, so the
    measured distribution is already diagonal in the grid basis; this is a
    pure permutation and preserves total counts.
    """
    counts = np.asarray(counts)
    if counts.shape[0] != table.n:
        raise ValueError(f"counts length {counts.shape[0]} != basis size {table.n}")
    perm = table.readout_permutation()
    out = np.zeros_like(counts)
    out[perm] = counts
    return out


def basis_table_to_csv(table: BasisTable, path) -> None:
    """Human-readable dump of the three bases."""

    def combo(row):
        terms = []
        for g, c in enumerate(row):
            if abs(c) > 1e-12:
                sign = "+" if c > 0 else "-"
                terms.append(f"{sign}x{g}")
        return "(" + " ".join(terms).lstrip("+") + ")/sqrt2"

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["computational", "transformed_grid", "shuffled"])
        for k in range(table.n):
            writer.writerow([table.bitstrings[k], combo(table.givens[k]), combo(table.shuffled[k])])
