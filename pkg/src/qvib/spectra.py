"""From measured grid-point time traces to spectra, detected peaks,
reconstructed energy ladders and error metrics.

Frequency conventions: traces with n_steps = N hold N+1 samples and are
zero-padded to length 2N before the discrete Fourier transform, so the bin
width is 1/(2T) and the axis tops out at the Nyquist frequency 1/(2 dt).
Frequencies are handled in THz throughout.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .constants import kcalmol_from_thz
from .schedule import SimulationSchedule, TimeTrace


@dataclass
class SpectralDensity:
    """Per-grid-point transform I(omega; x) of the density trace.

    ``full`` holds all 2N complex bins; the non-negative half (bins
    0..N) is what downstream analysis consumes. The discrete bound
    |I| <= N+1 (each density sample is at most one) is asserted on
    construction.
    """

    full: np.ndarray
    schedule: SimulationSchedule
    dc_removed: bool = False
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        n_t = self.schedule.n_steps
        if self.full.shape[1] != 2 * n_t:
            raise ValueError("spectral density length must be twice the step count")
        bound = n_t + 1 + 1e-9
        if np.max(np.abs(self.full)) > bound:
            raise ValueError("spectral density violates the discrete amplitude bound")

    @property
    def n_bins(self) -> int:
        return self.schedule.n_steps + 1

    def half(self) -> np.ndarray:
        return self.full[:, : self.n_bins]

    def frequencies_thz(self) -> np.ndarray:
        return np.arange(self.n_bins) * self.schedule.d_omega_thz


def trace_fft(trace: TimeTrace, remove_dc: bool = False) -> SpectralDensity:
    """Discrete Fourier transform of each grid point's density series.

    Zero-pads to twice the step count so the bin width equals 1/(2T); uses
    the e^{+i omega t} sign convention. With ``remove_dc`` the per-point
    time mean is subtracted first (flagged on the result).
    """
    n_t = trace.schedule.n_steps
    if n_t < 8:
        raise ValueError("need at least 8 steps for a meaningful transform")
    rho = trace.densities
    if remove_dc:
        rho = rho - rho.mean(axis=1, keepdims=True)
    padded = np.zeros((rho.shape[0], 2 * n_t))
    padded[:, : n_t + 1] = rho
    full = np.conj(np.fft.fft(padded, axis=1))
    return SpectralDensity(full=full, schedule=trace.schedule,
                           dc_removed=remove_dc, provenance=dict(trace.provenance))


def parseval_residual(density: SpectralDensity, trace: TimeTrace) -> float:
    """Relative mismatch of sum_w |I|^2 against 2N * sum_t rho^2 per point."""
    rho = trace.densities
    if density.dc_removed:
        rho = rho - rho.mean(axis=1, keepdims=True)
    lhs = np.sum(np.abs(density.full) ** 2, axis=1)
    rhs = 2 * trace.schedule.n_steps * np.sum(rho**2, axis=1)
    scale = max(float(np.max(rhs)), 1e-300)
    return float(np.max(np.abs(lhs - rhs)) / scale)


@dataclass
class PowerSpectrum:
    """P(omega) = sum_x |I(omega; x)|^2 on the non-negative frequency half."""

    power: np.ndarray
    frequencies: np.ndarray
    schedule: SimulationSchedule
    provenance: list = field(default_factory=list)

    def __post_init__(self):
        if self.power.shape != self.frequencies.shape:
            raise ValueError("power and frequency axes disagree")
        if np.any(self.power < -1e-12):
            raise ValueError("negative spectral power")

    def bound(self, n_points: int) -> float:
        return n_points * (self.schedule.n_steps + 1.0) ** 2


def power_spectrum(density: SpectralDensity) -> PowerSpectrum:
    power = np.sum(np.abs(density.half()) ** 2, axis=0)
    return PowerSpectrum(power=power, frequencies=density.frequencies_thz(),
                         schedule=density.schedule,
                         provenance=[dict(density.provenance)])


def cumulate(spectra) -> PowerSpectrum:
    """Bin-wise sum over initial wavepackets (no thermal weights)."""
    spectra = list(spectra)
    if not spectra:
        raise ValueError("nothing to cumulate")
    first = spectra[0]
    total = first.power.copy()
    provenance = list(first.provenance)
    for sp in spectra[1:]:
        if sp.frequencies.shape != first.frequencies.shape or \
                np.max(np.abs(sp.frequencies - first.frequencies)) > 1e-9:
            raise ValueError("cannot cumulate spectra over different frequency axes")
        total += sp.power
        provenance.extend(sp.provenance)
    return PowerSpectrum(power=total, frequencies=first.frequencies.copy(),
                         schedule=first.schedule, provenance=provenance)


@dataclass(frozen=True)
class Peak:
    frequency: float
    height: float


def detect_peaks(spectrum: PowerSpectrum, floor: float = 0.02) -> list:
    """Local maxima above floor * max(P), excluding the DC bin.

    Peak frequencies are refined by 3-point parabolic interpolation; on a
    flat plateau the lowest-frequency bin wins.
    """
    if not 0.0 < floor < 1.0:
        raise ValueError("floor must be a relative threshold in (0, 1)")
    p = spectrum.power
    if p.size < 3 or np.max(p[1:]) <= 0:
        return []
    threshold = floor * float(np.max(p[1:]))
    d_omega = spectrum.schedule.d_omega_thz
    peaks = []
    for m in range(1, p.size - 1):
        if p[m] < threshold:
            continue
        if p[m] > p[m - 1] and p[m] >= p[m + 1]:
            denom = p[m - 1] - 2.0 * p[m] + p[m + 1]
            shift = 0.0 if abs(denom) < 1e-300 else 0.5 * (p[m - 1] - p[m + 1]) / denom
            shift = float(np.clip(shift, -0.5, 0.5))
            height = p[m] - 0.25 * (p[m - 1] - p[m + 1]) * shift
            peaks.append(Peak(frequency=(m + shift) * d_omega, height=float(height)))
    return peaks


# ---------------------------------------------------------------------------
# ladder reconstruction
# ---------------------------------------------------------------------------

@dataclass
class EnergyLadder:
    """Reconstructed eigenvalues (THz, ground pinned at zero) with
    per-level provenance."""

    levels_thz: np.ndarray
    provenance: list
    residual: float = 0.0

    def __post_init__(self):
        self.levels_thz = np.asarray(self.levels_thz, dtype=float)
        if self.levels_thz.size and abs(self.levels_thz[0]) > 1e-12:
            raise ValueError("ladder must be pinned at ground = 0")

    def in_kcalmol(self) -> np.ndarray:
        return np.array([kcalmol_from_thz(v) for v in self.levels_thz])


class LadderError(ValueError):
    """No level assignment consistent with the peaks within tolerance."""


def _merge_close(values, tol):
    out = []
    for v in sorted(values):
        if not out or v - out[-1] > tol:
            out.append(v)
    return out


def _gap_match_score(observed, weights, predicted, cap):
    if len(predicted) == 0:
        return math.inf
    pred = np.asarray(predicted)
    total = 0.0
    for obs, w in zip(observed, weights):
        total += w * min(float(np.min(np.abs(pred - obs))), cap)
    return total


def turnpike_levels(gaps, n_levels: int, tol: float, weights=None):
    """Recover level positions from pairwise gaps (ground pinned at zero).

    Interior levels are searched over the gap values and their complements
    relative to the span; the assignment minimizing the weighted mismatch
    between predicted and observed gap sets wins, with lexicographically
    smallest levels breaking ties.
    """
    gaps = sorted(float(g) for g in gaps)
    if not gaps:
        raise LadderError("no peaks to reconstruct from")
    if weights is None:
        weights = [1.0] * len(gaps)
    wsum = sum(weights)
    weights = [w / wsum for w in weights]
    span = gaps[-1]
    if n_levels < 2:
        return np.array([0.0])
    candidates = _merge_close(
        [g for g in gaps if tol / 4 < g < span - tol / 4]
        + [span - g for g in gaps if tol / 4 < span - g < span - tol / 4],
        tol / 4,
    )
    n_interior = n_levels - 2
    best = None
    cap = 4.0 * tol
    for combo in itertools.combinations(candidates, n_interior):
        levels = np.array([0.0, *combo, span])
        if np.any(np.diff(levels) <= tol / 4):
            continue
        predicted = [levels[j] - levels[i] for i in range(len(levels))
                     for j in range(i + 1, len(levels))]
        score = _gap_match_score(gaps, weights, predicted, cap)
        # mild pressure for predicted gaps to be visible among the observed
        obs = np.asarray(gaps)
        score += 0.1 * sum(min(float(np.min(np.abs(obs - p))), cap) for p in predicted) / len(predicted)
        key = (score, tuple(levels))
        if best is None or key < best[0]:
            best = (key, levels, score)
    if best is None:
        raise LadderError(f"no {n_levels}-level assignment for gaps {gaps}")
    _, levels, score = best
    if score > 2.0 * tol:
        raise LadderError(
            f"best {n_levels}-level assignment misses peaks by {score:.3g} "
            f"(tol {tol:.3g}); gaps {np.round(gaps, 4).tolist()}"
        )
    return levels


def _fold(freq: float, omega_max: float | None) -> float:
    """Alias a true frequency into the measurable [0, omega_max] window."""
    if omega_max is None:
        return freq
    period = 2.0 * omega_max
    r = math.fmod(freq, period)
    if r < 0:
        r += period
    return min(r, period - r)


def reconstruct_ladder(block_peaks: dict, full_peaks, tol: float,
                       levels_per_block: int = 4,
                       omega_max: float | None = None) -> EnergyLadder:
    """Assemble one dimension's ladder from per-block peak sets plus the
    full-register peak set.

    Each block ladder comes from a turnpike search of its own gaps; the
    blocks are then placed relative to each other by the offset (and block
    orientations) that best explain the full-register peaks, which alone
    contain inter-block gaps. Aliased gaps are folded into the measurable
    window before matching. The result is invariant under permutation of
    the peak lists.
    """
    if not block_peaks:
        raise LadderError("need at least one block peak set")
    names = sorted(block_peaks)
    block_levels = {}
    for name in names:
        peaks = block_peaks[name]
        freqs = [p.frequency for p in peaks]
        heights = [p.height for p in peaks]
        block_levels[name] = turnpike_levels(freqs, levels_per_block, tol, heights)

    if len(names) == 1:
        levels = block_levels[names[0]]
        prov = [f"{names[0]}[{i}]" for i in range(levels.size)]
        return EnergyLadder(levels_thz=levels, provenance=prov)
    if len(names) != 2:
        raise LadderError("ladder assembly supports one or two blocks")

    full_freqs = [p.frequency for p in full_peaks]
    full_heights = [p.height for p in full_peaks]
    if not full_freqs:
        raise LadderError("full-register peaks are required to anchor two blocks")
    hsum = sum(full_heights)
    full_w = [h / hsum for h in full_heights]

    a_name, b_name = names
    base = block_levels[a_name]
    other = block_levels[b_name]
    orientations = {
        name: (lv, np.round(lv[-1] - lv[::-1], 15))
        for name, lv in block_levels.items()
    }
    cap = 4.0 * tol
    best = None
    for ai, a_lv in enumerate(orientations[a_name]):
        for bi, b_lv in enumerate(orientations[b_name]):
            # candidate offsets from every unfolded full peak and level pair
            cands = []
            for p in full_freqs:
                preimages = {p}
                if omega_max is not None:
                    span_guess = a_lv[-1] + b_lv[-1] + 2 * omega_max
                    k = 1
                    while 2 * omega_max * k - p < span_guess:
                        preimages.add(2 * omega_max * k - p)
                        preimages.add(2 * omega_max * k + p)
                        k += 1
                for pf in preimages:
                    for ua in a_lv:
                        for lb in b_lv:
                            cands.extend((ua - lb + pf, ua - lb - pf))
            for delta in _merge_close(cands, tol / 8):
                union = np.concatenate([a_lv, b_lv + delta])
                union.sort()
                predicted = [union[j] - union[i] for i in range(union.size)
                             for j in range(i + 1, union.size)]
                folded = [_fold(g, omega_max) for g in predicted]
                score = _gap_match_score(full_freqs, full_w, folded, cap)
                key = (round(score, 12), ai, bi, round(delta, 9))
                if best is None or key < best[0]:
                    best = (key, a_lv, b_lv, delta, score)
    if best is None:
        raise LadderError("no inter-block offset explains the full-register peaks")
    _, a_lv, b_lv, delta, score = best
    if score > 2.0 * tol:
        raise LadderError(
            f"unmatched full-register peaks (best offset residual {score:.3g}, "
            f"tol {tol:.3g}): {np.round(full_freqs, 4).tolist()}"
        )
    tagged = [(v, f"{a_name}[{i}]") for i, v in enumerate(a_lv)]
    tagged += [(v + delta, f"{b_name}[{i}]") for i, v in enumerate(b_lv)]
    tagged.sort(key=lambda t: t[0])
    levels = np.array([t[0] for t in tagged])
    prov = [t[1] for t in tagged]
    return EnergyLadder(levels_thz=levels - levels[0], provenance=prov, residual=score)


def combine_mode_ladders(ladder1: EnergyLadder, ladder2: EnergyLadder) -> EnergyLadder:
    """All pairwise level sums: the separable product ladder of two modes."""
    tagged = [
        (a + b, f"x1[{i}]+x2[{j}]")
        for i, a in enumerate(ladder1.levels_thz)
        for j, b in enumerate(ladder2.levels_thz)
    ]
    tagged.sort(key=lambda t: t[0])
    return EnergyLadder(
        levels_thz=np.array([t[0] for t in tagged]),
        provenance=[t[1] for t in tagged],
        residual=max(ladder1.residual, ladder2.residual),
    )


def ladder_mae(recon: EnergyLadder, exact_thz: np.ndarray, k: int) -> float:
    """Mean absolute error (kcal/mol) over the first k levels, both ladders
    relative to their ground state."""
    exact = np.asarray(exact_thz, dtype=float)
    exact = exact - exact[0]
    if k > recon.levels_thz.size or k > exact.size:
        raise ValueError(f"k={k} exceeds available levels")
    diff = np.abs(recon.levels_thz[:k] - exact[:k])
    return float(kcalmol_from_thz(np.mean(diff)))


def wavepacket_error(quantum: TimeTrace, classical: TimeTrace) -> float:
    """Time-averaged RMS density difference between two traces.

    sqrt( dt/(N T) * sum_t sum_x |rho_c - rho_q|^2 ): densities are
    compared because the measured side only yields densities.
    """
    if quantum.densities.shape != classical.densities.shape:
        raise ValueError("traces have different shapes")
    if abs(quantum.schedule.dt_fs - classical.schedule.dt_fs) > 1e-12:
        raise ValueError("traces have different schedules")
    n_points = quantum.n_points
    n_steps = quantum.schedule.n_steps
    diff2 = np.sum((quantum.densities - classical.densities) ** 2)
    return float(math.sqrt(diff2 / (n_points * n_steps)))


# ---------------------------------------------------------------------------
# exports
# ---------------------------------------------------------------------------

def spectrum_to_csv(spectrum: PowerSpectrum, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frequency_thz", "power"])
        for f, p in zip(spectrum.frequencies, spectrum.power):
            writer.writerow([f"{f:.9g}", f"{p:.9g}"])


def ladder_to_json(ladder: EnergyLadder, path) -> None:
    doc = {
        "levels_thz": ladder.levels_thz.tolist(),
        "levels_kcalmol": ladder.in_kcalmol().tolist(),
        "provenance": ladder.provenance,
        "residual_thz": ladder.residual,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
