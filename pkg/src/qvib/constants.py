"""Physical constants and unit conversions.

All internal linear algebra runs in Hartree atomic units (hbar = 1,
electron mass = 1, Bohr lengths, Hartree energies). Femtoseconds, THz,
Angstrom, degrees and kcal/mol appear only at I/O boundaries; every
conversion factor used anywhere in the package is pinned here.
"""

import math

HBAR = 1.0

# CODATA-2018 values.
BOHR_PER_ANGSTROM = 1.0 / 0.529177210903
ANGSTROM_PER_BOHR = 0.529177210903
AU_PER_FS = 41.341373335182114      # atomic time units per femtosecond
FS_PER_AU = 1.0 / AU_PER_FS
KCALMOL_PER_HARTREE = 627.5094740631
HARTREE_PER_KCALMOL = 1.0 / KCALMOL_PER_HARTREE
THZ_PER_HARTREE = 6579.683920502    # E_h / h expressed in 10^12 Hz
HARTREE_PER_THZ = 1.0 / THZ_PER_HARTREE
PROTON_MASS_AU = 1836.15267343

DEG_PER_RAD = 180.0 / math.pi
RAD_PER_DEG = math.pi / 180.0


def thz_from_hartree(e_hartree):
    """Ordinary frequency nu = E/h in THz for an energy gap in Hartree."""
    return e_hartree * THZ_PER_HARTREE


def hartree_from_thz(nu_thz):
    return nu_thz * HARTREE_PER_THZ


def kcalmol_from_thz(nu_thz):
    """Energy of a spectral gap at frequency nu, in kcal/mol."""
    return nu_thz * HARTREE_PER_THZ * KCALMOL_PER_HARTREE
