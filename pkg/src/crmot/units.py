"""Physical constants and the interface-unit convention.

Everything inside the package is SI. Values cross the public boundary
(data files, scenario files, CSV, CLI) in the laboratory units below.
"""

from scipy.constants import physical_constants, h, hbar, k as k_B, atomic_mass, pi

mu_B = physical_constants["Bohr magneton"][0]  # J/T
mu_N = physical_constants["nuclear magneton"][0]  # J/T

# Bohr magneton in MHz/G, the natural unit of the Zeeman Hamiltonian.
MU_B_MHZ_PER_G = mu_B / h * 1e-4 * 1e-6

# interface unit -> multiplicative factor to SI
UNITS = {
    "MHz": 1e6,  # Hz
    "G": 1e-4,  # T
    "G/cm": 1e-2,  # T/m
    "mW/cm2": 10.0,  # W/m^2
    "um": 1e-6,  # m
    "mm": 1e-3,  # m
    "m": 1.0,
    "nm": 1e-9,  # m
    "uK": 1e-6,  # K
    "K": 1.0,
    "s": 1.0,
    "ms": 1e-3,
    "1/s": 1.0,
    "cm3/s": 1e-6,  # m^3/s
    "cm3": 1e-6,  # m^3
    "cm-3": 1e6,  # m^-3
    "u": atomic_mass,  # kg
    "m/s": 1.0,
}


def to_si(value, unit):
    """Convert ``value`` expressed in interface ``unit`` to SI."""
    try:
        return value * UNITS[unit]
    except KeyError:
        raise KeyError(f"unknown unit {unit!r}") from None


def from_si(value, unit):
    try:
        return value / UNITS[unit]
    except KeyError:
        raise KeyError(f"unknown unit {unit!r}") from None


__all__ = [
    "UNITS", "to_si", "from_si", "h", "hbar", "k_B", "mu_B", "mu_N",
    "atomic_mass", "pi", "MU_B_MHZ_PER_G",
]
