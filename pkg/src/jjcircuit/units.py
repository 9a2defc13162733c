"""Physical constants and unit conversions.

Internal conventions: capacitance in fF, inductance in pH, flux in units of
the flux quantum, charge in units of 2e, energies as E/h in GHz.
"""

import math

from scipy import constants as _c

E_CHARGE = _c.e
PLANCK = _c.h
HBAR = _c.hbar
PHI0 = _c.h / (2 * _c.e)
# resistance quantum h/4e^2
R_Q = _c.h / (4 * _c.e**2)

# (2e)^2 / (h * 1 fF), in GHz: multiplies an inverse capacitance in 1/fF
CHARGE_ENERGY = (2 * _c.e) ** 2 / (_c.h * 1e-15) / 1e9
# Phi0^2 / (h * 1 pH), in GHz: multiplies an inverse inductance in 1/pH
FLUX_ENERGY = PHI0**2 / (_c.h * 1e-12) / 1e9

# commutator [flux, charge] = i * HBAR_EFF in (Phi0, 2e) units
HBAR_EFF = 1.0 / (2 * math.pi)


def impedance_ohm(cinv: float, linv: float) -> float:
    """Characteristic impedance sqrt(L/C) in ohms from 1/fF and 1/pH entries."""
    return math.sqrt(cinv * 1e15 / (linv * 1e12))


def frequency_ghz(cinv: float, linv: float) -> float:
    """Oscillator frequency in GHz from inverse capacitance and inductance."""
    return HBAR_EFF * math.sqrt(CHARGE_ENERGY * cinv * FLUX_ENERGY * linv)


def phase_impedance(cinv: float, linv: float) -> float:
    """Dimensionless impedance 2e^2 Z / hbar (= pi Z / R_Q).

    This is the squared zero-point phase amplitude, i.e. the parameter for
    which <0|exp(i 2 pi a Phi/Phi0)|0> = exp(-a^2 z / 2).
    """
    return math.pi * impedance_ohm(cinv, linv) / R_Q
