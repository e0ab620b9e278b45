"""Physical constants (CODATA, SI) and unit helpers.

Internal conventions: frequencies in MHz, fields in mT, times in µs for the
spin and spectrum code; SI elsewhere unless a name says otherwise.
"""

import math

from scipy import constants as _c

HBAR = _c.hbar
H_PLANCK = _c.h
K_B = _c.k
MU_0 = _c.mu_0

#: Electron gyromagnetic ratio over 2π used throughout the reference preset (MHz/mT).
GAMMA_E_REFERENCE = 28.0
#: CODATA value of |γ_e|/2π in MHz/mT.
GAMMA_E_CODATA = _c.physical_constants["electron gyromag. ratio in MHz/T"][0] / 1e3

GAMMA_E_PRESETS = {"reference": GAMMA_E_REFERENCE, "codata": GAMMA_E_CODATA}

NOISE_REFERENCE_K = 290.0


def gamma_e_si(gamma_e_over_2pi: float = GAMMA_E_REFERENCE) -> float:
    """Convert γ_e/2π in MHz/mT to γ_e in rad s⁻¹ T⁻¹."""
    return 2.0 * math.pi * gamma_e_over_2pi * 1e9


def dbm_to_watt(p_dbm: float) -> float:
    return 1e-3 * 10.0 ** (p_dbm / 10.0)


def watt_to_dbm(p_w: float) -> float:
    return 10.0 * math.log10(p_w / 1e-3)
