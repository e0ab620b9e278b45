"""Closed-form maser figures of merit.

Quality factors are dimensionless, frequencies in GHz unless noted, times in
µs, volumes as labelled (crystal in mm³, resonator mode in cm³).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .constants import GAMMA_E_REFERENCE, H_PLANCK, HBAR, K_B, MU_0, NOISE_REFERENCE_K, gamma_e_si
from .errors import (
    AtOrAboveOscillation,
    DegenerateFit,
    InfiniteTemperature,
    ValidationError,
)

__all__ = [
    "ResonatorParams",
    "GainMedium",
    "MaserMetrics",
    "Estimate",
    "magnetic_q",
    "classify_regime",
    "calculated_gain_db",
    "calculated_bandwidth",
    "spin_temperature",
    "noise_temperature",
    "rise_time",
    "conversion_factor",
    "filling_factor",
    "coupling_from_mode_volume",
    "loaded_q",
    "evaluate",
]

SUBTHRESHOLD, AMPLIFIER, OSCILLATOR = "subthreshold", "amplifier", "oscillator"


def loaded_q(Q0: float, Qe: float) -> float:
    return 1.0 / (1.0 / Q0 + 1.0 / Qe)


@dataclass(frozen=True)
class ResonatorParams:
    f_c: float = 9.4056
    Q0: float = 2.2e4
    Qe: float = 2.2e4
    QL: float | None = None
    coupling_k: float = 1.0
    conversion_factor_lambda: float = 0.70  # mT/√W
    V_mode: float = 0.22  # cm³

    def __post_init__(self):
        if self.QL is None:
            object.__setattr__(self, "QL", loaded_q(self.Q0, self.Qe))
        for name in ("f_c", "Q0", "Qe", "QL", "coupling_k", "V_mode"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        if abs(1 / self.QL - (1 / self.Q0 + 1 / self.Qe)) > 1e-9 / self.QL:
            raise ValidationError("1/QL must equal 1/Q0 + 1/Qe")

    @property
    def omega_c(self) -> float:
        return 2 * math.pi * self.f_c * 1e9

    @property
    def kappa_c(self) -> float:
        """Total cavity loss rate ω_c/Q_L in s⁻¹."""
        return self.omega_c / self.QL


@dataclass(frozen=True)
class GainMedium:
    delta_n: float = 3.3e20  # m⁻³
    sigma_sq: float = 0.5
    eta: float = 0.027
    T2: float = 4.24  # µs
    V_crystal: float = 6.0  # mm³
    p_upper: float = 0.76
    p_lower: float = 0.12

    def __post_init__(self):
        if not 0 < self.sigma_sq <= 1:
            raise ValidationError("sigma_sq must be in (0, 1]")
        if not 0 < self.eta <= 1:
            raise ValidationError("eta must be in (0, 1]")
        if not self.T2 > 0:
            raise ValidationError("T2 must be positive")


@dataclass(frozen=True)
class MaserMetrics:
    Qm: float
    regime: str
    gain_db: float | None
    bandwidth_MHz: float | None
    T_spin: float
    T_noise: float
    noise_figure_db: float
    rise_time_us: float
    eta: float
    g_estimate: float

    def to_dict(self) -> dict:
        return asdict(self)


class Estimate(NamedTuple):
    value: float
    stderr: float


def magnetic_q(medium: GainMedium, gamma_e: float = GAMMA_E_REFERENCE) -> float:
    """Magnetic quality factor 1/(γ_e² μ₀ ħ Δn σ² η T₂); ``gamma_e`` is γ_e/2π in MHz/mT."""
    if medium.delta_n <= 0:
        return math.inf
    g = gamma_e_si(gamma_e)
    return 1.0 / (g**2 * MU_0 * HBAR * medium.delta_n * medium.sigma_sq * medium.eta * medium.T2 * 1e-6)


def classify_regime(Qm: float, Q0: float, Qe: float) -> str:
    """Amplifier if 1/Q0 < 1/Qm < 1/Q0 + 1/Qe; ties go to the lower regime."""
    if min(Qm, Q0, Qe) <= 0:
        raise ValidationError("quality factors must be positive")
    rate = 1.0 / Qm
    if rate <= 1.0 / Q0:
        return SUBTHRESHOLD
    if rate <= 1.0 / Q0 + 1.0 / Qe:
        return AMPLIFIER
    return OSCILLATOR


def calculated_gain_db(Qm: float, Q0: float, Qe: float) -> float:
    num = 1.0 / Qe - 1.0 / Q0 + 1.0 / Qm
    den = 1.0 / Qe + 1.0 / Q0 - 1.0 / Qm
    if den <= 0:
        raise AtOrAboveOscillation(f"Qm = {Qm:.6g} is at or beyond the oscillation threshold")
    if num == 0:
        return -math.inf
    return 20.0 * math.log10(abs(num) / den)


def calculated_bandwidth(Qm: float, Q0: float, Qe: float, f0: float) -> float:
    """Amplifier bandwidth in MHz for a centre frequency ``f0`` in GHz."""
    width = 1.0 / Q0 + 1.0 / Qe - 1.0 / Qm
    if width <= 0:
        raise AtOrAboveOscillation(f"Qm = {Qm:.6g} is at or beyond the oscillation threshold")
    return f0 * 1e3 * width


def spin_temperature(p_upper: float, p_lower: float, f_s: float) -> float:
    """Spin temperature (K) of a two-level pair at ``f_s`` GHz; negative under inversion."""
    total = p_upper + p_lower
    if total <= 0:
        raise ValidationError("populations must have a positive sum")
    x = (p_lower - p_upper) / total
    if x == 0:
        raise InfiniteTemperature("equal populations have infinite spin temperature")
    return H_PLANCK * f_s * 1e9 / (2.0 * K_B * math.atanh(x))


def noise_temperature(T_s: float, Qm: float, Q0: float, T_bath: float) -> tuple[float, float]:
    """Amplifier noise temperature (K) and noise figure (dB, 290 K reference)."""
    if Qm <= 0 or Q0 <= 0:
        raise ValidationError("quality factors must be positive")
    T_a = abs(T_s) + (Qm / Q0) * T_bath
    return T_a, 10.0 * math.log10(1.0 + T_a / NOISE_REFERENCE_K)


def rise_time(QL: float, f_c: float) -> float:
    """Resonator rise time 2Q_L/ω_c in µs."""
    if QL <= 0 or f_c <= 0:
        raise ValidationError("QL and f_c must be positive")
    return 2.0 * QL / (2 * math.pi * f_c * 1e9) * 1e6


def conversion_factor(
    omega1_list: Sequence[float],
    power_list: Sequence[float],
    gamma_e: float = GAMMA_E_REFERENCE,
) -> Estimate:
    """Power-to-field conversion factor Λ (mT/√W) from Rabi frequencies (rad/s).

    |B₁| = Ω₁/(√2 γ_e) for the spin-1 Rabi frequency; Λ is the slope of a
    through-origin fit of |B₁| against √P.
    """
    w = np.asarray(omega1_list, dtype=float)
    p = np.asarray(power_list, dtype=float)
    if w.shape != p.shape or w.size < 1:
        raise ValidationError("omega1_list and power_list must be non-empty and equal length")
    if np.any(p <= 0):
        raise ValidationError("powers must be positive")
    if w.size >= 2 and np.ptp(p) == 0:
        raise DegenerateFit("all powers are equal")
    b1 = w / (math.sqrt(2.0) * gamma_e_si(gamma_e) * 1e-3)  # mT
    x = np.sqrt(p)
    sxx = float(x @ x)
    slope = float(x @ b1) / sxx
    if w.size == 1:
        return Estimate(slope, 0.0)
    rss = float(np.sum((b1 - slope * x) ** 2))
    return Estimate(slope, math.sqrt(rss / (w.size - 1) / sxx))


def filling_factor(V_crystal: float, V_mode: float) -> float:
    """V_crystal (mm³) over V_mode (cm³)."""
    if V_crystal <= 0 or V_mode <= 0:
        raise ValidationError("volumes must be positive")
    return V_crystal * 1e-3 / V_mode


def coupling_from_mode_volume(V_mode: float, f_c: float, gamma_e: float = GAMMA_E_REFERENCE) -> float:
    """Single spin-photon coupling γ_e·sqrt(μ₀ħω_c/2V_mode) in rad/s."""
    if V_mode <= 0 or f_c <= 0:
        raise ValidationError("V_mode and f_c must be positive")
    omega = 2 * math.pi * f_c * 1e9
    return gamma_e_si(gamma_e) * math.sqrt(MU_0 * HBAR * omega / (2.0 * V_mode * 1e-6))


def evaluate(
    resonator: ResonatorParams,
    medium: GainMedium,
    *,
    gamma_e: float = GAMMA_E_REFERENCE,
    f_s: float | None = None,
    T_bath: float = 290.0,
    QL_rise: float | None = None,
) -> MaserMetrics:
    """Every closed-form metric for one resonator/gain-medium pair."""
    f_s = resonator.f_c if f_s is None else f_s
    Qm = magnetic_q(medium, gamma_e)
    regime = classify_regime(Qm, resonator.Q0, resonator.Qe)
    gain = bw = None
    if regime != OSCILLATOR:
        gain = calculated_gain_db(Qm, resonator.Q0, resonator.Qe)
        bw = calculated_bandwidth(Qm, resonator.Q0, resonator.Qe, resonator.f_c)
    T_s = spin_temperature(medium.p_upper, medium.p_lower, f_s)
    T_a, nf = noise_temperature(T_s, Qm, resonator.Q0, T_bath)
    return MaserMetrics(
        Qm=Qm,
        regime=regime,
        gain_db=gain,
        bandwidth_MHz=bw,
        T_spin=T_s,
        T_noise=T_a,
        noise_figure_db=nf,
        rise_time_us=rise_time(resonator.QL if QL_rise is None else QL_rise, resonator.f_c),
        eta=filling_factor(medium.V_crystal, resonator.V_mode),
        g_estimate=coupling_from_mode_volume(resonator.V_mode, resonator.f_c, gamma_e),
    )
