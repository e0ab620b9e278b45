"""Semiclassical driven Maxwell-Bloch dynamics of a cavity coupled to a spin ensemble.

Equations of motion in the frame rotating at the drive frequency ω_d::

    da/dt  = -iV - (κ_c + iΔ_c) a - i g S₋
    dS₋/dt = -(κ_s + iΔ_s) S₋ + 2i g a S_z
    dS_z/dt = i g (a* S₋ - a S₊) - γ S_z

with Δ_c = ω_c - ω_d and Δ_s = ω_s - ω_d. Rates are given in SI (s⁻¹) and
times in µs. Internally the state is rescaled exactly to a/√N, S₋/N, S_z/N
with N = max(|N₀|, 1) so that all variables stay O(1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import solve_ivp, trapezoid

from .constants import HBAR
from .errors import StepSizeUnderflow, ValidationError

__all__ = [
    "MaxwellBlochParams",
    "SystemState",
    "Trajectory",
    "GainTrace",
    "drive_strength",
    "output_power",
    "photon_number",
    "integrate",
    "amplifier_gain_trace",
    "oscillator_burst",
    "burst_detected",
    "seed_photon_level",
    "burst_energy",
    "inversion_sweep",
    "threshold_inversion",
    "burst_onset",
    "steady_state_amplitude",
    "rabi_damping_rate",
    "rabi_transient",
]

@dataclass(frozen=True)
class MaxwellBlochParams:
    """Model parameters; angular frequencies in rad/s, rates in s⁻¹.

    ``V`` is the drive in photon-amplitude units (s⁻¹), ``N0`` the initial
    collective inversion S_z(0).
    """

    omega_s: float
    omega_c: float
    omega_d: float
    g: float
    kappa_c: float
    kappa_s: float
    gamma: float
    V: float = 0.0
    N0: float = 0.0
    coupling_k: float = 1.0

    def __post_init__(self):
        for name in ("g", "kappa_c", "kappa_s", "gamma", "V"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValidationError(f"{name} must be finite and non-negative, got {value}")
        if not math.isfinite(self.N0):
            raise ValidationError("N0 must be finite")
        if not self.coupling_k > 0:
            raise ValidationError("coupling_k must be positive")

    @classmethod
    def from_device(
        cls,
        *,
        f_c: float,
        QL: float,
        T2: float,
        g: float,
        gamma: float,
        N0: float,
        p_in: float = 0.0,
        f_s: float | None = None,
        f_d: float | None = None,
        coupling_k: float = 1.0,
    ) -> "MaxwellBlochParams":
        """Build from engineering quantities (GHz, µs, W).

        κ_c = ω_c/Q_L, κ_s = 2/T₂ and V follows from the input power.
        """
        omega_c = 2 * math.pi * f_c * 1e9
        omega_s = omega_c if f_s is None else 2 * math.pi * f_s * 1e9
        omega_d = omega_c if f_d is None else 2 * math.pi * f_d * 1e9
        kappa_c = omega_c / QL
        return cls(
            omega_s=omega_s,
            omega_c=omega_c,
            omega_d=omega_d,
            g=g,
            kappa_c=kappa_c,
            kappa_s=2.0 / (T2 * 1e-6),
            gamma=gamma,
            V=drive_strength(p_in, kappa_c, omega_c),
            N0=N0,
            coupling_k=coupling_k,
        )


@dataclass(frozen=True)
class SystemState:
    a: complex = 0j
    s_minus: complex = 0j
    s_z: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(x) for x in (self.a.real, self.a.imag, self.s_minus.real, self.s_minus.imag, self.s_z)):
            raise ValidationError("state components must be finite")


@dataclass(frozen=True)
class Trajectory:
    t: NDArray[np.float64]  # µs
    a: NDArray[np.complex128]
    s_minus: NDArray[np.complex128]
    s_z: NDArray[np.float64]
    p_out: NDArray[np.float64]  # W
    metadata: dict = field(default_factory=dict)

    @property
    def photons(self) -> NDArray[np.float64]:
        return np.abs(self.a) ** 2

    def state(self, index: int) -> SystemState:
        return SystemState(complex(self.a[index]), complex(self.s_minus[index]), float(self.s_z[index]))


@dataclass(frozen=True)
class GainTrace:
    gain_db: NDArray[np.float64]
    peak_db: float
    duration_us: float
    plateau_db: float


def drive_strength(p_in: float, kappa_c: float, omega_c: float) -> float:
    """V = sqrt(P_in κ_c / ħω_c) in s⁻¹."""
    if p_in < 0 or kappa_c <= 0 or omega_c <= 0:
        raise ValidationError("p_in must be >= 0 and kappa_c, omega_c positive")
    return math.sqrt(p_in * kappa_c / (HBAR * omega_c))


def output_power(photons: ArrayLike, kappa_c: float, omega_c: float, coupling_k: float = 1.0):
    """P_out = n ħω_c κ_c k/(1 + k)."""
    if coupling_k <= 0:
        raise ValidationError("coupling_k must be positive")
    return np.asarray(photons) * HBAR * omega_c * kappa_c * coupling_k / (1.0 + coupling_k)


def photon_number(p_out: ArrayLike, kappa_c: float, omega_c: float, coupling_k: float = 1.0):
    """Inverse of :func:`output_power`: n = P_out (1 + k)/(ħω_c κ_c k)."""
    if coupling_k <= 0:
        raise ValidationError("coupling_k must be positive")
    return np.asarray(p_out) * (1.0 + coupling_k) / (HBAR * omega_c * kappa_c * coupling_k)


def _rhs(params: MaxwellBlochParams, scale: float) -> Callable:
    us = 1e-6
    root = math.sqrt(scale)
    v = params.V * us / root
    G = params.g * root * us
    kc = (params.kappa_c + 1j * (params.omega_c - params.omega_d)) * us
    ks = (params.kappa_s + 1j * (params.omega_s - params.omega_d)) * us
    gam = params.gamma * us

    def f(t, y):
        alpha = y[0] + 1j * y[1]
        sigma = y[2] + 1j * y[3]
        z = y[4]
        da = -1j * v - kc * alpha - 1j * G * sigma
        ds = -ks * sigma + 2j * G * alpha * z
        dz = -2.0 * G * (alpha.conjugate() * sigma).imag - gam * z
        return [da.real, da.imag, ds.real, ds.imag, dz]

    return f


def integrate(
    params: MaxwellBlochParams,
    t_span: float,
    initial: SystemState | None = None,
    *,
    rtol: float = 1e-8,
    atol: float = 1e-14,
    n_points: int = 2000,
    method: str = "DOP853",
) -> Trajectory:
    """Integrate the equations of motion over ``[0, t_span]`` µs.

    ``initial`` defaults to an empty cavity, no coherence and S_z = N₀.
    Results are sampled from the dense-output interpolant on a uniform grid.
    """
    if not t_span > 0:
        raise ValidationError("t_span must be positive")
    if not 0 < rtol <= 1e-6:
        raise ValidationError("rtol must be in (0, 1e-6]")
    if n_points < 2:
        raise ValidationError("n_points must be at least 2")
    if initial is None:
        initial = SystemState(0j, 0j, params.N0)
    scale = max(abs(params.N0), abs(initial.s_z), 1.0)
    root = math.sqrt(scale)
    y0 = [
        initial.a.real / root,
        initial.a.imag / root,
        initial.s_minus.real / scale,
        initial.s_minus.imag / scale,
        initial.s_z / scale,
    ]
    t_eval = np.linspace(0.0, t_span, n_points)
    sol = solve_ivp(
        _rhs(params, scale),
        (0.0, t_span),
        y0,
        method=method,
        t_eval=t_eval,
        rtol=rtol,
        atol=atol,
    )
    if sol.status != 0:
        raise StepSizeUnderflow(f"integration failed: {sol.message}")
    y = sol.y
    a = (y[0] + 1j * y[1]) * root
    s = (y[2] + 1j * y[3]) * scale
    sz = y[4] * scale
    photons = np.abs(a) ** 2
    return Trajectory(
        t=sol.t,
        a=a,
        s_minus=s,
        s_z=sz,
        p_out=output_power(photons, params.kappa_c, params.omega_c, params.coupling_k),
        metadata={
            "nfev": int(sol.nfev),
            "method": method,
            "rtol": rtol,
            "atol": atol,
            "scale": scale,
            "initial": {"a": [initial.a.real, initial.a.imag], "s_minus": [initial.s_minus.real, initial.s_minus.imag], "s_z": initial.s_z},
        },
    )


def amplifier_gain_trace(
    traj: Trajectory,
    p_in: float,
    threshold_db: float = 1.0,
    reference_power: float | None = None,
) -> GainTrace:
    """Time-resolved gain 10·log₁₀(P_out/P_ref), with P_ref = P_in by default.

    Passing the spin-free cavity output as ``reference_power`` gives the
    on/off gain instead. ``duration_us`` counts samples at or above
    ``threshold_db`` times the grid step; ``plateau_db`` is the median gain
    over those samples (NaN if none).
    """
    if not p_in > 0:
        raise ValidationError("p_in must be positive")
    ref = p_in if reference_power is None else float(reference_power)
    if not ref > 0:
        raise ValidationError("reference_power must be positive")
    with np.errstate(divide="ignore"):
        gain = 10.0 * np.log10(np.asarray(traj.p_out) / ref)
    dt = float(traj.t[1] - traj.t[0]) if traj.t.size > 1 else 0.0
    above = gain >= threshold_db
    plateau = float(np.median(gain[above])) if above.any() else math.nan
    return GainTrace(
        gain_db=gain,
        peak_db=float(np.max(gain)),
        duration_us=float(np.count_nonzero(above) * dt),
        plateau_db=plateau,
    )


def burst_energy(traj: Trajectory) -> float:
    """Emitted energy ∫P_out dt in J."""
    return float(trapezoid(traj.p_out, traj.t * 1e-6))


def oscillator_burst(
    params: MaxwellBlochParams,
    t_span: float,
    seed_coherence: float | None = None,
    **kwargs,
) -> Trajectory:
    """Free-running (V = 0) evolution from an inverted, weakly seeded ensemble.

    The semiclassical equations cannot leave S₋ = 0 on their own, so the
    ensemble starts with |S₋(0)| = ``seed_coherence`` (default √N₀, the
    spontaneous-emission scale).
    """
    if params.V != 0:
        params = replace(params, V=0.0)
    seed = math.sqrt(abs(params.N0)) if seed_coherence is None else float(seed_coherence)
    if not seed > 0:
        raise ValidationError("seed_coherence must be positive")
    traj = integrate(params, t_span, SystemState(0j, complex(seed), params.N0), **kwargs)
    n = traj.photons
    k = int(np.argmax(n))
    meta = dict(traj.metadata)
    meta.update(
        seed_coherence=seed,
        seed_photons=seed_photon_level(params, seed),
        peak_photons=float(n[k]),
        peak_delay_us=float(traj.t[k]),
        peak_power_W=float(traj.p_out[k]),
        energy_J=burst_energy(traj),
    )
    meta["burst"] = bool(burst_detected(traj, params, seed))
    return replace(traj, metadata=meta)


def seed_photon_level(params: MaxwellBlochParams, seed: float) -> float:
    """Photon number the bare seed coherence would sustain, (g|S₋|/(κ_c+κ_s))²."""
    return (params.g * seed / (params.kappa_c + params.kappa_s)) ** 2


def burst_detected(traj: Trajectory, params: MaxwellBlochParams, seed: float, factor: float = 10.0) -> bool:
    return float(np.max(traj.photons)) >= factor * seed_photon_level(params, seed)


def threshold_inversion(params: MaxwellBlochParams) -> float:
    """Inversion above which S₋ = a = 0 is linearly unstable: κ_c κ_s/(2g²)."""
    if not params.g > 0:
        raise ValidationError("g must be positive")
    return params.kappa_c * params.kappa_s / (2.0 * params.g**2)


def burst_onset(
    params: MaxwellBlochParams,
    *,
    t_span: float | None = None,
    rel_tol: float = 1e-3,
    bracket: tuple[float, float] = (0.25, 4.0),
    **kwargs,
) -> float:
    """Smallest N₀ that produces a burst, located by bisection on :func:`oscillator_burst`.

    The window defaults to 400 slow-mode lifetimes 1/κ_eff with
    κ_eff = κ_cκ_s/(κ_c+κ_s), long enough to resolve the onset to ~1%.
    """
    n_th = threshold_inversion(params)
    if t_span is None:
        k_eff = params.kappa_c * params.kappa_s / (params.kappa_c + params.kappa_s)
        t_span = 400.0 / k_eff * 1e6

    def bursts(n0):
        p = replace(params, N0=n0, V=0.0)
        return oscillator_burst(p, t_span, n_points=400, rtol=1e-7, **kwargs).metadata["burst"]

    lo, hi = bracket[0] * n_th, bracket[1] * n_th
    if bursts(lo) or not bursts(hi):
        raise ValidationError("burst onset not bracketed")
    while hi - lo > rel_tol * lo:
        mid = 0.5 * (lo + hi)
        if bursts(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def inversion_sweep(
    params: MaxwellBlochParams,
    n0_values: ArrayLike,
    t_span: float | None = None,
    **kwargs,
) -> NDArray[np.float64]:
    """Burst energy (J) for each initial inversion in ``n0_values``.

    The window defaults to 1500 slow-mode lifetimes so that slow bursts just
    above threshold still complete.
    """
    if t_span is None:
        k_eff = params.kappa_c * params.kappa_s / (params.kappa_c + params.kappa_s)
        t_span = 1500.0 / k_eff * 1e6
    kwargs.setdefault("n_points", 3000)
    out = []
    for n0 in np.asarray(n0_values, dtype=float):
        p = replace(params, N0=float(n0), V=0.0)
        out.append(oscillator_burst(p, t_span, **kwargs).metadata["energy_J"])
    return np.asarray(out)


def steady_state_amplitude(params: MaxwellBlochParams, s_z: float) -> complex:
    """Driven steady state of a for a frozen inversion ``s_z`` (linear response)."""
    kc = params.kappa_c + 1j * (params.omega_c - params.omega_d)
    ks = params.kappa_s + 1j * (params.omega_s - params.omega_d)
    return -1j * params.V / (kc - 2.0 * params.g**2 * s_z / ks)


def rabi_damping_rate(omega_1: float, T2: float, epsilon: float) -> float:
    """Γ = 1/(2T₂) + εΩ₁/2π in s⁻¹ (Ω₁ in rad/s, T₂ in µs)."""
    return 1.0 / (2.0 * T2 * 1e-6) + epsilon * omega_1 / (2 * math.pi)


def rabi_transient(
    omega_1: float,
    gamma_damp: float,
    t_grid: ArrayLike,
    amplitude: float = 1.0,
    phase: float = 0.0,
    offset: float = 0.0,
) -> NDArray[np.float64]:
    """Damped Rabi nutation A·exp(-Γt)·cos(Ω₁t + φ) + c on ``t_grid`` (µs)."""
    if omega_1 < 0:
        raise ValidationError("omega_1 must be non-negative")
    t = np.asarray(t_grid, dtype=float) * 1e-6
    return amplitude * np.exp(-gamma_damp * t) * np.cos(omega_1 * t + phase) + offset
