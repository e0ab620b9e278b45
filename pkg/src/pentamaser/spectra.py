"""Field-swept trEPR spectra and angular rotation patterns.

Lines are located by sign-change bracketing of the transition frequency on a
fine field grid followed by Brent refinement. Each line carries the sign of
its population difference (negative = emissive) times the B1 transition
strength, and is broadened with a unit-area profile whose field width is the
frequency FWHM divided by the local slope |df/dB|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import brentq

from .errors import ValidationError
from .geometry import LabOrientation, WedgeMount, field_in_molecular_frame, site_frames
from .spin import (
    SPIN_OPERATORS,
    SpinSystem,
    build_hamiltonian,
    energy_levels,
    high_field_populations,
    transitions,
)

__all__ = [
    "SpectrumConfig",
    "SpectralLine",
    "Spectrum",
    "resonance_fields",
    "simulate_spectrum",
    "rotation_pattern",
    "resolved_positions",
]

_PAIRS = ((0, 1), (1, 2))
_FREQ_TOL_MHZ = 1e-3
_FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))


@dataclass(frozen=True)
class SpectrumConfig:
    mw_frequency: float = 9.4056
    field_min: float = 250.0
    field_max: float = 450.0
    n_points: int = 4001
    linewidth_fwhm: float = 64.73
    lineshape: str = "gaussian"
    grid_step: float = 0.1

    def __post_init__(self):
        if not self.mw_frequency > 0:
            raise ValidationError("mw_frequency must be positive")
        if not (self.field_max > self.field_min >= 0):
            raise ValidationError("need field_max > field_min >= 0")
        if self.n_points < 2:
            raise ValidationError("n_points must be at least 2")
        if not self.linewidth_fwhm > 0:
            raise ValidationError("linewidth_fwhm must be positive")
        if self.lineshape not in ("gaussian", "lorentzian"):
            raise ValidationError(f"unknown lineshape {self.lineshape!r}")
        if not 0 < self.grid_step <= 0.1:
            raise ValidationError("grid_step must be in (0, 0.1] mT")


@dataclass(frozen=True)
class SpectralLine:
    site_id: int
    transition: tuple[int, int]
    resonance_field: float
    signed_amplitude: float
    width_mT: float
    residual_MHz: float = 0.0

    @property
    def emissive(self) -> bool:
        return self.signed_amplitude < 0


@dataclass(frozen=True)
class Spectrum:
    field: NDArray[np.float64]
    amplitude: NDArray[np.float64]
    lines: tuple[SpectralLine, ...] = field(default_factory=tuple)
    theta: float | None = None

    def __post_init__(self):
        if len(self.field) != len(self.amplitude):
            raise ValidationError("field and amplitude axes differ in length")


def _unit(v) -> NDArray[np.float64]:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0 or abs(n - 1.0) > 1e-9:
        raise ValidationError("direction must be a unit vector")
    return v / n


def _pair_frequencies(system: SpinSystem, direction, fields) -> NDArray[np.float64]:
    """Adjacent-pair frequencies (MHz), shape (len(fields), 2)."""
    zeeman = system.gamma_e_over_2pi * np.einsum("k,kij->ij", direction, SPIN_OPERATORS)
    h0 = build_hamiltonian(system, np.zeros(3))
    stack = h0[None, :, :] + np.asarray(fields)[:, None, None] * zeeman[None, :, :]
    w = np.linalg.eigvalsh(stack)
    return np.diff(w, axis=1)


def resonance_fields(
    system: SpinSystem,
    molecular_field_direction,
    mw_frequency: float,
    field_range: tuple[float, float],
    grid_step: float = 0.1,
) -> list[tuple[tuple[int, int], float]]:
    """Fields (mT) where an adjacent-level transition matches ``mw_frequency`` (GHz)."""
    if not mw_frequency > 0:
        raise ValidationError("mw_frequency must be positive")
    d = _unit(molecular_field_direction)
    lo, hi = map(float, field_range)
    n = max(int(math.ceil((hi - lo) / grid_step)), 1) + 1
    grid = np.linspace(lo, hi, n)
    f_mw = mw_frequency * 1e3
    detune = _pair_frequencies(system, d, grid) - f_mw

    found = []
    for p, pair in enumerate(_PAIRS):
        col = detune[:, p]
        found += [(pair, float(grid[i])) for i in np.flatnonzero(col == 0)]
        for i in np.flatnonzero(col[:-1] * col[1:] < 0):
            g = lambda x, p=p: _pair_frequencies(system, d, [x])[0, p] - f_mw
            b = brentq(g, grid[i], grid[i + 1], xtol=1e-12, rtol=1e-15, maxiter=200)
            found.append((pair, float(b)))
    found.sort(key=lambda item: item[1])
    return found


def _profile(x, centre, fwhm, shape):
    if shape == "gaussian":
        s = fwhm * _FWHM_TO_SIGMA
        return np.exp(-0.5 * ((x - centre) / s) ** 2) / (s * math.sqrt(2 * math.pi))
    hw = 0.5 * fwhm
    return hw / (math.pi * ((x - centre) ** 2 + hw**2))


def _site_lines(config, system, frame, theta) -> list[SpectralLine]:
    d = field_in_molecular_frame(LabOrientation(theta, 1.0), frame)
    t = math.radians(theta)
    b1 = frame.rotation @ np.array([-math.sin(t), math.cos(t), 0.0])
    lines = []
    for pair, b in resonance_fields(
        system, d, config.mw_frequency, (config.field_min, config.field_max), config.grid_step
    ):
        levels = energy_levels(system, b * d)
        pops = high_field_populations(system, levels)
        tr = transitions(levels, pops, b1)[pair[0]]
        # Hellmann-Feynman slope of the transition frequency (MHz/mT)
        s_d = np.einsum("k,kij->ij", d, SPIN_OPERATORS)
        v = levels.eigenvectors
        slope = system.gamma_e_over_2pi * float(
            np.real(v[:, pair[1]].conj() @ s_d @ v[:, pair[1]])
            - np.real(v[:, pair[0]].conj() @ s_d @ v[:, pair[0]])
        )
        width = config.linewidth_fwhm / max(abs(slope), 1e-12)
        lines.append(
            SpectralLine(
                site_id=frame.site_id,
                transition=pair,
                resonance_field=b,
                signed_amplitude=tr.population_difference * tr.matrix_element_sq,
                width_mT=width,
                residual_MHz=tr.frequency - config.mw_frequency * 1e3,
            )
        )
    return lines


def simulate_spectrum(
    config: SpectrumConfig,
    system: SpinSystem,
    mount: WedgeMount,
    theta: float,
) -> Spectrum:
    """Spectrum from both doping sites at goniometer angle ``theta`` (degrees)."""
    axis = np.linspace(config.field_min, config.field_max, config.n_points)
    amplitude = np.zeros_like(axis)
    lines: list[SpectralLine] = []
    for frame in site_frames(mount):
        for line in _site_lines(config, system, frame, theta):
            lines.append(line)
            amplitude += line.signed_amplitude * _profile(
                axis, line.resonance_field, line.width_mT, config.lineshape
            )
    lines.sort(key=lambda ln: (ln.resonance_field, ln.site_id))
    return Spectrum(field=axis, amplitude=amplitude, lines=tuple(lines), theta=theta)


def rotation_pattern(
    config: SpectrumConfig,
    system: SpinSystem,
    mount: WedgeMount,
    theta_list: Iterable[float],
) -> dict[float, Spectrum]:
    thetas = [float(t) for t in theta_list]
    if not thetas:
        raise ValidationError("theta list must not be empty")
    return {t: simulate_spectrum(config, system, mount, t) for t in thetas}


def resolved_positions(lines: Sequence[SpectralLine], tolerance_mT: float = 1e-3) -> list[float]:
    """Distinct line positions after merging lines closer than ``tolerance_mT``."""
    positions: list[float] = []
    for b in sorted(ln.resonance_field for ln in lines):
        if not positions or b - positions[-1] > tolerance_mT:
            positions.append(b)
    return positions
