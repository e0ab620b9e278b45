"""Pentacene triplet spin Hamiltonian, energy levels and sublevel populations.

All matrices are written in the zero-field basis ``{T_X, T_Y, T_Z}`` of the
molecular frame, where the spin-1 operators take the compact form
``(S_k)_ij = -i ε_kij``. Energies are stored as E/h in MHz and fields in mT.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .constants import GAMMA_E_REFERENCE
from .errors import NonHermitianInput, ValidationError

__all__ = [
    "SPIN_OPERATORS",
    "SpinSystem",
    "EnergyLevels",
    "Transition",
    "build_hamiltonian",
    "diagonalize",
    "energy_levels",
    "canonical_levels_x",
    "high_field_populations",
    "transitions",
]


def _spin_operators() -> NDArray[np.complex128]:
    eps = np.zeros((3, 3, 3))
    for a, b, c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        eps[a, b, c] = 1.0
        eps[a, c, b] = -1.0
    return -1j * eps


#: Spin-1 operators (S_x, S_y, S_z) in the zero-field basis, shape (3, 3, 3).
SPIN_OPERATORS = _spin_operators()


@dataclass(frozen=True)
class SpinSystem:
    """Zero-field splitting, gyromagnetic ratio and ISC sublevel populations.

    Parameters
    ----------
    D, E : float
        Zero-field splitting parameters in MHz (E carries its sign).
    gamma_e_over_2pi : float
        Electron gyromagnetic ratio over 2π in MHz/mT.
    zero_field_populations : tuple of float
        Populations of (T_X, T_Y, T_Z) right after intersystem crossing.
    """

    D: float = 1395.57
    E: float = -53.35
    gamma_e_over_2pi: float = GAMMA_E_REFERENCE
    zero_field_populations: tuple[float, float, float] = (0.76, 0.16, 0.08)

    def __post_init__(self):
        pops = tuple(float(p) for p in self.zero_field_populations)
        if len(pops) != 3:
            raise ValidationError("zero_field_populations needs three entries")
        object.__setattr__(self, "zero_field_populations", pops)
        if not self.D > 0:
            raise ValidationError(f"D must be positive, got {self.D}")
        if not self.gamma_e_over_2pi > 0:
            raise ValidationError("gamma_e_over_2pi must be positive")
        if any(p < 0 or p > 1 for p in pops):
            raise ValidationError(f"populations must lie in [0, 1], got {pops}")
        if abs(sum(pops) - 1.0) > 1e-12:
            raise ValidationError(f"populations must sum to 1, got {sum(pops)!r}")

    @classmethod
    def pentacene(cls, **overrides) -> "SpinSystem":
        """Pentacene in p-terphenyl at room temperature."""
        return cls(**overrides)


@dataclass(frozen=True)
class EnergyLevels:
    """Eigen-decomposition of the spin Hamiltonian.

    ``eigenvectors[:, k]`` is the k-th eigenstate expressed in the
    zero-field basis; eigenvalues are ascending.
    """

    eigenvalues: NDArray[np.float64]
    eigenvectors: NDArray[np.complex128]
    field_vector_molecular: NDArray[np.float64] = field(
        default_factory=lambda: np.full(3, np.nan)
    )


@dataclass(frozen=True)
class Transition:
    lower_index: int
    upper_index: int
    frequency: float
    matrix_element_sq: float
    population_difference: float

    @property
    def label(self) -> str:
        return f"{self.lower_index}-{self.upper_index}"


def build_hamiltonian(system: SpinSystem, b0_molecular: ArrayLike) -> NDArray[np.complex128]:
    """Spin Hamiltonian (MHz) for a static field given in molecular coordinates (mT)."""
    b = np.asarray(b0_molecular, dtype=float)
    if b.shape != (3,) or not np.all(np.isfinite(b)):
        raise ValidationError(f"b0_molecular must be a finite 3-vector, got {b0_molecular!r}")
    D, E = system.D, system.E
    h = np.diag([D / 3 - E, D / 3 + E, -2 * D / 3]).astype(complex)
    h += system.gamma_e_over_2pi * np.einsum("k,kij->ij", b, SPIN_OPERATORS)
    return h


def diagonalize(H: ArrayLike, field_vector: ArrayLike | None = None) -> EnergyLevels:
    """Diagonalize a Hermitian 3×3 Hamiltonian.

    Degenerate eigenvalues are ordered by descending ``|<T_X|v>|`` so level
    labels stay stable at crossings.
    """
    H = np.asarray(H, dtype=complex)
    scale = max(np.abs(H).max(), 1.0)
    if H.shape != (3, 3) or np.abs(H - H.conj().T).max() > 1e-10 * scale:
        raise NonHermitianInput("Hamiltonian is not Hermitian")
    w, v = np.linalg.eigh(H)
    tol = 1e-9 * scale
    order = [0, 1, 2]
    for _ in range(2):
        for k in range(2):
            i, j = order[k], order[k + 1]
            if w[j] - w[i] <= tol and abs(v[0, j]) > abs(v[0, i]):
                order[k], order[k + 1] = j, i
    w, v = w[order], v[:, order]
    fv = np.full(3, np.nan) if field_vector is None else np.asarray(field_vector, float)
    return EnergyLevels(eigenvalues=w, eigenvectors=v, field_vector_molecular=fv)


def energy_levels(system: SpinSystem, b0_molecular: ArrayLike) -> EnergyLevels:
    return diagonalize(build_hamiltonian(system, b0_molecular), b0_molecular)


def canonical_levels_x(system: SpinSystem, b0_mag: float) -> tuple[float, float, float]:
    """Closed-form levels (E₊₁, E₀, E₋₁) in MHz for a field along molecular X.

    The field mixes only T_Y and T_Z; T_X (the high-field T₀) keeps its
    zero-field energy D/3 - E.
    """
    if b0_mag < 0:
        raise ValidationError("b0_mag must be non-negative")
    D, E = system.D, system.E
    centre = -0.5 * (D / 3 - E)
    root = math.hypot(0.5 * (D + E), system.gamma_e_over_2pi * b0_mag)
    return centre + root, D / 3 - E, centre - root


def high_field_populations(system: SpinSystem, levels: EnergyLevels) -> NDArray[np.float64]:
    """Populations of the field-dressed eigenstates (ascending level order).

    Sudden projection of the zero-field populations: P_k = Σ_i P_i |<k|i>|².
    """
    weights = np.abs(levels.eigenvectors) ** 2
    return np.asarray(system.zero_field_populations) @ weights


def transitions(
    levels: EnergyLevels,
    populations: ArrayLike,
    b1_direction_molecular: ArrayLike,
    pairs: Sequence[tuple[int, int]] = ((0, 1), (1, 2)),
) -> list[Transition]:
    """Magnetic-dipole transitions driven by a linear B1 (adjacent pairs by default).

    ``population_difference`` is p_lower - p_upper; positive values absorb,
    negative values emit.
    """
    b1 = np.asarray(b1_direction_molecular, dtype=float)
    if abs(np.linalg.norm(b1) - 1.0) > 1e-9:
        raise ValidationError("b1_direction_molecular must be a unit vector")
    pops = np.asarray(populations, dtype=float)
    op = np.einsum("k,kij->ij", b1, SPIN_OPERATORS)
    vecs = levels.eigenvectors
    out = []
    for lo, hi in pairs:
        element = vecs[:, hi].conj() @ op @ vecs[:, lo]
        out.append(
            Transition(
                lower_index=lo,
                upper_index=hi,
                frequency=float(levels.eigenvalues[hi] - levels.eigenvalues[lo]),
                matrix_element_sq=float(abs(element) ** 2),
                population_difference=float(pops[lo] - pops[hi]),
            )
        )
    return out
