"""Crystal mounting geometry: from goniometer angle to molecular-frame fields.

The sample holder ("XY wedge") rotates about the vertical lab Z axis. With
the design mount the common molecular X axis and the site-1 Y axis lie in the
horizontal plane and Z1 points along the holder axis, so in holder
coordinates site 1 is the identity frame. The static field is fixed along
lab +x; turning the holder by θ (counterclockwise seen from +Z) rotates the
field by θ toward +Y1 in the site-1 frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import InconsistentDirectionCosines, ValidationError

__all__ = [
    "SITE_Y_ANGLE_DEG",
    "WedgeMount",
    "SiteFrame",
    "LabOrientation",
    "DEFAULT_CRYSTAL_ANGLES",
    "wedge_from_crystallography",
    "site_frames",
    "field_in_molecular_frame",
    "rotation_x",
    "rotation_about",
]

#: Angle between the in-plane short (Y) axes of the two doping sites.
SITE_Y_ANGLE_DEG = 60.0

#: Angles (∠aZ1, ∠bZ1, ∠c'Z1) in degrees reproducing α = 15.1°, β = 124°.
DEFAULT_CRYSTAL_ANGLES = (36.8, 122.7, 74.9)


def rotation_x(angle_deg: float) -> NDArray[np.float64]:
    """Active rotation about +x by ``angle_deg``."""
    c, s = math.cos(math.radians(angle_deg)), math.sin(math.radians(angle_deg))
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rotation_about(axis, angle_deg: float) -> NDArray[np.float64]:
    """Rodrigues rotation about an arbitrary axis."""
    k = np.asarray(axis, dtype=float)
    k = k / np.linalg.norm(k)
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    t = math.radians(angle_deg)
    return np.eye(3) + math.sin(t) * K + (1 - math.cos(t)) * (K @ K)


@dataclass(frozen=True)
class WedgeMount:
    """Wedge mount angles in degrees.

    ``wedge_actual`` is the fabricated wedge angle when it differs from the
    design ``alpha``; ``flip_b_axis`` marks a mount with the crystal b axis
    reversed (the π ambiguity of the b-axis alignment).
    """

    alpha: float = 15.1
    beta: float = 124.0
    wedge_actual: float | None = None
    flip_b_axis: bool = False

    def __post_init__(self):
        if not 0.0 <= self.alpha < 90.0:
            raise ValidationError(f"alpha must be in [0, 90), got {self.alpha}")
        if not 0.0 <= self.beta < 360.0:
            raise ValidationError(f"beta must be in [0, 360), got {self.beta}")
        if self.wedge_actual is not None and not 0.0 <= self.wedge_actual < 90.0:
            raise ValidationError(f"wedge_actual must be in [0, 90), got {self.wedge_actual}")

    @property
    def wedge_error(self) -> float:
        return 0.0 if self.wedge_actual is None else self.wedge_actual - self.alpha


@dataclass(frozen=True)
class SiteFrame:
    """``rotation`` maps holder (lab at θ=0) coordinates to molecular (X, Y_m, Z_m)."""

    site_id: int
    rotation: NDArray[np.float64]

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float)
        if self.site_id not in (1, 2):
            raise ValidationError("site_id must be 1 or 2")
        if R.shape != (3, 3) or np.abs(R @ R.T - np.eye(3)).max() > 1e-10:
            raise ValidationError("site rotation must be orthogonal")
        if abs(np.linalg.det(R) - 1.0) > 1e-10:
            raise ValidationError("site rotation must be proper (det = +1)")
        object.__setattr__(self, "rotation", R)


@dataclass(frozen=True)
class LabOrientation:
    theta: float
    b0_mag: float

    def __post_init__(self):
        if not self.b0_mag >= 0:
            raise ValidationError(f"b0_mag must be non-negative, got {self.b0_mag}")


def wedge_from_crystallography(
    angle_aZ1: float,
    angle_bZ1: float,
    angle_cpZ1: float,
    flip_b_axis: bool = False,
) -> WedgeMount:
    """Wedge angles from the angles between crystal axes (a, b, c') and Z1.

    α is the complement of ∠c'Z1 and β = atan2(cos∠aZ1, cos∠bZ1) in
    [0°, 360°); ``flip_b_axis`` adds the π alternative.
    """
    cosines = np.cos(np.radians([angle_aZ1, angle_bZ1, angle_cpZ1]))
    if abs(float(np.sum(cosines**2)) - 1.0) > 1e-3:
        raise InconsistentDirectionCosines(
            f"direction cosines squared sum to {np.sum(cosines**2):.6f}, expected 1"
        )
    alpha = 90.0 - angle_cpZ1
    beta = math.degrees(math.atan2(cosines[0], cosines[1]))
    if flip_b_axis:
        beta += 180.0
    beta %= 360.0
    if math.isclose(beta, 360.0):
        beta = 0.0
    return WedgeMount(alpha=alpha, beta=beta, flip_b_axis=flip_b_axis)


def site_frames(mount: WedgeMount) -> tuple[SiteFrame, SiteFrame]:
    """Holder-to-molecular rotations of both doping sites.

    A wedge fabrication error tilts the crystal about the common X axis (the
    wedge slope lies in the Y1–Z1 plane). A flipped b axis turns the crystal
    by 180° about the wedge-surface normal c', which sits at α from the
    holder's horizontal plane inside the Y1–Z1 plane.
    """
    crystal = rotation_x(mount.wedge_error)
    if mount.flip_b_axis:
        a = math.radians(mount.alpha)
        normal = np.array([0.0, -math.cos(a), math.sin(a)])
        crystal = crystal @ rotation_about(normal, 180.0)
    r1 = crystal.T
    r2 = rotation_x(SITE_Y_ANGLE_DEG).T @ r1
    return SiteFrame(1, r1), SiteFrame(2, r2)


def field_in_molecular_frame(orientation: LabOrientation, frame: SiteFrame) -> NDArray[np.float64]:
    """Static field (mT) expressed in a site's molecular coordinates."""
    t = math.radians(orientation.theta)
    b_holder = orientation.b0_mag * np.array([math.cos(t), math.sin(t), 0.0])
    return frame.rotation @ b_holder
