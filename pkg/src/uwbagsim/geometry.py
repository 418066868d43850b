"""Link geometry and the elevation-plane antenna gain approximation.

The dipoles are omni-directional in azimuth with a donut-shaped elevation
pattern, so the direct-path gain reduces to a function of the single
elevation-plane angle measured from the vertical axis. That pattern is
approximated by |sin(theta)| at each end of the link; the combined two-antenna
amplitude gain sqrt(|sin||sin|) collapses to the same |sin(theta)|.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import InvalidGeometry

__all__ = [
    "Orientation",
    "LinkGeometry",
    "ElevationPattern",
    "elevation_angle",
    "los_gain",
    "polarization_power_loss",
    "xpd_amplitude_factor",
    "DEFAULT_XPD_DB",
]

# Cross-polarization discrimination applied to the direct path under a
# mismatched (VH) orientation. Configurable everywhere it is used.
DEFAULT_XPD_DB = 10.0


class Orientation(Enum):
    """Transmit/receive dipole orientation pair.

    VV: both vertical (co-polarized). VH: transmitter rotated 90 degrees,
    so the direct path suffers cross-polarization loss while reflected
    cross-polarized energy still reaches the receiver.
    """

    VV = "VV"
    VH = "VH"


def elevation_angle(x_m: float, h_m: float) -> float:
    """Angle of the TX-RX line from the vertical axis, in degrees.

    90 degrees is a horizontal link; the angle shrinks toward 0 as the
    platform climbs directly overhead.
    """
    if x_m <= 0:
        raise InvalidGeometry(f"horizontal distance must be > 0, got {x_m}")
    if h_m < 0:
        raise InvalidGeometry(f"height difference must be >= 0, got {h_m}")
    return 90.0 - math.degrees(math.atan(h_m / x_m))


@dataclass(frozen=True)
class LinkGeometry:
    """Elevation-plane geometry of one link.

    ``h_m`` is the vertical offset between the antenna phase centers
    (platform height minus receiver height).
    """

    x_m: float
    h_m: float

    def __post_init__(self) -> None:
        if self.x_m <= 0:
            raise InvalidGeometry(f"x_m must be > 0, got {self.x_m}")
        if self.h_m < 0:
            raise InvalidGeometry(f"h_m must be >= 0, got {self.h_m}")

    @property
    def d_m(self) -> float:
        """Direct-path (slant) distance."""
        return math.hypot(self.x_m, self.h_m)

    @property
    def theta_deg(self) -> float:
        return elevation_angle(self.x_m, self.h_m)


class ElevationPattern:
    """Tabulated elevation-plane amplitude gain, linearly interpolated.

    Stands in for the |sin| approximation when a measured pattern is
    available. Gains are normalized so the maximum is 1; angles outside the
    tabulated span wrap modulo 360 degrees.
    """

    def __init__(self, angles_deg: np.ndarray, gains_linear: np.ndarray) -> None:
        angles = np.mod(np.asarray(angles_deg, dtype=float), 360.0)
        gains = np.asarray(gains_linear, dtype=float)
        if angles.size < 2:
            raise ValueError("pattern needs at least two points")
        if np.any(gains < 0):
            raise ValueError("pattern gains must be nonnegative")
        order = np.argsort(angles)
        self.angles_deg = angles[order]
        self.gains = gains[order] / gains.max()

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "ElevationPattern":
        """Load (angle_deg, gain_linear) rows; a header line is tolerated."""
        angles, gains = [], []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row:
                    continue
                try:
                    a, g = float(row[0]), float(row[1])
                except ValueError:
                    continue  # header or comment row
                angles.append(a)
                gains.append(g)
        return cls(np.array(angles), np.array(gains))

    def __call__(self, theta_deg: float) -> float:
        theta = math.fmod(theta_deg, 360.0)
        if theta < 0:
            theta += 360.0
        # Wrap-around interpolation across the 360/0 seam.
        angles = np.concatenate([self.angles_deg, [self.angles_deg[0] + 360.0]])
        gains = np.concatenate([self.gains, [self.gains[0]]])
        if theta < angles[0]:
            theta += 360.0
        return float(np.interp(theta, angles, gains))


def xpd_amplitude_factor(orientation: Orientation, xpd_db: float = DEFAULT_XPD_DB) -> float:
    """Amplitude scaling of the direct path due to polarization mismatch."""
    if orientation is Orientation.VV:
        return 1.0
    return 10.0 ** (-xpd_db / 20.0)


def polarization_power_loss(orientation: Orientation, xpd_db: float = DEFAULT_XPD_DB) -> float:
    """Extra direct-path loss (dB, >= 0) from antenna orientation mismatch."""
    if xpd_db < 0:
        raise ValueError(f"xpd_db must be >= 0, got {xpd_db}")
    if orientation is Orientation.VV:
        return 0.0
    return float(xpd_db)


def los_gain(
    theta_deg: float,
    orientation: Orientation,
    xpd_db: float = DEFAULT_XPD_DB,
    pattern: Optional[ElevationPattern] = None,
) -> float:
    """Combined TX*RX normalized amplitude gain of the direct path.

    With matched vertical dipoles the two-antenna gain is |sin(theta)|;
    a mismatched pair keeps the same elevation shape but is scaled down by
    the cross-polarization amplitude factor.
    """
    if pattern is not None:
        base = pattern(theta_deg)
    else:
        base = abs(math.sin(math.radians(theta_deg)))
    return base * xpd_amplitude_factor(orientation, xpd_db)
