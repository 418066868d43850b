"""Domain types and the embedded multipath parameter tables.

The simulator is parameterized by measurement-derived clustered-multipath
statistics: a mean cluster count, Poisson arrival rates for clusters and for
rays within clusters, and two exponential power-decay constants. One full
parameter set exists per (scenario, receiver, antenna orientation, horizontal
distance) cell; the embedded tables cover three scenarios x two receivers x
two orientations x two distances = 24 cells.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Optional

import numpy as np

from .errors import UnknownCell
from .geometry import LinkGeometry, Orientation

__all__ = [
    "Scenario",
    "Receiver",
    "Orientation",
    "ScenarioParams",
    "LinkConfig",
    "Tap",
    "ChannelRealization",
    "RX_HEIGHT_M",
    "TABLE_DISTANCES_M",
    "SCAN_WINDOW_NS",
    "lookup_params",
    "validate_tables",
    "cell_violations",
    "tables_as_dict",
    "iter_table_cells",
]

# Sounder scan window; the arrival rates in the tables are per-ns rates
# observed over this excess-delay span.
SCAN_WINDOW_NS = 100.0

# Horizontal TX-RX distances at which parameters were tabulated.
TABLE_DISTANCES_M = (15.0, 30.0)


class Scenario(Enum):
    """Propagation scenario: platform state and link obstruction."""

    HOVERING_OPEN = "hovering-open"
    HOVERING_FOLIAGE = "hovering-foliage"
    MOVING_CIRCLE = "moving-circle"

    @property
    def los_blocked(self) -> bool:
        """True when the direct path is obstructed (foliage in the link)."""
        return self is Scenario.HOVERING_FOLIAGE


class Receiver(Enum):
    RX1 = "RX1"
    RX2 = "RX2"

    @property
    def height_m(self) -> float:
        return RX_HEIGHT_M[self]


RX_HEIGHT_M = {Receiver.RX1: 0.10, Receiver.RX2: 1.5}


@dataclass(frozen=True)
class ScenarioParams:
    """One cell of the multipath parameter tables.

    Attributes
    ----------
    n_clusters_mean : float
        Mean number of multipath clusters observed per scan.
    cluster_rate : float
        Poisson arrival rate of clusters, 1/ns.
    cluster_decay : float
        Inter-cluster power decay constant (unitless as tabulated; its
        reading as a rate or a time constant is selected at generation).
    ray_rate : float
        Poisson arrival rate of rays within a cluster, 1/ns.
    ray_decay : float
        Intra-cluster ray power decay constant (same caveat as above).
    """

    n_clusters_mean: float
    cluster_rate: float
    cluster_decay: float
    ray_rate: float
    ray_decay: float

    def as_dict(self) -> dict:
        """JSON-ready mapping with units spelled out in the rate names."""
        return {
            "n_clusters_mean": self.n_clusters_mean,
            "cluster_rate_per_ns": self.cluster_rate,
            "cluster_decay": self.cluster_decay,
            "ray_rate_per_ns": self.ray_rate,
            "ray_decay": self.ray_decay,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioParams":
        return cls(
            n_clusters_mean=float(data["n_clusters_mean"]),
            cluster_rate=float(data["cluster_rate_per_ns"]),
            cluster_decay=float(data["cluster_decay"]),
            ray_rate=float(data["ray_rate_per_ns"]),
            ray_decay=float(data["ray_decay"]),
        )


# Rate/count consistency: the tabulated cluster rate equals the mean cluster
# count spread over the 100 ns scan, up to printed rounding.
RATE_COUNT_TOLERANCE = 5e-4


@dataclass(frozen=True)
class LinkConfig:
    """Placement of one measured link: receiver, orientation, TX position."""

    receiver: Receiver
    orientation: Orientation
    horizontal_distance_m: float
    uav_height_m: float

    def __post_init__(self) -> None:
        if self.horizontal_distance_m <= 0:
            raise ValueError("horizontal_distance_m must be > 0")
        if self.uav_height_m <= 0:
            raise ValueError("uav_height_m must be > 0")

    @property
    def geometry(self) -> LinkGeometry:
        """Elevation-plane geometry from antenna phase center to phase center."""
        return LinkGeometry(
            x_m=self.horizontal_distance_m,
            h_m=self.uav_height_m - self.receiver.height_m,
        )


@dataclass(frozen=True)
class Tap:
    """One resolvable multipath component of a channel impulse response."""

    delay_ns: float
    amplitude: float
    phase_rad: float
    cluster_index: int
    ray_index: int


class ChannelRealization:
    """One synthesized channel impulse response.

    Tap data is held in parallel numpy arrays (delays, amplitudes, phases,
    cluster and ray indices) so ensemble post-processing stays vectorized;
    the ``taps`` property materializes ``Tap`` records on demand.

    Invariants checked here: taps sorted by nondecreasing delay, delays
    nonnegative and inside ``window_ns``. Generated realizations
    additionally start at delay 0 (the excess-delay origin) and keep every
    amplitude within the configured dynamic range of the strongest tap.
    """

    def __init__(
        self,
        delays_ns: np.ndarray,
        amplitudes: np.ndarray,
        phases_rad: np.ndarray,
        cluster_indices: np.ndarray,
        ray_indices: np.ndarray,
        *,
        window_ns: float = SCAN_WINDOW_NS,
        params: Optional[ScenarioParams] = None,
        geometry: Optional[LinkGeometry] = None,
        seed: Optional[int] = None,
        los_amplitude: float = 0.0,
        metadata: Optional[dict] = None,
    ) -> None:
        self.delays_ns = np.asarray(delays_ns, dtype=float)
        self.amplitudes = np.asarray(amplitudes, dtype=float)
        self.phases_rad = np.asarray(phases_rad, dtype=float)
        self.cluster_indices = np.asarray(cluster_indices, dtype=int)
        self.ray_indices = np.asarray(ray_indices, dtype=int)
        self.window_ns = float(window_ns)
        self.params = params
        self.geometry = geometry
        self.seed = seed
        self.los_amplitude = float(los_amplitude)
        self.metadata = dict(metadata) if metadata else {}

        n = self.delays_ns.shape[0]
        for arr in (self.amplitudes, self.phases_rad, self.cluster_indices, self.ray_indices):
            if arr.shape[0] != n:
                raise ValueError("tap field arrays must have equal length")
        if n and np.any(np.diff(self.delays_ns) < 0):
            raise ValueError("taps must be sorted by nondecreasing delay")
        if n and self.delays_ns[0] < 0:
            raise ValueError("tap delays must be >= 0")
        if n and np.any(self.delays_ns >= self.window_ns):
            raise ValueError("tap delays must stay below the scan window")

    def __len__(self) -> int:
        return int(self.delays_ns.shape[0])

    @property
    def has_los(self) -> bool:
        """True when the delay-0 tap carries the direct path."""
        return self.los_amplitude > 0.0

    @property
    def taps(self) -> tuple[Tap, ...]:
        return tuple(
            Tap(float(d), float(a), float(p), int(c), int(r))
            for d, a, p, c, r in zip(
                self.delays_ns,
                self.amplitudes,
                self.phases_rad,
                self.cluster_indices,
                self.ray_indices,
            )
        )

    def cluster_ids(self) -> np.ndarray:
        """Distinct cluster indices present, ascending."""
        return np.unique(self.cluster_indices)

    def cluster_starts(self) -> np.ndarray:
        """Earliest surviving delay of each present cluster, in cluster order.

        Uses the first surviving tap rather than ray index 0, so the result
        stays well defined when fading plus the dynamic-range cut removes a
        cluster head.
        """
        ids = self.cluster_ids()
        return np.array(
            [self.delays_ns[self.cluster_indices == cid].min() for cid in ids]
        )

    def n_clusters(self) -> int:
        return int(self.cluster_ids().size)


# --- Embedded parameter tables --------------------------------------------
#
# Cell order within each table: (receiver, orientation, distance) with values
# (n_clusters_mean, cluster_rate, cluster_decay, ray_rate, ray_decay).

_P = ScenarioParams

_HOVERING_OPEN = {
    (Receiver.RX1, Orientation.VV, 15.0): _P(3.33, 0.033, 0.23, 0.1, 8.7),
    (Receiver.RX1, Orientation.VV, 30.0): _P(4.0, 0.04, 0.186, 0.06, 8.66),
    (Receiver.RX2, Orientation.VV, 15.0): _P(2.66, 0.027, 0.24, 0.11, 5.5),
    (Receiver.RX2, Orientation.VV, 30.0): _P(2.0, 0.02, 0.16, 0.06, 4.3),
    (Receiver.RX1, Orientation.VH, 15.0): _P(1.66, 0.017, 0.215, 0.25, 2.7),
    (Receiver.RX1, Orientation.VH, 30.0): _P(2.66, 0.027, 0.16, 0.15, 5.92),
    (Receiver.RX2, Orientation.VH, 15.0): _P(1.66, 0.017, 0.177, 0.26, 2.8),
    (Receiver.RX2, Orientation.VH, 30.0): _P(1.33, 0.013, 0.171, 0.2, 1.88),
}

_HOVERING_FOLIAGE = {
    (Receiver.RX1, Orientation.VV, 15.0): _P(2.0, 0.02, 0.212, 0.14, 1.3),
    (Receiver.RX1, Orientation.VV, 30.0): _P(2.0, 0.02, 0.21, 0.175, 1.11),
    (Receiver.RX2, Orientation.VV, 15.0): _P(2.0, 0.02, 0.24, 0.27, 0.985),
    (Receiver.RX2, Orientation.VV, 30.0): _P(1.66, 0.017, 0.23, 0.21, 1.34),
    (Receiver.RX1, Orientation.VH, 15.0): _P(2.0, 0.02, 0.214, 0.34, 0.77),
    (Receiver.RX1, Orientation.VH, 30.0): _P(1.33, 0.013, 0.16, 0.34, 0.811),
    (Receiver.RX2, Orientation.VH, 15.0): _P(1.66, 0.017, 0.198, 0.3, 1.4),
    (Receiver.RX2, Orientation.VH, 30.0): _P(1.33, 0.013, 0.2, 0.34, 0.74),
}

_MOVING_CIRCLE = {
    (Receiver.RX1, Orientation.VV, 15.0): _P(2.0, 0.02, 0.14, 0.1, 1.87),
    (Receiver.RX1, Orientation.VV, 30.0): _P(1.66, 0.017, 0.143, 0.082, 1.87),
    (Receiver.RX2, Orientation.VV, 15.0): _P(1.66, 0.017, 0.2, 0.084, 3.6),
    (Receiver.RX2, Orientation.VV, 30.0): _P(1.33, 0.013, 0.18, 0.084, 5.2),
    (Receiver.RX1, Orientation.VH, 15.0): _P(2.0, 0.02, 0.15, 0.14, 1.76),
    (Receiver.RX1, Orientation.VH, 30.0): _P(1.0, 0.01, 0.12, 0.11, 2.0),
    (Receiver.RX2, Orientation.VH, 15.0): _P(1.66, 0.017, 0.205, 0.16, 2.04),
    (Receiver.RX2, Orientation.VH, 30.0): _P(1.0, 0.01, 0.171, 0.16, 1.31),
}

PARAM_TABLES = {
    Scenario.HOVERING_OPEN: _HOVERING_OPEN,
    Scenario.HOVERING_FOLIAGE: _HOVERING_FOLIAGE,
    Scenario.MOVING_CIRCLE: _MOVING_CIRCLE,
}


def lookup_params(
    scenario: Scenario,
    receiver: Receiver,
    orientation: Orientation,
    horizontal_distance_m: float,
) -> ScenarioParams:
    """Return the parameter set for one measured cell.

    Raises
    ------
    UnknownCell
        If the distance is not one of the tabulated horizontal distances.
    """
    distance = float(horizontal_distance_m)
    if distance not in TABLE_DISTANCES_M:
        valid = ", ".join(f"{d:g} m" for d in TABLE_DISTANCES_M)
        raise UnknownCell(
            f"no table cell at x={horizontal_distance_m} m; tabulated distances: {valid}"
        )
    return PARAM_TABLES[scenario][(receiver, orientation, distance)]


def iter_table_cells() -> Iterator[tuple[Scenario, Receiver, Orientation, float, ScenarioParams]]:
    """Yield every embedded cell as (scenario, receiver, orientation, x, params)."""
    for scenario, table in PARAM_TABLES.items():
        for (receiver, orientation, distance), params in table.items():
            yield scenario, receiver, orientation, distance, params


def cell_violations(params: ScenarioParams, label: str = "cell") -> list[str]:
    """Check one parameter set against its structural invariants.

    Every field must be strictly positive and the cluster rate must equal
    the mean cluster count divided by the scan window, within rounding.
    """
    problems = []
    for name in ("n_clusters_mean", "cluster_rate", "cluster_decay", "ray_rate", "ray_decay"):
        value = getattr(params, name)
        if not value > 0:
            problems.append(f"{label}: {name}={value!r} is not strictly positive")
    expected_rate = params.n_clusters_mean / SCAN_WINDOW_NS
    if abs(params.cluster_rate - expected_rate) > RATE_COUNT_TOLERANCE:
        problems.append(
            f"{label}: cluster_rate={params.cluster_rate} deviates from "
            f"n_clusters_mean/{SCAN_WINDOW_NS:g}={expected_rate:.5f} by more than "
            f"{RATE_COUNT_TOLERANCE}"
        )
    return problems


def validate_tables() -> list[str]:
    """Audit every embedded cell; returns a list of violations (empty when clean)."""
    problems = []
    for scenario, receiver, orientation, distance, params in iter_table_cells():
        label = f"{scenario.value}/{receiver.value}/{orientation.value}/x={distance:g}"
        problems.extend(cell_violations(params, label))
    return problems


def tables_as_dict() -> dict:
    """All embedded tables as one nested JSON-ready mapping.

    Layout: scenario -> receiver -> orientation -> distance -> params.
    """
    doc: dict = {}
    for scenario, receiver, orientation, distance, params in iter_table_cells():
        doc.setdefault(scenario.value, {}).setdefault(receiver.value, {}).setdefault(
            orientation.value, {}
        )[f"{distance:g}"] = params.as_dict()
    return doc
