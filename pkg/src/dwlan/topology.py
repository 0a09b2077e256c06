"""Node placement, large-scale path loss, and carrier-sense geometry."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RadioParams:
    """Large-scale radio constants shared by every link in a scenario.

    Powers are dBm, distances meters. ``csr_m`` is the carrier sensing
    range: transmitters closer than this defer to one another.
    """

    tx_power_dbm: float = 12.0
    noise_floor_dbm_per_hz: float = -173.0
    bandwidth_hz: float = 20e6
    pathloss_exponent: float = 3.4
    reference_distance_m: float = 1.0
    reference_loss_db: float = 40.05
    cca_threshold_dbm: float = -70.0
    receiver_sensitivity_dbm: float = -75.0
    csr_m: float = 80.0

    def __post_init__(self) -> None:
        if self.csr_m <= 0:
            raise ValueError("csr_m must be positive")
        if self.pathloss_exponent < 2.0:
            raise ValueError("pathloss_exponent must be >= 2")
        if self.reference_distance_m <= 0:
            raise ValueError("reference_distance_m must be positive")
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth_hz must be positive")


@dataclass(frozen=True)
class Intensities:
    """Density knobs for node generation.

    Node counts are drawn Poisson with mean ``eta * n_ref``; ``n_ref``
    calibrates the unitless densities to a population scale.
    """

    eta_n: float
    eta_m: float
    n_ref: float = 200.0

    def __post_init__(self) -> None:
        if self.eta_n < 0 or self.eta_m < 0:
            raise ValueError("intensities must be nonnegative")
        if self.n_ref <= 0:
            raise ValueError("n_ref must be positive")


@dataclass(frozen=True)
class NetworkGeometry:
    """Positions of every AP and STA inside a rectangular area."""

    area_width_m: float
    area_height_m: float
    ap_positions: np.ndarray   # (M, 2)
    sta_positions: np.ndarray  # (N, 2)
    forced_min_ap: bool = False

    @property
    def n_stas(self) -> int:
        return int(self.sta_positions.shape[0])

    @property
    def n_aps(self) -> int:
        return int(self.ap_positions.shape[0])

    def sta_ap_distances(self) -> np.ndarray:
        """Euclidean distances, shape (N, M)."""
        d = self.sta_positions[:, None, :] - self.ap_positions[None, :, :]
        return np.hypot(d[..., 0], d[..., 1])

    def sta_sta_distances(self) -> np.ndarray:
        d = self.sta_positions[:, None, :] - self.sta_positions[None, :, :]
        return np.hypot(d[..., 0], d[..., 1])


def generate_ppp(
    intensities: Intensities,
    area: tuple[float, float],
    rng_seed: int,
) -> NetworkGeometry:
    """Draw a random topology: Poisson node counts, uniform positions.

    A draw of zero APs is forced up to one (the network needs a server
    side); the adjustment is reported via ``forced_min_ap`` and a log line.
    """
    width, height = float(area[0]), float(area[1])
    if width <= 0 or height <= 0:
        raise ValueError("area dimensions must be positive")
    rng = np.random.default_rng(rng_seed)
    n_sta = int(rng.poisson(intensities.eta_n * intensities.n_ref))
    n_ap = int(rng.poisson(intensities.eta_m * intensities.n_ref))
    forced = False
    if n_ap == 0:
        n_ap = 1
        forced = True
        logger.info("zero-AP draw forced up to one AP (seed=%d)", rng_seed)
    ap_xy = np.column_stack(
        [rng.uniform(0.0, width, n_ap), rng.uniform(0.0, height, n_ap)]
    )
    sta_xy = np.column_stack(
        [rng.uniform(0.0, width, n_sta), rng.uniform(0.0, height, n_sta)]
    )
    return NetworkGeometry(width, height, ap_xy, sta_xy, forced_min_ap=forced)


def rss_dbm(tx_dbm, distance_m, radio: RadioParams):
    """Received signal strength under the log-distance path-loss model.

    Distances below the reference distance are clamped to it, so the
    loss never goes below the reference loss. Accepts scalars or arrays.
    """
    d = np.maximum(np.asarray(distance_m, dtype=float), radio.reference_distance_m)
    loss = radio.reference_loss_db + 10.0 * radio.pathloss_exponent * np.log10(
        d / radio.reference_distance_m
    )
    out = tx_dbm - loss
    if np.isscalar(distance_m):
        return float(out)
    return out


def path_gain_linear(distance_m, radio: RadioParams):
    """Linear power gain of the large-scale channel (<= 1 beyond d0)."""
    loss_db = rss_dbm(0.0, distance_m, radio)
    return 10.0 ** (np.asarray(loss_db, dtype=float) / 10.0)


def rss_matrix(geometry: NetworkGeometry, radio: RadioParams) -> np.ndarray:
    """RSS at every AP from every STA, shape (N, M), dBm."""
    return rss_dbm(radio.tx_power_dbm, geometry.sta_ap_distances(), radio)


def candidate_aps(sta: int, geometry: NetworkGeometry, radio: RadioParams) -> list[int]:
    """APs whose RSS from this STA clears receiver sensitivity.

    Sorted by descending RSS; ties broken by lowest AP index. May be
    empty, in which case the STA is uncoverable.
    """
    dists = np.hypot(
        geometry.ap_positions[:, 0] - geometry.sta_positions[sta, 0],
        geometry.ap_positions[:, 1] - geometry.sta_positions[sta, 1],
    )
    rss = rss_dbm(radio.tx_power_dbm, dists, radio)
    idx = np.nonzero(rss >= radio.receiver_sensitivity_dbm)[0]
    order = sorted(idx, key=lambda j: (-rss[j], j))
    return [int(j) for j in order]


def in_csr(a, b, radio: RadioParams) -> bool:
    """True when two positions are within carrier sensing range."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return bool(np.hypot(*(a - b)) <= radio.csr_m)


def csr_mask(positions: np.ndarray, radio: RadioParams) -> np.ndarray:
    """Symmetric boolean matrix: pairs within carrier sensing range."""
    d = positions[:, None, :] - positions[None, :, :]
    return np.hypot(d[..., 0], d[..., 1]) <= radio.csr_m
