"""Scenario state shared by association schemes and the simulator."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .mac import FairnessParams, MacParams
from .phy import PhyParams, path_gain_linear
from .topology import (
    Intensities,
    NetworkGeometry,
    RadioParams,
    csr_mask,
    generate_ppp,
    rss_matrix,
)


@dataclass(frozen=True)
class Scenario:
    """One realization of the network: geometry, constants, channels.

    ``channels`` holds the full STA x AP bank of receive-side matrices,
    shape (N, M, num_rx, num_tx). Instances are immutable; dynamic events
    (admissions, mobility) produce modified copies so concurrent readers
    never observe partial state.
    """

    geometry: NetworkGeometry
    radio: RadioParams
    phy: PhyParams
    mac: MacParams
    fairness: FairnessParams
    gamma: float
    seed: int
    channels: np.ndarray
    weight_iterations: int = 1
    chan_serial: int = 0

    @classmethod
    def create(
        cls,
        geometry: NetworkGeometry,
        radio: RadioParams,
        phy: PhyParams,
        mac: MacParams,
        fairness: FairnessParams,
        gamma: float,
        seed: int,
        weight_iterations: int = 1,
    ) -> "Scenario":
        if gamma < 0:
            raise ValueError("gamma must be nonnegative")
        bank = _draw_bank(geometry, radio, phy, seed, serial=0)
        return cls(
            geometry=geometry,
            radio=radio,
            phy=phy,
            mac=mac,
            fairness=fairness,
            gamma=gamma,
            seed=seed,
            channels=bank,
            weight_iterations=weight_iterations,
        )

    @property
    def n_stas(self) -> int:
        return self.geometry.n_stas

    @property
    def n_aps(self) -> int:
        return self.geometry.n_aps

    def rss(self) -> np.ndarray:
        return rss_matrix(self.geometry, self.radio)

    def candidate_mask(self) -> np.ndarray:
        return self.rss() >= self.radio.receiver_sensitivity_dbm

    def sta_csr_mask(self) -> np.ndarray:
        return csr_mask(self.geometry.sta_positions, self.radio)

    def with_added_sta(self, position) -> "Scenario":
        """Admit one STA at ``position``; draws its channel row."""
        pos = np.asarray(position, dtype=float).reshape(1, 2)
        geo = replace(
            self.geometry,
            sta_positions=np.vstack([self.geometry.sta_positions, pos]),
        )
        serial = self.chan_serial + 1
        new_row = _draw_rows(geo, self.radio, self.phy, [geo.n_stas - 1], self.seed, serial)
        bank = np.concatenate([self.channels, new_row], axis=0)
        return replace(self, geometry=geo, channels=bank, chan_serial=serial)

    def with_moved_stas(self, moves: dict[int, np.ndarray]) -> "Scenario":
        """Relocate STAs and redraw their small-scale channels."""
        if not moves:
            return self
        positions = self.geometry.sta_positions.copy()
        for i, pos in moves.items():
            positions[i] = np.asarray(pos, dtype=float)
        geo = replace(self.geometry, sta_positions=positions)
        serial = self.chan_serial + 1
        rows = sorted(moves)
        bank = self.channels.copy()
        bank[rows] = _draw_rows(geo, self.radio, self.phy, rows, self.seed, serial)
        return replace(self, geometry=geo, channels=bank, chan_serial=serial)


def _draw_rows(
    geometry: NetworkGeometry,
    radio: RadioParams,
    phy: PhyParams,
    stas,
    seed: int,
    serial: int,
) -> np.ndarray:
    m, k, u = geometry.n_aps, phy.num_rx, phy.num_tx
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xD1A, serial)))
    raw = rng.standard_normal((len(stas), m, k, u)) + 1j * rng.standard_normal(
        (len(stas), m, k, u)
    )
    d = geometry.sta_ap_distances()[stas]
    gains = path_gain_linear(d, radio)
    return np.sqrt(gains / 2.0)[:, :, None, None] * raw


def _draw_bank(geometry, radio, phy, seed, serial):
    if geometry.n_stas == 0:
        return np.zeros((0, geometry.n_aps, phy.num_rx, phy.num_tx), dtype=complex)
    return _draw_rows(geometry, radio, phy, list(range(geometry.n_stas)), seed, serial)


@dataclass(frozen=True)
class ScenarioTemplate:
    """Everything needed to stamp out independent scenario realizations."""

    intensities: Intensities
    area: tuple[float, float]
    radio: RadioParams
    phy: PhyParams
    mac: MacParams
    fairness: FairnessParams
    gamma: float = 1.0
    weight_iterations: int = 1

    def build(self, seed: int) -> Scenario:
        geometry = generate_ppp(self.intensities, self.area, seed)
        return Scenario.create(
            geometry,
            self.radio,
            self.phy,
            self.mac,
            self.fairness,
            self.gamma,
            seed,
            self.weight_iterations,
        )

    def build_fixed(self, n_sta: int, n_ap: int, seed: int) -> Scenario:
        """Exact node counts with uniform positions (dynamic-run starts)."""
        rng = np.random.default_rng(np.random.SeedSequence((seed, 0xF1)))
        w, h = self.area
        ap_xy = np.column_stack([rng.uniform(0, w, n_ap), rng.uniform(0, h, n_ap)])
        sta_xy = np.column_stack([rng.uniform(0, w, n_sta), rng.uniform(0, h, n_sta)])
        geometry = NetworkGeometry(w, h, ap_xy, sta_xy)
        return Scenario.create(
            geometry,
            self.radio,
            self.phy,
            self.mac,
            self.fairness,
            self.gamma,
            seed,
            self.weight_iterations,
        )
