"""MIMO channel draws, zero-forcing receive beamforming, SINR, channel rate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .topology import NetworkGeometry, RadioParams, path_gain_linear

# Condition-number ceiling above which the Gram matrix is regularized.
CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class PhyParams:
    """Link-level constants: antenna counts, symbol energy, noise power.

    ``symbol_energy`` and ``noise_variance`` are linear (mW) so they can
    be combined directly with linear path gains.
    """

    symbol_energy: float
    noise_variance: float
    num_tx: int = 4
    num_rx: int = 8
    bandwidth_hz: float = 20e6

    def __post_init__(self) -> None:
        if self.num_tx < 1:
            raise ValueError("num_tx must be >= 1")
        if self.num_rx < self.num_tx:
            raise ValueError("num_rx must be >= num_tx (receive-side inversion)")
        if self.noise_variance <= 0:
            raise ValueError("noise_variance must be positive")

    @classmethod
    def from_radio(cls, radio: RadioParams, num_tx: int = 4, num_rx: int = 8) -> "PhyParams":
        """Derive linear powers from the dBm radio constants.

        Noise power is the per-Hz floor integrated over the channel
        bandwidth.
        """
        energy = 10.0 ** (radio.tx_power_dbm / 10.0)
        noise = 10.0 ** (radio.noise_floor_dbm_per_hz / 10.0) * radio.bandwidth_hz
        return cls(
            symbol_energy=energy,
            noise_variance=noise,
            num_tx=num_tx,
            num_rx=num_rx,
            bandwidth_hz=radio.bandwidth_hz,
        )


@dataclass(frozen=True)
class ChannelMatrix:
    """Narrowband channel between one STA and one AP.

    ``entries`` is stored receive-side, shape (num_rx, num_tx): column u,
    row k holds the gain from transmit antenna u to receive antenna k.
    The large-scale gain is already applied multiplicatively.
    """

    entries: np.ndarray
    sta: int = -1
    ap: int = -1

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.entries.view(float))):
            raise ValueError("channel entries must be finite")


@dataclass(frozen=True)
class Beamformer:
    """Zero-forcing receive weights for one link.

    ``weights`` has shape (num_tx, num_rx) and satisfies
    weights @ channel ~= identity when the channel is well conditioned.
    """

    weights: np.ndarray
    conditioning: float
    regularized: bool = False


def rayleigh_entries(gain: float, num_rx: int, num_tx: int, rng: np.random.Generator) -> np.ndarray:
    """I.i.d. circularly-symmetric complex Gaussian entries with E|h|^2 = gain."""
    scale = np.sqrt(gain / 2.0)
    return scale * (
        rng.standard_normal((num_rx, num_tx)) + 1j * rng.standard_normal((num_rx, num_tx))
    )


def draw_channel(
    sta: int,
    ap: int,
    geometry: NetworkGeometry,
    radio: RadioParams,
    phy: PhyParams,
    rng_seed: int,
) -> ChannelMatrix:
    """Draw one STA-AP channel, deterministic in (rng_seed, sta, ap)."""
    if not (0 <= sta < geometry.n_stas and 0 <= ap < geometry.n_aps):
        raise IndexError("sta/ap index out of range")
    d = float(
        np.hypot(
            geometry.sta_positions[sta, 0] - geometry.ap_positions[ap, 0],
            geometry.sta_positions[sta, 1] - geometry.ap_positions[ap, 1],
        )
    )
    gain = float(path_gain_linear(d, radio))
    rng = np.random.default_rng(np.random.SeedSequence((rng_seed, sta, ap)))
    return ChannelMatrix(rayleigh_entries(gain, phy.num_rx, phy.num_tx, rng), sta, ap)


def draw_channel_bank(
    geometry: NetworkGeometry,
    radio: RadioParams,
    phy: PhyParams,
    rng_seed: int,
) -> np.ndarray:
    """All N x M channels in one vectorized draw, shape (N, M, K, U).

    Used by the simulator; deterministic in rng_seed alone. The per-pair
    ``draw_channel`` stream is separate by design.
    """
    n, m = geometry.n_stas, geometry.n_aps
    k, u = phy.num_rx, phy.num_tx
    rng = np.random.default_rng(np.random.SeedSequence((rng_seed, 0xC4A)))
    raw = rng.standard_normal((n, m, k, u)) + 1j * rng.standard_normal((n, m, k, u))
    gains = path_gain_linear(geometry.sta_ap_distances(), radio)
    return np.sqrt(gains / 2.0)[:, :, None, None] * raw


def zf_beamformer(h) -> Beamformer:
    """Channel-inverting receive beamformer.

    Ill-conditioned Gram matrices fall back to a diagonally regularized
    inverse and the link is flagged instead of dropped.
    """
    g = h.entries if isinstance(h, ChannelMatrix) else np.asarray(h)
    gram = g.conj().T @ g
    u = gram.shape[0]
    evals = np.linalg.eigvalsh(gram)
    lam_min, lam_max = float(evals[0]), float(evals[-1])
    cond = np.inf if lam_min <= 0 else lam_max / lam_min
    regularized = False
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        eps = 1e-6 * float(np.trace(gram).real) / u
        if eps <= 0.0:
            eps = 1e-12
        gram = gram + eps * np.eye(u)
        regularized = True
    weights = np.linalg.solve(gram, g.conj().T)
    return Beamformer(weights=weights, conditioning=cond, regularized=regularized)


def zf_batch(h_stack: np.ndarray):
    """Zero-forcing weights for a stack of channels.

    h_stack: (P, K, U) -> weights (P, U, K), conditioning (P,), flags (P,).
    Same regularization rule as ``zf_beamformer``, applied per entry.
    """
    g = np.asarray(h_stack)
    p, _, u = g.shape
    gram = np.einsum("pku,pkv->puv", g.conj(), g)
    evals = np.linalg.eigvalsh(gram)
    lam_min = evals[..., 0]
    lam_max = evals[..., -1]
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(lam_min > 0, lam_max / np.maximum(lam_min, 1e-300), np.inf)
    bad = ~np.isfinite(cond) | (cond > CONDITION_LIMIT)
    if bad.any():
        eps = 1e-6 * np.einsum("puu->p", gram).real / u
        eps = np.where(eps > 0, eps, 1e-12)
        gram = gram + (bad * eps)[:, None, None] * np.eye(u)
    weights = np.linalg.solve(gram, np.swapaxes(g.conj(), -1, -2))
    return weights, cond, bad


def compute_sinr(
    w_desired: np.ndarray,
    h_desired: np.ndarray,
    interferers,
    phy: PhyParams,
    *,
    interferer_weights=None,
    literal_form: bool = False,
) -> float:
    """SINR of one link against a set of concurrent transmitters.

    ``interferers`` is a sequence of (w_z, h_z) pairs: each interferer's
    own beamformer applied to its cross-channel into this link's AP.
    ``interferer_weights`` optionally scales each term (activity factors
    for expected-contention snapshots). The default applies the same
    power scaling symbol_energy/num_tx to desired and interfering
    signals; ``literal_form`` reproduces the sqrt-scaled numerator with
    unscaled interference instead.
    """
    scale = phy.symbol_energy / phy.num_tx
    num_scale = np.sqrt(scale) if literal_form else scale
    int_scale = 1.0 if literal_form else scale
    num = num_scale * float(np.linalg.norm(w_desired @ h_desired) ** 2)
    den = float(np.linalg.norm(w_desired) ** 2) * phy.noise_variance
    if interferer_weights is None:
        interferer_weights = [1.0] * len(interferers)
    for (w_z, h_z), wt in zip(interferers, interferer_weights):
        den += wt * int_scale * float(np.linalg.norm(w_z @ h_z) ** 2)
    return num / den


def channel_rate(sinr, bandwidth_hz):
    """Shannon rate in bits/second; exactly zero at zero SINR."""
    s = np.asarray(sinr, dtype=float)
    if np.any(s < 0):
        raise ValueError("sinr must be nonnegative")
    out = bandwidth_hz * np.log2(1.0 + s)
    if np.isscalar(sinr):
        return float(out)
    return out
