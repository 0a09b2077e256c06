"""DCF timing arithmetic, effective throughput, and the fairness utility."""

from __future__ import annotations

import math
from dataclasses import dataclass

# Sentinel utility for links that cannot carry traffic. Large negative but
# finite so assignment solvers keep working; anything matched at this value
# is treated as uncovered afterwards.
UNSERVABLE = -1.0e12


@dataclass(frozen=True)
class MacParams:
    """802.11 DCF constants. Times in seconds, sizes in bits."""

    payload_bits: int = 1500 * 8
    header_bits: int = 22 * 8
    sifs_s: float = 10e-6
    slot_time_s: float = 20e-6
    ack_s: float = 64e-6
    difs_s: float = -1.0  # resolved to SIFS + 2*slot when negative
    cw_min: int = 32
    cw_max: int = 1024
    mcs_order: int = 2
    rts_cts_overhead_s: float = 0.0

    def __post_init__(self) -> None:
        if self.difs_s < 0:
            object.__setattr__(self, "difs_s", self.sifs_s + 2.0 * self.slot_time_s)
        for name in ("sifs_s", "slot_time_s", "ack_s", "difs_s"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.cw_min < 1:
            raise ValueError("cw_min must be at least 1")
        if self.cw_min > self.cw_max:
            raise ValueError("cw_min must not exceed cw_max")
        if self.mcs_order < 2 or self.mcs_order & (self.mcs_order - 1):
            raise ValueError("mcs_order must be a power of two >= 2")
        if self.rts_cts_overhead_s < 0:
            raise ValueError("rts_cts_overhead_s must be nonnegative")

    @property
    def frame_bits(self) -> int:
        return self.payload_bits + self.header_bits


@dataclass(frozen=True)
class FairnessParams:
    """Degree-of-fairness parameter for the throughput utility."""

    delta: float = 0.5

    def __post_init__(self) -> None:
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")


def frame_time(frame_bits: float, rate_bps: float) -> float:
    """Airtime of a frame at the given rate.

    A zero rate marks the link unusable: infinite time, never a division
    fault.
    """
    if frame_bits == 0:
        return 0.0
    if rate_bps <= 0:
        return math.inf
    return frame_bits / rate_bps


def mac_delay(mac: MacParams) -> float:
    """Fixed per-frame medium-access overhead.

    Backoff is modeled at half the maximum contention window; the RTS/CTS
    exchange enters as a configured fixed overhead.
    """
    backoff = (mac.cw_max / 2.0) * mac.slot_time_s
    return mac.difs_s + mac.sifs_s + backoff + mac.ack_s + mac.rts_cts_overhead_s


def effective_throughput(t_frame_s: float, tau_s: float, mcs_order: int) -> float:
    """Per-link symbol-rate throughput including MAC overhead, 1/seconds."""
    total = t_frame_s + tau_s
    if total <= 0:
        raise ValueError("frame time plus delay must be positive")
    if math.isinf(total):
        return 0.0
    return math.log2(mcs_order) / total


def goodput_bps(payload_bits: float, t_frame_s: float, tau_s: float) -> float:
    """Conventional payload goodput over one frame cycle, bits/second.

    Secondary reporting metric; the utility pipeline uses
    ``effective_throughput``.
    """
    total = t_frame_s + tau_s
    if total <= 0 or math.isinf(total):
        return 0.0
    return payload_bits / total


def utility(beta: float, fairness: FairnessParams) -> float:
    """Fairness transform of throughput: log at delta=1, power form otherwise.

    Zero or negative throughput yields the unservable sentinel so weight
    matrices stay finite.
    """
    if beta <= 0:
        return UNSERVABLE
    if fairness.delta == 1.0:
        return math.log(beta)
    return beta ** (1.0 - fairness.delta) / (1.0 - fairness.delta)
