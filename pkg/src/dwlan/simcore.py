"""Slot-level CSMA/CA Monte Carlo engine.

One realization walks the network slot by slot: Poisson packet arrivals,
carrier sensing against every transmitter in range, backoff countdown,
concurrent-transmission SINR checks, and delivered-bit accounting. Frames
in flight at a window boundary earn fractional credit so short windows
stay unbiased.

Two backoff disciplines are supported. The default draws every backoff
from [0, cw_max), which makes the mean per-frame medium-access overhead
equal the closed-form delay used in the utility weights, so the simulator
and the analytic single-link throughput agree. "dcf" is the textbook
binary-exponential mode starting at cw_min.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import association as assoc_mod
from .association import AssociationSet, WeightSnapshot, build_weights
from .phy import zf_batch
from .scenario import Scenario, ScenarioTemplate

BACKOFF_MODES = ("fixed", "dcf")

_EMPTY_IDX = np.array([], dtype=np.int64)
_NO_BUSY = np.zeros(4096, dtype=bool)


_STATE_FIELDS = (
    "queue",
    "cw",
    "backoff",
    "tx_left",
    "tx_total",
    "viable",
    "pending",
    "frame_ap",
    "frame_num",
    "frame_noise",
)


@dataclass
class SimState:
    """Carry-over MAC state so dynamic epochs continue seamlessly.

    ``pending`` is the window-local credit accrued by a frame in flight;
    it is committed to delivered bits at frame success or window end, so
    every transmission slot's credit lands in the window containing it.
    """

    queue: np.ndarray
    cw: np.ndarray
    backoff: np.ndarray
    tx_left: np.ndarray
    tx_total: np.ndarray
    viable: np.ndarray
    pending: np.ndarray
    frame_ap: np.ndarray
    frame_num: np.ndarray
    frame_noise: np.ndarray

    @classmethod
    def fresh(cls, n: int, cw0: int) -> "SimState":
        return cls(
            queue=np.zeros(n, dtype=np.int64),
            cw=np.full(n, cw0, dtype=np.int64),
            backoff=np.full(n, -1, dtype=np.int64),
            tx_left=np.zeros(n, dtype=np.int64),
            tx_total=np.zeros(n, dtype=np.int64),
            viable=np.zeros(n, dtype=bool),
            pending=np.zeros(n),
            frame_ap=np.full(n, -1, dtype=np.int64),
            frame_num=np.zeros(n),
            frame_noise=np.zeros(n),
        )

    def grown(self, n: int, cw0: int) -> "SimState":
        extra = n - self.queue.shape[0]
        if extra < 0:
            raise ValueError("state cannot shrink")
        if extra == 0:
            return self
        fresh = SimState.fresh(extra, cw0)
        return SimState(
            **{
                name: np.concatenate([getattr(self, name), getattr(fresh, name)])
                for name in _STATE_FIELDS
            }
        )


@dataclass
class RunMetrics:
    """Outcome of one simulated window."""

    scheme: str
    seed: int
    n_slots: int
    slot_time_s: float
    n_stas: int
    n_aps: int
    delivered_bits: np.ndarray
    offered_bits: np.ndarray
    throughput_bps: np.ndarray
    aggregate_bits: float
    aggregate_throughput_bps: float
    utility_sum: float
    covered: int
    concurrent_log: list | None = None

    @property
    def sim_time_s(self) -> float:
        return self.n_slots * self.slot_time_s


def _quiescent_cw(mac, backoff_mode: str) -> int:
    return mac.cw_max if backoff_mode == "fixed" else mac.cw_min


def run_realization(
    scenario: Scenario,
    association_scheme,
    n_slots: int,
    seed: int,
    *,
    snapshot: WeightSnapshot | None = None,
    assoc: AssociationSet | None = None,
    arrival_rate_per_slot: float = 1.0,
    backoff_mode: str = "fixed",
    record_slots: bool = False,
    state: SimState | None = None,
    warmup_slots: int = 0,
    return_state: bool = False,
    leap: bool = True,
):
    """Simulate one window of slots under a given association scheme.

    Deterministic in (scenario, seed). ``association_scheme`` may be a
    scheme name or a prebuilt AssociationSet (used by dynamic runs).
    ``warmup_slots`` are simulated first and dropped from the accounting
    so the measured window samples the stationary contention process.
    """
    if backoff_mode not in BACKOFF_MODES:
        raise ValueError(f"backoff_mode must be one of {BACKOFF_MODES}")
    if arrival_rate_per_slot < 0:
        raise ValueError("arrival_rate_per_slot must be nonnegative")
    if scenario.mac.slot_time_s <= 0:
        raise ValueError("simulation needs a positive slot time")
    if assoc is None:
        if isinstance(association_scheme, AssociationSet):
            assoc = association_scheme
        else:
            snap = snapshot if snapshot is not None else build_weights(scenario)
            assoc = assoc_mod.associate(scenario, association_scheme, snap)
    scheme_name = assoc.scheme
    mac = scenario.mac
    phy = scenario.phy
    n, m = scenario.n_stas, scenario.n_aps
    cw0 = _quiescent_cw(mac, backoff_mode)

    served = assoc.assignment >= 0
    served_idx = np.nonzero(served)[0]
    # Per-link constants under this association.
    num = np.zeros(n)
    noise_den = np.zeros(n)
    cross = np.zeros((n, m))
    frame_slots = np.ones(n, dtype=np.int64)
    if served_idx.size and m:
        scale = phy.symbol_energy / phy.num_tx
        h_serv = scenario.channels[served_idx, assoc.assignment[served_idx]]
        w_serv, _, _ = zf_batch(h_serv)
        prod = np.einsum("zuk,zkv->zuv", w_serv, h_serv)
        num[served_idx] = scale * np.sum(np.abs(prod) ** 2, axis=(1, 2))
        noise_den[served_idx] = (
            np.sum(np.abs(w_serv) ** 2, axis=(1, 2)) * phy.noise_variance
        )
        allprod = np.einsum("zuk,zmkv->zmuv", w_serv, scenario.channels[served_idx])
        cross[served_idx] = scale * np.sum(np.abs(allprod) ** 2, axis=(2, 3))
        rates = assoc.rate[served_idx]
        t_frame = np.where(rates > 0, mac.frame_bits / np.maximum(rates, 1e-300), np.inf)
        exchange = (
            mac.difs_s + mac.rts_cts_overhead_s + t_frame + mac.sifs_s + mac.ack_s
        )
        slots = np.where(
            np.isfinite(exchange),
            np.maximum(1, np.rint(exchange / mac.slot_time_s)),
            np.iinfo(np.int64).max // 4,
        )
        frame_slots[served_idx] = slots.astype(np.int64)

    csr = scenario.sta_csr_mask()
    np.fill_diagonal(csr, False)

    st = SimState.fresh(n, cw0) if state is None else state.grown(n, cw0)
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x51)))
    total_slots = warmup_slots + n_slots
    if arrival_rate_per_slot > 0 and n:
        arrivals = rng.poisson(arrival_rate_per_slot, (total_slots, n))
    else:
        arrivals = np.zeros((total_slots, n), dtype=np.int64)
    # Prefix sums let the leap path consume a span of arrival slots at once.
    arr_cum = np.zeros((total_slots + 1, n), dtype=np.int64)
    np.cumsum(arrivals, axis=0, out=arr_cum[1:])

    delivered = np.zeros(n)
    offered = np.zeros(n)
    log: list | None = [] if record_slots else None
    payload = float(mac.payload_bits)

    t = 0
    while t < total_slots:
        if t == warmup_slots:
            # Measurement starts here: drop warm-up credit and counters.
            delivered[:] = 0.0
            offered[:] = 0.0
            st.pending[:] = 0.0
        st.queue += arrivals[t]
        offered += arrivals[t] * payload
        ongoing = st.tx_left > 0
        any_ongoing = bool(ongoing.any())

        if any_ongoing:
            # Transmitter-side carrier sensing: defer while any active
            # transmitter is inside sensing range. Transmitters hidden
            # from each other proceed and collide at the receiver, where
            # the SINR test settles the outcome.
            busy = csr[ongoing].any(axis=0)
        else:
            busy = _NO_BUSY[:n] if n <= _NO_BUSY.size else np.zeros(n, dtype=bool)

        idle_contend = served & (st.queue > 0) & ~ongoing & ~busy
        need = idle_contend & (st.backoff < 0)
        if need.any():
            st.backoff[need] = rng.integers(0, st.cw[need])
        dec = idle_contend & ~need & (st.backoff > 0)
        st.backoff[dec] -= 1
        starters = np.nonzero(idle_contend & (st.backoff == 0))[0]

        if starters.size:
            accepted: list[int] = []
            corrupted: set[int] = set()
            for i in starters:
                clash = -1
                for a in accepted:
                    if csr[i, a]:
                        clash = a
                        break
                if clash >= 0:
                    # In-range same-slot tie: the earliest starter holds
                    # the medium for its frame duration but the frame is
                    # garbage; every party backs off with a doubled window.
                    st.cw[i] = min(2 * st.cw[i], mac.cw_max)
                    st.backoff[i] = -1
                    corrupted.add(clash)
                else:
                    accepted.append(int(i))
            for i in accepted:
                st.tx_left[i] = frame_slots[i]
                st.tx_total[i] = frame_slots[i]
                st.viable[i] = i not in corrupted
                st.pending[i] = 0.0
                st.frame_ap[i] = assoc.assignment[i]
                st.frame_num[i] = num[i]
                st.frame_noise[i] = noise_den[i]
                st.backoff[i] = -1
            ongoing = ongoing.copy()
            ongoing[accepted] = True
            any_ongoing = True

        if any_ongoing:
            conc = np.nonzero(ongoing)[0]
            tot = cross[conc].sum(axis=0)
            aps = st.frame_ap[conc]
            interference = tot[aps] - cross[conc, aps]
            sinr = st.frame_num[conc] / (st.frame_noise[conc] + interference)
            failed = conc[st.viable[conc] & (sinr < scenario.gamma)]
            if failed.size:
                st.viable[failed] = False
                st.pending[failed] = 0.0
            live = conc[st.viable[conc]]
            st.pending[live] += payload / st.tx_total[live]
            st.tx_left[conc] -= 1
            done = conc[st.tx_left[conc] == 0]
            for i in done:
                if st.viable[i]:
                    delivered[i] += st.pending[i]
                    st.queue[i] -= 1
                    st.cw[i] = cw0
                else:
                    st.cw[i] = min(2 * int(st.cw[i]), mac.cw_max)
                st.pending[i] = 0.0
                st.backoff[i] = -1
                st.frame_ap[i] = -1
            if log is not None and t >= warmup_slots:
                log.append(conc.copy())
            t += 1
            continue

        if log is not None and t >= warmup_slots:
            log.append(_EMPTY_IDX)
        t += 1

        # Leap: with nothing in the air and every served queue nonempty,
        # the next event is the smallest backoff expiring. Skipping the
        # countdown slot by slot changes nothing observable.
        if not leap or starters.size:
            continue
        contenders = st.backoff[idle_contend]
        if contenders.size == 0 or not bool(np.all(st.queue[served] > 0)):
            continue
        jump = int(contenders.min()) - 1
        if jump <= 0:
            continue
        jump = min(jump, total_slots - t)
        if t < warmup_slots:
            jump = min(jump, warmup_slots - t)
        if jump <= 0:
            continue
        gained = (arr_cum[t + jump] - arr_cum[t]).astype(np.int64)
        st.queue += gained
        offered += gained * payload
        st.backoff[idle_contend] -= jump
        if log is not None:
            start = max(t, warmup_slots)
            for _ in range(max(0, t + jump - start)):
                log.append(_EMPTY_IDX)
        t += jump

    # Commit the in-window share of frames still in flight, then zero the
    # account so a continuation window only ever counts its own slots.
    inflight = np.nonzero((st.tx_left > 0) & st.viable)[0]
    for i in inflight:
        delivered[i] += st.pending[i]
        st.pending[i] = 0.0

    sim_time = n_slots * mac.slot_time_s
    metrics = RunMetrics(
        scheme=scheme_name,
        seed=seed,
        n_slots=n_slots,
        slot_time_s=mac.slot_time_s,
        n_stas=n,
        n_aps=m,
        delivered_bits=delivered,
        offered_bits=offered,
        throughput_bps=delivered / sim_time if sim_time > 0 else np.zeros(n),
        aggregate_bits=float(delivered.sum()),
        aggregate_throughput_bps=float(delivered.sum()) / sim_time if sim_time > 0 else 0.0,
        utility_sum=assoc.objective,
        covered=assoc.covered,
        concurrent_log=log,
    )
    if return_state:
        return metrics, st
    return metrics


def percentile_nearest_rank(values, p: float) -> float:
    """Nearest-rank percentile: value at ceil(p/100 * n) in sorted order."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise ValueError("need at least one value")
    k = max(1, math.ceil(p / 100.0 * v.size))
    return float(v[k - 1])


def per_user_cdf(throughputs):
    """Empirical CDF points of per-user throughput with 10th/90th markers.

    Returns (sorted values, cumulative fractions, {10: p10, 90: p90}).
    """
    v = np.sort(np.asarray(throughputs, dtype=float))
    if v.size == 0:
        raise ValueError("need at least one throughput sample")
    frac = np.arange(1, v.size + 1) / v.size
    marks = {10: percentile_nearest_rank(v, 10), 90: percentile_nearest_rank(v, 90)}
    return v, frac, marks


@dataclass
class MonteCarloResult:
    """Aggregates over independent realizations with 95% normal CIs."""

    scheme: str
    n_realizations: int
    agg_mbps: np.ndarray
    util_sums: np.ndarray
    p10: np.ndarray
    p50: np.ndarray
    p90: np.ndarray
    n_sta: np.ndarray
    n_ap: np.ndarray
    user_pool_mbps: np.ndarray

    @staticmethod
    def _ci(samples: np.ndarray) -> tuple[float, float, float]:
        mean = float(np.mean(samples))
        if samples.size < 2:
            return mean, mean, mean
        half = 1.96 * float(np.std(samples, ddof=1)) / math.sqrt(samples.size)
        return mean, mean - half, mean + half

    @property
    def agg_mean_mbps(self) -> float:
        return float(np.mean(self.agg_mbps))

    @property
    def agg_ci(self) -> tuple[float, float]:
        _, lo, hi = self._ci(self.agg_mbps)
        return lo, hi

    def percentile_ci(self, which: str) -> tuple[float, float, float]:
        return self._ci(getattr(self, which))


def _realize_all(template: ScenarioTemplate, schemes, n_slots, seed, sim_kw) -> dict:
    scenario = template.build(seed)
    snap = build_weights(scenario)
    out = {}
    for scheme in schemes:
        a = assoc_mod.associate(scenario, scheme, snap)
        out[scheme] = run_realization(
            scenario, a, n_slots, seed, snapshot=snap, **sim_kw
        )
    return out


def _mc_worker(args):
    template, schemes, n_slots, seed, sim_kw = args
    return _realize_all(template, schemes, n_slots, seed, sim_kw)


def run_monte_carlo(
    template: ScenarioTemplate,
    schemes,
    n_realizations: int,
    n_slots: int,
    base_seed: int,
    *,
    workers: int = 1,
    **sim_kw,
) -> dict[str, MonteCarloResult]:
    """Independent realizations, common random numbers across schemes.

    Realization r uses seed base_seed + r; schemes share the topology,
    channels, and weight snapshot of each realization. Aggregation order
    is fixed by realization index, so results do not depend on workers.
    """
    if isinstance(schemes, str):
        schemes = [schemes]
    seeds = [base_seed + r for r in range(n_realizations)]
    jobs = [(template, tuple(schemes), n_slots, s, dict(sim_kw)) for s in seeds]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_mc_worker, jobs))
    else:
        runs = [_mc_worker(j) for j in jobs]

    results = {}
    for scheme in schemes:
        agg = np.array([r[scheme].aggregate_throughput_bps / 1e6 for r in runs])
        util = np.array([r[scheme].utility_sum for r in runs])
        p10, p50, p90, pool_vals = [], [], [], []
        for r in runs:
            thr = r[scheme].throughput_bps / 1e6
            if thr.size:
                p10.append(percentile_nearest_rank(thr, 10))
                p50.append(percentile_nearest_rank(thr, 50))
                p90.append(percentile_nearest_rank(thr, 90))
                pool_vals.append(thr)
        results[scheme] = MonteCarloResult(
            scheme=scheme,
            n_realizations=n_realizations,
            agg_mbps=agg,
            util_sums=util,
            p10=np.array(p10),
            p50=np.array(p50),
            p90=np.array(p90),
            n_sta=np.array([r[scheme].n_stas for r in runs], dtype=float),
            n_ap=np.array([r[scheme].n_aps for r in runs], dtype=float),
            user_pool_mbps=np.concatenate(pool_vals) if pool_vals else np.array([]),
        )
    return results


@dataclass(frozen=True)
class MobilityParams:
    """Random-waypoint motion: uniform waypoints, uniform speed, no pause."""

    speed_min_mps: float = 0.5
    speed_max_mps: float = 2.0
    mobile_fraction: float = 0.3


@dataclass
class EpochMetrics:
    epoch: int
    n_stas: int
    aggregate_bits: float
    aggregate_throughput_bps: float
    objective: float
    fresh_gaa_objective: float
    covered: int
    per_sta_throughput_bps: np.ndarray


class _Waypoints:
    """Per-STA random-waypoint state."""

    def __init__(self, area, mobility: MobilityParams, rng: np.random.Generator):
        self.area = area
        self.mobility = mobility
        self.rng = rng
        self.mobile: list[bool] = []
        self.waypoint: list[np.ndarray] = []
        self.speed: list[float] = []

    def register(self, count: int) -> None:
        w, h = self.area
        for _ in range(count):
            self.mobile.append(bool(self.rng.random() < self.mobility.mobile_fraction))
            self.waypoint.append(self.rng.uniform((0, 0), (w, h)))
            self.speed.append(
                float(self.rng.uniform(self.mobility.speed_min_mps, self.mobility.speed_max_mps))
            )

    def step(self, positions: np.ndarray, dt_s: float) -> dict[int, np.ndarray]:
        moves: dict[int, np.ndarray] = {}
        w, h = self.area
        for i in range(len(self.mobile)):
            if not self.mobile[i]:
                continue
            pos = positions[i]
            target = self.waypoint[i]
            step = self.speed[i] * dt_s
            vec = target - pos
            dist = float(np.hypot(*vec))
            if dist <= step:
                new = target.copy()
                self.waypoint[i] = self.rng.uniform((0, 0), (w, h))
            else:
                new = pos + vec * (step / dist)
            moves[i] = new
        return moves


def run_dynamic(
    scenario: Scenario,
    scheme: str,
    arrival_schedule,
    mobility_params: MobilityParams | None,
    seed: int,
    *,
    epoch_slots: int = 100,
    arrival_rate_per_slot: float = 1.0,
    backoff_mode: str = "fixed",
    check_gaa_equality: bool = True,
) -> list[EpochMetrics]:
    """Epoch-driven dynamic run: admissions, mobility, association update,
    then one simulated window per epoch with carried MAC state.

    The incremental scheme ("gda") updates its association in place;
    every other scheme is re-run from scratch each epoch. For gda the
    fresh-from-scratch objective is recorded each epoch so equality can
    be asserted.
    """
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xD7)))
    area = (scenario.geometry.area_width_m, scenario.geometry.area_height_m)
    waypoints = None
    if mobility_params is not None:
        waypoints = _Waypoints(area, mobility_params, rng)
        waypoints.register(scenario.n_stas)

    incremental = scheme == "gda"
    if incremental:
        assoc = assoc_mod.gaa(scenario)
        assoc.scheme = "gda"
    else:
        assoc = assoc_mod.associate(scenario, scheme)
    state: SimState | None = None
    epoch_s = epoch_slots * scenario.mac.slot_time_s
    out: list[EpochMetrics] = []

    for epoch, n_arrivals in enumerate(arrival_schedule):
        for _ in range(int(n_arrivals)):
            pos = rng.uniform((0, 0), area)
            if incremental:
                assoc = assoc_mod.gda_admit(assoc, pos)
            else:
                scenario = scenario.with_added_sta(pos)
            if waypoints is not None:
                waypoints.register(1)
        if incremental:
            scenario = assoc.scenario

        if waypoints is not None:
            moves = waypoints.step(scenario.geometry.sta_positions, epoch_s)
            if moves:
                if incremental:
                    assoc = assoc_mod.gda_weight_change(assoc, moves)
                    scenario = assoc.scenario
                else:
                    scenario = scenario.with_moved_stas(moves)

        if not incremental:
            assoc = assoc_mod.associate(scenario, scheme)

        fresh_obj = math.nan
        if incremental and check_gaa_equality:
            fresh_obj = assoc_mod.gaa(scenario, assoc.snapshot).objective

        metrics, state = run_realization(
            scenario,
            assoc,
            epoch_slots,
            seed + 7919 * epoch,
            arrival_rate_per_slot=arrival_rate_per_slot,
            backoff_mode=backoff_mode,
            state=state,
            return_state=True,
        )
        out.append(
            EpochMetrics(
                epoch=epoch,
                n_stas=scenario.n_stas,
                aggregate_bits=metrics.aggregate_bits,
                aggregate_throughput_bps=metrics.aggregate_throughput_bps,
                objective=assoc.objective,
                fresh_gaa_objective=fresh_obj,
                covered=assoc.covered,
                per_sta_throughput_bps=metrics.throughput_bps,
            )
        )
    return out
