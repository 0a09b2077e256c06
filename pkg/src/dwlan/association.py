"""STA-to-AP association: utility weight snapshots, the graph scheme and
its incremental dynamic variant, and four baseline schemes."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import matching as km
from .mac import UNSERVABLE, effective_throughput, frame_time, mac_delay, utility
from .matching import Matching, WeightMatrix
from .phy import channel_rate, compute_sinr, zf_batch
from .scenario import Scenario

logger = logging.getLogger(__name__)

SCHEMES = ("gaa", "ssf", "greedy", "smartassoc", "bpf")

# Solver-facing sentinel for unusable edges. The reporting sentinel is
# -1e12, but mixing that magnitude into the dual arithmetic costs float64
# about 1e-4 of absolute resolution, which breaks exact incremental-vs-
# fresh equality. At -1e6 the big-M bound (|weights| * rows << 1e6) still
# guarantees unusable edges are chosen only when unavoidable.
WORKING_UNSERVABLE = -1.0e6


@dataclass
class WeightSnapshot:
    """Per-pair link metrics under an expected-contention interference model.

    ``weights`` holds the fairness utility where a link is servable and
    the unservable sentinel where the AP is out of range or the snapshot
    SINR misses the threshold; ``utility_true`` keeps the raw utility for
    reporting. Solver matrices are built from these via
    ``_solver_weights`` (problem-scale sentinel).
    """

    sinr: np.ndarray
    rate: np.ndarray
    t_frame: np.ndarray
    beta: np.ndarray
    utility_true: np.ndarray
    weights: np.ndarray
    candidate: np.ndarray
    servable: np.ndarray
    excluded: list[int]
    tau: float

    @property
    def weight_matrix(self) -> WeightMatrix:
        return WeightMatrix(self.weights)


@dataclass
class GdaState:
    """Working square matrix bookkeeping carried between dynamic updates."""

    matching: Matching
    row_stas: list       # STA index per row, None for dummy rows
    col_aps: list        # AP index per column, None for dummy columns
    capacity: int


@dataclass
class AssociationSet:
    """One AP per covered STA plus the snapshot values behind the choice.

    ``objective`` sums the solver-facing (threshold-filtered) weights of
    the chosen edges, so schemes are comparable on the exact quantity the
    optimizer maximizes. ``utility`` holds the unfiltered per-STA value.
    """

    scheme: str
    assignment: np.ndarray
    utility: np.ndarray
    sinr: np.ndarray
    rate: np.ndarray
    beta_upper: np.ndarray
    objective: float
    snapshot: WeightSnapshot
    scenario: Scenario
    gda: GdaState | None = None

    @property
    def covered(self) -> int:
        return int(np.sum(self.assignment >= 0))


def _ssf_choice(rss: np.ndarray, candidate: np.ndarray) -> np.ndarray:
    """Strongest-signal pick per STA; -1 where nothing is in range."""
    n = rss.shape[0]
    choice = np.full(n, -1, dtype=np.int64)
    if rss.shape[1] == 0:
        return choice
    masked = np.where(candidate, rss, -np.inf)
    best = np.argmax(masked, axis=1)  # first max wins ties (lowest index)
    has = candidate.any(axis=1)
    choice[has] = best[has]
    return choice


def build_weights(scenario: Scenario, serving: np.ndarray | None = None) -> WeightSnapshot:
    """Utility edge weights from an expected-contention interference snapshot.

    Interferers for a link are the other covered STAs outside the
    transmitter's carrier sensing range, each discounted by an activity
    factor of one over its contention-domain size. The serving map that
    fixes interferer beamformers defaults to strongest-signal choices and
    is re-derived from the optimized association when
    ``scenario.weight_iterations`` asks for fixed-point refinement.
    """
    snap = _snapshot_once(scenario, serving)
    for _ in range(scenario.weight_iterations - 1):
        assoc = _gaa_from_snapshot(scenario, snap)
        snap = _snapshot_once(scenario, assoc.assignment)
    return snap


def _snapshot_once(scenario: Scenario, serving: np.ndarray | None) -> WeightSnapshot:
    n, m = scenario.n_stas, scenario.n_aps
    phy = scenario.phy
    macp = scenario.mac
    rss = scenario.rss()
    candidate = rss >= scenario.radio.receiver_sensitivity_dbm
    excluded = [int(i) for i in range(n) if not candidate[i].any()]
    if excluded:
        logger.info("%d STAs have no in-range AP and are uncoverable", len(excluded))
    if serving is None:
        serving = _ssf_choice(rss, candidate)
    serving = np.asarray(serving, dtype=np.int64)

    tau = mac_delay(macp)
    sinr = np.zeros((n, m))
    if n and m:
        csr_ss = scenario.sta_csr_mask()
        active = serving >= 0
        # Contention domains under transmitter-side sensing: STAs within
        # carrier sensing range of one another serialize; each active STA
        # transmits roughly one share of its domain's airtime.
        conflict = csr_ss & active[None, :] & active[:, None]
        np.fill_diagonal(conflict, True)
        degree = np.maximum(conflict.sum(axis=1), 1)
        p_act = np.where(active, 1.0 / degree, 0.0)

        scale = phy.symbol_energy / phy.num_tx
        cross = np.zeros((n, m))
        act_idx = np.nonzero(active)[0]
        if act_idx.size:
            h_serv = scenario.channels[act_idx, serving[act_idx]]
            w_serv, _, _ = zf_batch(h_serv)
            # ||W_z @ H_zj||_F^2 for every victim AP j
            prod = np.einsum("zuk,zmkv->zmuv", w_serv, scenario.channels[act_idx])
            cross[act_idx] = scale * np.sum(np.abs(prod) ** 2, axis=(2, 3))

        # Expected interference: hidden (out-of-CSR) actives at mean
        # contention; in-range STAs defer to the transmitter instead.
        interference = ((~csr_ss) * p_act[None, :]) @ cross

        pair_i, pair_j = np.nonzero(candidate)
        if pair_i.size:
            h_pairs = scenario.channels[pair_i, pair_j]
            w_pairs, _, _ = zf_batch(h_pairs)
            sig = scale * np.sum(np.abs(np.einsum("puk,pkv->puv", w_pairs, h_pairs)) ** 2, axis=(1, 2))
            noise = np.sum(np.abs(w_pairs) ** 2, axis=(1, 2)) * phy.noise_variance
            sinr[pair_i, pair_j] = sig / (noise + interference[pair_i, pair_j])

    rate = np.where(candidate, phy.bandwidth_hz * np.log2(1.0 + sinr), 0.0)
    with np.errstate(divide="ignore"):
        t_frame = np.where(rate > 0, macp.frame_bits / np.maximum(rate, 1e-300), np.inf)
    beta = np.where(rate > 0, math.log2(macp.mcs_order) / (t_frame + tau), 0.0)
    util_true = np.full((n, m), UNSERVABLE)
    ok = beta > 0
    delta = scenario.fairness.delta
    if delta == 1.0:
        util_true[ok] = np.log(beta[ok])
    else:
        util_true[ok] = beta[ok] ** (1.0 - delta) / (1.0 - delta)
    servable = candidate & (sinr >= scenario.gamma) & (rate > 0)
    weights = np.where(servable, util_true, UNSERVABLE)
    return WeightSnapshot(
        sinr=sinr,
        rate=rate,
        t_frame=t_frame,
        beta=beta,
        utility_true=util_true,
        weights=weights,
        candidate=candidate,
        servable=servable,
        excluded=excluded,
        tau=tau,
    )


def _capacity_for(n: int, m: int) -> int:
    return max(1, -(-n // m)) if m else 1


def _assemble(
    scheme: str,
    scenario: Scenario,
    snap: WeightSnapshot,
    assignment: np.ndarray,
    gda: GdaState | None = None,
) -> AssociationSet:
    n = scenario.n_stas
    util = np.full(n, np.nan)
    sinr = np.full(n, np.nan)
    rate = np.full(n, np.nan)
    beta_upper = np.full(n, np.nan)
    objective = 0.0
    for i in range(n):
        if snap.servable[i].any():
            beta_upper[i] = snap.weights[i][snap.servable[i]].max()
        j = assignment[i]
        if j >= 0:
            util[i] = snap.utility_true[i, j]
            sinr[i] = snap.sinr[i, j]
            rate[i] = snap.rate[i, j]
            objective += snap.weights[i, j]
    return AssociationSet(
        scheme=scheme,
        assignment=assignment,
        utility=util,
        sinr=sinr,
        rate=rate,
        beta_upper=beta_upper,
        objective=objective,
        snapshot=snap,
        scenario=scenario,
        gda=gda,
    )


def _solver_weights(snap: WeightSnapshot) -> np.ndarray:
    return np.where(snap.servable, snap.weights, WORKING_UNSERVABLE)


def _working_matrix(snap: WeightSnapshot, n: int, m: int, capacity: int):
    """Square solver matrix: capacity replicas plus parking columns.

    Every STA whose row holds no servable edge gets a parking column so it
    never consumes AP capacity; unservable matches are read back as
    uncovered. Returns (values, row_stas, col_aps).
    """
    parks = int(np.sum(~snap.servable.any(axis=1)))
    cols = m * capacity + parks
    dim = max(cols, n)
    values = np.full((dim, dim), WORKING_UNSERVABLE)
    rep = np.repeat(np.arange(m), capacity)
    values[:n, : m * capacity] = _solver_weights(snap)[:, rep]
    col_aps: list = [int(a) for a in rep] + [None] * (dim - m * capacity)
    row_stas: list = list(range(n)) + [None] * (dim - n)
    return values, row_stas, col_aps


def _gaa_from_snapshot(scenario: Scenario, snap: WeightSnapshot) -> AssociationSet:
    n, m = scenario.n_stas, scenario.n_aps
    assignment = np.full(n, -1, dtype=np.int64)
    if n == 0 or m == 0:
        return _assemble("gaa", scenario, snap, assignment)
    capacity = _capacity_for(n, m)
    values, row_stas, col_aps = _working_matrix(snap, n, m, capacity)
    match = km.solve(values)
    for i in range(n):
        j = int(match.row_to_col[i])
        ap = col_aps[j]
        if ap is not None and snap.servable[i, ap]:
            assignment[i] = ap
    state = GdaState(
        matching=match,
        row_stas=row_stas,
        col_aps=col_aps,
        capacity=capacity,
    )
    return _assemble("gaa", scenario, snap, assignment, gda=state)


def gaa(scenario: Scenario, snapshot: WeightSnapshot | None = None) -> AssociationSet:
    """Globally optimal association on the snapshot weights.

    Solves the capacity-replicated square assignment; STAs whose matched
    edge is unservable stay uncovered and are reported.
    """
    snap = snapshot if snapshot is not None else build_weights(scenario)
    out = _gaa_from_snapshot(scenario, snap)
    if scenario.n_stas:
        has_servable = snap.servable.any(axis=1)
        n_capacity = int(np.sum(has_servable & (out.assignment < 0)))
        if n_capacity > 0:
            logger.info("%d servable STAs left uncovered by capacity limits", n_capacity)
    return out


def ssf(scenario: Scenario, snapshot: WeightSnapshot | None = None) -> AssociationSet:
    """Strongest received signal wins, interference ignored."""
    snap = snapshot if snapshot is not None else build_weights(scenario)
    choice = _ssf_choice(scenario.rss(), snap.candidate)
    return _assemble("ssf", scenario, snap, choice)


def _order(scenario: Scenario, arrival_order) -> list[int]:
    if arrival_order is None:
        return list(range(scenario.n_stas))
    order = [int(i) for i in arrival_order]
    if sorted(order) != list(range(scenario.n_stas)):
        raise ValueError("arrival_order must be a permutation of all STA indices")
    return order


def greedy(scenario: Scenario, snapshot: WeightSnapshot | None = None, arrival_order=None) -> AssociationSet:
    """Each arrival joins the least-loaded in-range AP and never switches.

    AP load is the sum of inverse channel rates of the STAs already
    assigned to it.
    """
    snap = snapshot if snapshot is not None else build_weights(scenario)
    n, m = scenario.n_stas, scenario.n_aps
    assignment = np.full(n, -1, dtype=np.int64)
    load = np.zeros(m)
    for i in _order(scenario, arrival_order):
        cands = np.nonzero(snap.candidate[i])[0]
        if cands.size == 0:
            continue
        j = int(cands[np.argmin(load[cands])])
        assignment[i] = j
        load[j] += 1.0 / snap.rate[i, j]
    return _assemble("greedy", scenario, snap, assignment)


def smartassoc(scenario: Scenario, snapshot: WeightSnapshot | None = None, arrival_order=None) -> AssociationSet:
    """Joins the candidate AP minimizing the L2 norm of post-join loads."""
    snap = snapshot if snapshot is not None else build_weights(scenario)
    n, m = scenario.n_stas, scenario.n_aps
    assignment = np.full(n, -1, dtype=np.int64)
    load = np.zeros(m)
    for i in _order(scenario, arrival_order):
        cands = np.nonzero(snap.candidate[i])[0]
        if cands.size == 0:
            continue
        best_j, best_norm = -1, np.inf
        for j in cands:
            hyp = load[cands].copy()
            hyp[np.nonzero(cands == j)[0][0]] += 1.0 / snap.rate[i, j]
            nrm = float(np.sqrt(np.sum(hyp * hyp)))
            if nrm < best_norm - 1e-15:
                best_norm, best_j = nrm, int(j)
        assignment[i] = best_j
        load[best_j] += 1.0 / snap.rate[i, best_j]
    return _assemble("smartassoc", scenario, snap, assignment)


def bpf_revenue_key(rate: float, members: int) -> tuple:
    """Ranking key for one STA's candidate AP in the revenue function.

    Best estimated performance first (log channel rate), breaking exact
    performance ties toward the less loaded AP, so equally good users
    spread out. Reconstruction of the cited revenue function with unit
    user weights; isolated here so it can be swapped out.
    """
    return (math.log(rate), -members)


def bpf(scenario: Scenario, snapshot: WeightSnapshot | None = None, arrival_order=None) -> AssociationSet:
    """Best-performance-first: each arrival joins the AP ranking highest
    under the revenue key."""
    snap = snapshot if snapshot is not None else build_weights(scenario)
    n, m = scenario.n_stas, scenario.n_aps
    assignment = np.full(n, -1, dtype=np.int64)
    members = np.zeros(m, dtype=np.int64)
    for i in _order(scenario, arrival_order):
        cands = np.nonzero(snap.candidate[i])[0]
        if cands.size == 0:
            continue
        best_j, best_key = -1, None
        for j in cands:
            key = bpf_revenue_key(snap.rate[i, j], int(members[j]))
            if best_key is None or key > best_key:
                best_key, best_j = key, int(j)
        assignment[i] = best_j
        members[best_j] += 1
    return _assemble("bpf", scenario, snap, assignment)


def link_utility_chain(w_desired, h_desired, interferers, phy, macp, fairness, *, interferer_weights=None):
    """Scalar metric pipeline for one link: SINR through fairness utility.

    Returns (sinr, rate, t_frame, tau, beta, utility_value). This is the
    reference composition of the per-link operations; the vectorized
    snapshot must agree with it.
    """
    s = compute_sinr(w_desired, h_desired, interferers, phy, interferer_weights=interferer_weights)
    r = channel_rate(s, phy.bandwidth_hz)
    t = frame_time(macp.frame_bits, r)
    tau = mac_delay(macp)
    beta = effective_throughput(t, tau, macp.mcs_order)
    return s, r, t, tau, beta, utility(beta, fairness)


BASELINES = {"ssf": ssf, "greedy": greedy, "smartassoc": smartassoc, "bpf": bpf}


def associate(scenario: Scenario, scheme: str, snapshot: WeightSnapshot | None = None) -> AssociationSet:
    """Dispatch by scheme name ('gaa', 'gda' treated as gaa for statics)."""
    if scheme in ("gaa", "gda"):
        return gaa(scenario, snapshot)
    if scheme in BASELINES:
        return BASELINES[scheme](scenario, snapshot)
    raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")


# ---------------------------------------------------------------------------
# Incremental (dynamic) association
# ---------------------------------------------------------------------------


def _target_row(snap: WeightSnapshot, sta, col_aps: list) -> np.ndarray:
    vals = np.full(len(col_aps), WORKING_UNSERVABLE)
    if sta is None:
        return vals
    solver_w = _solver_weights(snap)
    for c, ap in enumerate(col_aps):
        if ap is not None:
            vals[c] = solver_w[sta, ap]
    return vals


def _reconcile_rows(state: GdaState, snap: WeightSnapshot) -> GdaState:
    """Bring every row of the working matrix to the new snapshot, one
    single-line update (one augmenting stage) per changed row."""
    match = state.matching
    for r, sta in enumerate(state.row_stas):
        target = _target_row(snap, sta, state.col_aps)
        if not np.array_equal(match.weights[r], target):
            match = km.update_weights(match, row=r, values=target)
    return GdaState(match, state.row_stas, state.col_aps, state.capacity)


def _grow_capacity(state: GdaState, snap: WeightSnapshot, n_aps: int, new_capacity: int) -> GdaState:
    match = state.matching
    row_stas = list(state.row_stas)
    col_aps = list(state.col_aps)
    cap = state.capacity
    solver_w = _solver_weights(snap)
    while cap < new_capacity:
        for ap in range(n_aps):
            dim = match.weights.shape[0]
            ext = np.full((dim + 1, dim + 1), WORKING_UNSERVABLE)
            ext[:dim, :dim] = match.weights
            for r, sta in enumerate(row_stas):
                if sta is not None:
                    ext[r, dim] = solver_w[sta, ap]
            match = km.add_vertex(match, ext)
            row_stas.append(None)
            col_aps.append(ap)
        cap += 1
    return GdaState(match, row_stas, col_aps, cap)


def _ensure_parks(state: GdaState, snap: WeightSnapshot) -> GdaState:
    """Keep one parking column per STA row with no servable edge.

    Mobility can strand a previously covered STA; without a parking slot
    its row would occupy AP capacity and the incremental optimum could
    drift from a fresh solve.
    """
    needed = sum(
        1
        for sta in state.row_stas
        if sta is not None and not snap.servable[sta].any()
    )
    have = sum(1 for ap in state.col_aps if ap is None)
    match = state.matching
    row_stas = list(state.row_stas)
    col_aps = list(state.col_aps)
    while have < needed:
        dim = match.weights.shape[0]
        ext = np.full((dim + 1, dim + 1), WORKING_UNSERVABLE)
        ext[:dim, :dim] = match.weights
        match = km.add_vertex(match, ext)
        row_stas.append(None)
        col_aps.append(None)
        have += 1
    return GdaState(match, row_stas, col_aps, state.capacity)


def _gda_assemble(scenario: Scenario, snap: WeightSnapshot, state: GdaState) -> AssociationSet:
    n = scenario.n_stas
    assignment = np.full(n, -1, dtype=np.int64)
    for r, sta in enumerate(state.row_stas):
        if sta is None:
            continue
        j = int(state.matching.row_to_col[r])
        ap = state.col_aps[j] if j >= 0 else None
        if ap is not None and snap.servable[sta, ap]:
            assignment[sta] = ap
    out = _assemble("gda", scenario, snap, assignment, gda=state)
    return out


def gda_admit(current: AssociationSet, position) -> AssociationSet:
    """Admit a new STA and restore optimality incrementally.

    Adds the new row via dual-seeded vertex insertion, growing AP
    capacity replicas first when the admission crosses the per-AP cap,
    then reconciles rows whose interference-dependent weights moved.
    """
    if current.gda is None:
        raise ValueError("dynamic updates need an association produced by gaa/gda")
    scenario2 = current.scenario.with_added_sta(position)
    snap2 = build_weights(scenario2)
    n2, m = scenario2.n_stas, scenario2.n_aps
    state = _grow_capacity(current.gda, snap2, m, _capacity_for(n2, m))

    new_sta = n2 - 1
    match = state.matching
    dim = match.weights.shape[0]
    ext = np.full((dim + 1, dim + 1), WORKING_UNSERVABLE)
    ext[:dim, :dim] = match.weights
    ext[dim, :dim] = _target_row(snap2, new_sta, state.col_aps)
    match = km.add_vertex(match, ext)
    state = GdaState(
        match,
        list(state.row_stas) + [new_sta],
        list(state.col_aps) + [None],
        state.capacity,
    )
    state = _ensure_parks(state, snap2)
    state = _reconcile_rows(state, snap2)
    return _gda_assemble(scenario2, snap2, state)


def gda_weight_change(current: AssociationSet, moves: dict) -> AssociationSet:
    """Re-optimize after STA mobility changed link weights.

    ``moves`` maps STA index to new position. Every row whose snapshot
    weights changed (movers and bystanders whose interference shifted)
    gets one single-line update.
    """
    if current.gda is None:
        raise ValueError("dynamic updates need an association produced by gaa/gda")
    if not moves:
        return current
    scenario2 = current.scenario.with_moved_stas(moves)
    snap2 = build_weights(scenario2)
    state = _ensure_parks(current.gda, snap2)
    state = _reconcile_rows(state, snap2)
    return _gda_assemble(scenario2, snap2, state)
