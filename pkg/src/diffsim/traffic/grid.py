"""Torus grid of light-controlled intersections.

Scalable model variants: vehicle bookkeeping (sorting, leader identity,
lane changes, turn choices, road advancement) is discrete and detached,
while the light control and the longitudinal IDM update are recorded on
the tape.  Signal timing is either static (one phase-offset input per
intersection) or produced by an embedded neural network whose
coefficients are the simulation input.

Every variant has a discrete reference twin driven by the same keyed
random streams, so turn sequences stay in lockstep between twins.
"""

from dataclasses import dataclass, field

import numpy as np

from .. import _kinds as K
from .. import neural, rng
from .. import smooth as sm
from ..ad import Tape, Vec
from .idm import IdmParams, idm_acceleration

BIG_GAP = 1.0e4

# direction codes 0=E,1=W,2=N,3=S
_DIR_VEC = ((1, 0), (-1, 0), (0, 1), (0, -1))
_LEFT = (2, 3, 1, 0)    # counterclockwise turn per direction
_RIGHT = (3, 2, 0, 1)
TURN_LEFT, TURN_RIGHT, TURN_STRAIGHT = 0, 1, 2


class RoadNetwork:
    """Directed torus grid.  Road ``r`` ends at intersection ``r // 4``
    approaching from direction ``r % 4``; lights sit at the road end."""

    def __init__(self, width, height, road_length=100.0, n_lanes=3):
        if width < 1 or height < 1:
            raise ValueError("grid must be at least 1x1")
        self.width = width
        self.height = height
        self.road_length = float(road_length)
        self.n_lanes = int(n_lanes)
        self.n_intersections = width * height
        self.n_roads = 4 * self.n_intersections
        r = np.arange(self.n_roads)
        self.end_intersection = r // 4
        self.direction = r % 4
        self.is_horizontal = self.direction < 2
        nxt = np.empty((self.n_roads, 3), dtype=np.int64)
        for rid in range(self.n_roads):
            j, d = rid // 4, rid % 4
            x, y = j % width, j // width
            for turn, nd in ((TURN_LEFT, _LEFT[d]), (TURN_RIGHT, _RIGHT[d]),
                             (TURN_STRAIGHT, d)):
                dx, dy = _DIR_VEC[nd]
                nx, ny = (x + dx) % width, (y + dy) % height
                nxt[rid, turn] = (ny * width + nx) * 4 + nd
        self.next_road = nxt


@dataclass
class GridScenario:
    width: int = 5
    height: int = 5
    road_length: float = 100.0
    n_lanes: int = 3
    speed_limit: float = 35.0 / 3.6
    period: float = 20.0              # full light cycle
    turn_probs: tuple = (0.05, 0.05, 0.9)   # left, right, straight
    tau: float = 0.1
    lane_change_interval: float = 2.5
    min_clearance_gain: float = 10.0
    merge_yield_window: float = 15.0
    n_vehicles: int = 100
    nn_decision_interval: float = 20.0
    k: float = sm.DEFAULT_K
    idm: IdmParams = None
    network: RoadNetwork = field(default=None, repr=False)

    def __post_init__(self):
        if self.idm is None:
            self.idm = IdmParams(v_d=self.speed_limit)
        if abs(sum(self.turn_probs) - 1.0) > 1e-9:
            raise ValueError("turn probabilities must sum to 1")
        if self.network is None:
            self.network = RoadNetwork(self.width, self.height,
                                       self.road_length, self.n_lanes)


def initial_grid_vehicles(scn, seed=None):
    """Deterministic lattice placement; with a seed, positions get a
    reproducible jitter (used by the NN variant, which randomizes initial
    positions per run)."""
    net = scn.network
    n = scn.n_vehicles
    idx = np.arange(n)
    road = idx % net.n_roads
    slot = idx // net.n_roads
    lane = slot % scn.n_lanes
    row = slot // scn.n_lanes
    per_lane = max(1, -(-n // (net.n_roads * scn.n_lanes)))
    cell = scn.road_length / per_lane
    pos = cell * (row + 0.5)
    if seed is not None:
        u = rng.uniform(seed, rng.INIT_LOC, idx)
        pos = pos + (u - 0.5) * 0.6 * cell
    vel = np.zeros(n)
    return road.astype(np.int64), lane.astype(np.int64), pos, vel


def _draw_turns(seed, vehicle_ids, crossing_counts, probs):
    u = rng.uniform(seed, rng.TURN, vehicle_ids, crossing_counts)
    return np.where(u < probs[0], TURN_LEFT,
                    np.where(u < probs[0] + probs[1], TURN_RIGHT,
                             TURN_STRAIGHT)).astype(np.int64)


def _leader_links(net, road, lane, pos, turn):
    """Leader index and position offset per vehicle (detached).

    Same-lane leader on the same road; the lane head looks onto the next
    road along its drawn turn, with offset road_length added to the
    leader's position.  Returns (lead_idx, offset); lead_idx -1 when free.
    """
    n = len(road)
    n_keys = net.n_roads * net.n_lanes
    key = road * net.n_lanes + lane
    order = np.lexsort((pos, key))
    ks = key[order]
    lead = np.full(n, -1, dtype=np.int64)
    off = np.zeros(n)
    if n > 1:
        same = ks[1:] == ks[:-1]
        lead[order[:-1][same]] = order[1:][same]
        first_mask = np.ones(n, dtype=bool)
        first_mask[1:] = ~same
        last_mask = np.ones(n, dtype=bool)
        last_mask[:-1] = ~same
    else:
        first_mask = np.ones(1, dtype=bool)
        last_mask = np.ones(1, dtype=bool)
    rearmost = np.full(n_keys, -1, dtype=np.int64)
    rearmost[ks[first_mask]] = order[first_mask]
    heads = order[last_mask]
    tgt_road = net.next_road[road[heads], turn[heads]]
    cand = rearmost[tgt_road * net.n_lanes + lane[heads]]
    ok = (cand >= 0) & (cand != heads)
    lead[heads[ok]] = cand[ok]
    off[heads[ok]] = net.road_length
    return lead, off


def _merge_yields(net, road, lane, pos, turn, window):
    """Boolean must-yield flag per vehicle (detached).

    When several lane heads inside the yield window approach the same
    (next road, lane) slot, all but one stop at the line as if the light
    were red; without this rule mirror-symmetric vehicles can cross in
    the same step and land overlapping.  Priority is straight over right
    over left, then distance covered, then vehicle id.
    """
    n = len(road)
    yields = np.zeros(n, dtype=bool)
    key = road * net.n_lanes + lane
    order = np.lexsort((pos, key))
    ks = key[order]
    last = np.ones(n, dtype=bool)
    last[:-1] = ks[1:] != ks[:-1]
    heads = order[last]
    near = heads[pos[heads] > net.road_length - window]
    if len(near) < 2:
        return yields
    tgt = net.next_road[road[near], turn[near]] * net.n_lanes + lane[near]
    groups = {}
    for i, tk in zip(near, tgt):
        groups.setdefault(int(tk), []).append(int(i))
    for members in groups.values():
        if len(members) < 2:
            continue
        winner = max(members, key=lambda i: (turn[i], pos[i], -i))
        for i in members:
            if i != winner:
                yields[i] = True
    return yields


def _lane_changes(scn, road, lane, pos):
    """Periodic detached lane-change decisions; returns the new lane array.

    Clearance is the gap to the next vehicle ahead in the candidate lane on
    the same road, capped by the road end.  A change needs a clearance gain
    above the threshold and front/rear gaps above the IDM minimum gap.
    """
    net = scn.network
    n = len(road)
    key = road * net.n_lanes + lane
    groups = {}
    for i in range(n):
        groups.setdefault(int(key[i]), []).append(i)
    sorted_pos = {}
    for kk, members in groups.items():
        ps = np.array([pos[i] for i in members])
        o = np.argsort(ps)
        sorted_pos[kk] = ps[o]
    L = scn.road_length
    s0 = scn.idm.s0

    def clearance(i, cand_lane):
        kk = int(road[i]) * net.n_lanes + cand_lane
        ps = sorted_pos.get(kk)
        if ps is None:
            return L - pos[i], BIG_GAP
        j = np.searchsorted(ps, pos[i], side="right")
        front = ps[j] - pos[i] if j < len(ps) else L - pos[i]
        rear = pos[i] - ps[j - 1] if j > 0 else BIG_GAP
        return front, rear

    new_lane = lane.copy()
    for i in range(n):
        c0, _ = clearance(i, int(lane[i]))
        best, best_d = -BIG_GAP, 0
        for d in (1, -1):
            cand = int(lane[i]) + d
            if not 0 <= cand < scn.n_lanes:
                continue
            front, rear = clearance(i, cand)
            if front > best and front > s0 and rear > s0:
                best, best_d = front, d
        if best_d != 0 and best - c0 > scn.min_clearance_gain:
            new_lane[i] = lane[i] + best_d
    return new_lane


@dataclass
class GridDiffResult:
    tape: Tape
    inputs: Vec                 # offsets or NN coefficients
    objective: object           # Var
    progress: Vec               # per-vehicle displacement
    final_road: np.ndarray
    final_lane: np.ndarray
    trajectory: list


def _nn_input_handles(t, scn, road, lane, pos_handles, pos_vals, one_h):
    net = scn.network
    spec_n_in = (neural.SLOTS_PER_LANE * net.n_lanes * net.n_roads)
    handles = np.full(spec_n_in, one_h, dtype=np.int64)
    sel_src = []
    sel_dst = []
    key = road * net.n_lanes + lane
    order = np.lexsort((-pos_vals, key))
    ks = key[order]
    # first SLOTS_PER_LANE of each (road, lane) group, closest to the end
    start = 0
    m = len(order)
    while start < m:
        end = start
        while end < m and ks[end] == ks[start]:
            end += 1
        kk = int(ks[start])
        base = kk * neural.SLOTS_PER_LANE
        for s, oi in enumerate(order[start:min(end, start
                                               + neural.SLOTS_PER_LANE)]):
            sel_src.append(oi)
            sel_dst.append(base + s)
        start = end
    if sel_src:
        src = np.array(sel_src, dtype=np.int64)
        dst = np.array(sel_dst, dtype=np.int64)
        core = t.core
        dist = core.unop_const(K.RSUBC, pos_handles[src], net.road_length)
        handles[dst] = core.unop_const(K.MULC, dist, 1.0 / net.road_length)
    return Vec(t, handles)


def run_grid_diff(scn, seed, horizon, offsets=None, nn=None,
                  objective="sum", tape=None, collect=False, init=None):
    """Differentiable grid run.

    Exactly one of ``offsets`` (static timings, one value per
    intersection) or ``nn`` ((NetSpec, coefficient array)) must be given;
    it is registered as the tape input vector.
    """
    if (offsets is None) == (nn is None):
        raise ValueError("give exactly one of offsets or nn")
    net = scn.network
    k = scn.k
    L = net.road_length
    tau = scn.tau
    t = tape if tape is not None else Tape(capacity=1 << 16)
    core = t.core

    if offsets is not None:
        offsets = np.asarray(offsets, dtype=np.float64)
        if len(offsets) != net.n_intersections:
            raise ValueError("one offset per intersection required")
        inputs = t.input_vector(offsets)
    else:
        spec, coeffs = nn
        if spec.n_in != neural.SLOTS_PER_LANE * net.n_lanes * net.n_roads:
            raise ValueError("net input size does not match the grid")
        if spec.n_out != net.n_intersections:
            raise ValueError("net needs one output per intersection")
        inputs = t.input_vector(np.asarray(coeffs, dtype=np.float64))

    if init is None:
        init = initial_grid_vehicles(scn, seed if nn is not None else None)
    road, lane, pos0, vel0 = (a.copy() for a in init)
    n = len(road)
    ids = np.arange(n)
    crossings = np.zeros(n, dtype=np.int64)
    turn = _draw_turns(seed, ids, crossings, scn.turn_probs)

    posV = t.constant_vector(pos0)
    velV = t.constant_vector(vel0)
    progV = t.constant_vector(np.zeros(n))
    zero_h = t.constant(0.0).idx
    big_h = t.constant(BIG_GAP).idx
    one_h = t.constant(1.0).idx

    n_steps = int(round(horizon / tau))
    lc_every = max(1, int(round(scn.lane_change_interval / tau)))
    half = scn.period / 2.0
    dec_every = max(1, int(round(scn.nn_decision_interval / tau)))
    green_h = None
    trajectory = []

    for step in range(n_steps):
        t_sim = step * tau

        # light phases: ~1 means green for horizontal roads
        if offsets is not None:
            green_h = sm.periodic_step(inputs + t_sim, half, k)
        elif step % dec_every == 0:
            x = _nn_input_handles(t, scn, road, lane, posV.handles,
                                  posV.values, one_h)
            out = neural.forward(spec, inputs, x)
            green_h = sm.logistic(out, 0.0, k)
        green_v = 1.0 - green_h
        red_road = np.where(net.is_horizontal,
                            green_v.handles[net.end_intersection],
                            green_h.handles[net.end_intersection])

        pos_vals = posV.values
        if step > 0 and step % lc_every == 0:
            lane = _lane_changes(scn, road, lane, pos_vals)

        lead, off = _leader_links(net, road, lane, pos_vals, turn)
        my = _merge_yields(net, road, lane, pos_vals, turn,
                           scn.merge_yield_window)
        has = lead >= 0
        safe = np.where(has, lead, 0)
        lead_pos = core.unop_carr(K.ADDC, posV.handles[safe], off)
        gap_h = core.binop(K.SUB, lead_pos, posV.handles)
        dv_h = core.binop(K.SUB, velV.handles, velV.handles[safe])
        gapV = Vec(t, np.where(has, gap_h, big_h))
        dvV = Vec(t, np.where(has, dv_h, velV.handles))

        lgapV = L - posV
        aheadV = Vec(t, core.logistic(posV.handles, L, -k))
        closerV = sm.logistic(gapV - lgapV, 0.0, k)
        red_h = red_road[road].copy()
        red_h[my] = one_h               # yielding vehicles see a red light
        redV = Vec(t, red_h)
        # second logistic keeps braking engagement symmetric around the
        # phase switch despite the large free-road gap in the blend
        useV = sm.logistic(redV * aheadV * closerV, 0.5, k)
        omuV = 1.0 - useV
        eff_gap = useV * lgapV + omuV * gapV
        eff_dv = useV * velV + omuV * dvV

        acc = idm_acceleration(velV, eff_gap, eff_dv, scn.idm)
        vraw = velV + acc * tau
        vh = vraw.handles.copy()
        vh[vraw.values < 0.0] = zero_h      # detached clamp at standstill
        velV = Vec(t, vh)
        dpos = velV * tau
        posV = posV + dpos
        progV = progV + dpos

        pos_after = posV.values
        crossed = pos_after >= L
        if crossed.any():
            ph = posV.handles.copy()
            ph[crossed] = core.unop_const(K.ADDC, ph[crossed], -L)
            posV = Vec(t, ph)
            road = road.copy()
            road[crossed] = net.next_road[road[crossed], turn[crossed]]
            crossings = crossings.copy()
            crossings[crossed] += 1
            turn = turn.copy()
            turn[crossed] = _draw_turns(seed, ids[crossed],
                                        crossings[crossed], scn.turn_probs)
        if collect:
            trajectory.append((step, road.copy(), lane.copy(),
                               posV.values, velV.values))

    if objective == "sum":
        obj = progV.sum()
    elif objective == "min":
        obj = sm.smooth_min(progV)
    else:
        raise ValueError(f"unknown objective {objective!r}")
    return GridDiffResult(t, inputs, obj, progV, road, lane, trajectory)


def run_grid_reference(scn, seed, horizon, offsets=None, nn=None,
                       objective="sum", collect=False, init=None):
    """Discrete twin of :func:`run_grid_diff`, same keyed random streams."""
    if (offsets is None) == (nn is None):
        raise ValueError("give exactly one of offsets or nn")
    net = scn.network
    L = net.road_length
    tau = scn.tau
    if offsets is not None:
        offsets = np.asarray(offsets, dtype=np.float64)
    else:
        spec, coeffs = nn
        coeffs = np.asarray(coeffs, dtype=np.float64)

    if init is None:
        init = initial_grid_vehicles(scn, seed if nn is not None else None)
    road, lane, pos, vel = (a.copy() for a in init)
    n = len(road)
    ids = np.arange(n)
    crossings = np.zeros(n, dtype=np.int64)
    turn = _draw_turns(seed, ids, crossings, scn.turn_probs)
    progress = np.zeros(n)

    n_steps = int(round(horizon / tau))
    lc_every = max(1, int(round(scn.lane_change_interval / tau)))
    half = scn.period / 2.0
    dec_every = max(1, int(round(scn.nn_decision_interval / tau)))
    green_h = None
    trajectory = []

    for step in range(n_steps):
        t_sim = step * tau

        if offsets is not None:
            green_h = ((t_sim + offsets) % scn.period) < half
        elif step % dec_every == 0:
            x = np.ones(spec.n_in)
            key = road * net.n_lanes + lane
            order = np.lexsort((-pos, key))
            ks = key[order]
            start = 0
            while start < n:
                end = start
                while end < n and ks[end] == ks[start]:
                    end += 1
                base = int(ks[start]) * neural.SLOTS_PER_LANE
                chunk = order[start:min(end, start + neural.SLOTS_PER_LANE)]
                x[base:base + len(chunk)] = (L - pos[chunk]) / L
                start = end
            green_h = neural.forward_ref(spec, coeffs, x) > 0.0
        red_road = np.where(net.is_horizontal,
                            green_h[net.end_intersection],
                            ~green_h[net.end_intersection])

        if step > 0 and step % lc_every == 0:
            lane = _lane_changes(scn, road, lane, pos)

        lead, off = _leader_links(net, road, lane, pos, turn)
        my = _merge_yields(net, road, lane, pos, turn,
                           scn.merge_yield_window)
        has = lead >= 0
        safe = np.where(has, lead, 0)
        gap = np.where(has, pos[safe] + off - pos, BIG_GAP)
        dv = np.where(has, vel - vel[safe], vel)

        lgap = L - pos
        use = (red_road[road] | my) & (lgap > 0.0) & (gap > lgap)
        eff_gap = np.where(use, lgap, gap)
        eff_dv = np.where(use, vel, dv)

        acc = idm_acceleration(vel, eff_gap, eff_dv, scn.idm)
        vel = np.maximum(0.0, vel + acc * tau)
        dpos = vel * tau
        pos = pos + dpos
        progress += dpos

        crossed = pos >= L
        if crossed.any():
            pos[crossed] -= L
            road[crossed] = net.next_road[road[crossed], turn[crossed]]
            crossings[crossed] += 1
            turn[crossed] = _draw_turns(seed, ids[crossed],
                                        crossings[crossed], scn.turn_probs)
        if collect:
            trajectory.append((step, road.copy(), lane.copy(), pos.copy(),
                               vel.copy()))

    obj = float(progress.sum()) if objective == "sum" else float(
        progress.min())
    return progress, obj, (road, lane, pos, vel), trajectory
